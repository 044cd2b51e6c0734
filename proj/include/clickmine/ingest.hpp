#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clickmine/common.hpp"

namespace clickmine {

enum class EventType { play, pause, ratechange, skip, null, stall, error };
enum class PlayerState { playing, paused };

std::string_view to_string(EventType e);
std::string_view to_string(PlayerState s);
std::optional<EventType> parse_event_type(std::string_view s);
std::optional<PlayerState> parse_player_state(std::string_view s);

/// True for the click types that disqualify a whole trajectory.
constexpr bool is_noise(EventType e) {
  return e == EventType::null || e == EventType::stall || e == EventType::error;
}

/// One click-log record: position right after the click, UNIX time, the
/// player state and playback rate that result from it.
struct RawClick {
  std::string user_id;
  std::string video_id;
  EventType type = EventType::play;
  double position_s = 0.0;
  double timestamp_s = 0.0;
  PlayerState state = PlayerState::playing;
  double rate = 1.0;

  bool operator==(const RawClick&) const = default;
};

struct ParseError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct ClickParse {
  std::vector<RawClick> clicks;
  std::vector<ParseError> errors;
};

/// Rates the player accepts: 0.5 to 2.0 in steps of 0.25.
bool is_valid_rate(double r);

/// Parses one NDJSON click line. Throws Error on a malformed record.
RawClick parse_click_line(std::string_view line);
/// Canonical serialization; parse_click_line(serialize_click(c)) == c.
std::string serialize_click(const RawClick& c);

/// Parses a whole stream; malformed lines become ParseError entries and
/// never stop the stream. Blank lines are ignored.
ClickParse parse_clicks(std::istream& in);

/// A quiz submission: either one attempt with its outcome, or a
/// precomputed first-attempt flag.
struct Submission {
  std::string user_id;
  std::string quiz_id;
  std::optional<int> attempt;
  std::optional<bool> correct;
  std::optional<bool> cfa;
};

struct SubmissionParse {
  std::vector<Submission> submissions;
  std::vector<ParseError> errors;
};

SubmissionParse parse_submissions(std::istream& in);

struct VideoInfo {
  std::string id;
  double length_s = 0.0;
  std::string quiz_id;
  int order = 0;
};

/// Physical videos keyed by id.
class VideoCatalog {
 public:
  VideoCatalog() = default;
  explicit VideoCatalog(std::vector<VideoInfo> videos);

  const VideoInfo* find(std::string_view id) const;
  const std::vector<VideoInfo>& videos() const { return videos_; }

 private:
  std::vector<VideoInfo> videos_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

VideoCatalog parse_catalog(std::istream& in);
std::string serialize_catalog(const VideoCatalog& catalog);

/// Member of a logical (quiz-level) video with its position offset.
struct GroupMember {
  std::string video_id;
  double offset_s = 0.0;
  double length_s = 0.0;
};

/// All physical videos between two quizzes, merged into one timeline.
struct LogicalVideo {
  std::string id;  // the quiz id
  double length_s = 0.0;
  std::size_t chrono_index = 0;
  std::vector<GroupMember> members;
};

struct VideoGroups {
  std::vector<LogicalVideo> videos;  // chronological
  /// physical video id -> (logical index, member index)
  std::map<std::string, std::pair<std::size_t, std::size_t>, std::less<>> membership;

  const LogicalVideo* find(std::string_view logical_id) const;
};

/// Groups physical videos by quiz in catalog order. Throws Error when two
/// quiz groups interleave or an id repeats.
VideoGroups map_videos_to_quizzes(const VideoCatalog& catalog);

/// One user's trajectory on one logical video. Click positions are on the
/// logical timeline; video_id on each click stays the physical id.
struct UVPair {
  std::string user_id;
  std::string video_id;  // logical
  std::vector<RawClick> clicks;
  int cfa = -1;  // -1 when unlabeled

  bool labeled() const { return cfa == 0 || cfa == 1; }
};

struct AssembleResult {
  std::vector<UVPair> labeled;
  std::vector<UVPair> unlabeled;
  std::size_t dropped_noisy = 0;
  std::size_t dropped_duplicates = 0;
  Warnings warnings;
};

/// First-attempt outcome per (user, quiz).
std::map<std::pair<std::string, std::string>, int> derive_cfa(const std::vector<Submission>& subs,
                                                             Warnings* warnings = nullptr);

/// Builds labeled and unlabeled UV pairs. Output is ordered by (chronological
/// video index, user id), independent of input line order.
AssembleResult assemble_uv_pairs(const std::vector<RawClick>& clicks,
                                 const std::vector<Submission>& submissions,
                                 const VideoGroups& groups);

}  // namespace clickmine
