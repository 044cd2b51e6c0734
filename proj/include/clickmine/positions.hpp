#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clickmine/common.hpp"
#include "clickmine/denoise.hpp"

namespace clickmine {

struct PositionEntry {
  int index = 0;
  double dwell_s = 0.0;

  bool operator==(const PositionEntry&) const = default;
};

/// Visited interval indices for one UV pair at one width. `breaks` lists the
/// entry indices where a new segment starts after a masked gap; transitions
/// are never counted across a break.
struct PositionSequence {
  std::string user_id;
  std::string video_id;
  int cfa = -1;
  double width_s = 0.0;
  int max_index = 0;  // N(w) = floor(h / w); valid indices are 0..max_index
  std::vector<PositionEntry> entries;
  std::vector<std::size_t> breaks;

  /// [begin, end) entry ranges, one per segment.
  std::vector<std::pair<std::size_t, std::size_t>> segments() const;
  std::vector<int> indices() const;
};

/// The default mode appends the traversed run up to the pre-event position of
/// the *next* click followed by its landing index; it reproduces the worked
/// example in the README. `literal` follows the textual rule keyed on whether
/// the current click is a skip.
enum class PositionMode { reconstructed, literal };

int max_position_index(double width_s, double video_length_s);

struct PositionEncoding {
  PositionSequence sequence;
  Warnings warnings;
};

PositionEncoding encode_positions(const Trajectory& t, double width_s,
                                  PositionMode mode = PositionMode::reconstructed);

/// 1 backward, 2 repeat, 3 direct, 4 forward.
enum class TransitionClass : std::uint8_t { backward = 1, repeat = 2, direct = 3, forward = 4 };

constexpr TransitionClass classify_transition(int from, int to) {
  if (to < from) return TransitionClass::backward;
  if (to == from) return TransitionClass::repeat;
  if (to == from + 1) return TransitionClass::direct;
  return TransitionClass::forward;
}

/// k - 1 for class k, for indexing 4-wide arrays.
constexpr std::size_t slot(TransitionClass k) { return static_cast<std::size_t>(k) - 1; }

/// Within-segment transition counts by class.
std::array<std::uint64_t, 4> count_transitions(const PositionSequence& p);

struct TransitionMix {
  double width_s = 0.0;
  std::array<double, 4> fraction{};  // backward, repeat, direct, forward
  std::size_t videos = 0;            // videos with at least one transition
};

/// Per width: class totals summed over each video's pairs, normalized per
/// video, then averaged over videos.
std::vector<TransitionMix> transition_mix(const std::vector<Trajectory>& corpus,
                                          std::span<const double> widths,
                                          PositionMode mode = PositionMode::reconstructed);

/// Encodes every trajectory at one width. The parallel version splits the
/// corpus across workers; output order and content match the serial one.
std::vector<PositionSequence> encode_corpus(const std::vector<Trajectory>& corpus, double width_s,
                                            PositionMode mode, Warnings* warnings = nullptr);
std::vector<PositionSequence> encode_corpus_serial(const std::vector<Trajectory>& corpus, double width_s,
                                                   PositionMode mode, Warnings* warnings = nullptr);

std::string serialize_positions(const PositionSequence& p);
PositionSequence parse_positions_line(std::string_view line);

}  // namespace clickmine
