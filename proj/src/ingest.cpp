#include "clickmine/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"

namespace clickmine {

using json = nlohmann::json;

namespace {

constexpr std::string_view kEventNames[] = {"play", "pause", "ratechange", "skip",
                                            "null", "stall", "error"};

/// Shortest round-trip form, written without an exponent for the magnitudes
/// logs carry (UNIX timestamps would otherwise print as 1.7e+09).
std::string format_number(double v) {
  char buf[400];
  const bool plain = v == 0.0 || (std::fabs(v) >= 1e-6 && std::fabs(v) < 1e15);
  const auto res = plain ? std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed)
                         : std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

const json& require(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw Error(std::string("missing field \"") + key + "\"");
  return *it;
}

std::string require_string(const json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_string()) throw Error(std::string("field \"") + key + "\" is not a string");
  return v.get<std::string>();
}

double require_number(const json& j, const char* key) {
  const auto& v = require(j, key);
  if (!v.is_number()) throw Error(std::string("field \"") + key + "\" is not numeric");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw Error(std::string("field \"") + key + "\" is not finite");
  return d;
}

template <typename Parse>
void for_each_line(std::istream& in, std::vector<ParseError>& errors, Parse&& parse) {
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      parse(line);
    } catch (const std::exception& e) {
      errors.push_back({no, e.what()});
    }
  }
}

}  // namespace

std::string_view to_string(EventType e) { return kEventNames[static_cast<int>(e)]; }

std::string_view to_string(PlayerState s) {
  return s == PlayerState::playing ? "playing" : "paused";
}

std::optional<EventType> parse_event_type(std::string_view s) {
  for (std::size_t i = 0; i < std::size(kEventNames); ++i)
    if (kEventNames[i] == s) return static_cast<EventType>(i);
  return std::nullopt;
}

std::optional<PlayerState> parse_player_state(std::string_view s) {
  if (s == "playing") return PlayerState::playing;
  if (s == "paused") return PlayerState::paused;
  return std::nullopt;
}

bool is_valid_rate(double r) {
  if (!(r >= 0.5 - 1e-12 && r <= 2.0 + 1e-12)) return false;
  const double steps = r * 4.0;
  return std::fabs(steps - std::round(steps)) < 1e-9;
}

RawClick parse_click_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error("record is not a JSON object");

  RawClick c;
  c.user_id = require_string(j, "u");
  c.video_id = require_string(j, "v");
  const auto type = parse_event_type(require_string(j, "e"));
  if (!type) throw Error("unknown event type \"" + j["e"].get<std::string>() + "\"");
  c.type = *type;
  c.position_s = require_number(j, "p");
  if (c.position_s < 0.0) throw Error("negative position");
  c.timestamp_s = require_number(j, "t");
  const auto state = parse_player_state(require_string(j, "s"));
  if (!state) throw Error("unknown player state \"" + j["s"].get<std::string>() + "\"");
  c.state = *state;
  if (j.contains("r")) {
    c.rate = require_number(j, "r");
    if (!is_valid_rate(c.rate))
      throw Error("rate " + format_number(c.rate) + " is not a 0.25 multiple in [0.5, 2.0]");
  }
  return c;
}

std::string serialize_click(const RawClick& c) {
  std::string out = "{\"u\":";
  out += json(c.user_id).dump();
  out += ",\"v\":";
  out += json(c.video_id).dump();
  out += ",\"e\":\"";
  out += to_string(c.type);
  out += "\",\"p\":";
  out += format_number(c.position_s);
  out += ",\"t\":";
  out += format_number(c.timestamp_s);
  out += ",\"s\":\"";
  out += to_string(c.state);
  out += "\",\"r\":";
  out += format_number(c.rate);
  out += '}';
  return out;
}

ClickParse parse_clicks(std::istream& in) {
  ClickParse out;
  for_each_line(in, out.errors, [&](const std::string& line) {
    out.clicks.push_back(parse_click_line(line));
  });
  return out;
}

SubmissionParse parse_submissions(std::istream& in) {
  SubmissionParse out;
  for_each_line(in, out.errors, [&](const std::string& line) {
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error("record is not a JSON object");
    Submission s;
    s.user_id = require_string(j, "u");
    s.quiz_id = require_string(j, "q");
    if (j.contains("cfa")) {
      const auto& v = j["cfa"];
      if (v.is_boolean()) {
        s.cfa = v.get<bool>();
      } else if (v.is_number_integer() && (v.get<int>() == 0 || v.get<int>() == 1)) {
        s.cfa = v.get<int>() == 1;
      } else {
        throw Error("field \"cfa\" must be 0 or 1");
      }
    } else {
      const auto& a = require(j, "attempt");
      if (!a.is_number_integer() || a.get<int>() < 1) throw Error("field \"attempt\" must be a positive integer");
      s.attempt = a.get<int>();
      const auto& c = require(j, "correct");
      if (!c.is_boolean()) throw Error("field \"correct\" is not a boolean");
      s.correct = c.get<bool>();
    }
    out.submissions.push_back(std::move(s));
  });
  return out;
}

VideoCatalog::VideoCatalog(std::vector<VideoInfo> videos) : videos_(std::move(videos)) {
  for (std::size_t i = 0; i < videos_.size(); ++i) {
    const auto& v = videos_[i];
    if (!(v.length_s > 0.0)) throw Error("video \"" + v.id + "\" has non-positive length");
    if (!index_.emplace(v.id, i).second) throw Error("duplicate video id \"" + v.id + "\"");
  }
}

const VideoInfo* VideoCatalog::find(std::string_view id) const {
  const auto it = index_.find(id);
  return it == index_.end() ? nullptr : &videos_[it->second];
}

VideoCatalog parse_catalog(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(std::string("catalog: malformed JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("videos") || !j["videos"].is_array())
    throw Error("catalog: expected {\"videos\": [...]}");
  std::vector<VideoInfo> videos;
  for (const auto& v : j["videos"]) {
    VideoInfo info;
    info.id = require_string(v, "id");
    info.length_s = require_number(v, "length_s");
    info.quiz_id = require_string(v, "quiz");
    const auto& order = require(v, "order");
    if (!order.is_number_integer()) throw Error("catalog: \"order\" must be an integer");
    info.order = order.get<int>();
    videos.push_back(std::move(info));
  }
  return VideoCatalog(std::move(videos));
}

std::string serialize_catalog(const VideoCatalog& catalog) {
  json arr = json::array();
  for (const auto& v : catalog.videos())
    arr.push_back({{"id", v.id}, {"length_s", v.length_s}, {"quiz", v.quiz_id}, {"order", v.order}});
  return json{{"videos", arr}}.dump(1) + "\n";
}

const LogicalVideo* VideoGroups::find(std::string_view logical_id) const {
  for (const auto& v : videos)
    if (v.id == logical_id) return &v;
  return nullptr;
}

VideoGroups map_videos_to_quizzes(const VideoCatalog& catalog) {
  std::vector<const VideoInfo*> sorted;
  for (const auto& v : catalog.videos()) sorted.push_back(&v);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const VideoInfo* a, const VideoInfo* b) { return a->order < b->order; });

  VideoGroups groups;
  std::set<std::string, std::less<>> closed;
  for (const VideoInfo* v : sorted) {
    if (groups.videos.empty() || groups.videos.back().id != v->quiz_id) {
      if (closed.contains(v->quiz_id))
        throw Error("catalog: videos of quiz \"" + v->quiz_id + "\" are not contiguous");
      if (!groups.videos.empty()) closed.insert(groups.videos.back().id);
      LogicalVideo lv;
      lv.id = v->quiz_id;
      lv.chrono_index = groups.videos.size();
      groups.videos.push_back(std::move(lv));
    }
    auto& lv = groups.videos.back();
    groups.membership[v->id] = {groups.videos.size() - 1, lv.members.size()};
    lv.members.push_back({v->id, lv.length_s, v->length_s});
    lv.length_s += v->length_s;
  }
  return groups;
}

std::map<std::pair<std::string, std::string>, int> derive_cfa(const std::vector<Submission>& subs,
                                                             Warnings* warnings) {
  struct Acc {
    std::optional<bool> flag;
    int best_attempt = 0;
    bool best_correct = false;
  };
  std::map<std::pair<std::string, std::string>, Acc> acc;
  for (const auto& s : subs) {
    auto& a = acc[{s.user_id, s.quiz_id}];
    if (s.cfa) {
      if (a.flag && *a.flag != *s.cfa && warnings)
        warnings->push_back("conflicting CFA flags for user \"" + s.user_id + "\" quiz \"" +
                            s.quiz_id + "\"; keeping the first");
      if (!a.flag) a.flag = *s.cfa;
    } else if (s.attempt && s.correct) {
      if (a.best_attempt == 0 || *s.attempt < a.best_attempt) {
        a.best_attempt = *s.attempt;
        a.best_correct = *s.correct;
      }
    }
  }
  std::map<std::pair<std::string, std::string>, int> out;
  for (const auto& [key, a] : acc) {
    if (a.flag)
      out[key] = *a.flag ? 1 : 0;
    else if (a.best_attempt > 0)
      out[key] = a.best_correct ? 1 : 0;
  }
  return out;
}

AssembleResult assemble_uv_pairs(const std::vector<RawClick>& clicks,
                                 const std::vector<Submission>& submissions,
                                 const VideoGroups& groups) {
  AssembleResult result;

  // (logical index, user) -> clicks in input order
  std::map<std::pair<std::size_t, std::string>, std::vector<RawClick>> buckets;
  std::size_t unknown_video = 0;
  std::size_t out_of_range = 0;
  for (const auto& c : clicks) {
    const auto it = groups.membership.find(c.video_id);
    if (it == groups.membership.end()) {
      ++unknown_video;
      continue;
    }
    const auto [li, mi] = it->second;
    const auto& member = groups.videos[li].members[mi];
    if (c.position_s > member.length_s + 1.0) {
      ++out_of_range;
      continue;
    }
    RawClick mapped = c;
    mapped.position_s = std::min(c.position_s, member.length_s) + member.offset_s;
    buckets[{li, c.user_id}].push_back(std::move(mapped));
  }
  if (unknown_video > 0)
    result.warnings.push_back(std::to_string(unknown_video) + " click(s) on videos missing from the catalog skipped");
  if (out_of_range > 0)
    result.warnings.push_back(std::to_string(out_of_range) + " click(s) beyond video length skipped");

  Warnings label_warnings;
  const auto cfa = derive_cfa(submissions, &label_warnings);
  result.warnings.insert(result.warnings.end(), label_warnings.begin(), label_warnings.end());

  std::map<std::string, std::size_t, std::less<>> quiz_index;
  for (std::size_t i = 0; i < groups.videos.size(); ++i) quiz_index[groups.videos[i].id] = i;

  std::set<std::pair<std::size_t, std::string>> seen;
  std::vector<UVPair> labeled;
  std::vector<UVPair> unlabeled;
  for (auto& [key, list] : buckets) {
    seen.insert(key);
    std::stable_sort(list.begin(), list.end(), [](const RawClick& a, const RawClick& b) {
      return a.timestamp_s < b.timestamp_s;
    });
    std::vector<RawClick> ordered;
    bool tie = false;
    for (auto& c : list) {
      if (!ordered.empty() && ordered.back().timestamp_s == c.timestamp_s) {
        if (ordered.back() == c) {
          ++result.dropped_duplicates;
          continue;
        }
        tie = true;
      }
      ordered.push_back(std::move(c));
    }
    const auto& lv = groups.videos[key.first];
    if (tie)
      result.warnings.push_back("user \"" + key.second + "\" video \"" + lv.id +
                                "\": equal timestamps kept in input order");
    if (std::any_of(ordered.begin(), ordered.end(), [](const RawClick& c) { return is_noise(c.type); })) {
      ++result.dropped_noisy;
      continue;
    }
    UVPair uv{key.second, lv.id, std::move(ordered), -1};
    if (const auto it = cfa.find({key.second, lv.id}); it != cfa.end()) {
      uv.cfa = it->second;
      labeled.push_back(std::move(uv));
    } else {
      unlabeled.push_back(std::move(uv));
    }
  }

  std::size_t unknown_quiz = 0;
  for (const auto& [key, label] : cfa) {
    const auto qi = quiz_index.find(key.second);
    if (qi == quiz_index.end()) {
      ++unknown_quiz;
      continue;
    }
    if (seen.contains({qi->second, key.first})) continue;
    labeled.push_back(UVPair{key.first, key.second, {}, label});
  }
  if (unknown_quiz > 0)
    result.warnings.push_back(std::to_string(unknown_quiz) + " submission(s) for unknown quizzes skipped");

  const auto order = [&](const UVPair& a, const UVPair& b) {
    const auto ia = quiz_index.at(a.video_id);
    const auto ib = quiz_index.at(b.video_id);
    if (ia != ib) return ia < ib;
    return a.user_id < b.user_id;
  };
  std::sort(labeled.begin(), labeled.end(), order);
  std::sort(unlabeled.begin(), unlabeled.end(), order);
  result.labeled = std::move(labeled);
  result.unlabeled = std::move(unlabeled);
  return result;
}

}  // namespace clickmine
