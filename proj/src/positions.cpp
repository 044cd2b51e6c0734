#include "clickmine/positions.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "json.hpp"

namespace clickmine {

using json = nlohmann::json;

std::vector<std::pair<std::size_t, std::size_t>> PositionSequence::segments() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (std::size_t b : breaks) {
    if (b > begin) out.emplace_back(begin, b);
    begin = b;
  }
  if (entries.size() > begin) out.emplace_back(begin, entries.size());
  return out;
}

std::vector<int> PositionSequence::indices() const {
  std::vector<int> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.index);
  return out;
}

int max_position_index(double width_s, double video_length_s) {
  if (!(width_s > 0.0)) throw Error("interval width must be positive");
  return static_cast<int>(std::floor(video_length_s / width_s));
}

namespace {

class Encoder {
 public:
  Encoder(PositionSequence& seq, double w, double h) : seq_(seq), w_(w), h_(h), n_(seq.max_index) {}

  int index_of(double p) const {
    return std::clamp(static_cast<int>(std::floor(p / w_)), 0, n_);
  }

  void append(int idx, double dwell = 0.0) { seq_.entries.push_back({idx, dwell}); }

  void start_segment(double p) {
    if (!seq_.entries.empty()) seq_.breaks.push_back(seq_.entries.size());
    append(index_of(p));
  }

  void dwell(double dt) { seq_.entries.back().dwell_s += dt; }

  /// Last index reached by playing from p to `end`. A landing exactly on an
  /// interval boundary has not yet entered the next interval.
  int reached(int from, double end) const {
    const double k = std::floor(end / w_);
    int b = static_cast<int>(k);
    if (k * w_ == end && b > from) b -= 1;
    return std::min(b, n_);
  }

  /// Plays for `dt` seconds at rate r from position p, appending each interval
  /// crossed. Time is tiled exactly: the current entry keeps the time until
  /// its interval ends, every full interval gets w / r, and the last traversed
  /// entry takes the remainder (including any time parked at the video end).
  void play(double p, double dt, double r) {
    const double end = std::min(p + dt * r, h_);
    const int a = seq_.entries.back().index;
    const int b = reached(a, end);
    if (b <= a) {
      dwell(dt);
      return;
    }
    double used = std::max(0.0, (static_cast<double>(a + 1) * w_ - p) / r);
    dwell(used);
    for (int k = a + 1; k <= b; ++k) {
      const double d = k < b ? w_ / r : std::max(0.0, dt - used);
      append(k, d);
      used += d;
    }
  }

  /// Textual rule: the run ends at `run_end` with per-interval dwell w / r.
  void literal_run(double from, double run_end, double r) {
    const int a = index_of(from);
    const int b = index_of(run_end);
    for (int k = a + 1; k <= b; ++k) append(k, w_ / r);
  }

 private:
  PositionSequence& seq_;
  double w_;
  double h_;
  int n_;
};

double pre_skip_position(const RawClick& prev, const RawClick& cur, double h) {
  if (prev.state != PlayerState::playing) return prev.position_s;
  return std::min(prev.position_s + (cur.timestamp_s - prev.timestamp_s) * prev.rate, h);
}

}  // namespace

PositionEncoding encode_positions(const Trajectory& t, double width_s, PositionMode mode) {
  if (!(width_s > 0.0)) throw Error("interval width must be positive");
  if (!t.clicks.empty() && t.mask.size() + 1 != t.clicks.size())
    throw Error("encode_positions: mask size does not match clicks");

  PositionEncoding out;
  auto& seq = out.sequence;
  seq.user_id = t.user_id;
  seq.video_id = t.video_id;
  seq.cfa = t.cfa;
  seq.width_s = width_s;
  const double h = t.length_s;
  seq.max_index = max_position_index(width_s, h);
  if (width_s > h)
    out.warnings.push_back("interval width exceeds video length; single-interval encoding");
  if (t.clicks.empty()) return out;

  Encoder enc(seq, width_s, h);
  const auto& c = t.clicks;
  enc.start_segment(c[0].position_s);

  for (std::size_t i = 0; i + 1 < c.size(); ++i) {
    const auto& a = c[i];
    const auto& b = c[i + 1];
    if (t.mask[i]) {
      enc.start_segment(b.position_s);
      continue;
    }
    const double dt = b.timestamp_s - a.timestamp_s;
    if (a.state == PlayerState::paused) {
      enc.dwell(dt);
      enc.append(enc.index_of(b.position_s));
      continue;
    }
    if (mode == PositionMode::reconstructed) {
      enc.play(a.position_s, dt, a.rate);
    } else {
      // The run stops one short of the landing, which is appended below.
      if (a.type == EventType::skip && i > 0) {
        enc.literal_run(a.position_s, pre_skip_position(c[i - 1], a, h), a.rate);
      } else {
        const int land = enc.index_of(b.position_s);
        for (int k = enc.index_of(a.position_s) + 1; k < land; ++k) enc.append(k, width_s / a.rate);
      }
      enc.dwell(0.0);
    }
    enc.append(enc.index_of(b.position_s));
  }

  // Trailing playback runs to the end of the video, where the player stops.
  const auto& last = c.back();
  if (last.state == PlayerState::playing && last.position_s < h) {
    const double dt = (h - last.position_s) / last.rate;
    if (mode == PositionMode::reconstructed)
      enc.play(last.position_s, dt, last.rate);
    else
      enc.literal_run(last.position_s, h, last.rate);
    enc.append(enc.index_of(h));
  }
  return out;
}

std::array<std::uint64_t, 4> count_transitions(const PositionSequence& p) {
  std::array<std::uint64_t, 4> counts{};
  for (const auto& [begin, end] : p.segments())
    for (std::size_t n = begin; n + 1 < end; ++n)
      ++counts[slot(classify_transition(p.entries[n].index, p.entries[n + 1].index))];
  return counts;
}

std::vector<PositionSequence> encode_corpus_serial(const std::vector<Trajectory>& corpus, double width_s,
                                                   PositionMode mode, Warnings* warnings) {
  std::vector<PositionSequence> out;
  out.reserve(corpus.size());
  for (const auto& t : corpus) {
    auto enc = encode_positions(t, width_s, mode);
    if (warnings)
      for (auto& w : enc.warnings) warnings->push_back(t.user_id + "/" + t.video_id + ": " + w);
    out.push_back(std::move(enc.sequence));
  }
  return out;
}

std::vector<PositionSequence> encode_corpus(const std::vector<Trajectory>& corpus, double width_s,
                                            PositionMode mode, Warnings* warnings) {
  const auto n = static_cast<std::ptrdiff_t>(corpus.size());
  std::vector<PositionEncoding> enc(corpus.size());
  std::vector<std::string> errors(corpus.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      enc[static_cast<std::size_t>(i)] = encode_positions(corpus[static_cast<std::size_t>(i)], width_s, mode);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  std::vector<PositionSequence> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!errors[i].empty()) throw Error(errors[i]);
    if (warnings)
      for (auto& w : enc[i].warnings) warnings->push_back(corpus[i].user_id + "/" + corpus[i].video_id + ": " + w);
    out.push_back(std::move(enc[i].sequence));
  }
  return out;
}

std::vector<TransitionMix> transition_mix(const std::vector<Trajectory>& corpus, std::span<const double> widths,
                                          PositionMode mode) {
  std::vector<TransitionMix> out;
  for (double w : widths) {
    std::map<std::string, std::array<std::uint64_t, 4>> per_video;
    for (const auto& seq : encode_corpus(corpus, w, mode)) {
      auto& acc = per_video[seq.video_id];
      const auto c = count_transitions(seq);
      for (std::size_t k = 0; k < 4; ++k) acc[k] += c[k];
    }
    TransitionMix mix;
    mix.width_s = w;
    for (const auto& [video, c] : per_video) {
      const double total = static_cast<double>(c[0] + c[1] + c[2] + c[3]);
      if (total == 0.0) continue;
      for (std::size_t k = 0; k < 4; ++k) mix.fraction[k] += static_cast<double>(c[k]) / total;
      ++mix.videos;
    }
    if (mix.videos > 0)
      for (auto& f : mix.fraction) f /= static_cast<double>(mix.videos);
    out.push_back(mix);
  }
  return out;
}

std::string serialize_positions(const PositionSequence& p) {
  json seq = json::array();
  for (const auto& e : p.entries) seq.push_back({e.index, e.dwell_s});
  return json{{"u", p.user_id}, {"v", p.video_id}, {"cfa", p.cfa}, {"w", p.width_s},
              {"n", p.max_index}, {"seq", seq}, {"breaks", p.breaks}}
      .dump();
}

PositionSequence parse_positions_line(std::string_view line) {
  const auto j = json::parse(line);
  PositionSequence p;
  p.user_id = j.at("u").get<std::string>();
  p.video_id = j.at("v").get<std::string>();
  p.cfa = j.at("cfa").get<int>();
  p.width_s = j.at("w").get<double>();
  p.max_index = j.value("n", 0);
  for (const auto& e : j.at("seq")) {
    p.entries.push_back({e.at(0).get<int>(), e.at(1).get<double>()});
    if (!j.contains("n")) p.max_index = std::max(p.max_index, p.entries.back().index);
  }
  p.breaks = j.at("breaks").get<std::vector<std::size_t>>();
  return p;
}

}  // namespace clickmine
