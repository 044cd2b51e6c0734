#include "clickmine/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "json.hpp"

namespace clickmine {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

double exponential(Rng& rng, double mean) { return -std::log1p(-rng.uniform()) * mean; }

double between(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

double millis(double x) { return std::round(x * 1000.0) / 1000.0; }

std::string user_name(int u) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "u%04d", u + 1);
  return buf;
}

/// Plays one user's trajectory on one video.
class Viewer {
 public:
  Viewer(const std::string& user, const SynthVideo& video, const SynthSpec& spec, bool visitor, Rng& rng,
         double start_time)
      : user_(user), video_(video), spec_(spec), visitor_(visitor), rng_(rng), t_(start_time) {}

  std::vector<RawClick> run(bool plant, std::optional<std::size_t>& site_index, double& site_time) {
    const double h = video_.length_s;
    emit(EventType::play, PlayerState::playing);
    double plant_at = plant ? between(rng_, 10.0, std::max(10.0, h - 80.0)) : kInf;
    if (plant && video_.signal_zone && !visitor_) {
      // Keep the pattern out of the zone a non-visitor never sees.
      const auto [zs, ze] = *video_.signal_zone;
      if (plant_at >= zs - 5.0 && plant_at < ze) plant_at = ze + 5.0;
    }

    for (int step = 0; step < 400 && p_ < h; ++step) {
      if (p_ >= plant_at) {
        site_index = clicks_.size();
        site_time = t_;
        play_pattern();
        plant_at = kInf;
        continue;
      }
      double target = std::min(h, p_ + exponential(rng_, 45.0));
      target = std::min(target, plant_at);
      if (video_.signal_zone && !visitor_) {
        const auto [zs, ze] = *video_.signal_zone;
        if (p_ < ze && target > zs - 0.5) {
          advance_to(std::max(p_, zs - between(rng_, 0.5, 5.0)));
          skip_to(std::min(h, ze + between(rng_, 1.0, 10.0)));
          continue;
        }
      }
      advance_to(target);
      if (p_ >= h) {
        if (rng_.uniform() < 0.5) emit(EventType::pause, PlayerState::paused);
        break;
      }
      if (p_ >= plant_at) continue;
      if (past_zone() && rng_.uniform() < 0.05) break;  // abandons the video
      act();
    }
    if (rng_.uniform() < spec_.noise_rate) {
      const auto at = static_cast<std::size_t>(rng_.below(clicks_.size()));
      RawClick noise = clicks_[at];
      noise.type = rng_.uniform() < 0.5 ? EventType::stall : EventType::error;
      noise.timestamp_s = millis(noise.timestamp_s + 0.01);
      clicks_.insert(clicks_.begin() + static_cast<std::ptrdiff_t>(at) + 1, noise);
    }
    return std::move(clicks_);
  }

 private:
  bool past_zone() const { return !video_.signal_zone || p_ >= video_.signal_zone->second; }

  void emit(EventType e, PlayerState s) {
    // Logs never carry two clicks at one instant for a single viewer.
    if (!clicks_.empty()) t_ = std::max(t_, clicks_.back().timestamp_s + 0.05);
    RawClick c;
    c.user_id = user_;
    c.video_id = video_.id;
    c.type = e;
    c.position_s = millis(p_);
    c.timestamp_s = millis(t_);
    c.state = s;
    c.rate = rate_;
    clicks_.push_back(c);
    p_ = c.position_s;
    t_ = c.timestamp_s;
  }

  void advance_to(double p) {
    if (p <= p_) return;
    t_ += (p - p_) / rate_;
    p_ = p;
  }

  void skip_to(double p) {
    if (rng_.uniform() < spec_.burst_rate) {
      // Rapid repeated seeks that end at the intended spot.
      const int extra = 1 + static_cast<int>(rng_.below(2));
      for (int k = 0; k < extra; ++k) {
        p_ = std::clamp(p + between(rng_, -20.0, 20.0), 0.0, video_.length_s);
        emit(EventType::skip, PlayerState::playing);
        const double gap = between(rng_, 0.5, 1.5);
        t_ += gap;
        p_ = std::min(video_.length_s, p_ + gap * rate_);
      }
    }
    p_ = p;
    emit(EventType::skip, PlayerState::playing);
  }

  void pause_for(double d) {
    emit(EventType::pause, PlayerState::paused);
    t_ += d;
    emit(EventType::play, PlayerState::playing);
  }

  void play_pattern() {
    const PlantedPattern& pat = *spec_.pattern;
    for (int r = 0; r < pat.repeats; ++r) {
      pause_for(between(rng_, 60.0, 120.0));
      advance_to(std::min(video_.length_s, p_ + between(rng_, 8.0, 12.0) * rate_));
    }
  }

  void act() {
    const double h = video_.length_s;
    double u = rng_.uniform();
    if ((u -= spec_.pause_rate) < 0.0) {
      pause_for(exponential(rng_, 30.0) + 0.5);
      return;
    }
    if ((u -= spec_.skip_back_rate) < 0.0) {
      double dest = std::max(0.0, p_ - between(rng_, 5.0, 60.0));
      if (video_.signal_zone && !visitor_) {
        const auto [zs, ze] = *video_.signal_zone;
        if (dest >= zs - 0.5 && dest < ze) dest = std::max(0.0, zs - between(rng_, 2.0, 6.0));
      }
      skip_to(dest);
      return;
    }
    if ((u -= spec_.skip_forward_rate) < 0.0) {
      double dest = std::min(h, p_ + between(rng_, 5.0, 60.0));
      if (video_.signal_zone) {
        const auto [zs, ze] = *video_.signal_zone;
        if (visitor_ && p_ < zs && dest >= zs) dest = std::max(p_ + 0.5, zs - between(rng_, 1.0, 4.0));
        if (!visitor_ && dest >= zs - 0.5 && dest < ze) dest = std::min(h, ze + between(rng_, 1.0, 5.0));
      }
      if (dest > p_) skip_to(dest);
      return;
    }
    if ((u -= spec_.ratechange_rate) < 0.0) {
      static constexpr double kRates[] = {0.5, 0.75, 1.0, 1.25, 1.5, 2.0};
      double r = rate_;
      while (r == rate_) r = kRates[rng_.below(std::size(kRates))];
      rate_ = r;
      emit(EventType::ratechange, PlayerState::playing);
    }
  }

  const std::string& user_;
  const SynthVideo& video_;
  const SynthSpec& spec_;
  bool visitor_;
  Rng& rng_;
  double t_;
  double p_ = 0.0;
  double rate_ = 1.0;
  std::vector<RawClick> clicks_;
};

}  // namespace

void SynthSpec::validate() const {
  if (n_users < 1) throw Error("synth: at least one user is required");
  if (videos.empty()) throw Error("synth: at least one video is required");
  for (const auto& v : videos) {
    if (!(v.length_s > 0.0)) throw Error("synth: video length must be positive");
    if (!is_probability(v.visit_rate) || !is_probability(v.fidelity) || !is_probability(v.cfa_rate))
      throw Error("synth: video probabilities must lie in [0, 1]");
    if (v.signal_zone && !(v.signal_zone->first >= 0.0 && v.signal_zone->first < v.signal_zone->second &&
                           v.signal_zone->second <= v.length_s))
      throw Error("synth: signal zone must be a non-empty stretch inside the video");
  }
  for (double p : {pause_rate, skip_back_rate, skip_forward_rate, ratechange_rate, burst_rate, noise_rate,
                   precomputed_label_rate})
    if (!is_probability(p)) throw Error("synth: rates must lie in [0, 1]");
  if (pause_rate + skip_back_rate + skip_forward_rate + ratechange_rate > 1.0)
    throw Error("synth: action rates sum above 1");
  if (pattern && (!is_probability(pattern->p_cfa) || !is_probability(pattern->p_noncfa) || pattern->repeats < 1))
    throw Error("synth: planted pattern needs probabilities in [0, 1] and at least one repeat");
}

SynthSpec parse_synth_spec(const std::string& json_text) {
  const auto j = json::parse(json_text);
  SynthSpec s;
  s.n_users = j.value("n_users", s.n_users);
  s.pause_rate = j.value("pause_rate", s.pause_rate);
  s.skip_back_rate = j.value("skip_back_rate", s.skip_back_rate);
  s.skip_forward_rate = j.value("skip_forward_rate", s.skip_forward_rate);
  s.ratechange_rate = j.value("ratechange_rate", s.ratechange_rate);
  s.burst_rate = j.value("burst_rate", s.burst_rate);
  s.noise_rate = j.value("noise_rate", s.noise_rate);
  s.precomputed_label_rate = j.value("precomputed_label_rate", s.precomputed_label_rate);
  if (j.contains("videos")) {
    s.videos.clear();
    for (const auto& v : j["videos"]) {
      SynthVideo sv;
      sv.id = v.value("id", "v" + std::to_string(s.videos.size() + 1));
      sv.length_s = v.value("length_s", sv.length_s);
      sv.visit_rate = v.value("visit_rate", sv.visit_rate);
      sv.fidelity = v.value("fidelity", sv.fidelity);
      sv.cfa_rate = v.value("cfa_rate", sv.cfa_rate);
      if (v.contains("signal_zone")) {
        if (v["signal_zone"].is_null())
          sv.signal_zone.reset();
        else
          sv.signal_zone = std::make_pair(v["signal_zone"].at(0).get<double>(), v["signal_zone"].at(1).get<double>());
      }
      s.videos.push_back(sv);
    }
  }
  if (j.contains("pattern") && !j["pattern"].is_null()) {
    PlantedPattern p;
    p.repeats = j["pattern"].value("repeats", p.repeats);
    p.p_cfa = j["pattern"].value("p_cfa", p.p_cfa);
    p.p_noncfa = j["pattern"].value("p_noncfa", p.p_noncfa);
    s.pattern = p;
  }
  s.validate();
  return s;
}

SynthOutput synthesize(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  SynthOutput out;
  std::vector<VideoInfo> catalog;
  for (std::size_t v = 0; v < spec.videos.size(); ++v)
    catalog.push_back({spec.videos[v].id, spec.videos[v].length_s, "q" + std::to_string(v + 1), static_cast<int>(v)});
  out.catalog = VideoCatalog(catalog);

  for (std::size_t v = 0; v < spec.videos.size(); ++v) {
    const auto& video = spec.videos[v];
    for (int u = 0; u < spec.n_users; ++u) {
      Rng rng(derive_seed(seed, v, static_cast<std::uint64_t>(u)));
      const std::string user = user_name(u);
      bool visited = false;
      int cfa = 0;
      if (video.signal_zone) {
        visited = rng.uniform() < video.visit_rate;
        cfa = (rng.uniform() < video.fidelity) == visited ? 1 : 0;
      } else {
        cfa = rng.uniform() < video.cfa_rate ? 1 : 0;
      }
      bool plant = false;
      if (spec.pattern) plant = rng.uniform() < (cfa ? spec.pattern->p_cfa : spec.pattern->p_noncfa);

      const double start = 1.7e9 + static_cast<double>(u) * 86400.0 + static_cast<double>(v) * 3600.0;
      Viewer viewer(user, video, spec, visited, rng, start);
      std::optional<std::size_t> site;
      double site_time = 0.0;
      auto clicks = viewer.run(plant, site, site_time);
      if (site) out.sites.push_back({user, video.id, *site, site_time});
      out.clicks.insert(out.clicks.end(), clicks.begin(), clicks.end());
      out.truth.emplace_back(user, video.id, visited, cfa);

      const std::string quiz = "q" + std::to_string(v + 1);
      if (rng.uniform() < spec.precomputed_label_rate) {
        out.submissions.push_back({user, quiz, std::nullopt, std::nullopt, cfa == 1});
      } else if (cfa) {
        out.submissions.push_back({user, quiz, 1, true, std::nullopt});
      } else {
        out.submissions.push_back({user, quiz, 1, false, std::nullopt});
        if (rng.uniform() < 0.7) out.submissions.push_back({user, quiz, 2, true, std::nullopt});
      }
    }
  }
  return out;
}

std::string serialize_submissions(const std::vector<Submission>& subs) {
  std::string out;
  for (const auto& s : subs) {
    ojson j;
    j["u"] = s.user_id;
    j["q"] = s.quiz_id;
    if (s.cfa) {
      j["cfa"] = *s.cfa ? 1 : 0;
    } else {
      j["attempt"] = s.attempt.value_or(1);
      j["correct"] = s.correct.value_or(false);
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string serialize_ground_truth(const SynthOutput& out) {
  ojson j;
  ojson sites = ojson::array();
  for (const auto& s : out.sites)
    sites.push_back({{"u", s.user_id}, {"v", s.video_id}, {"click_index", s.click_index}, {"t", s.timestamp_s}});
  j["planted_sites"] = sites;
  ojson pairs = ojson::array();
  for (const auto& [u, v, visited, cfa] : out.truth)
    pairs.push_back({{"u", u}, {"v", v}, {"visited", visited}, {"cfa", cfa}});
  j["pairs"] = pairs;
  return j.dump(2) + "\n";
}

SymbolSynthOutput synthesize_symbols(const SymbolSynthSpec& spec, std::uint64_t seed) {
  if (spec.min_length < spec.motif.size() || spec.max_length < spec.min_length)
    throw Error("synth: sequence lengths must be at least the motif width");
  if (!is_probability(spec.insertion_rate)) throw Error("synth: insertion rate outside [0, 1]");
  std::vector<double> weights = spec.background;
  if (weights.empty()) weights.assign(kAlphabetSize, 1.0);
  if (weights.size() != kAlphabetSize) throw Error("synth: background needs one weight per symbol");
  std::vector<double> cum(kAlphabetSize);
  std::partial_sum(weights.begin(), weights.end(), cum.begin());

  Rng rng(seed);
  SymbolSynthOutput out;
  for (std::size_t i = 0; i < spec.n_sequences; ++i) {
    EventSequence s;
    s.user_id = "s" + std::to_string(i + 1);
    s.video_id = "v" + std::to_string(i % std::max<std::size_t>(1, spec.videos) + 1);
    s.cfa = static_cast<int>(rng.below(2));
    const std::size_t len = spec.min_length + static_cast<std::size_t>(rng.below(spec.max_length - spec.min_length + 1));
    for (std::size_t k = 0; k < len; ++k) {
      const double u = rng.uniform() * cum.back();
      const auto a = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
      s.symbols.push_back(symbol_at(std::min(a, kAlphabetSize - 1)));
    }
    out.sequences.push_back(std::move(s));
  }
  // Plant in an exact share of the sequences.
  std::vector<std::size_t> order(spec.n_sequences);
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  const auto planted = static_cast<std::size_t>(std::llround(spec.insertion_rate * static_cast<double>(spec.n_sequences)));
  order.resize(std::min(planted, order.size()));
  std::sort(order.begin(), order.end());
  for (std::size_t i : order) {
    auto& syms = out.sequences[i].symbols;
    const auto at = static_cast<std::size_t>(rng.below(syms.size() - spec.motif.size() + 1));
    std::copy(spec.motif.begin(), spec.motif.end(), syms.begin() + static_cast<std::ptrdiff_t>(at));
    out.sites.emplace_back(i, at);
  }
  return out;
}

}  // namespace clickmine
