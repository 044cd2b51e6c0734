#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "clickmine/events.hpp"
#include "clickmine/ingest.hpp"

namespace clickmine {

struct SynthVideo {
  std::string id = "v1";
  double length_s = 300.0;
  /// [start, end) stretch of the video whose viewing decides CFA. Users who
  /// do not "visit" skip over it.
  std::optional<std::pair<double, double>> signal_zone = std::make_pair(90.0, 120.0);
  double visit_rate = 0.5;  // share of users who watch the zone
  double fidelity = 0.9;    // P(label follows the visit rule)
  double cfa_rate = 0.5;    // label rate when there is no signal zone
};

/// A pause-heavy viewing pattern (short play, long pause, repeated) inserted
/// into trajectories with a per-class probability.
struct PlantedPattern {
  int repeats = 2;
  double p_cfa = 0.2;
  double p_noncfa = 0.2;
};

struct SynthSpec {
  int n_users = 1000;
  std::vector<SynthVideo> videos = {SynthVideo{}};
  double pause_rate = 0.25;       // per play segment
  double skip_back_rate = 0.08;
  double skip_forward_rate = 0.08;
  double ratechange_rate = 0.04;
  double burst_rate = 0.1;        // skips emitted as rapid repeated clicks
  double noise_rate = 0.02;       // pairs carrying a stall/error click
  double precomputed_label_rate = 0.5;  // submissions given as a cfa flag
  std::optional<PlantedPattern> pattern;

  void validate() const;
};

SynthSpec parse_synth_spec(const std::string& json_text);

struct PlantedSite {
  std::string user_id;
  std::string video_id;
  std::size_t click_index = 0;  // first click of the pattern in the emitted trajectory
  double timestamp_s = 0.0;
};

struct SynthOutput {
  std::vector<RawClick> clicks;
  std::vector<Submission> submissions;
  VideoCatalog catalog;
  std::vector<PlantedSite> sites;
  /// (user, video) -> zone visited, as generated
  std::vector<std::tuple<std::string, std::string, bool, int>> truth;  // user, video, visited, cfa
};

SynthOutput synthesize(const SynthSpec& spec, std::uint64_t seed);

std::string serialize_submissions(const std::vector<Submission>& subs);
std::string serialize_ground_truth(const SynthOutput& out);

/// Symbol-level corpus with one planted motif, for motif-discovery checks.
struct SymbolSynthSpec {
  std::size_t n_sequences = 500;
  std::size_t min_length = 15;
  std::size_t max_length = 30;
  std::vector<Symbol> motif = {Symbol::Pl2, Symbol::Pa4, Symbol::Pl2, Symbol::Pa4};
  double insertion_rate = 0.2;  // fraction of sequences carrying the motif
  /// Background weights over the alphabet; empty means uniform.
  std::vector<double> background;
  std::size_t videos = 5;
};

struct SymbolSynthOutput {
  std::vector<EventSequence> sequences;
  std::vector<std::pair<std::size_t, std::size_t>> sites;  // (sequence, offset)
};

SymbolSynthOutput synthesize_symbols(const SymbolSynthSpec& spec, std::uint64_t seed);

}  // namespace clickmine
