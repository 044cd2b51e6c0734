#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clickmine/common.hpp"
#include "clickmine/events.hpp"

namespace clickmine {

using Profile = std::array<double, kAlphabetSize>;

/// How many motif sites a sequence may hold: any number (each window is an
/// independent draw) or zero-or-one per sequence.
enum class SiteMode { any_number, zoops };

struct MotifConfig {
  std::vector<int> widths = {4, 5, 6, 7, 8, 9, 10};
  double e_threshold = 0.05;
  int replicates = 200;        // Monte-Carlo null corpora per width
  int max_motifs_per_width = 5;
  int restarts = 5;            // starting points carried through full EM
  int frequent_starts = 10;    // most frequent words screened as starts
  int random_starts = 10;      // random windows screened as starts
  int max_iterations = 500;
  double tolerance = 1e-8;     // relative objective gain that ends EM
  double distance = 1e-3;      // ...or PSPM change (Euclidean) that ends EM
  double prior_strength = 1.0; // total Dirichlet pseudo-count per position
  double lambda_max = 0.5;
  double consensus_threshold = 0.25;
  std::size_t min_sequences = 50;
  SiteMode mode = SiteMode::any_number;

  void validate() const;
};

/// Flattened symbol corpus with one window list per width.
struct MotifCorpus {
  std::vector<std::uint8_t> symbols;
  std::vector<std::size_t> offset;  // per sequence
  std::vector<std::size_t> length;

  static MotifCorpus from(const std::vector<EventSequence>& seqs);
  std::size_t size() const { return length.size(); }
  std::size_t windows(int width) const;
};

/// 0-order symbol frequencies with one pseudo-count per symbol.
Profile background_frequencies(const MotifCorpus& corpus);

struct MotifParams {
  std::vector<Profile> pspm;  // width rows
  double lambda = 0.0;        // site probability (per window, or per sequence for zoops)
};

struct StepResult {
  double log_lik = 0.0;    // mixture log-likelihood ratio against pure background
  double log_prior = 0.0;  // Dirichlet term
  double objective() const { return log_lik + log_prior; }
  MotifParams next;
};

/// Per-window weights in [0, 1] laid out sequence by sequence, windows of
/// each sequence in order. Empty means all ones.
using WindowWeights = std::vector<double>;

/// One EM iteration: scores `theta` (E-step) and returns the re-estimated
/// parameters (M-step). The parallel version reduces fixed blocks of
/// sequences in block order, so its result does not depend on the worker
/// count; the serial reference sums sequence by sequence.
StepResult em_step(const MotifCorpus& corpus, const WindowWeights& weights, const MotifParams& theta,
                   const Profile& background, const MotifConfig& cfg);
StepResult em_step_serial(const MotifCorpus& corpus, const WindowWeights& weights, const MotifParams& theta,
                          const Profile& background, const MotifConfig& cfg);

/// Posterior site probability of every window under `theta`.
std::vector<double> site_posteriors(const MotifCorpus& corpus, const WindowWeights& weights,
                                    const MotifParams& theta, const Profile& background, const MotifConfig& cfg);

struct MotifModel {
  int width = 0;
  MotifParams params;
  Profile background{};
  double llr = 0.0;            // fitted mixture log-likelihood ratio
  double null_fraction = 1.0;  // share of null refits with a strictly higher ratio
  double e_value = 1.0;        // null_fraction times the searches per width, capped at 1
  std::size_t occurrences = 0;
  bool converged = false;
  int rank = 0;                // order found within its width
  std::vector<double> objective_trace;
};

/// Best of the configured restarts on one weighted corpus.
MotifModel fit_motif(const MotifCorpus& corpus, const WindowWeights& weights, int width, const Profile& background,
                     const MotifConfig& cfg, Rng& rng);

/// Fitted ratios of single motifs on `replicates` corpora sampled from the
/// background with the same sequence lengths. Replicate r draws from its own
/// derived stream, so the parallel and serial versions agree exactly.
std::vector<double> null_llrs(const MotifCorpus& corpus, int width, const Profile& background,
                              const MotifConfig& cfg, std::uint64_t seed);
std::vector<double> null_llrs_serial(const MotifCorpus& corpus, int width, const Profile& background,
                                     const MotifConfig& cfg, std::uint64_t seed);

/// Fraction of `nulls` strictly above the motif's ratio.
double null_fraction(const MotifModel& motif, std::span<const double> nulls);

/// Monte-Carlo E-value of a fitted motif: simulates the null for its width
/// and returns the fraction of refits with a higher ratio. Throws Error when
/// cfg.replicates < 1.
double e_value(const MotifModel& motif, const std::vector<EventSequence>& corpus, const MotifConfig& cfg,
               std::uint64_t seed);

struct DiscoveryResult {
  std::vector<MotifModel> motifs;      // e_value <= threshold, by (width, rank)
  std::vector<MotifModel> candidates;  // everything fitted
  Warnings warnings;
  std::size_t monotonicity_violations = 0;
};

DiscoveryResult discover_motifs(const std::vector<EventSequence>& seqs, const MotifConfig& cfg, std::uint64_t seed);

/// Largest single-iteration drop in a trace; <= 0 for a monotone trace.
double max_objective_drop(const std::vector<double>& trace);

// ---------------------------------------------------------------------------
// Representation and support

/// Per position, the symbols with probability >= threshold, most probable
/// first (ties by alphabet order). An empty set is the wildcard.
using Consensus = std::vector<std::vector<Symbol>>;

Consensus consensus(const MotifModel& motif, double threshold = 0.25);
Consensus consensus(const std::vector<Profile>& pspm, double threshold = 0.25);
std::string render_consensus(const Consensus& c);

/// Offsets where every position's symbol is in its set.
std::vector<std::size_t> find_occurrences(const Consensus& c, std::span<const Symbol> seq);

enum class MotifGroup { Pa, Sb, Sf, Rf, Pl };
std::string_view to_string(MotifGroup g);

/// Most frequent non-play kind among the consensus symbols, rate changes
/// pooled under Rf. Ties go to the larger probability mass, then to the
/// order Pa, Sb, Sf, Rf. Consensus with play symbols only is group Pl.
MotifGroup motif_group(const Consensus& c, const std::vector<Profile>& pspm);

struct MotifReport {
  int width = 0;
  std::vector<Profile> pspm;
  Consensus consensus_sets;
  std::string consensus;
  double e_value = 1.0;
  std::size_t occurrences = 0;
  double fs = 0.0, fs0 = 0.0, fs1 = 0.0;
  std::size_t videos_any = 0, videos_10 = 0;
  double p_hat = 0.5;
  double p_value = 1.0;
  double z = 0.0;
  MotifGroup group = MotifGroup::Pl;
  bool degenerate = false;
};

MotifReport support_and_significance(const MotifModel& motif, const std::vector<EventSequence>& seqs,
                                     double threshold = 0.25);

/// True when `inner` appears as a contiguous run of positions of `outer`.
bool is_subsequence(const Consensus& inner, const Consensus& outer);

/// Drops group Pl, keeps per group the top-10 by fs or p <= 0.05, then
/// removes the weaker of any pair where one consensus is contained in the
/// other (lower fs, then higher p, then shorter loses).
std::vector<MotifReport> filter_motifs(const std::vector<MotifReport>& reports);

std::string serialize_motifs(const std::vector<MotifReport>& reports);

}  // namespace clickmine
