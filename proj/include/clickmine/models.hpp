#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clickmine/common.hpp"
#include "clickmine/positions.hpp"

namespace clickmine {

enum class Algo { dp, dt, ct, skr };

std::string_view to_string(Algo a);
Algo parse_algo(std::string_view s);

struct ModelConfig {
  double alpha = 0.5;          // additive smoothing on DP / DT counts
  double rate_floor = 1e-9;    // CT rates never drop below this (1/s)
  double min_holding_s = 1e-6; // CT holding time used when none was observed
};

/// Parameters for one class. Which members are filled depends on the
/// algorithm: DP uses `visit`, DT `visit` (as the initial distribution) and
/// `trans`, CT `rates` and `holding`.
struct ClassParams {
  std::vector<double> visit;
  std::vector<std::array<double, 4>> trans;  // columns: backward, repeat, direct, forward
  std::vector<std::array<double, 4>> rates;  // CT generator rows; column 1 is the diagonal
  std::vector<double> holding;
};

struct Model {
  Algo algo = Algo::dp;
  double width_s = 0.0;
  int max_index = 0;
  double alpha = 0.5;
  double rate_floor = 1e-9;
  std::array<double, 2> g{0.5, 0.5};
  std::array<ClassParams, 2> cls;
  Warnings warnings;
};

/// Transition classes that can occur from state i when states are 0..n.
std::array<bool, 4> feasible_classes(int i, int n);

/// Trains on labeled sequences (cfa 0 or 1). All sequences must share one
/// width. Throws Error("insufficient class data") when a class is empty.
Model train(Algo algo, std::span<const PositionSequence> train, const ModelConfig& cfg = {});

/// Same, over borrowed sequences; avoids copying subsets of a corpus.
Model train(Algo algo, std::span<const PositionSequence* const> train, const ModelConfig& cfg = {});

Model train_dp(std::span<const PositionSequence> train, const ModelConfig& cfg = {});
Model train_dt(std::span<const PositionSequence> train, const ModelConfig& cfg = {});
Model train_ct(std::span<const PositionSequence> train, const ModelConfig& cfg = {});

/// Per-class log-likelihood {log L(p | class 0), log L(p | class 1)}, prior
/// excluded. Throws Error for indices beyond the trained range.
std::array<double, 2> log_likelihood(const Model& m, const PositionSequence& p);

double log_likelihood_dp(const Model& m, int c, const PositionSequence& p);
double log_likelihood_dt(const Model& m, int c, const PositionSequence& p);
double log_likelihood_ct(const Model& m, int c, const PositionSequence& p);

struct Prediction {
  int cls = 0;
  std::array<double, 2> log_lik{0.0, 0.0};
  bool tie = false;
};

/// Biased MAP rule: 1 iff g1 L1 > g0 L0 + b, 0 on the reverse strict
/// inequality, and on exact equality 1{U >= g0} with U drawn from `rng`.
/// The generator is consumed only on ties.
Prediction map_decide(double log_l0, double log_l1, const std::array<double, 2>& g, double bias, Rng& rng);

/// Skewed random baseline: 1 with probability g1.
int skr_predict(double g1, Rng& rng);

/// JSON with all probabilities in shortest round-trip decimal form.
std::string serialize_model(const Model& m);
Model parse_model(std::string_view text);

}  // namespace clickmine
