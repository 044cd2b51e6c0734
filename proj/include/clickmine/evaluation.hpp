#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clickmine/common.hpp"
#include "clickmine/models.hpp"
#include "clickmine/positions.hpp"
#include "clickmine/stats.hpp"

namespace clickmine {

/// {5, 10, 15, 20} followed by 30..600 in steps of 15.
std::vector<double> default_width_grid();
/// {0} followed by 2^-60, 2^-58, ..., 2^0.
std::vector<double> default_bias_grid();

struct EvalConfig {
  int iterations = 10;
  int folds = 5;
  std::vector<double> w_grid = default_width_grid();
  std::vector<double> b_grid = default_bias_grid();
  std::size_t min_class_samples = 100;
  double constraint_floor = 0.25;
  ModelConfig model;
  PositionMode mode = PositionMode::reconstructed;

  void validate() const;
};

struct GridPoint {
  std::size_t w_index = 0;
  std::size_t b_index = 0;
  double width_s = 0.0;
  double bias = 0.0;
};

/// Width-major enumeration of every (w, b) pair.
std::vector<GridPoint> tuning_grid(const EvalConfig& cfg);

struct Confusion {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

  void add(int predicted, int truth);
  Confusion& operator+=(const Confusion& o);
  std::uint64_t total() const { return tp + fp + tn + fn; }
};

struct MetricRow {
  Confusion counts;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
};

/// Undefined ratios (empty denominators) are reported as 0.
MetricRow metrics(const Confusion& c);

using Folds = std::vector<std::vector<std::size_t>>;

/// Shuffles each class separately and deals it round-robin over K folds,
/// continuing the dealing position from one class to the next. Returns
/// nullopt (video excluded) when either class has fewer than
/// `min_class_samples` members.
std::optional<Folds> stratified_folds(std::span<const int> labels, int k, std::size_t min_class_samples, Rng& rng);

/// Throws Error unless the folds are pairwise disjoint and cover 0..n-1.
void check_folds(const Folds& folds, std::size_t n);

/// One video's corpus, encoded once at every grid width.
struct VideoData {
  std::string video_id;
  std::vector<int> labels;
  std::vector<std::vector<PositionSequence>> by_width;  // [w_index][pair]
};

VideoData prepare_video(const std::vector<Trajectory>& pairs, const EvalConfig& cfg);

struct TuneResult {
  GridPoint best;
  double accuracy = 0.0;
  bool fallback = false;            // no grid point met the constraint
  std::vector<double> mean_accuracy;  // one per grid point, tuning_grid order
  std::vector<bool> feasible;
};

/// Nested CV over the given training folds: each fold in turn validates a
/// model trained on the others. Only sequences indexed by `train_folds` are
/// read. The parallel version distributes (round, width) tasks.
TuneResult tune(const VideoData& data, const Folds& train_folds, Algo algo, const EvalConfig& cfg,
                std::uint64_t seed);
TuneResult tune_serial(const VideoData& data, const Folds& train_folds, Algo algo, const EvalConfig& cfg,
                       std::uint64_t seed);

struct IterationResult {
  MetricRow test;
  double width_s = 0.0;
  double bias = 0.0;
  bool fallback = false;
  std::string error;  // non-empty when the iteration failed
};

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
};

struct VideoReport {
  std::string video_id;
  Algo algo = Algo::dp;
  bool excluded = false;
  std::vector<IterationResult> iterations;
  Summary accuracy, f1, width, bias;
  int fallbacks = 0;
  int failures = 0;
};

/// N iterations of: re-fold, hold out the last fold, tune on the rest, train
/// at the tuned point and score the held-out fold. The parallel version runs
/// iterations concurrently; both produce identical reports.
VideoReport evaluate_video(const VideoData& data, Algo algo, const EvalConfig& cfg, std::uint64_t seed);
VideoReport evaluate_video_serial(const VideoData& data, Algo algo, const EvalConfig& cfg, std::uint64_t seed);

/// Two-sided rank-sum p-value between per-video means of two algorithms.
/// Throws Error("insufficient samples") with fewer than 3 values per side.
stats::TestResult compare_algorithms(std::span<const double> a, std::span<const double> b);

/// video -> algo -> metric value.
using MetricTable = std::map<std::string, std::map<Algo, double>>;

struct ImprovementRow {
  std::string video_id;
  Algo algo = Algo::dp;
  std::optional<double> percent;  // nullopt when the baseline is 0
};

/// Percent change of each algorithm relative to SKR per video. Videos
/// without a baseline value are skipped with a warning.
std::vector<ImprovementRow> improvement_report(const MetricTable& table, Warnings* warnings = nullptr);
std::string improvement_csv(const std::vector<ImprovementRow>& rows, const std::string& metric);

std::string serialize_reports(const std::vector<VideoReport>& reports);

}  // namespace clickmine
