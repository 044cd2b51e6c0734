#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "clickmine/denoise.hpp"
#include "clickmine/events.hpp"
#include "clickmine/evaluation.hpp"
#include "clickmine/ingest.hpp"

namespace clickmine::cli {

/// Input files shared by encode, motifs and predict.
struct InputPaths {
  std::filesystem::path clicks;
  std::filesystem::path submissions;
  std::filesystem::path catalog;
};

/// Denoised trajectories of a whole click log, in chronological video order
/// then user order.
struct Corpus {
  VideoGroups groups;
  std::vector<Trajectory> labeled;
  std::vector<Trajectory> unlabeled;
  Warnings warnings;
};

Corpus load_corpus(const InputPaths& paths, const DenoiseConfig& denoise);

/// Event sequences of `pairs` quantized with `table`.
std::vector<EventSequence> event_sequences(const std::vector<Trajectory>& pairs, const QuartileTable& table,
                                           Warnings* warnings = nullptr);

/// Quartile table over the derived events of `pairs`.
QuartileTable corpus_quartiles(const std::vector<Trajectory>& pairs);

/// Pairwise rank-sum comparisons of per-video accuracy and F1 between the
/// algorithms present in `reports`.
std::string serialize_comparisons(const std::vector<VideoReport>& reports);

/// Files staged in memory and published together: each is written to a
/// temporary sibling and renamed into place only once all writes succeed.
/// On failure nothing new is left behind.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}
  void add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }
  void commit() const;

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::string, std::string>> files_;
};

/// Runs the command line `args` (program name excluded). Returns the exit
/// status; diagnostics go to `err`, progress notes to `out`.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);
int main(int argc, char** argv);

}  // namespace clickmine::cli
