// Parallel kernels against their serial references. Run with
// --benchmark_filter to pick a kernel; the /N suffix is the worker cap.

#include <benchmark/benchmark.h>

#include "clickmine/evaluation.hpp"
#include "clickmine/motifs.hpp"
#include "clickmine/parallel.hpp"
#include "clickmine/positions.hpp"
#include "clickmine/synth.hpp"

using namespace clickmine;

namespace {

const std::vector<Trajectory>& trajectories() {
  static const std::vector<Trajectory> pairs = [] {
    SynthSpec spec;
    spec.n_users = 2000;
    const auto out = synthesize(spec, 1);
    const auto groups = map_videos_to_quizzes(out.catalog);
    const auto assembled = assemble_uv_pairs(out.clicks, out.submissions, groups);
    std::vector<Trajectory> t;
    for (const auto& uv : assembled.labeled) t.push_back(denoise(uv, {}, groups.find(uv.video_id)->length_s));
    return t;
  }();
  return pairs;
}

struct TuneFixture {
  EvalConfig cfg;
  VideoData data;
  Folds folds;
};

const TuneFixture& tune_fixture() {
  static const TuneFixture f = [] {
    TuneFixture x;
    x.cfg.w_grid = {15.0, 30.0, 45.0, 60.0, 90.0, 120.0};
    x.data = prepare_video(trajectories(), x.cfg);
    Rng rng(2);
    x.folds = *stratified_folds(x.data.labels, 5, 0, rng);
    x.folds.pop_back();
    return x;
  }();
  return f;
}

const MotifCorpus& motif_corpus() {
  static const MotifCorpus c = MotifCorpus::from(synthesize_symbols({}, 3).sequences);
  return c;
}

MotifParams start(int width) {
  MotifParams p;
  p.lambda = 0.02;
  p.pspm.assign(static_cast<std::size_t>(width), {});
  for (auto& row : p.pspm) row.fill(1.0 / static_cast<double>(kAlphabetSize));
  p.pspm[0][0] = 2.0 / static_cast<double>(kAlphabetSize);
  p.pspm[0][1] = 0.0;
  return p;
}

void BM_encode_corpus(benchmark::State& st) {
  parallel::set_jobs(static_cast<int>(st.range(0)));
  for (auto _ : st)
    benchmark::DoNotOptimize(encode_corpus(trajectories(), 15.0, PositionMode::reconstructed, nullptr));
  parallel::set_jobs(0);
}

void BM_encode_corpus_serial(benchmark::State& st) {
  for (auto _ : st)
    benchmark::DoNotOptimize(encode_corpus_serial(trajectories(), 15.0, PositionMode::reconstructed, nullptr));
}

void BM_tune(benchmark::State& st) {
  const auto& f = tune_fixture();
  parallel::set_jobs(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(tune(f.data, f.folds, Algo::dt, f.cfg, 4));
  parallel::set_jobs(0);
}

void BM_tune_serial(benchmark::State& st) {
  const auto& f = tune_fixture();
  for (auto _ : st) benchmark::DoNotOptimize(tune_serial(f.data, f.folds, Algo::dt, f.cfg, 4));
}

void BM_em_step(benchmark::State& st) {
  const auto& c = motif_corpus();
  const auto bg = background_frequencies(c);
  const auto theta = start(6);
  parallel::set_jobs(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(em_step(c, {}, theta, bg, {}));
  parallel::set_jobs(0);
}

void BM_em_step_serial(benchmark::State& st) {
  const auto& c = motif_corpus();
  const auto bg = background_frequencies(c);
  const auto theta = start(6);
  for (auto _ : st) benchmark::DoNotOptimize(em_step_serial(c, {}, theta, bg, {}));
}

MotifConfig null_config() {
  MotifConfig cfg;
  cfg.replicates = 8;
  return cfg;
}

void BM_null_llrs(benchmark::State& st) {
  const auto& c = motif_corpus();
  const auto bg = background_frequencies(c);
  parallel::set_jobs(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(null_llrs(c, 4, bg, null_config(), 5));
  parallel::set_jobs(0);
}

void BM_null_llrs_serial(benchmark::State& st) {
  const auto& c = motif_corpus();
  const auto bg = background_frequencies(c);
  for (auto _ : st) benchmark::DoNotOptimize(null_llrs_serial(c, 4, bg, null_config(), 5));
}

}  // namespace

BENCHMARK(BM_encode_corpus)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_encode_corpus_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_tune)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_tune_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_em_step)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_em_step_serial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_null_llrs)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_null_llrs_serial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
