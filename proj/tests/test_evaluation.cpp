#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"

#include "clickmine/evaluation.hpp"
#include "oracles.hpp"
#include "pipeline.hpp"

using namespace clickmine;

namespace {

std::vector<int> labels(std::size_t ones, std::size_t zeros) {
  std::vector<int> v(ones, 1);
  v.insert(v.end(), zeros, 0);
  return v;
}

EvalConfig small_config() {
  EvalConfig cfg;
  cfg.iterations = 3;
  cfg.w_grid = {10, 30, 60};
  cfg.b_grid = {0.0, std::ldexp(1.0, -20), 1.0};
  cfg.min_class_samples = 20;
  return cfg;
}

/// A 300 s video whose CFA label follows a visit to 90-120 s.
std::vector<Trajectory> planted_video(double fidelity, int users, std::uint64_t seed) {
  SynthSpec spec;
  spec.n_users = users;
  spec.videos[0].fidelity = fidelity;
  return testing_pipeline::synth_pairs(spec, seed).labeled.at(0);
}

PositionSequence flat(int cfa, int idx, int n) {
  PositionSequence p;
  p.cfa = cfa;
  p.width_s = 10.0;
  p.max_index = n;
  p.entries = {{idx, 1.0}};
  return p;
}

}  // namespace

TEST_CASE("the default grid has 43 widths and 32 biases") {
  const EvalConfig cfg;
  CHECK(cfg.w_grid.size() == 43);
  CHECK(cfg.b_grid.size() == 32);
  const auto grid = tuning_grid(cfg);
  CHECK(grid.size() == 1376);
  CHECK(cfg.w_grid.front() == 5.0);
  CHECK(cfg.w_grid[4] == 30.0);
  CHECK(cfg.w_grid.back() == 600.0);
  CHECK(cfg.b_grid[0] == 0.0);
  CHECK(cfg.b_grid[1] == std::ldexp(1.0, -60));
  CHECK(cfg.b_grid.back() == 1.0);
  // Width-major order.
  CHECK(grid[1].w_index == 0);
  CHECK(grid[32].w_index == 1);
}

TEST_CASE("stratified folds") {
  Rng rng(1);
  SUBCASE("100 + 100 over five folds gives 20 + 20 each") {
    const auto l = labels(100, 100);
    const auto f = stratified_folds(l, 5, 100, rng);
    REQUIRE(f);
    check_folds(*f, l.size());
    for (const auto& fold : *f) {
      const auto ones = std::count_if(fold.begin(), fold.end(), [&](std::size_t i) { return l[i] == 1; });
      CHECK(ones == 20);
      CHECK(fold.size() == 40);
    }
  }
  SUBCASE("101 CFA puts 21 in one fold") {
    const auto l = labels(101, 100);
    const auto f = stratified_folds(l, 5, 100, rng);
    REQUIRE(f);
    std::vector<long> ones;
    for (const auto& fold : *f)
      ones.push_back(std::count_if(fold.begin(), fold.end(), [&](std::size_t i) { return l[i] == 1; }));
    CHECK(std::count(ones.begin(), ones.end(), 21) == 1);
    CHECK(std::count(ones.begin(), ones.end(), 20) == 4);
    check_folds(*f, l.size());
  }
  SUBCASE("99 non-CFA excludes the video") { CHECK_FALSE(stratified_folds(labels(150, 99), 5, 100, rng)); }
  SUBCASE("per-class counts differ by at most one") {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 200; ++trial) {
      const auto l = labels(gen() % 60, gen() % 60);
      const int k = 3 + static_cast<int>(gen() % 5);
      const auto f = stratified_folds(l, k, 0, rng);
      REQUIRE(f);
      check_folds(*f, l.size());
      for (int c = 0; c < 2; ++c) {
        std::vector<long> n;
        for (const auto& fold : *f)
          n.push_back(std::count_if(fold.begin(), fold.end(), [&](std::size_t i) { return l[i] == c; }));
        CHECK(*std::max_element(n.begin(), n.end()) - *std::min_element(n.begin(), n.end()) <= 1);
      }
      std::size_t total = 0;
      for (const auto& fold : *f) total += fold.size();
      CHECK(total == l.size());
    }
  }
}

TEST_CASE("fold hygiene checks") {
  CHECK_NOTHROW(check_folds({{0, 2}, {1}}, 3));
  CHECK_THROWS_AS(check_folds({{0, 1}, {1, 2}}, 3), Error);
  CHECK_THROWS_AS(check_folds({{0}, {2}}, 3), Error);
  CHECK_THROWS_AS(check_folds({{0, 5}}, 2), Error);
}

TEST_CASE("metric identities") {
  std::mt19937_64 gen(4);
  for (int i = 0; i < 500; ++i) {
    Confusion c{gen() % 50, gen() % 50, gen() % 50, gen() % 50};
    const auto m = metrics(c);
    CHECK(m.accuracy == static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total()));
    const double lo = std::min(m.precision, m.recall);
    CHECK(m.f1 <= 2.0 * lo / (1.0 + lo) + 1e-15);
    CHECK(m.f1 >= 0.0);
    CHECK(m.f1 <= 1.0);
    if (m.precision + m.recall > 0.0)
      CHECK(m.f1 == doctest::Approx(2.0 * m.precision * m.recall / (m.precision + m.recall)));
  }
  const auto empty = metrics({});
  CHECK(empty.accuracy == 0.0);
  CHECK(empty.f1 == 0.0);
}

TEST_CASE("a planted visit rule is learned and SKR stays near chance") {
  const auto pairs = planted_video(1.0, 300, 7);
  const auto cfg = small_config();
  const auto data = prepare_video(pairs, cfg);
  REQUIRE(data.by_width.size() == cfg.w_grid.size());
  const auto dp = evaluate_video(data, Algo::dp, cfg, 11);
  CHECK_FALSE(dp.excluded);
  CHECK(dp.failures == 0);
  CHECK(dp.accuracy.mean >= 0.95);
  const auto skr = evaluate_video(data, Algo::skr, cfg, 11);
  CHECK(std::fabs(skr.accuracy.mean - 0.5) <= 0.1);
  for (const auto& it : dp.iterations) CHECK(it.test.counts.total() == pairs.size() / 5);
}

TEST_CASE("parallel and serial evaluation agree exactly") {
  const auto pairs = planted_video(0.8, 200, 8);
  const auto cfg = small_config();
  const auto data = prepare_video(pairs, cfg);
  for (Algo a : {Algo::dp, Algo::dt, Algo::ct, Algo::skr}) {
    const auto par = evaluate_video(data, a, cfg, 5);
    const auto ser = evaluate_video_serial(data, a, cfg, 5);
    CHECK(serialize_reports({par}) == serialize_reports({ser}));
    CHECK(serialize_reports({par}) == serialize_reports({evaluate_video(data, a, cfg, 5)}));
  }
  Rng rng(3);
  auto folds = *stratified_folds(data.labels, 4, 0, rng);
  const auto a = tune(data, folds, Algo::dt, cfg, 9);
  const auto b = tune_serial(data, folds, Algo::dt, cfg, 9);
  CHECK(a.mean_accuracy == b.mean_accuracy);
  CHECK(a.feasible == b.feasible);
  CHECK(a.best.w_index == b.best.w_index);
  CHECK(a.best.b_index == b.best.b_index);
}

TEST_CASE("tuning records every grid point and breaks ties toward the smaller width") {
  // Every sequence sits at index 0, so both classes have the same likelihood
  // and the 3:1 prior decides. All widths score alike; no bias meets the
  // constraint, so selection falls back to plain accuracy.
  std::vector<PositionSequence> seqs;
  VideoData data;
  data.video_id = "v";
  for (int i = 0; i < 40; ++i) {
    data.labels.push_back(i % 4 != 0);
    seqs.push_back(flat(i % 4 != 0, 0, 3));
  }
  EvalConfig cfg = small_config();
  data.by_width.assign(cfg.w_grid.size(), seqs);
  Rng rng(6);
  const auto folds = *stratified_folds(data.labels, 4, 0, rng);
  const auto res = tune_serial(data, folds, Algo::dp, cfg, 1);
  CHECK(res.mean_accuracy.size() == tuning_grid(cfg).size());
  CHECK(res.fallback);
  CHECK(res.best.w_index == 0);
  CHECK(res.best.b_index == 0);
  CHECK(res.mean_accuracy[0] == res.mean_accuracy[3]);

  EvalConfig full;
  full.iterations = 1;
  data.by_width.assign(full.w_grid.size(), seqs);
  CHECK(tune(data, folds, Algo::dp, full, 1).mean_accuracy.size() == 1376);
}

TEST_CASE("tuning never reads pairs outside the training folds") {
  const auto pairs = planted_video(0.9, 200, 9);
  const auto cfg = small_config();
  auto data = prepare_video(pairs, cfg);
  Rng rng(10);
  auto folds = *stratified_folds(data.labels, 5, 0, rng);
  const auto held_out = folds.back();
  folds.pop_back();
  const auto clean = tune_serial(data, folds, Algo::dp, cfg, 4);

  // Canaries: held-out labels become invalid and their sequences point far
  // outside the trained range. Any read would throw or change the scores.
  for (std::size_t i : held_out) {
    data.labels[i] = 7;
    for (auto& w : data.by_width) w[i].entries = {{1 << 20, 1.0}};
  }
  const auto canary = tune_serial(data, folds, Algo::dp, cfg, 4);
  CHECK(canary.mean_accuracy == clean.mean_accuracy);
  CHECK(canary.best.w_index == clean.best.w_index);
}

TEST_CASE("under-sampled videos are excluded, not failed") {
  const auto pairs = planted_video(0.9, 60, 12);
  EvalConfig cfg = small_config();
  cfg.min_class_samples = 100;
  const auto rep = evaluate_video(prepare_video(pairs, cfg), Algo::dp, cfg, 1);
  CHECK(rep.excluded);
  CHECK(rep.iterations.empty());
}

TEST_CASE("iteration failures are kept in the report") {
  VideoData data;
  data.video_id = "v";
  std::vector<PositionSequence> seqs;
  for (int i = 0; i < 50; ++i) {
    data.labels.push_back(i % 2);
    seqs.push_back(flat(i % 2, 0, 3));
  }
  EvalConfig cfg = small_config();
  cfg.min_class_samples = 10;
  data.by_width.assign(cfg.w_grid.size(), seqs);
  for (std::size_t i = 1; i < seqs.size(); i += 2) data.by_width[1][i].max_index = 9;  // mixed widths at 30 s
  const auto rep = evaluate_video_serial(data, Algo::dp, cfg, 2);
  CHECK(rep.failures == cfg.iterations);
  CHECK(serialize_reports({rep}).find("different widths") != std::string::npos);
}

TEST_CASE("comparing algorithms across videos") {
  const std::vector<double> a{0.6, 0.61, 0.7, 0.55, 0.58};
  CHECK(compare_algorithms(a, a).p_value >= 0.99);
  std::vector<double> hi(10), lo(10);
  std::iota(hi.begin(), hi.end(), 20.0);
  std::iota(lo.begin(), lo.end(), 0.0);
  const auto t = compare_algorithms(hi, lo);
  CHECK(t.p_value < 0.001);
  std::vector<double> pooled = hi;
  pooled.insert(pooled.end(), lo.begin(), lo.end());
  CHECK(t.p_value == doctest::Approx(oracle::rank_sum_p_enumerated(stats::midranks(pooled), 10)).epsilon(0.5));
  CHECK_THROWS_WITH_AS(compare_algorithms(std::vector<double>{1, 2}, a), doctest::Contains("insufficient samples"),
                       Error);

  // One overlapping value, small n: exact against enumeration.
  for (std::size_t n = 3; n <= 8; ++n) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < n; ++i) {
      x.push_back(static_cast<double>(i));
      y.push_back(static_cast<double>(i + n - 1));
    }
    pooled = x;
    pooled.insert(pooled.end(), y.begin(), y.end());
    CHECK(compare_algorithms(x, y).p_value == doctest::Approx(oracle::rank_sum_p_enumerated(stats::midranks(pooled), n)).epsilon(1e-12));
  }
}

TEST_CASE("improvement over the SKR baseline") {
  MetricTable t;
  t["v1"] = {{Algo::skr, 0.50}, {Algo::dp, 0.56}};
  t["v2"] = {{Algo::dp, 0.7}};
  t["v3"] = {{Algo::skr, 0.0}, {Algo::dt, 0.4}};
  Warnings w;
  const auto rows = improvement_report(t, &w);
  REQUIRE(rows.size() == 4);
  const auto find = [&](const std::string& v, Algo a) {
    return *std::find_if(rows.begin(), rows.end(), [&](const auto& r) { return r.video_id == v && r.algo == a; });
  };
  CHECK(*find("v1", Algo::dp).percent == doctest::Approx(12.0));
  CHECK(*find("v1", Algo::skr).percent == 0.0);
  CHECK_FALSE(find("v3", Algo::dt).percent);
  REQUIRE(w.size() == 1);
  CHECK(w[0].find("v2") != std::string::npos);
  const auto csv = improvement_csv(rows, "accuracy");
  CHECK(csv.rfind("video,algo,metric,percent_vs_skr\n", 0) == 0);
  CHECK(csv.find("v3,dt,accuracy,NA") != std::string::npos);
}

TEST_CASE("config validation") {
  EvalConfig c;
  c.folds = 2;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.w_grid = {30, 10};
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.b_grid = {-1.0, 0.0};
  CHECK_THROWS_AS(c.validate(), Error);
}
