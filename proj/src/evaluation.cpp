#include "clickmine/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace clickmine {

using ojson = nlohmann::ordered_json;

std::vector<double> default_width_grid() {
  std::vector<double> w = {5, 10, 15, 20};
  for (int x = 30; x <= 600; x += 15) w.push_back(x);
  return w;
}

std::vector<double> default_bias_grid() {
  std::vector<double> b = {0.0};
  for (int e = -60; e <= 0; e += 2) b.push_back(std::ldexp(1.0, e));
  return b;
}

void EvalConfig::validate() const {
  if (iterations < 1) throw Error("iterations must be at least 1");
  if (folds < 3) throw Error("nested tuning needs at least 3 folds");
  if (w_grid.empty() || b_grid.empty()) throw Error("tuning grid is empty");
  if (!std::is_sorted(w_grid.begin(), w_grid.end()) || !std::is_sorted(b_grid.begin(), b_grid.end()))
    throw Error("tuning grids must be ascending");
  if (!(w_grid.front() > 0.0)) throw Error("widths must be positive");
  if (!(b_grid.front() >= 0.0)) throw Error("biases must be non-negative");
}

std::vector<GridPoint> tuning_grid(const EvalConfig& cfg) {
  std::vector<GridPoint> out;
  out.reserve(cfg.w_grid.size() * cfg.b_grid.size());
  for (std::size_t i = 0; i < cfg.w_grid.size(); ++i)
    for (std::size_t j = 0; j < cfg.b_grid.size(); ++j) out.push_back({i, j, cfg.w_grid[i], cfg.b_grid[j]});
  return out;
}

void Confusion::add(int predicted, int truth) {
  if (truth == 1)
    ++(predicted == 1 ? tp : fn);
  else
    ++(predicted == 1 ? fp : tn);
}

Confusion& Confusion::operator+=(const Confusion& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricRow metrics(const Confusion& c) {
  MetricRow m;
  m.counts = c;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.specificity = ratio(c.tn, c.tn + c.fp);
  const double s = m.precision + m.recall;
  m.f1 = s > 0.0 ? 2.0 * m.precision * m.recall / s : 0.0;
  return m;
}

std::optional<Folds> stratified_folds(std::span<const int> labels, int k, std::size_t min_class_samples, Rng& rng) {
  if (k < 1) throw Error("fold count must be positive");
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error("stratified_folds: unlabeled pair");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  if (by_class[0].size() < min_class_samples || by_class[1].size() < min_class_samples) return std::nullopt;

  Folds folds(static_cast<std::size_t>(k));
  std::size_t deal = 0;
  for (auto& members : by_class) {
    shuffle(members, rng);
    for (std::size_t idx : members) folds[deal++ % folds.size()].push_back(idx);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

void check_folds(const Folds& folds, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& f : folds)
    for (std::size_t i : f) {
      if (i >= n) throw Error("fold hygiene: index outside the corpus");
      if (seen[i]++) throw Error("fold hygiene: pair assigned to two folds");
    }
  for (std::size_t i = 0; i < n; ++i)
    if (!seen[i]) throw Error("fold hygiene: pair missing from every fold");
}

VideoData prepare_video(const std::vector<Trajectory>& pairs, const EvalConfig& cfg) {
  VideoData d;
  if (!pairs.empty()) d.video_id = pairs.front().video_id;
  for (const auto& t : pairs) {
    if (t.video_id != d.video_id) throw Error("prepare_video: pairs from more than one video");
    d.labels.push_back(t.cfa);
  }
  d.by_width.reserve(cfg.w_grid.size());
  for (double w : cfg.w_grid) d.by_width.push_back(encode_corpus(pairs, w, cfg.mode));
  return d;
}

namespace {

std::vector<const PositionSequence*> gather(const std::vector<PositionSequence>& seqs,
                                            const std::vector<std::size_t>& idx) {
  std::vector<const PositionSequence*> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(&seqs[i]);
  return out;
}

/// Confusion counts per bias for one inner round at one width.
std::vector<Confusion> score_round(const VideoData& data, const Folds& folds, std::size_t round,
                                   std::size_t w_index, Algo algo, const EvalConfig& cfg, std::uint64_t seed) {
  std::vector<std::size_t> fit;
  for (std::size_t f = 0; f < folds.size(); ++f)
    if (f != round) fit.insert(fit.end(), folds[f].begin(), folds[f].end());
  const auto& seqs = data.by_width[w_index];
  const auto ptrs = gather(seqs, fit);
  const Model m = train(algo, std::span<const PositionSequence* const>(ptrs), cfg.model);

  const auto& val = folds[round];
  std::vector<std::array<double, 2>> ll;
  ll.reserve(val.size());
  for (std::size_t i : val) ll.push_back(log_likelihood(m, seqs[i]));

  Rng rng(derive_seed(seed, round, w_index));
  std::vector<Confusion> out(cfg.b_grid.size());
  for (std::size_t b = 0; b < cfg.b_grid.size(); ++b)
    for (std::size_t n = 0; n < val.size(); ++n) {
      const auto pred = map_decide(ll[n][0], ll[n][1], m.g, cfg.b_grid[b], rng);
      out[b].add(pred.cls, data.labels[val[n]]);
    }
  return out;
}

TuneResult select(const std::vector<std::vector<std::vector<Confusion>>>& conf, const EvalConfig& cfg) {
  // conf[round][w][b]
  const auto grid = tuning_grid(cfg);
  TuneResult res;
  res.mean_accuracy.resize(grid.size());
  res.feasible.resize(grid.size());
  const double rounds = static_cast<double>(conf.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    Confusion pooled;
    double acc = 0.0;
    for (const auto& r : conf) {
      const auto& c = r[grid[g].w_index][grid[g].b_index];
      acc += metrics(c).accuracy;
      pooled += c;
    }
    res.mean_accuracy[g] = acc / rounds;
    const auto m = metrics(pooled);
    res.feasible[g] = m.specificity >= cfg.constraint_floor && m.recall >= cfg.constraint_floor;
  }
  const auto pick = [&](bool constrained) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      if (constrained && !res.feasible[g]) continue;
      if (!best || res.mean_accuracy[g] > res.mean_accuracy[*best]) best = g;
    }
    return best;
  };
  auto best = pick(true);
  if (!best) {
    res.fallback = true;
    best = pick(false);
  }
  res.best = grid[*best];
  res.accuracy = res.mean_accuracy[*best];
  return res;
}

void check_tune_inputs(const VideoData& data, const Folds& train_folds, Algo algo, const EvalConfig& cfg) {
  if (algo == Algo::skr) throw Error("SKR has no tunable parameters");
  if (train_folds.size() < 2) throw Error("tuning needs at least two training folds");
  if (data.by_width.size() != cfg.w_grid.size()) throw Error("video data encoded on a different width grid");
}

}  // namespace

TuneResult tune_serial(const VideoData& data, const Folds& train_folds, Algo algo, const EvalConfig& cfg,
                       std::uint64_t seed) {
  check_tune_inputs(data, train_folds, algo, cfg);
  std::vector<std::vector<std::vector<Confusion>>> conf(train_folds.size(),
                                                        std::vector<std::vector<Confusion>>(cfg.w_grid.size()));
  for (std::size_t r = 0; r < train_folds.size(); ++r)
    for (std::size_t w = 0; w < cfg.w_grid.size(); ++w)
      conf[r][w] = score_round(data, train_folds, r, w, algo, cfg, seed);
  return select(conf, cfg);
}

TuneResult tune(const VideoData& data, const Folds& train_folds, Algo algo, const EvalConfig& cfg,
                std::uint64_t seed) {
  check_tune_inputs(data, train_folds, algo, cfg);
  const std::size_t rounds = train_folds.size();
  const std::size_t widths = cfg.w_grid.size();
  std::vector<std::vector<std::vector<Confusion>>> conf(rounds, std::vector<std::vector<Confusion>>(widths));
  std::vector<std::string> errors(rounds * widths);
  const auto tasks = static_cast<std::ptrdiff_t>(rounds * widths);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t t = 0; t < tasks; ++t) {
    const auto r = static_cast<std::size_t>(t) / widths;
    const auto w = static_cast<std::size_t>(t) % widths;
    try {
      conf[r][w] = score_round(data, train_folds, r, w, algo, cfg, seed);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(t)] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw Error(e);
  return select(conf, cfg);
}

namespace {

IterationResult run_iteration(const VideoData& data, Algo algo, const EvalConfig& cfg, std::uint64_t seed,
                              int iteration, bool parallel_tune) {
  IterationResult out;
  try {
    Rng fold_rng(derive_seed(seed, static_cast<std::uint64_t>(iteration), 0));
    auto folds = stratified_folds(data.labels, cfg.folds, 0, fold_rng);
    check_folds(*folds, data.labels.size());
    const std::vector<std::size_t> test = folds->back();
    folds->pop_back();

    std::vector<std::size_t> fit;
    for (const auto& f : *folds) fit.insert(fit.end(), f.begin(), f.end());
    std::sort(fit.begin(), fit.end());

    Confusion c;
    if (algo == Algo::skr) {
      const auto ptrs = gather(data.by_width.front(), fit);
      const Model m = train(Algo::skr, std::span<const PositionSequence* const>(ptrs), cfg.model);
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(iteration), 2));
      for (std::size_t i : test) c.add(skr_predict(m.g[1], rng), data.labels[i]);
      out.width_s = std::nan("");
      out.bias = std::nan("");
    } else {
      const auto tuned = parallel_tune
                             ? tune(data, *folds, algo, cfg, derive_seed(seed, static_cast<std::uint64_t>(iteration), 1))
                             : tune_serial(data, *folds, algo, cfg,
                                           derive_seed(seed, static_cast<std::uint64_t>(iteration), 1));
      out.width_s = tuned.best.width_s;
      out.bias = tuned.best.bias;
      out.fallback = tuned.fallback;
      const auto& seqs = data.by_width[tuned.best.w_index];
      const auto ptrs = gather(seqs, fit);
      const Model m = train(algo, std::span<const PositionSequence* const>(ptrs), cfg.model);
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(iteration), 3));
      for (std::size_t i : test) {
        const auto ll = log_likelihood(m, seqs[i]);
        c.add(map_decide(ll[0], ll[1], m.g, tuned.best.bias, rng).cls, data.labels[i]);
      }
    }
    out.test = metrics(c);
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

Summary summarize(const std::vector<double>& v) {
  return {stats::mean(v), stats::sample_sd(v)};
}

VideoReport assemble(const VideoData& data, Algo algo, std::vector<IterationResult> iters) {
  VideoReport rep;
  rep.video_id = data.video_id;
  rep.algo = algo;
  rep.iterations = std::move(iters);
  std::vector<double> acc, f1, w, b;
  for (const auto& it : rep.iterations) {
    if (!it.error.empty()) {
      ++rep.failures;
      continue;
    }
    if (it.fallback) ++rep.fallbacks;
    acc.push_back(it.test.accuracy);
    f1.push_back(it.test.f1);
    if (algo != Algo::skr) {
      w.push_back(it.width_s);
      b.push_back(it.bias);
    }
  }
  rep.accuracy = summarize(acc);
  rep.f1 = summarize(f1);
  rep.width = summarize(w);
  rep.bias = summarize(b);
  return rep;
}

std::optional<VideoReport> excluded_report(const VideoData& data, Algo algo, const EvalConfig& cfg) {
  std::size_t n1 = 0;
  for (int l : data.labels) n1 += l == 1;
  const std::size_t n0 = data.labels.size() - n1;
  if (n0 >= cfg.min_class_samples && n1 >= cfg.min_class_samples) return std::nullopt;
  VideoReport rep;
  rep.video_id = data.video_id;
  rep.algo = algo;
  rep.excluded = true;
  return rep;
}

}  // namespace

VideoReport evaluate_video_serial(const VideoData& data, Algo algo, const EvalConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (auto ex = excluded_report(data, algo, cfg)) return *ex;
  std::vector<IterationResult> iters(static_cast<std::size_t>(cfg.iterations));
  for (int i = 0; i < cfg.iterations; ++i)
    iters[static_cast<std::size_t>(i)] = run_iteration(data, algo, cfg, seed, i, false);
  return assemble(data, algo, std::move(iters));
}

VideoReport evaluate_video(const VideoData& data, Algo algo, const EvalConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (auto ex = excluded_report(data, algo, cfg)) return *ex;
  std::vector<IterationResult> iters(static_cast<std::size_t>(cfg.iterations));
  // Iterations run in parallel; the tuning loop inside each one is then a
  // nested region and stays on its thread.
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < cfg.iterations; ++i)
    iters[static_cast<std::size_t>(i)] = run_iteration(data, algo, cfg, seed, i, true);
  return assemble(data, algo, std::move(iters));
}

stats::TestResult compare_algorithms(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 3 || b.size() < 3) throw Error("insufficient samples: need at least 3 videos per algorithm");
  return stats::wrs_test(a, b);
}

std::vector<ImprovementRow> improvement_report(const MetricTable& table, Warnings* warnings) {
  std::vector<ImprovementRow> rows;
  for (const auto& [video, by_algo] : table) {
    const auto base = by_algo.find(Algo::skr);
    if (base == by_algo.end()) {
      if (warnings) warnings->push_back("video " + video + " has no SKR baseline; skipped");
      continue;
    }
    for (const auto& [algo, value] : by_algo) {
      ImprovementRow r{video, algo, std::nullopt};
      if (base->second != 0.0) r.percent = (value - base->second) / base->second * 100.0;
      rows.push_back(r);
    }
  }
  return rows;
}

std::string improvement_csv(const std::vector<ImprovementRow>& rows, const std::string& metric) {
  std::ostringstream out;
  out << "video,algo,metric,percent_vs_skr\n";
  for (const auto& r : rows) {
    out << r.video_id << ',' << to_string(r.algo) << ',' << metric << ',';
    if (r.percent)
      out << ojson(*r.percent).dump();
    else
      out << "NA";
    out << '\n';
  }
  return out.str();
}

std::string serialize_reports(const std::vector<VideoReport>& reports) {
  const auto num = [](double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); };
  ojson arr = ojson::array();
  for (const auto& r : reports) {
    ojson j;
    j["video"] = r.video_id;
    j["algo"] = std::string(to_string(r.algo));
    j["excluded"] = r.excluded;
    if (!r.excluded) {
      const bool tuned = r.algo != Algo::skr;
      j["acc_mean"] = num(r.accuracy.mean);
      j["acc_sd"] = num(r.accuracy.sd);
      j["f1_mean"] = num(r.f1.mean);
      j["f1_sd"] = num(r.f1.sd);
      j["w_mean"] = tuned ? num(r.width.mean) : ojson(nullptr);
      j["w_sd"] = tuned ? num(r.width.sd) : ojson(nullptr);
      j["b_mean"] = tuned ? num(r.bias.mean) : ojson(nullptr);
      j["b_sd"] = tuned ? num(r.bias.sd) : ojson(nullptr);
      j["iterations"] = r.iterations.size();
      j["fallbacks"] = r.fallbacks;
      j["failures"] = r.failures;
      ojson errs = ojson::array();
      for (const auto& it : r.iterations)
        if (!it.error.empty()) errs.push_back(it.error);
      if (!errs.empty()) j["errors"] = errs;
    }
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

}  // namespace clickmine
