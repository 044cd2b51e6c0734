// Acceptance runner. Prints one PASS/FAIL line per criterion with its
// runtime, and exits non-zero if any criterion fails.
//
//   acceptance            run everything
//   acceptance 4 7        run only criteria 4 and 7

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "clickmine/cli.hpp"
#include "clickmine/evaluation.hpp"
#include "clickmine/events.hpp"
#include "clickmine/models.hpp"
#include "clickmine/motifs.hpp"
#include "clickmine/parallel.hpp"
#include "clickmine/positions.hpp"
#include "clickmine/stats.hpp"
#include "clickmine/synth.hpp"
#include "oracles.hpp"
#include "pipeline.hpp"

using namespace clickmine;
namespace fs = std::filesystem;

namespace {

const std::string kData = CLICKMINE_TEST_DATA;

int g_failures = 0;

// Objective traces of every EM run made by the other criteria, for 8.
std::vector<std::vector<double>> g_traces;

void report(const std::string& id, bool ok, const std::string& detail, double seconds) {
  std::printf("%s %-3s %s [%.2f s]\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

QuartileTable table(const std::string& name) {
  std::ifstream in(kData + "/" + name);
  return parse_quartiles(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int status = cli::run(std::move(args), out, err);
  if (status != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return status;
}

// ---------------------------------------------------------------------------

void criterion_1() {
  {
    Timer t;
    bool ok = true;
    std::string got;
    for (const auto* name : {"quartiles_fmb.json", "quartiles_ni.json"}) {
      got = render_symbols(quantize({{EventKind::Sb, std::nullopt, 20.0, 0}}, table(name)));
      ok = ok && got == "Sb2";
    }
    report("1a", ok, "Sb l=20 s gives Sb2 under both course tables (last: " + got + ")", t.seconds());
  }
  {
    Timer t;
    const auto got = render_symbols(quantize({{EventKind::Pl, 550.0, 550.0, 0}}, table("quartiles_ni.json")));
    report("1b", got == "Pl3 Pl3 Pl2", "Pl d=550 s under NI quartiles gives " + got, t.seconds());
  }
  {
    Timer t;
    const std::string d = kData + "/worked_example/";
    const auto corpus = cli::load_corpus({d + "clicks.ndjson", d + "submissions.ndjson", d + "catalog.json"}, {});
    const std::vector<int> want{0, 1, 2, 3, 13, 14, 15, 15, 16, 17, 18, 19, 20};
    std::vector<int> got;
    if (corpus.labeled.size() == 1) got = encode_positions(corpus.labeled[0], 15.0).sequence.indices();
    std::string shown;
    for (int i : got) shown += (shown.empty() ? "" : ",") + std::to_string(i);
    report("1c", got == want, "h=300 w=15 position example gives (" + shown + ")", t.seconds());
  }
}

void criterion_2() {
  Timer t;
  const EvalConfig cfg;
  const auto grid = tuning_grid(cfg);
  const bool ok = grid.size() == 1376 && cfg.w_grid.size() == 43 && cfg.b_grid.size() == 32;
  report("2", ok,
         fmt("tuning grid has %zu pairs (%zu widths x %zu biases)", grid.size(), cfg.w_grid.size(),
             cfg.b_grid.size()),
         t.seconds());
}

PositionSequence toy_seq(int cfa, const std::vector<int>& idx, int n, double dwell = 1.0) {
  PositionSequence p;
  p.user_id = "u";
  p.video_id = "v";
  p.cfa = cfa;
  p.width_s = 15.0;
  p.max_index = n;
  for (int i : idx) p.entries.push_back({i, dwell});
  return p;
}

void criterion_3() {
  Timer t;
  std::mt19937_64 gen(3);
  double worst_dp = 0.0, worst_dt = 0.0, worst_row = 0.0, worst_ct = 0.0;
  bool zero_ok = true;
  const auto rel = [](double got, double want) { return std::fabs(got - want) / std::fabs(want); };
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + trial % 2;  // 2 or 3 positions
    std::uniform_int_distribution<int> state(0, n), len(1, 5), count(2, 5);
    std::uniform_real_distribution<double> dwell(0.5, 30.0);
    std::vector<PositionSequence> train;
    const int m = count(gen);
    for (int s = 0; s < m; ++s) {
      std::vector<int> idx(static_cast<std::size_t>(len(gen)));
      for (auto& i : idx) i = state(gen);
      train.push_back(toy_seq(s % 2, idx, n, dwell(gen)));
    }
    ModelConfig cfg;
    cfg.alpha = trial % 3 == 0 ? 0.0 : 0.5;
    const auto dp = train_dp(train, cfg);
    const auto dt = train_dt(train, cfg);
    const auto ct = train_ct(train, cfg);
    for (int c = 0; c < 2; ++c) {
      std::vector<std::vector<int>> raw;
      for (const auto& p : train)
        if (p.cfa == c) raw.push_back(p.indices());
      const auto f = oracle::visit_frequencies(raw, n, cfg.alpha);
      const auto F = oracle::class_frequencies(raw, n, cfg.alpha);
      for (int l = 1; l <= 4; ++l)
        for (const auto& s : oracle::all_sequences(n, l)) {
          const auto p = toy_seq(c, s, n);
          const double want_dp = oracle::product_likelihood(f, s);
          const double want_dt = oracle::transition_likelihood(f, F, s);
          const double got_dp = std::exp(log_likelihood_dp(dp, c, p));
          const double got_dt = std::exp(log_likelihood_dt(dt, c, p));
          if (want_dp == 0.0) zero_ok = zero_ok && got_dp == 0.0;
          else worst_dp = std::max(worst_dp, rel(got_dp, want_dp));
          if (want_dt == 0.0) zero_ok = zero_ok && got_dt == 0.0;
          else worst_dt = std::max(worst_dt, rel(got_dt, want_dt));
        }
      for (const auto& row : dt.cls[c].trans) worst_row = std::max(worst_row, std::fabs(row[0] + row[1] + row[2] + row[3] - 1.0));
      for (const auto& row : ct.cls[c].rates) worst_ct = std::max(worst_ct, std::fabs(row[0] + row[1] + row[2] + row[3]));
    }
  }
  report("3a", zero_ok && worst_dp <= 1e-12 && worst_dt <= 1e-12,
         fmt("DP/DT vs brute-force product: worst relative error %.2e / %.2e (<= 1e-12)", worst_dp, worst_dt),
         t.seconds());
  report("3b", worst_row <= 1e-9, fmt("DT continuation rows sum to 1 within %.2e (<= 1e-9)", worst_row), 0.0);
  report("3c", worst_ct <= 1e-12, fmt("CT generator rows balance within %.2e (<= 1e-12)", worst_ct), 0.0);
}

struct AlgoRun {
  Algo algo;
  double accuracy;
};

std::vector<AlgoRun> evaluate_all(const SynthSpec& spec, std::uint64_t seed, const EvalConfig& cfg) {
  const auto pairs = testing_pipeline::synth_pairs(spec, seed).labeled.at(0);
  const auto data = prepare_video(pairs, cfg);
  std::vector<AlgoRun> out;
  for (Algo a : {Algo::dp, Algo::dt, Algo::ct, Algo::skr}) {
    const auto r = evaluate_video(data, a, cfg, derive_seed(seed, 77));
    out.push_back({a, r.excluded ? std::nan("") : r.accuracy.mean});
  }
  return out;
}

void criterion_4() {
  const EvalConfig cfg;  // N = 10, K = 5, full grid
  {
    Timer t;
    SynthSpec spec;
    spec.n_users = 1000;
    spec.videos[0].fidelity = 0.9;
    const auto runs = evaluate_all(spec, 4, cfg);
    bool ok = true;
    std::string detail;
    for (const auto& r : runs) {
      const bool pass = r.algo == Algo::skr ? std::fabs(r.accuracy - 0.5) <= 0.05 : r.accuracy >= 0.80;
      ok = ok && pass;
      detail += fmt("%s %.3f  ", std::string(to_string(r.algo)).c_str(), r.accuracy);
    }
    report("4a", ok, "planted signal (1000 users, fidelity 0.9): " + detail + "(DP/DT/CT >= 0.80, SKR 0.5 +- 0.05)",
           t.seconds());
  }
  {
    Timer t;
    SynthSpec weak;
    weak.n_users = 400;
    weak.videos[0].fidelity = 0.65;
    std::array<int, 3> wins{0, 0, 0};
    const int replicates = 20;
    for (int r = 0; r < replicates; ++r) {
      const auto runs = evaluate_all(weak, 4000 + static_cast<std::uint64_t>(r), cfg);
      for (std::size_t k = 0; k < 3; ++k) wins[k] += runs[k].accuracy > runs[3].accuracy;
    }
    const int need = 18;  // 90% of 20
    report("4b", *std::min_element(wins.begin(), wins.end()) >= need,
           fmt("weak signal (400 users, fidelity 0.65): beats SKR in DP %d, DT %d, CT %d of %d replicates (>= %d)",
               wins[0], wins[1], wins[2], replicates, need),
           t.seconds());
  }
}

MotifConfig motif_config() {
  MotifConfig cfg;
  cfg.widths = {4};
  cfg.replicates = 50;
  return cfg;
}

void criterion_5() {
  const auto cfg = motif_config();
  const int runs = 20;
  {
    Timer t;
    SymbolSynthSpec spec;  // Pl2 Pa4 Pl2 Pa4 in 20% of 500 sequences
    int recovered = 0;
    for (int r = 0; r < runs; ++r) {
      const auto synth = synthesize_symbols(spec, 5000 + static_cast<std::uint64_t>(r));
      const auto res = discover_motifs(synth.sequences, cfg, 6000 + static_cast<std::uint64_t>(r));
      bool hit = false;
      for (const auto& m : res.candidates) {
        g_traces.push_back(m.objective_trace);
        std::vector<Symbol> argmax;
        for (const auto& row : m.params.pspm)
          argmax.push_back(symbol_at(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin())));
        hit = hit || (argmax == spec.motif && m.e_value <= 0.05);
      }
      recovered += hit;
    }
    report("5a", recovered >= 18,
           fmt("planted Pl2 Pa4 Pl2 Pa4 recovered with e <= 0.05 in %d of %d runs (>= 18; M = %d)", recovered, runs,
               cfg.replicates),
           t.seconds());
  }
  {
    Timer t;
    SymbolSynthSpec noise;
    noise.insertion_rate = 0.0;
    int passing = 0;
    for (int r = 0; r < runs; ++r) {
      const auto synth = synthesize_symbols(noise, 7000 + static_cast<std::uint64_t>(r));
      const auto res = discover_motifs(synth.sequences, cfg, 8000 + static_cast<std::uint64_t>(r));
      for (const auto& m : res.candidates) g_traces.push_back(m.objective_trace);
      passing += !res.motifs.empty();
    }
    report("5b", passing <= 1, fmt("pure-noise corpora with a passing motif: %d of %d (<= 1)", passing, runs),
           t.seconds());
  }
}

void criterion_6() {
  {
    Timer t;
    std::mt19937_64 gen(6);
    std::size_t cases = 0, mismatches = 0;
    for (std::size_t total = 2; total <= 12; ++total)
      for (std::size_t na = 1; na < total; ++na)
        for (int draw = 0; draw < 20; ++draw) {
          // Alternate untied and heavily tied samples.
          std::uniform_int_distribution<int> v(0, draw % 2 == 0 ? 1000 : 4);
          std::vector<double> a(na), b(total - na);
          for (auto& x : a) x = v(gen);
          for (auto& x : b) x = v(gen);
          const auto res = stats::wrs_test(a, b);
          std::vector<double> pooled = a;
          pooled.insert(pooled.end(), b.begin(), b.end());
          const double want = oracle::rank_sum_p_enumerated(stats::midranks(pooled), na);
          ++cases;
          mismatches += !(res.method == stats::Method::wrs_exact && res.p_value == want);
        }
    report("6a", mismatches == 0,
           fmt("WRS exact p equals rank-assignment enumeration in %zu of %zu cases (n_a + n_b <= 12)",
               cases - mismatches, cases),
           t.seconds());
  }
  {
    Timer t;
    double worst = 0.0, worst_ge5 = 0.0;
    int wx1 = 0, wn1 = 0, wx0 = 0, wn0 = 0;
    for (int n1 = 1; n1 <= 10; ++n1)
      for (int n0 = 1; n0 <= 10; ++n0)
        for (int x1 = 0; x1 <= n1; ++x1)
          for (int x0 = 0; x0 <= n0; ++x0) {
            const double got = stats::two_prop_test(static_cast<std::uint64_t>(x1), static_cast<std::uint64_t>(n1),
                                                    static_cast<std::uint64_t>(x0), static_cast<std::uint64_t>(n0))
                                   .p_value;
            const double gap = std::fabs(got - oracle::z_test_exact(x1, n1, x0, n0));
            if (gap > worst) {
              worst = gap;
              wx1 = x1, wn1 = n1, wx0 = x0, wn0 = n0;
            }
            if (n1 >= 5 && n0 >= 5) worst_ge5 = std::max(worst_ge5, gap);
          }
    report("6b", worst <= 0.15,
           fmt("two-proportion z p within %.3f of exact enumeration for n <= 10 (<= 0.15; worst at %d/%d vs %d/%d; "
               "%.3f when both n >= 5)",
               worst, wx1, wn1, wx0, wn0, worst_ge5),
           t.seconds());
  }
}

void criterion_7() {
  {
    Timer t;
    const fs::path root = fs::temp_directory_path() / ("clickmine_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    const auto dir = [&](const std::string& name) { return (root / name).string(); };
    bool ok = invoke({"--seed", "70", "--out", dir("data"), "synth", "--users", "500"}) == 0;
    ok = ok && invoke({"--seed", "71", "--out", dir("sym"), "synth", "--symbols"}) == 0;
    const std::vector<std::string> inputs{"--clicks", dir("data") + "/clicks.ndjson", "--submissions",
                                          dir("data") + "/submissions.ndjson", "--catalog",
                                          dir("data") + "/catalog.json"};
    std::vector<std::string> outputs;
    int k = 0;
    for (const auto* jobs : {"1", "8", "1"}) {
      const std::string out = dir("run" + std::to_string(k++));
      auto args = std::vector<std::string>{"--seed", "72", "--jobs", jobs, "--out", out, "predict"};
      args.insert(args.end(), inputs.begin(), inputs.end());
      ok = ok && invoke(args) == 0;
      ok = ok && invoke({"--seed", "73", "--jobs", jobs, "--out", out, "motifs", "--sequences",
                         dir("sym") + "/sequences.ndjson", "--widths", "4,5", "--replicates", "10"}) == 0;
      std::string blob;
      for (const auto* f : {"report.json", "comparisons.json", "improvement.csv", "motifs.json"})
        blob += slurp(fs::path(out) / f) + '\0';
      outputs.push_back(blob);
    }
    parallel::set_jobs(0);
    const bool same = ok && outputs[0] == outputs[1] && outputs[0] == outputs[2] && outputs[0].size() > 100;
    report("7a", same, "predict + motifs outputs byte-identical across repeated runs and --jobs 1 vs 8", t.seconds());
    fs::remove_all(root);
  }
  {
    Timer t;
    // Independent hygiene check of the folds each iteration uses, plus the
    // library assertion inside every evaluation.
    EvalConfig cfg;
    cfg.iterations = 2;
    cfg.w_grid = {15.0, 30.0, 60.0};
    cfg.b_grid = {0.0, 1.0 / 1024.0, 1.0};
    cfg.min_class_samples = 10;
    SynthSpec spec;
    spec.n_users = 120;
    int violations = 0, asserts = 0;
    for (int e = 0; e < 100; ++e) {
      const auto seed = 9000 + static_cast<std::uint64_t>(e);
      const auto pairs = testing_pipeline::synth_pairs(spec, seed).labeled.at(0);
      const auto data = prepare_video(pairs, cfg);
      const auto rep = evaluate_video(data, Algo::dp, cfg, seed);
      for (const auto& it : rep.iterations) asserts += !it.error.empty();
      for (int iter = 0; iter < cfg.iterations; ++iter) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(iter), 0));
        const auto folds = stratified_folds(data.labels, cfg.folds, 0, rng);
        std::vector<int> seen(data.labels.size(), 0);
        std::array<std::size_t, 2> lo{SIZE_MAX, SIZE_MAX}, hi{0, 0};
        for (const auto& f : *folds) {
          std::array<std::size_t, 2> c{0, 0};
          for (std::size_t i : f) {
            ++seen[i];
            ++c[static_cast<std::size_t>(data.labels[i])];
          }
          for (std::size_t y = 0; y < 2; ++y) lo[y] = std::min(lo[y], c[y]), hi[y] = std::max(hi[y], c[y]);
        }
        violations += std::any_of(seen.begin(), seen.end(), [](int s) { return s != 1; });
        violations += hi[0] - lo[0] > 1 || hi[1] - lo[1] > 1;
      }
    }
    report("7b", violations == 0 && asserts == 0,
           fmt("100 seeded evaluations: %d fold disjointness/coverage/stratification violations, %d library fold "
               "asserts fired",
               violations, asserts),
           t.seconds());
  }
}

void criterion_8() {
  Timer t;
  double worst = 0.0;
  std::size_t steps = 0;
  for (const auto& tr : g_traces) {
    if (tr.size() > 1) worst = std::max(worst, max_objective_drop(tr));
    steps += tr.size();
  }
  report("8", !g_traces.empty() && worst <= 1e-9,
         fmt("EM objective never decreased by more than %.2e over %zu runs, %zu iterations (<= 1e-9)", worst,
             g_traces.size(), steps),
         t.seconds());
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const auto want = [&](int c) { return only.empty() || only.count(c) > 0; };
  const std::vector<std::function<void()>> criteria{criterion_1, criterion_2, criterion_3, criterion_4,
                                                    criterion_5, criterion_6, criterion_7};
  Timer total;
  try {
    for (int c = 1; c <= 7; ++c)
      if (want(c)) criteria[static_cast<std::size_t>(c - 1)]();
    // Monotonicity pools the traces of criterion 5.
    if (want(8)) {
      if (!want(5)) criterion_5();
      criterion_8();
    }
  } catch (const std::exception& e) {
    std::printf("FAIL --  aborted: %s\n", e.what());
    ++g_failures;
  }
  std::printf("%d criterion line(s) failed; total %.1f s\n", g_failures, total.seconds());
  return g_failures == 0 ? 0 : 1;
}
