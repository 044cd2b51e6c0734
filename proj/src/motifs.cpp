#include "clickmine/motifs.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include "clickmine/parallel.hpp"
#include "clickmine/stats.hpp"
#include "json.hpp"

namespace clickmine {

using ojson = nlohmann::ordered_json;

namespace {

constexpr double kLambdaMin = 1e-6;
constexpr double kMonotoneTolerance = 1e-9;

}  // namespace

void MotifConfig::validate() const {
  if (widths.empty()) throw Error("no motif widths requested");
  for (int w : widths)
    if (w < 4 || w > 10) throw Error("motif width " + std::to_string(w) + " outside 4..10");
  if (replicates < 1) throw Error("replicates required: the E-value needs at least one null corpus");
  if (max_motifs_per_width < 1) throw Error("max motifs per width must be at least 1");
  if (restarts < 1) throw Error("at least one EM restart is required");
  if (frequent_starts + random_starts < 1) throw Error("no EM starting points configured");
  if (max_iterations < 2) throw Error("max iterations must be at least 2");
  if (!(distance >= 0.0) || !(tolerance >= 0.0)) throw Error("EM stopping thresholds must be non-negative");
  if (!(prior_strength > 0.0)) throw Error("prior strength must be positive");
  if (!(lambda_max > kLambdaMin && lambda_max < 1.0)) throw Error("lambda_max must lie in (1e-6, 1)");
  if (!(consensus_threshold > 0.0 && consensus_threshold <= 1.0)) throw Error("consensus threshold outside (0, 1]");
  if (!(e_threshold >= 0.0)) throw Error("E-value threshold must be non-negative");
}

MotifCorpus MotifCorpus::from(const std::vector<EventSequence>& seqs) {
  MotifCorpus c;
  for (const auto& s : seqs) {
    c.offset.push_back(c.symbols.size());
    c.length.push_back(s.symbols.size());
    for (Symbol x : s.symbols) c.symbols.push_back(static_cast<std::uint8_t>(index(x)));
  }
  return c;
}

std::size_t MotifCorpus::windows(int width) const {
  std::size_t n = 0;
  const auto w = static_cast<std::size_t>(width);
  for (std::size_t len : length)
    if (len >= w) n += len - w + 1;
  return n;
}

Profile background_frequencies(const MotifCorpus& corpus) {
  Profile b;
  b.fill(1.0);
  for (auto x : corpus.symbols) b[x] += 1.0;
  const double total = std::accumulate(b.begin(), b.end(), 0.0);
  for (auto& v : b) v /= total;
  return b;
}

namespace {

/// Sufficient statistics of one E-step over a range of sequences.
struct Partial {
  std::vector<double> counts;  // width * alphabet
  double log_lik = 0.0;
  double sum_site = 0.0;
  double sum_weight = 0.0;

  explicit Partial(int width) : counts(static_cast<std::size_t>(width) * kAlphabetSize, 0.0) {}

  void merge(const Partial& o) {
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
    log_lik += o.log_lik;
    sum_site += o.sum_site;
    sum_weight += o.sum_weight;
  }
};

/// Shared, read-only state for one pass.
struct Pass {
  const MotifCorpus& corpus;
  const WindowWeights& weights;
  const MotifParams& theta;
  const MotifConfig& cfg;
  int width;
  std::vector<std::size_t> window_base;  // first window index per sequence
  std::vector<double> log_ratio;         // width * alphabet: log P - log b
  std::vector<double> ratio;             // exp(log_ratio)

  Pass(const MotifCorpus& c, const WindowWeights& w, const MotifParams& t, const Profile& bg, const MotifConfig& cf)
      : corpus(c), weights(w), theta(t), cfg(cf), width(static_cast<int>(t.pspm.size())) {
    window_base.resize(c.size());
    std::size_t n = 0;
    for (std::size_t s = 0; s < c.size(); ++s) {
      window_base[s] = n;
      if (c.length[s] >= static_cast<std::size_t>(width)) n += c.length[s] - static_cast<std::size_t>(width) + 1;
    }
    if (!w.empty() && w.size() != n) throw Error("window weights do not match the corpus");
    log_ratio.resize(static_cast<std::size_t>(width) * kAlphabetSize);
    for (int i = 0; i < width; ++i)
      for (std::size_t a = 0; a < kAlphabetSize; ++a)
        log_ratio[static_cast<std::size_t>(i) * kAlphabetSize + a] =
            std::log(t.pspm[static_cast<std::size_t>(i)][a]) - std::log(bg[a]);
    ratio.resize(log_ratio.size());
    for (std::size_t k = 0; k < ratio.size(); ++k) ratio[k] = std::exp(log_ratio[k]);
  }

  std::size_t num_windows(std::size_t s) const {
    const auto w = static_cast<std::size_t>(width);
    return corpus.length[s] >= w ? corpus.length[s] - w + 1 : 0;
  }

  double weight(std::size_t window) const { return weights.empty() ? 1.0 : weights[window]; }

  double window_log_ratio(std::size_t s, std::size_t j) const {
    const std::uint8_t* x = corpus.symbols.data() + corpus.offset[s] + j;
    double r = 0.0;
    for (int i = 0; i < width; ++i) r += log_ratio[static_cast<std::size_t>(i) * kAlphabetSize + x[i]];
    return r;
  }

  /// Product form of exp(window_log_ratio). With width <= 10 and smoothed
  /// rows the product stays far inside the double range.
  double window_ratio(std::size_t s, std::size_t j) const {
    const std::uint8_t* x = corpus.symbols.data() + corpus.offset[s] + j;
    double r = 1.0;
    for (int i = 0; i < width; ++i) r *= ratio[static_cast<std::size_t>(i) * kAlphabetSize + x[i]];
    return r;
  }

  void add_counts(Partial& p, std::size_t s, std::size_t j, double z) const {
    const std::uint8_t* x = corpus.symbols.data() + corpus.offset[s] + j;
    for (int i = 0; i < width; ++i) p.counts[static_cast<std::size_t>(i) * kAlphabetSize + x[i]] += z;
  }

  /// E-step over one sequence; when `post` is set, writes window posteriors.
  void sequence(std::size_t s, Partial& p, double* post = nullptr) const {
    const std::size_t m = num_windows(s);
    if (m == 0) return;
    const std::size_t base = window_base[s];
    const double lam = theta.lambda;

    if (cfg.mode == SiteMode::any_number) {
      // Unit-weight windows share one log of their product; frexp keeps the
      // running product in range.
      double product = 1.0;
      int exponent = 0;
      for (std::size_t j = 0; j < m; ++j) {
        const double e = weight(base + j);
        const double site = lam * window_ratio(s, j);
        const double denom = (1.0 - lam) + site;
        const double z = site / denom;
        if (post) post[j] = z;
        if (e == 0.0) continue;
        if (e == 1.0) {
          int k = 0;
          product = std::frexp(product * denom, &k);
          exponent += k;
        } else {
          p.log_lik += e * std::log(denom);
        }
        p.sum_site += e * z;
        p.sum_weight += e;
        add_counts(p, s, j, e * z);
      }
      p.log_lik += std::log(product) + exponent * std::numbers::ln2;
      return;
    }

    const double log_lam = std::log(lam);
    const double log_rest = std::log1p(-lam);
    // Zero or one site: a site window j is a motif draw with weight e_j and
    // background otherwise, so erased windows cannot host a new motif.
    const double log_site = log_lam - std::log(static_cast<double>(m));
    std::vector<double> motif_term(m);
    double log_sum = kNegInf;
    for (std::size_t j = 0; j < m; ++j) {
      const double e = weight(base + j);
      motif_term[j] = e > 0.0 ? std::log(e) + window_log_ratio(s, j) : kNegInf;
      const double erased = e < 1.0 ? std::log1p(-e) : kNegInf;
      log_sum = log_add(log_sum, log_add(motif_term[j], erased));
    }
    const double log_denom = log_add(log_rest, log_site + log_sum);
    p.log_lik += log_denom;
    p.sum_site += -std::expm1(log_rest - log_denom);
    p.sum_weight += 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double z = std::exp(log_site + motif_term[j] - log_denom);
      if (post) post[j] = z;
      if (z > 0.0) add_counts(p, s, j, z);
    }
  }
};

double log_prior(const MotifParams& theta, const Profile& bg, double beta) {
  double lp = 0.0;
  for (const auto& row : theta.pspm)
    for (std::size_t a = 0; a < kAlphabetSize; ++a) lp += beta * bg[a] * std::log(row[a]);
  return lp;
}

StepResult finish(const Partial& p, const MotifParams& theta, const Profile& bg, const MotifConfig& cfg) {
  StepResult r;
  r.log_lik = p.log_lik;
  r.log_prior = log_prior(theta, bg, cfg.prior_strength);
  const std::size_t w = theta.pspm.size();
  r.next.pspm.resize(w);
  for (std::size_t i = 0; i < w; ++i) {
    double total = cfg.prior_strength;
    for (std::size_t a = 0; a < kAlphabetSize; ++a) total += p.counts[i * kAlphabetSize + a];
    for (std::size_t a = 0; a < kAlphabetSize; ++a)
      r.next.pspm[i][a] = (p.counts[i * kAlphabetSize + a] + cfg.prior_strength * bg[a]) / total;
  }
  // lambda_max bounds the per-window site rate; the per-sequence rate of
  // zoops may approach 1.
  const double upper = cfg.mode == SiteMode::any_number ? cfg.lambda_max : 1.0 - kLambdaMin;
  r.next.lambda = p.sum_weight > 0.0 ? std::clamp(p.sum_site / p.sum_weight, kLambdaMin, upper)
                                     : theta.lambda;
  return r;
}

}  // namespace

StepResult em_step_serial(const MotifCorpus& corpus, const WindowWeights& weights, const MotifParams& theta,
                          const Profile& background, const MotifConfig& cfg) {
  const Pass pass(corpus, weights, theta, background, cfg);
  Partial total(pass.width);
  for (std::size_t s = 0; s < corpus.size(); ++s) pass.sequence(s, total);
  return finish(total, theta, background, cfg);
}

StepResult em_step(const MotifCorpus& corpus, const WindowWeights& weights, const MotifParams& theta,
                   const Profile& background, const MotifConfig& cfg) {
  const Pass pass(corpus, weights, theta, background, cfg);
  const std::size_t block = parallel::kReductionBlock;
  const std::size_t blocks = (corpus.size() + block - 1) / block;
  std::vector<Partial> partial(blocks, Partial(pass.width));
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * block;
    const std::size_t hi = std::min(corpus.size(), lo + block);
    for (std::size_t s = lo; s < hi; ++s) pass.sequence(s, partial[static_cast<std::size_t>(b)]);
  }
  Partial total(pass.width);
  for (const auto& p : partial) total.merge(p);
  return finish(total, theta, background, cfg);
}

std::vector<double> site_posteriors(const MotifCorpus& corpus, const WindowWeights& weights,
                                    const MotifParams& theta, const Profile& background, const MotifConfig& cfg) {
  const Pass pass(corpus, weights, theta, background, cfg);
  std::vector<double> post(corpus.windows(pass.width), 0.0);
  Partial scratch(pass.width);
  for (std::size_t s = 0; s < corpus.size(); ++s)
    if (pass.num_windows(s) > 0) pass.sequence(s, scratch, post.data() + pass.window_base[s]);
  return post;
}

double max_objective_drop(const std::vector<double>& trace) {
  double worst = kNegInf;
  for (std::size_t i = 1; i < trace.size(); ++i) worst = std::max(worst, trace[i - 1] - trace[i]);
  return worst;
}

namespace {

using Word = std::vector<std::uint8_t>;

struct Start {
  MotifParams theta;
  std::vector<double> trace;
  double screen = kNegInf;
};

MotifParams params_from_word(const Word& word, double lambda) {
  MotifParams t;
  t.lambda = lambda;
  t.pspm.resize(word.size());
  for (std::size_t i = 0; i < word.size(); ++i) {
    t.pspm[i].fill(0.5 / static_cast<double>(kAlphabetSize - 1));
    t.pspm[i][word[i]] = 0.5;
  }
  return t;
}

std::vector<Word> starting_words(const MotifCorpus& corpus, const WindowWeights& weights, int width,
                                 const MotifConfig& cfg, Rng& rng) {
  const auto w = static_cast<std::size_t>(width);
  std::map<Word, double> freq;
  std::vector<std::pair<std::size_t, std::size_t>> windows;  // (sequence, offset)
  std::size_t idx = 0;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    if (corpus.length[s] < w) continue;
    for (std::size_t j = 0; j + w <= corpus.length[s]; ++j, ++idx) {
      const auto* x = corpus.symbols.data() + corpus.offset[s] + j;
      freq[Word(x, x + w)] += weights.empty() ? 1.0 : weights[idx];
      windows.emplace_back(s, j);
    }
  }
  std::vector<std::pair<Word, double>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<Word> out;
  const auto push = [&](const Word& word) {
    if (std::find(out.begin(), out.end(), word) == out.end()) out.push_back(word);
  };
  for (std::size_t i = 0; i < ranked.size() && static_cast<int>(i) < cfg.frequent_starts; ++i)
    push(ranked[i].first);
  for (int r = 0; r < cfg.random_starts && !windows.empty(); ++r) {
    // Prefer windows that have not been erased.
    std::size_t pick = 0;
    for (int attempt = 0; attempt < 32; ++attempt) {
      pick = static_cast<std::size_t>(rng.below(windows.size()));
      if (weights.empty() || weights[pick] >= 0.5) break;
    }
    const auto [s, j] = windows[pick];
    const auto* x = corpus.symbols.data() + corpus.offset[s] + j;
    push(Word(x, x + w));
  }
  return out;
}

/// Euclidean distance between two PSPMs of equal width.
double pspm_distance(const MotifParams& a, const MotifParams& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.pspm.size(); ++i)
    for (std::size_t k = 0; k < kAlphabetSize; ++k) d += (a.pspm[i][k] - b.pspm[i][k]) * (a.pspm[i][k] - b.pspm[i][k]);
  return std::sqrt(d);
}

}  // namespace

MotifModel fit_motif(const MotifCorpus& corpus, const WindowWeights& weights, int width, const Profile& background,
                     const MotifConfig& cfg, Rng& rng) {
  const std::size_t total_windows = corpus.windows(width);
  if (total_windows == 0) throw Error("no sequence is long enough for motif width " + std::to_string(width));

  double lambda0 = cfg.mode == SiteMode::any_number
                       ? static_cast<double>(corpus.size()) / static_cast<double>(total_windows)
                       : 0.5;
  lambda0 = std::clamp(lambda0, kLambdaMin, cfg.lambda_max);

  // Screen every starting word by two EM iterations, then carry the best
  // `restarts` of them to convergence.
  std::vector<Start> starts;
  for (const auto& word : starting_words(corpus, weights, width, cfg, rng)) {
    Start st;
    st.theta = params_from_word(word, lambda0);
    for (int k = 0; k < 2; ++k) {
      auto r = em_step(corpus, weights, st.theta, background, cfg);
      st.trace.push_back(r.objective());
      st.theta = std::move(r.next);
    }
    st.screen = st.trace.back();
    starts.push_back(std::move(st));
  }
  std::vector<std::size_t> order(starts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return starts[a].screen > starts[b].screen; });
  order.resize(std::min(order.size(), static_cast<std::size_t>(cfg.restarts)));

  MotifModel best;
  double best_obj = kNegInf;
  bool have = false;
  for (std::size_t which : order) {
    Start& st = starts[which];
    MotifParams theta = st.theta;
    MotifParams scored;
    bool converged = false;
    double llr = 0.0;
    do {
      auto r = em_step(corpus, weights, theta, background, cfg);
      const double prev = st.trace.back();
      st.trace.push_back(r.objective());
      llr = r.log_lik;
      scored = theta;
      if (r.objective() - prev < cfg.tolerance * (1.0 + std::fabs(r.objective())) ||
          pspm_distance(theta, r.next) < cfg.distance) {
        converged = true;
        break;
      }
      theta = std::move(r.next);
    } while (static_cast<int>(st.trace.size()) < cfg.max_iterations);
    const double obj = st.trace.back();
    if (!have || obj > best_obj) {
      have = true;
      best_obj = obj;
      best.width = width;
      best.params = scored;
      best.background = background;
      best.llr = llr;
      best.converged = converged;
      best.objective_trace = st.trace;
    }
  }
  return best;
}

namespace {

MotifCorpus sample_null(const MotifCorpus& shape, const Profile& background, Rng& rng) {
  Profile cum;
  std::partial_sum(background.begin(), background.end(), cum.begin());
  MotifCorpus c;
  c.length = shape.length;
  c.offset = shape.offset;
  c.symbols.resize(shape.symbols.size());
  for (auto& x : c.symbols) {
    const double u = rng.uniform() * cum.back();
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    x = static_cast<std::uint8_t>(std::min<std::ptrdiff_t>(it - cum.begin(), kAlphabetSize - 1));
  }
  return c;
}

double null_replicate(const MotifCorpus& shape, int width, const Profile& background, const MotifConfig& cfg,
                      std::uint64_t seed, std::size_t r) {
  Rng sample_rng(derive_seed(seed, r, 0));
  const MotifCorpus null_corpus = sample_null(shape, background, sample_rng);
  Rng fit_rng(derive_seed(seed, r, 1));
  return fit_motif(null_corpus, {}, width, background_frequencies(null_corpus), cfg, fit_rng).llr;
}

}  // namespace

std::vector<double> null_llrs_serial(const MotifCorpus& corpus, int width, const Profile& background,
                                     const MotifConfig& cfg, std::uint64_t seed) {
  if (cfg.replicates < 1) throw Error("replicates required: the E-value needs at least one null corpus");
  std::vector<double> out(static_cast<std::size_t>(cfg.replicates));
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = null_replicate(corpus, width, background, cfg, seed, r);
  return out;
}

std::vector<double> null_llrs(const MotifCorpus& corpus, int width, const Profile& background,
                              const MotifConfig& cfg, std::uint64_t seed) {
  if (cfg.replicates < 1) throw Error("replicates required: the E-value needs at least one null corpus");
  std::vector<double> out(static_cast<std::size_t>(cfg.replicates));
  std::vector<std::string> errors(out.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(out.size()); ++r) {
    try {
      out[static_cast<std::size_t>(r)] =
          null_replicate(corpus, width, background, cfg, seed, static_cast<std::size_t>(r));
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(r)] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw Error(e);
  return out;
}

double null_fraction(const MotifModel& motif, std::span<const double> nulls) {
  if (nulls.empty()) throw Error("replicates required: the E-value needs at least one null corpus");
  std::size_t higher = 0;
  for (double v : nulls) higher += v > motif.llr;
  return static_cast<double>(higher) / static_cast<double>(nulls.size());
}

double e_value(const MotifModel& motif, const std::vector<EventSequence>& corpus, const MotifConfig& cfg,
               std::uint64_t seed) {
  if (cfg.replicates < 1) throw Error("replicates required: the E-value needs at least one null corpus");
  const auto c = MotifCorpus::from(corpus);
  return null_fraction(motif, null_llrs(c, motif.width, background_frequencies(c), cfg, seed));
}

namespace {

/// Background of what erasure left: symbol counts weighted by the position
/// weights, one pseudo-count each. Without this refresh, symbols removed with
/// an erased motif make the remainder look depleted and a broad, flat
/// "motif" gains likelihood from the composition shift alone.
Profile weighted_background(const MotifCorpus& corpus, const std::vector<double>& position_weight) {
  Profile b;
  b.fill(1.0);
  for (std::size_t p = 0; p < corpus.symbols.size(); ++p) b[corpus.symbols[p]] += position_weight[p];
  const double total = std::accumulate(b.begin(), b.end(), 0.0);
  for (auto& v : b) v /= total;
  return b;
}

/// Multiplicative erasure: each position keeps (1 - max posterior of the
/// windows covering it); a window's weight is the smallest over its span.
void erase(const MotifCorpus& corpus, int width, const std::vector<double>& post, std::vector<double>& position_weight,
           WindowWeights& weights) {
  const auto w = static_cast<std::size_t>(width);
  std::vector<double> cover(corpus.symbols.size(), 0.0);
  std::size_t idx = 0;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    if (corpus.length[s] < w) continue;
    for (std::size_t j = 0; j + w <= corpus.length[s]; ++j, ++idx)
      for (std::size_t i = 0; i < w; ++i) {
        auto& c = cover[corpus.offset[s] + j + i];
        c = std::max(c, post[idx]);
      }
  }
  for (std::size_t p = 0; p < cover.size(); ++p) position_weight[p] *= 1.0 - std::min(1.0, cover[p]);
  idx = 0;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    if (corpus.length[s] < w) continue;
    for (std::size_t j = 0; j + w <= corpus.length[s]; ++j, ++idx) {
      double m = 1.0;
      for (std::size_t i = 0; i < w; ++i) m = std::min(m, position_weight[corpus.offset[s] + j + i]);
      weights[idx] = m;
    }
  }
}

}  // namespace

DiscoveryResult discover_motifs(const std::vector<EventSequence>& seqs, const MotifConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::vector<int> widths = cfg.widths;
  std::sort(widths.begin(), widths.end());
  widths.erase(std::unique(widths.begin(), widths.end()), widths.end());

  const auto max_w = static_cast<std::size_t>(widths.back());
  std::size_t usable = 0;
  for (const auto& s : seqs) usable += s.symbols.size() >= max_w;
  if (usable < cfg.min_sequences)
    throw Error("corpus too small: " + std::to_string(usable) + " sequence(s) of length >= " +
                std::to_string(max_w) + ", need " + std::to_string(cfg.min_sequences));

  const auto corpus = MotifCorpus::from(seqs);
  const Profile bg = background_frequencies(corpus);
  DiscoveryResult out;

  for (int w : widths) {
    const auto uw = static_cast<std::uint64_t>(w);
    const auto nulls = null_llrs(corpus, w, bg, cfg, derive_seed(seed, uw, 1));
    WindowWeights weights(corpus.windows(w), 1.0);
    std::vector<double> position_weight(corpus.symbols.size(), 1.0);

    for (int k = 0; k < cfg.max_motifs_per_width; ++k) {
      if (std::all_of(weights.begin(), weights.end(), [](double e) { return e < 1e-6; })) break;
      Rng rng(derive_seed(seed, uw, 2, static_cast<std::uint64_t>(k)));
      const Profile local_bg = k == 0 ? bg : weighted_background(corpus, position_weight);
      MotifModel m = fit_motif(corpus, weights, w, local_bg, cfg, rng);
      m.rank = k;
      m.null_fraction = null_fraction(m, nulls);
      // One search per motif slot of this width shares the null, so scale
      // the tail fraction by the number of slots.
      m.e_value = std::min(1.0, m.null_fraction * static_cast<double>(cfg.max_motifs_per_width));
      const auto cons = consensus(m, cfg.consensus_threshold);
      for (const auto& s : seqs) m.occurrences += find_occurrences(cons, s.symbols).size();

      const double drop = max_objective_drop(m.objective_trace);
      const double scale = 1.0 + std::fabs(m.objective_trace.back());
      if (drop > kMonotoneTolerance * scale) ++out.monotonicity_violations;
      if (!m.converged)
        out.warnings.push_back("width " + std::to_string(w) + " motif " + std::to_string(k + 1) +
                               ": EM stopped at the iteration limit before converging");

      erase(corpus, w, site_posteriors(corpus, weights, m.params, local_bg, cfg), position_weight, weights);
      if (m.e_value <= cfg.e_threshold) out.motifs.push_back(m);
      out.candidates.push_back(std::move(m));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Consensus consensus(const std::vector<Profile>& pspm, double threshold) {
  Consensus c;
  for (const auto& row : pspm) {
    std::vector<Symbol> set;
    for (std::size_t a = 0; a < kAlphabetSize; ++a)
      if (row[a] >= threshold) set.push_back(symbol_at(a));
    std::stable_sort(set.begin(), set.end(), [&](Symbol x, Symbol y) { return row[index(x)] > row[index(y)]; });
    c.push_back(std::move(set));
  }
  return c;
}

Consensus consensus(const MotifModel& motif, double threshold) { return consensus(motif.params.pspm, threshold); }

std::string render_consensus(const Consensus& c) {
  std::string out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i) out += ' ';
    const auto& set = c[i];
    if (set.empty()) {
      out += "⋆";
    } else if (set.size() == 1) {
      out += symbol_name(set[0]);
    } else {
      out += '[';
      for (std::size_t k = 0; k < set.size(); ++k) {
        if (k) out += ' ';
        out += symbol_name(set[k]);
      }
      out += ']';
    }
  }
  return out;
}

std::vector<std::size_t> find_occurrences(const Consensus& c, std::span<const Symbol> seq) {
  std::vector<std::size_t> out;
  if (c.empty() || seq.size() < c.size()) return out;
  for (std::size_t t = 0; t + c.size() <= seq.size(); ++t) {
    bool ok = true;
    for (std::size_t i = 0; i < c.size() && ok; ++i)
      ok = c[i].empty() || std::find(c[i].begin(), c[i].end(), seq[t + i]) != c[i].end();
    if (ok) out.push_back(t);
  }
  return out;
}

std::string_view to_string(MotifGroup g) {
  switch (g) {
    case MotifGroup::Pa: return "Pa";
    case MotifGroup::Sb: return "Sb";
    case MotifGroup::Sf: return "Sf";
    case MotifGroup::Rf: return "Rf";
    case MotifGroup::Pl: return "Pl";
  }
  return "?";
}

MotifGroup motif_group(const Consensus& c, const std::vector<Profile>& pspm) {
  std::array<int, 4> count{};
  std::array<double, 4> mass{};
  for (std::size_t i = 0; i < c.size(); ++i)
    for (Symbol s : c[i]) {
      std::size_t g = 0;
      switch (symbol_kind(s)) {
        case EventKind::Pl: continue;
        case EventKind::Pa: g = 0; break;
        case EventKind::Sb: g = 1; break;
        case EventKind::Sf: g = 2; break;
        default: g = 3; break;
      }
      ++count[g];
      if (i < pspm.size()) mass[g] += pspm[i][index(s)];
    }
  int best = -1;
  for (int g = 0; g < 4; ++g) {
    if (count[static_cast<std::size_t>(g)] == 0) continue;
    if (best < 0) {
      best = g;
      continue;
    }
    const auto gb = static_cast<std::size_t>(best);
    const auto gg = static_cast<std::size_t>(g);
    if (count[gg] > count[gb] || (count[gg] == count[gb] && mass[gg] > mass[gb])) best = g;
  }
  return best < 0 ? MotifGroup::Pl : static_cast<MotifGroup>(best);
}

MotifReport support_and_significance(const MotifModel& motif, const std::vector<EventSequence>& seqs,
                                     double threshold) {
  MotifReport r;
  r.width = motif.width;
  r.pspm = motif.params.pspm;
  r.consensus_sets = consensus(motif, threshold);
  r.consensus = render_consensus(r.consensus_sets);
  r.e_value = motif.e_value;
  r.group = motif_group(r.consensus_sets, r.pspm);

  std::uint64_t n = 0, n0 = 0, n1 = 0, x = 0, x0 = 0, x1 = 0;
  std::map<std::string, std::size_t> per_video;
  for (const auto& s : seqs) {
    const std::size_t occ = find_occurrences(r.consensus_sets, s.symbols).size();
    r.occurrences += occ;
    per_video[s.video_id] += occ;
    const bool has = occ > 0;
    ++n;
    x += has;
    if (s.cfa == 1) {
      ++n1;
      x1 += has;
    } else if (s.cfa == 0) {
      ++n0;
      x0 += has;
    }
  }
  for (const auto& [video, occ] : per_video) {
    r.videos_any += occ >= 1;
    r.videos_10 += occ >= 10;
  }
  r.fs = n ? static_cast<double>(x) / static_cast<double>(n) : 0.0;
  r.fs0 = n0 ? static_cast<double>(x0) / static_cast<double>(n0) : 0.0;
  r.fs1 = n1 ? static_cast<double>(x1) / static_cast<double>(n1) : 0.0;

  if (x0 + x1 == 0) {
    r.degenerate = true;
    r.p_value = 1.0;
    r.p_hat = 0.5;
    return r;
  }
  r.p_hat = stats::wilson_interval(x1, x1 + x0).midpoint();
  if (n0 == 0 || n1 == 0) {
    r.p_value = 1.0;  // one class absent: no contrast to test
    return r;
  }
  const auto t = stats::two_prop_test(x1, n1, x0, n0);
  r.z = t.statistic;
  r.p_value = t.p_value;
  return r;
}

bool is_subsequence(const Consensus& inner, const Consensus& outer) {
  if (inner.empty() || inner.size() > outer.size()) return false;
  for (std::size_t t = 0; t + inner.size() <= outer.size(); ++t)
    if (std::equal(inner.begin(), inner.end(), outer.begin() + static_cast<std::ptrdiff_t>(t))) return true;
  return false;
}

std::vector<MotifReport> filter_motifs(const std::vector<MotifReport>& reports) {
  const auto stronger = [](const MotifReport& a, const MotifReport& b) {
    if (a.fs != b.fs) return a.fs > b.fs;
    if (a.p_value != b.p_value) return a.p_value < b.p_value;
    return a.width > b.width;
  };

  std::vector<MotifReport> kept;
  for (MotifGroup g : {MotifGroup::Pa, MotifGroup::Sb, MotifGroup::Sf, MotifGroup::Rf}) {
    std::vector<MotifReport> group;
    for (const auto& r : reports)
      if (r.group == g) group.push_back(r);
    std::stable_sort(group.begin(), group.end(), stronger);
    for (std::size_t i = 0; i < group.size(); ++i)
      if (i < 10 || group[i].p_value <= 0.05) kept.push_back(group[i]);
  }

  // Total order for containment conflicts; exact ties keep the earlier one.
  const auto beats = [&](std::size_t i, std::size_t j) {
    return stronger(kept[i], kept[j]) || (!stronger(kept[j], kept[i]) && i < j);
  };
  std::vector<bool> drop(kept.size(), false);
  for (std::size_t i = 0; i < kept.size(); ++i)
    for (std::size_t j = 0; j < kept.size() && !drop[i]; ++j) {
      if (i == j) continue;
      const auto& a = kept[i].consensus_sets;
      const auto& b = kept[j].consensus_sets;
      if ((is_subsequence(a, b) || is_subsequence(b, a)) && beats(j, i)) drop[i] = true;
    }
  std::vector<MotifReport> out;
  for (std::size_t i = 0; i < kept.size(); ++i)
    if (!drop[i]) out.push_back(kept[i]);
  return out;
}

std::string serialize_motifs(const std::vector<MotifReport>& reports) {
  ojson arr = ojson::array();
  for (const auto& r : reports) {
    ojson j;
    j["width"] = r.width;
    j["pspm"] = r.pspm;
    j["consensus"] = r.consensus;
    j["e_value"] = r.e_value;
    j["fs"] = r.fs;
    j["fs0"] = r.fs0;
    j["fs1"] = r.fs1;
    j["p_hat"] = r.p_hat;
    j["p_value"] = r.p_value;
    j["group"] = std::string(to_string(r.group));
    j["videos_any"] = r.videos_any;
    j["videos_10"] = r.videos_10;
    j["occurrences"] = r.occurrences;
    j["degenerate"] = r.degenerate;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

}  // namespace clickmine
