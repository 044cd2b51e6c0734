#include "clickmine/models.hpp"

#include <cmath>

#include "json.hpp"

namespace clickmine {

using json = nlohmann::json;

std::string_view to_string(Algo a) {
  switch (a) {
    case Algo::dp: return "dp";
    case Algo::dt: return "dt";
    case Algo::ct: return "ct";
    case Algo::skr: return "skr";
  }
  return "?";
}

Algo parse_algo(std::string_view s) {
  for (Algo a : {Algo::dp, Algo::dt, Algo::ct, Algo::skr})
    if (to_string(a) == s) return a;
  throw Error("unknown algorithm \"" + std::string(s) + "\" (expected dp, dt, ct or skr)");
}

std::array<bool, 4> feasible_classes(int i, int n) {
  return {i > 0, true, i < n, i + 2 <= n};
}

namespace {

struct Counts {
  int max_index = 0;
  double width = 0.0;
  std::array<std::size_t, 2> sequences{};
  std::array<std::vector<double>, 2> visits;
  std::array<std::vector<std::array<double, 4>>, 2> trans;
  std::array<std::vector<double>, 2> holding;
};

void check_index(int idx, int n) {
  if (idx < 0 || idx > n)
    throw Error("position index " + std::to_string(idx) + " outside trained range 0.." + std::to_string(n) +
                " (width mismatch between training and test data?)");
}

Counts tally(std::span<const PositionSequence* const> train) {
  if (train.empty()) throw Error("insufficient class data: empty training set");
  Counts c;
  c.max_index = train.front()->max_index;
  c.width = train.front()->width_s;
  const auto states = static_cast<std::size_t>(c.max_index + 1);
  for (int k = 0; k < 2; ++k) {
    c.visits[k].assign(states, 0.0);
    c.trans[k].assign(states, {0.0, 0.0, 0.0, 0.0});
    c.holding[k].assign(states, 0.0);
  }
  for (const PositionSequence* ptr : train) {
    const auto& p = *ptr;
    if (p.cfa != 0 && p.cfa != 1) throw Error("training sequence without a CFA label");
    if (p.max_index != c.max_index || p.width_s != c.width)
      throw Error("training sequences encoded at different widths");
    const auto k = static_cast<std::size_t>(p.cfa);
    ++c.sequences[k];
    for (const auto& e : p.entries) {
      check_index(e.index, c.max_index);
      c.visits[k][static_cast<std::size_t>(e.index)] += 1.0;
      c.holding[k][static_cast<std::size_t>(e.index)] += e.dwell_s;
    }
    for (const auto& [b, e] : p.segments())
      for (std::size_t n = b; n + 1 < e; ++n) {
        const int from = p.entries[n].index;
        c.trans[k][static_cast<std::size_t>(from)][slot(classify_transition(from, p.entries[n + 1].index))] += 1.0;
      }
  }
  if (c.sequences[0] == 0 || c.sequences[1] == 0)
    throw Error("insufficient class data: both CFA and non-CFA sequences are required");
  return c;
}

Model base_model(Algo algo, const Counts& c, const ModelConfig& cfg) {
  Model m;
  m.algo = algo;
  m.width_s = c.width;
  m.max_index = c.max_index;
  m.alpha = cfg.alpha;
  m.rate_floor = cfg.rate_floor;
  const double total = static_cast<double>(c.sequences[0] + c.sequences[1]);
  m.g = {static_cast<double>(c.sequences[0]) / total, static_cast<double>(c.sequences[1]) / total};
  return m;
}

std::vector<double> visit_distribution(const std::vector<double>& counts, double alpha) {
  double total = 0.0;
  for (double o : counts) total += o + alpha;
  std::vector<double> f(counts.size());
  if (!(total > 0.0)) {
    // alpha = 0 and nothing observed: fall back to uniform.
    for (auto& x : f) x = 1.0 / static_cast<double>(f.size());
    return f;
  }
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = (counts[i] + alpha) / total;
  return f;
}

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

std::vector<const PositionSequence*> borrow(std::span<const PositionSequence> train) {
  std::vector<const PositionSequence*> out;
  out.reserve(train.size());
  for (const auto& p : train) out.push_back(&p);
  return out;
}

Model fit_dp(const Counts& c, const ModelConfig& cfg) {
  Model m = base_model(Algo::dp, c, cfg);
  for (int k = 0; k < 2; ++k) m.cls[k].visit = visit_distribution(c.visits[k], cfg.alpha);
  return m;
}

Model fit_dt(const Counts& c, const ModelConfig& cfg) {
  Model m = base_model(Algo::dt, c, cfg);
  for (int k = 0; k < 2; ++k) {
    m.cls[k].visit = visit_distribution(c.visits[k], cfg.alpha);
    auto& rows = m.cls[k].trans;
    rows.assign(c.trans[k].size(), {0.0, 0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto ok = feasible_classes(static_cast<int>(i), c.max_index);
      double total = 0.0;
      int feasible = 0;
      for (std::size_t j = 0; j < 4; ++j)
        if (ok[j]) {
          total += c.trans[k][i][j] + cfg.alpha;
          ++feasible;
        }
      for (std::size_t j = 0; j < 4; ++j) {
        if (!ok[j]) continue;
        rows[i][j] = total > 0.0 ? (c.trans[k][i][j] + cfg.alpha) / total : 1.0 / feasible;
      }
    }
  }
  return m;
}

Model fit_ct(const Counts& c, const ModelConfig& cfg) {
  Model m = base_model(Algo::ct, c, cfg);
  for (int k = 0; k < 2; ++k) {
    auto& p = m.cls[k];
    p.holding = c.holding[k];
    p.rates.assign(p.holding.size(), {0.0, 0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < p.rates.size(); ++i) {
      const auto ok = feasible_classes(static_cast<int>(i), c.max_index);
      const auto& o = c.trans[k][i];
      const double exits = o[0] + o[2] + o[3];
      double r = p.holding[i];
      if (!(r > 0.0)) {
        if (exits > 0.0)
          m.warnings.push_back("class " + std::to_string(k) + " state " + std::to_string(i) +
                               ": transitions with zero holding time; floored");
        r = cfg.min_holding_s;
        p.holding[i] = r;
      }
      double diag = 0.0;
      for (std::size_t j : {0u, 2u, 3u}) {
        if (!ok[j]) continue;
        p.rates[i][j] = std::max(o[j] / r, cfg.rate_floor);
        diag += p.rates[i][j];
      }
      p.rates[i][1] = -diag;
    }
  }
  return m;
}

}  // namespace

Model train_dp(std::span<const PositionSequence> train, const ModelConfig& cfg) {
  return fit_dp(tally(borrow(train)), cfg);
}

Model train_dt(std::span<const PositionSequence> train, const ModelConfig& cfg) {
  return fit_dt(tally(borrow(train)), cfg);
}

Model train_ct(std::span<const PositionSequence> train, const ModelConfig& cfg) {
  return fit_ct(tally(borrow(train)), cfg);
}

Model train(Algo algo, std::span<const PositionSequence* const> train, const ModelConfig& cfg) {
  const Counts c = tally(train);
  switch (algo) {
    case Algo::dp: return fit_dp(c, cfg);
    case Algo::dt: return fit_dt(c, cfg);
    case Algo::ct: return fit_ct(c, cfg);
    case Algo::skr: return base_model(Algo::skr, c, cfg);
  }
  throw Error("unknown algorithm");
}

Model train(Algo algo, std::span<const PositionSequence> train, const ModelConfig& cfg) {
  return clickmine::train(algo, std::span<const PositionSequence* const>(borrow(train)), cfg);
}

double log_likelihood_dp(const Model& m, int c, const PositionSequence& p) {
  const auto& f = m.cls[static_cast<std::size_t>(c)].visit;
  double ll = 0.0;
  for (const auto& e : p.entries) {
    check_index(e.index, m.max_index);
    ll += safe_log(f[static_cast<std::size_t>(e.index)]);
  }
  return ll;
}

double log_likelihood_dt(const Model& m, int c, const PositionSequence& p) {
  const auto& params = m.cls[static_cast<std::size_t>(c)];
  double ll = 0.0;
  for (const auto& [b, e] : p.segments()) {
    check_index(p.entries[b].index, m.max_index);
    ll += safe_log(params.visit[static_cast<std::size_t>(p.entries[b].index)]);
    for (std::size_t n = b; n + 1 < e; ++n) {
      const int from = p.entries[n].index;
      const int to = p.entries[n + 1].index;
      check_index(to, m.max_index);
      ll += safe_log(params.trans[static_cast<std::size_t>(from)][slot(classify_transition(from, to))]);
    }
  }
  return ll;
}

double log_likelihood_ct(const Model& m, int c, const PositionSequence& p) {
  const auto& params = m.cls[static_cast<std::size_t>(c)];
  const auto states = static_cast<std::size_t>(m.max_index + 1);
  std::vector<std::array<double, 4>> o(states, {0.0, 0.0, 0.0, 0.0});
  std::vector<double> time(states, 0.0);
  for (const auto& e : p.entries) {
    check_index(e.index, m.max_index);
    time[static_cast<std::size_t>(e.index)] += e.dwell_s;
  }
  for (const auto& [b, e] : p.segments())
    for (std::size_t n = b; n + 1 < e; ++n) {
      const int from = p.entries[n].index;
      o[static_cast<std::size_t>(from)][slot(classify_transition(from, p.entries[n + 1].index))] += 1.0;
    }
  double ll = 0.0;
  for (std::size_t i = 0; i < states; ++i) {
    if (time[i] == 0.0 && o[i][0] + o[i][2] + o[i][3] == 0.0) continue;
    for (std::size_t k : {0u, 2u, 3u}) {
      const double q = params.rates[i][k];
      if (o[i][k] > 0.0) ll += o[i][k] * safe_log(q);
      ll -= q * time[i];
    }
  }
  return ll;
}

std::array<double, 2> log_likelihood(const Model& m, const PositionSequence& p) {
  switch (m.algo) {
    case Algo::dp: return {log_likelihood_dp(m, 0, p), log_likelihood_dp(m, 1, p)};
    case Algo::dt: return {log_likelihood_dt(m, 0, p), log_likelihood_dt(m, 1, p)};
    case Algo::ct: return {log_likelihood_ct(m, 0, p), log_likelihood_ct(m, 1, p)};
    case Algo::skr: return {0.0, 0.0};
  }
  return {0.0, 0.0};
}

Prediction map_decide(double log_l0, double log_l1, const std::array<double, 2>& g, double bias, Rng& rng) {
  if (!(bias >= 0.0)) throw Error("bias must be non-negative");
  Prediction out;
  out.log_lik = {log_l0, log_l1};
  const double lhs = safe_log(g[1]) + log_l1;
  const double rhs = log_add(safe_log(g[0]) + log_l0, safe_log(bias));
  if (lhs > rhs) {
    out.cls = 1;
  } else if (lhs < rhs) {
    out.cls = 0;
  } else {
    out.tie = true;
    out.cls = rng.uniform() >= g[0] ? 1 : 0;
  }
  return out;
}

int skr_predict(double g1, Rng& rng) { return rng.uniform() < g1 ? 1 : 0; }

std::string serialize_model(const Model& m) {
  json params = json::array();
  for (const auto& c : m.cls) {
    json p = json::object();
    if (!c.visit.empty()) p["visit"] = c.visit;
    if (!c.trans.empty()) p["trans"] = c.trans;
    if (!c.rates.empty()) p["rates"] = c.rates;
    if (!c.holding.empty()) p["holding"] = c.holding;
    params.push_back(std::move(p));
  }
  json j = {{"algo", std::string(to_string(m.algo))},
            {"w", m.width_s},
            {"n", m.max_index},
            {"alpha", m.alpha},
            {"rate_floor", m.rate_floor},
            {"g", m.g},
            {"params", params}};
  return j.dump();
}

Model parse_model(std::string_view text) {
  const auto j = json::parse(text);
  Model m;
  m.algo = parse_algo(j.at("algo").get<std::string>());
  m.width_s = j.at("w").get<double>();
  m.max_index = j.at("n").get<int>();
  m.alpha = j.at("alpha").get<double>();
  m.rate_floor = j.at("rate_floor").get<double>();
  m.g = j.at("g").get<std::array<double, 2>>();
  const auto& params = j.at("params");
  if (params.size() != 2) throw Error("model must carry parameters for both classes");
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& p = params[k];
    auto& c = m.cls[k];
    if (p.contains("visit")) c.visit = p["visit"].get<std::vector<double>>();
    if (p.contains("trans")) c.trans = p["trans"].get<std::vector<std::array<double, 4>>>();
    if (p.contains("rates")) c.rates = p["rates"].get<std::vector<std::array<double, 4>>>();
    if (p.contains("holding")) c.holding = p["holding"].get<std::vector<double>>();
  }
  return m;
}

}  // namespace clickmine
