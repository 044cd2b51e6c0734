#include "clickmine/cli.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <system_error>

#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "clickmine/motifs.hpp"
#include "clickmine/parallel.hpp"
#include "clickmine/positions.hpp"
#include "clickmine/synth.hpp"

namespace clickmine::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr std::size_t kWarningEcho = 20;

std::ifstream open_input(const fs::path& p, std::string_view what) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + std::string(what) + " file '" + p.string() + "'");
  return in;
}

std::string read_text(const fs::path& p, std::string_view what) {
  auto in = open_input(p, what);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void report_warnings(const Warnings& w, std::ostream& err) {
  for (std::size_t i = 0; i < w.size() && i < kWarningEcho; ++i) err << "warning: " << w[i] << '\n';
  if (w.size() > kWarningEcho) err << "warning: ... " << (w.size() - kWarningEcho) << " more\n";
}

template <typename T>
T parse_number(std::string_view s, std::string_view what) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw Error("invalid " + std::string(what) + " '" + std::string(s) + "'");
  return v;
}

/// "4..10" or "4,6,8".
std::vector<int> parse_int_list(const std::string& s, std::string_view what) {
  std::vector<int> out;
  if (const auto dots = s.find(".."); dots != std::string::npos) {
    const int lo = parse_number<int>(std::string_view(s).substr(0, dots), what);
    const int hi = parse_number<int>(std::string_view(s).substr(dots + 2), what);
    if (hi < lo) throw Error("empty " + std::string(what) + " range '" + s + "'");
    for (int w = lo; w <= hi; ++w) out.push_back(w);
    return out;
  }
  std::stringstream in(s);
  for (std::string tok; std::getline(in, tok, ',');) out.push_back(parse_number<int>(tok, what));
  if (out.empty()) throw Error("empty " + std::string(what) + " list");
  return out;
}

std::vector<double> parse_double_list(const std::string& s, std::string_view what) {
  std::vector<double> out;
  std::stringstream in(s);
  for (std::string tok; std::getline(in, tok, ',');) out.push_back(parse_number<double>(tok, what));
  if (out.empty()) throw Error("empty " + std::string(what) + " list");
  return out;
}

struct DenoiseFlags {
  double combine_window = 5.0;
  double pause_gap = 1200.0;
  std::string play_gap = "video-length";

  DenoiseConfig config() const {
    DenoiseConfig c;
    c.combine_window_s = combine_window;
    c.pause_gap_s = pause_gap;
    if (play_gap != "video-length") c.play_gap_s = parse_number<double>(play_gap, "--play-gap");
    c.validate();
    return c;
  }
};

void add_inputs(CLI::App& sub, InputPaths& in, DenoiseFlags& d, bool required) {
  auto* c = sub.add_option("--clicks", in.clicks, "Click log (NDJSON)")->check(CLI::ExistingFile);
  auto* s = sub.add_option("--submissions", in.submissions, "Quiz submissions (NDJSON)")->check(CLI::ExistingFile);
  auto* k = sub.add_option("--catalog", in.catalog, "Video catalog (JSON)")->check(CLI::ExistingFile);
  if (required) {
    c->required();
    s->required();
    k->required();
  }
  sub.add_option("--combine-window", d.combine_window, "Seconds within which same-type clicks merge")
      ->capture_default_str();
  sub.add_option("--pause-gap", d.pause_gap, "Paused gaps at least this long are masked")->capture_default_str();
  sub.add_option("--play-gap", d.play_gap, "Playing gap threshold in seconds, or video-length")
      ->capture_default_str();
}

PositionMode parse_mode(const std::string& m) {
  if (m == "reconstructed") return PositionMode::reconstructed;
  if (m == "literal") return PositionMode::literal;
  throw Error("unknown position mode '" + m + "' (expected reconstructed or literal)");
}

std::string ndjson(const auto& items, auto&& serialize) {
  std::string out;
  for (const auto& x : items) {
    out += serialize(x);
    out += '\n';
  }
  return out;
}

std::vector<Trajectory> all_pairs(const Corpus& c) {
  std::vector<Trajectory> all = c.labeled;
  all.insert(all.end(), c.unlabeled.begin(), c.unlabeled.end());
  // Keep one deterministic order: chronological video, then user.
  std::stable_sort(all.begin(), all.end(), [&](const Trajectory& a, const Trajectory& b) {
    const auto ia = c.groups.find(a.video_id)->chrono_index;
    const auto ib = c.groups.find(b.video_id)->chrono_index;
    return std::tie(ia, a.user_id) < std::tie(ib, b.user_id);
  });
  return all;
}

// ---------------------------------------------------------------------------

struct Options {
  std::optional<std::uint64_t> seed;
  int jobs = 0;
  fs::path out = ".";
};

void require_seed(const Options& o, const std::string& cmd) {
  if (!o.seed) throw Error(cmd + " is stochastic: pass --seed N (or set seed in the config file)");
}

struct EncodeArgs {
  InputPaths in;
  DenoiseFlags denoise;
  double width = 15.0;
  std::string mode = "reconstructed";
  fs::path quartiles;
  bool fasta = false;
};

void cmd_encode(const EncodeArgs& a, const Options& o, std::ostream& out, std::ostream& err) {
  const Corpus corpus = load_corpus(a.in, a.denoise.config());
  Warnings warnings = corpus.warnings;
  const auto pairs = all_pairs(corpus);

  QuartileTable table;
  if (!a.quartiles.empty()) {
    auto in = open_input(a.quartiles, "quartile table");
    table = parse_quartiles(in);
  } else {
    table = corpus_quartiles(pairs);
  }
  const auto seqs = event_sequences(pairs, table, &warnings);
  const auto positions = encode_corpus(pairs, a.width, parse_mode(a.mode), &warnings);

  OutputSet files(o.out);
  files.add("sequences.ndjson", ndjson(seqs, serialize_sequence));
  files.add("positions.ndjson", ndjson(positions, serialize_positions));
  files.add("quartiles.json", serialize_quartiles(table));
  if (a.fasta) files.add("sequences.fasta", export_fasta(seqs));
  files.commit();
  report_warnings(warnings, err);
  out << "encoded " << pairs.size() << " UV pairs (" << corpus.labeled.size() << " labeled) into " << o.out.string()
      << '\n';
}

struct MotifArgs {
  InputPaths in;
  DenoiseFlags denoise;
  fs::path sequences;
  std::string widths = "4..10";
  double evalue = 0.05;
  int replicates = 200;
  int per_width = 5;
  std::string mode = "any";
  std::size_t min_sequences = 50;
  bool fasta = false;
  bool unfiltered = false;
};

void cmd_motifs(const MotifArgs& a, const Options& o, std::ostream& out, std::ostream& err) {
  require_seed(o, "motifs");
  MotifConfig cfg;
  cfg.widths = parse_int_list(a.widths, "--widths");
  cfg.e_threshold = a.evalue;
  cfg.replicates = a.replicates;
  cfg.max_motifs_per_width = a.per_width;
  cfg.min_sequences = a.min_sequences;
  if (a.mode == "zoops")
    cfg.mode = SiteMode::zoops;
  else if (a.mode != "any")
    throw Error("unknown site mode '" + a.mode + "' (expected any or zoops)");
  cfg.validate();

  Warnings warnings;
  std::vector<EventSequence> seqs;
  if (!a.sequences.empty()) {
    auto in = open_input(a.sequences, "sequence");
    seqs = parse_sequences(in);
  } else {
    if (a.in.clicks.empty() || a.in.submissions.empty() || a.in.catalog.empty())
      throw Error("motifs needs --sequences FILE or all of --clicks, --submissions and --catalog");
    const Corpus corpus = load_corpus(a.in, a.denoise.config());
    warnings = corpus.warnings;
    const auto pairs = all_pairs(corpus);
    seqs = event_sequences(pairs, corpus_quartiles(pairs), &warnings);
  }
  const auto unlabeled = std::erase_if(seqs, [](const EventSequence& s) { return s.cfa != 0 && s.cfa != 1; });
  if (unlabeled) warnings.push_back(std::to_string(unlabeled) + " unlabeled sequence(s) left out of motif support");

  const auto found = discover_motifs(seqs, cfg, *o.seed);
  warnings.insert(warnings.end(), found.warnings.begin(), found.warnings.end());
  if (found.monotonicity_violations)
    warnings.push_back(std::to_string(found.monotonicity_violations) + " EM run(s) decreased the objective");

  std::vector<MotifReport> reports;
  for (const auto& m : found.motifs) reports.push_back(support_and_significance(m, seqs, cfg.consensus_threshold));
  if (!a.unfiltered) reports = filter_motifs(reports);

  OutputSet files(o.out);
  files.add("motifs.json", serialize_motifs(reports));
  if (a.fasta) files.add("sequences.fasta", export_fasta(seqs));
  files.commit();
  report_warnings(warnings, err);
  out << found.candidates.size() << " candidate(s), " << found.motifs.size() << " significant, " << reports.size()
      << " reported\n";
}

struct PredictArgs {
  InputPaths in;
  DenoiseFlags denoise;
  std::vector<std::string> algos = {"dp", "dt", "ct", "skr"};
  int iterations = 10;
  int folds = 5;
  std::size_t min_class = 100;
  std::string w_grid;
  std::string b_grid;
  std::string mode = "reconstructed";
};

void cmd_predict(const PredictArgs& a, const Options& o, std::ostream& out, std::ostream& err) {
  require_seed(o, "predict");
  EvalConfig cfg;
  cfg.iterations = a.iterations;
  cfg.folds = a.folds;
  cfg.min_class_samples = a.min_class;
  cfg.mode = parse_mode(a.mode);
  if (!a.w_grid.empty()) cfg.w_grid = parse_double_list(a.w_grid, "--w-grid");
  if (!a.b_grid.empty()) cfg.b_grid = parse_double_list(a.b_grid, "--b-grid");
  cfg.validate();
  std::vector<Algo> algos;
  for (const auto& s : a.algos) {
    const Algo al = parse_algo(s);
    if (std::find(algos.begin(), algos.end(), al) == algos.end()) algos.push_back(al);
  }

  const Corpus corpus = load_corpus(a.in, a.denoise.config());
  Warnings warnings = corpus.warnings;

  std::vector<VideoReport> reports;
  MetricTable acc, f1;
  for (const auto& video : corpus.groups.videos) {
    std::vector<Trajectory> pairs;
    for (const auto& t : corpus.labeled)
      if (t.video_id == video.id) pairs.push_back(t);
    if (pairs.empty()) continue;
    const VideoData data = prepare_video(pairs, cfg);
    // Every algorithm sees the same folds for a given video.
    const std::uint64_t seed = derive_seed(*o.seed, video.chrono_index);
    for (Algo al : algos) {
      auto r = evaluate_video(data, al, cfg, seed);
      if (r.excluded) {
        warnings.push_back("video " + video.id + " excluded for " + std::string(to_string(al)) +
                           ": fewer than " + std::to_string(cfg.min_class_samples) + " pairs in a class");
      } else {
        acc[video.id][al] = r.accuracy.mean;
        f1[video.id][al] = r.f1.mean;
      }
      for (const auto& it : r.iterations)
        if (!it.error.empty()) warnings.push_back("video " + video.id + ": " + it.error);
      reports.push_back(std::move(r));
    }
  }

  OutputSet files(o.out);
  files.add("report.json", serialize_reports(reports));
  files.add("comparisons.json", serialize_comparisons(reports));
  if (std::find(algos.begin(), algos.end(), Algo::skr) != algos.end() && algos.size() > 1) {
    auto rows = improvement_report(acc, &warnings);
    std::string csv = improvement_csv(rows, "accuracy");
    const auto f1_csv = improvement_csv(improvement_report(f1), "f1");
    csv += f1_csv.substr(f1_csv.find('\n') + 1);  // one header for both metrics
    files.add("improvement.csv", csv);
  }
  files.commit();
  report_warnings(warnings, err);
  out << "evaluated " << reports.size() << " (video, algorithm) combination(s)\n";
}

struct SynthArgs {
  fs::path spec;
  int users = -1;
  bool symbols = false;
};

void cmd_synth(const SynthArgs& a, const Options& o, std::ostream& out) {
  require_seed(o, "synth");
  OutputSet files(o.out);
  if (a.symbols) {
    SymbolSynthSpec spec;
    if (a.users > 0) spec.n_sequences = static_cast<std::size_t>(a.users);
    const auto s = synthesize_symbols(spec, *o.seed);
    files.add("sequences.ndjson", ndjson(s.sequences, serialize_sequence));
    ojson truth;
    truth["motif"] = render_symbols(spec.motif);
    ojson sites = ojson::array();
    for (const auto& [seq, at] : s.sites) sites.push_back({{"sequence", seq}, {"offset", at}});
    truth["sites"] = sites;
    files.add("ground_truth.json", truth.dump(2) + "\n");
    files.commit();
    out << "wrote " << s.sequences.size() << " symbol sequences\n";
    return;
  }
  SynthSpec spec = a.spec.empty() ? SynthSpec{} : parse_synth_spec(read_text(a.spec, "synth spec"));
  if (a.users > 0) spec.n_users = a.users;
  const auto s = synthesize(spec, *o.seed);
  files.add("clicks.ndjson", ndjson(s.clicks, serialize_click));
  files.add("submissions.ndjson", serialize_submissions(s.submissions));
  files.add("catalog.json", serialize_catalog(s.catalog));
  files.add("ground_truth.json", serialize_ground_truth(s));
  files.commit();
  out << "wrote " << s.clicks.size() << " clicks for " << spec.n_users << " users\n";
}

}  // namespace

// ---------------------------------------------------------------------------

Corpus load_corpus(const InputPaths& paths, const DenoiseConfig& denoise_cfg) {
  Corpus c;
  auto catalog_in = open_input(paths.catalog, "catalog");
  const VideoCatalog catalog = parse_catalog(catalog_in);
  c.groups = map_videos_to_quizzes(catalog);

  auto clicks_in = open_input(paths.clicks, "clicks");
  auto clicks = parse_clicks(clicks_in);
  for (const auto& e : clicks.errors)
    c.warnings.push_back(paths.clicks.filename().string() + ":" + std::to_string(e.line) + ": " + e.message);

  auto subs_in = open_input(paths.submissions, "submissions");
  auto subs = parse_submissions(subs_in);
  for (const auto& e : subs.errors)
    c.warnings.push_back(paths.submissions.filename().string() + ":" + std::to_string(e.line) + ": " + e.message);

  auto assembled = assemble_uv_pairs(clicks.clicks, subs.submissions, c.groups);
  c.warnings.insert(c.warnings.end(), assembled.warnings.begin(), assembled.warnings.end());
  const auto length = [&](const UVPair& uv) { return c.groups.find(uv.video_id)->length_s; };
  for (const auto& uv : assembled.labeled) c.labeled.push_back(denoise(uv, denoise_cfg, length(uv)));
  for (const auto& uv : assembled.unlabeled) c.unlabeled.push_back(denoise(uv, denoise_cfg, length(uv)));
  return c;
}

QuartileTable corpus_quartiles(const std::vector<Trajectory>& pairs) {
  std::vector<std::vector<CanonicalEvent>> events;
  events.reserve(pairs.size());
  for (const auto& t : pairs) events.push_back(derive_events(t.clicks, t.mask, t.length_s).events);
  return build_quartile_table(events);
}

std::vector<EventSequence> event_sequences(const std::vector<Trajectory>& pairs, const QuartileTable& table,
                                           Warnings* warnings) {
  std::vector<EventSequence> out;
  out.reserve(pairs.size());
  for (const auto& t : pairs) {
    auto derived = derive_events(t.clicks, t.mask, t.length_s);
    if (warnings)
      for (auto& w : derived.warnings) warnings->push_back(t.user_id + "/" + t.video_id + ": " + w);
    out.push_back({t.user_id, t.video_id, t.cfa, quantize(derived.events, table)});
  }
  return out;
}

std::string serialize_comparisons(const std::vector<VideoReport>& reports) {
  std::map<Algo, std::vector<double>> acc, f1;
  for (const auto& r : reports) {
    if (r.excluded) continue;
    acc[r.algo].push_back(r.accuracy.mean);
    f1[r.algo].push_back(r.f1.mean);
  }
  const auto table = [](const std::map<Algo, std::vector<double>>& by) {
    ojson rows = ojson::array();
    for (auto a = by.begin(); a != by.end(); ++a) {
      for (auto b = std::next(a); b != by.end(); ++b) {
        ojson j;
        j["a"] = std::string(to_string(a->first));
        j["b"] = std::string(to_string(b->first));
        j["n_a"] = a->second.size();
        j["n_b"] = b->second.size();
        try {
          const auto t = compare_algorithms(a->second, b->second);
          j["statistic"] = t.statistic;
          j["p_value"] = t.p_value;
          j["method"] = t.method == stats::Method::wrs_exact ? "exact" : "normal";
        } catch (const Error& e) {
          j["statistic"] = nullptr;
          j["p_value"] = nullptr;
          j["error"] = e.what();
        }
        rows.push_back(std::move(j));
      }
    }
    return rows;
  };
  ojson j;
  j["accuracy"] = table(acc);
  j["f1"] = table(f1);
  return j.dump(2) + "\n";
}

void OutputSet::commit() const {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error("cannot create output directory '" + dir_.string() + "': " + ec.message());
  const std::string suffix = ".tmp" + std::to_string(::getpid());
  std::vector<fs::path> staged;
  std::vector<fs::path> published;
  const auto cleanup = [&] {
    std::error_code ignore;
    for (const auto& p : staged) fs::remove(p, ignore);
    for (const auto& p : published) fs::remove(p, ignore);
  };
  try {
    for (const auto& [name, content] : files_) {
      const fs::path tmp = dir_ / (name + suffix);
      staged.push_back(tmp);
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      f << content;
      f.close();
      if (!f) throw Error("cannot write '" + tmp.string() + "'");
    }
    for (std::size_t i = 0; i < files_.size(); ++i) {
      const fs::path dest = dir_ / files_[i].first;
      fs::rename(staged[i], dest);
      published.push_back(dest);
    }
  } catch (const fs::filesystem_error& e) {
    cleanup();
    throw Error(std::string("cannot publish outputs: ") + e.what());
  } catch (...) {
    cleanup();
    throw;
  }
}

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"clickmine: clickstream encoding, motif discovery and CFA prediction"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.set_config("--config", "", "Key = value file; [encode], [motifs], ... sections hold command options");

  Options opt;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every random draw of the command");
  app.add_option("--jobs", opt.jobs, "Worker cap for parallel kernels (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--out", opt.out, "Output directory")->capture_default_str();

  EncodeArgs enc;
  auto* encode = app.add_subcommand("encode", "Write event and position sequences plus the quartile table");
  add_inputs(*encode, enc.in, enc.denoise, true);
  encode->add_option("--width", enc.width, "Position interval width in seconds")->capture_default_str();
  encode->add_option("--mode", enc.mode, "Position encoding: reconstructed or literal")->capture_default_str();
  encode->add_option("--quartiles", enc.quartiles, "Reuse this quartile table")->check(CLI::ExistingFile);
  encode->add_flag("--fasta", enc.fasta, "Also write sequences.fasta");

  MotifArgs mot;
  auto* motifs = app.add_subcommand("motifs", "Discover significant behavioral motifs");
  add_inputs(*motifs, mot.in, mot.denoise, false);
  motifs->add_option("--sequences", mot.sequences, "Event sequences from encode (instead of raw logs)")
      ->check(CLI::ExistingFile);
  motifs->add_option("--widths", mot.widths, "Motif widths, a..b or a comma list")->capture_default_str();
  motifs->add_option("--evalue", mot.evalue, "E-value threshold")->capture_default_str();
  motifs->add_option("--replicates", mot.replicates, "Null corpora per width")->capture_default_str();
  motifs->add_option("--per-width", mot.per_width, "Motifs searched per width")->capture_default_str();
  motifs->add_option("--site-mode", mot.mode, "any or zoops")->capture_default_str();
  motifs->add_option("--min-sequences", mot.min_sequences, "Smallest corpus accepted")->capture_default_str();
  motifs->add_flag("--fasta", mot.fasta, "Also write sequences.fasta");
  motifs->add_flag("--unfiltered", mot.unfiltered, "Report every significant motif");

  PredictArgs pre;
  auto* predict = app.add_subcommand("predict", "Cross-validated CFA prediction per video");
  add_inputs(*predict, pre.in, pre.denoise, true);
  predict->add_option("--algo", pre.algos, "dp, dt, ct, skr (repeatable)")->capture_default_str()->delimiter(',');
  predict->add_option("--iterations", pre.iterations, "Outer iterations")->capture_default_str();
  predict->add_option("--folds", pre.folds, "Folds per iteration")->capture_default_str();
  predict->add_option("--min-class", pre.min_class, "Smallest class size for a video to be evaluated")
      ->capture_default_str();
  predict->add_option("--w-grid", pre.w_grid, "Comma list of widths to tune over");
  predict->add_option("--b-grid", pre.b_grid, "Comma list of biases to tune over");
  predict->add_option("--mode", pre.mode, "Position encoding: reconstructed or literal")->capture_default_str();

  SynthArgs syn;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic click log with known structure");
  synth->add_option("--spec", syn.spec, "JSON generator spec")->check(CLI::ExistingFile);
  synth->add_option("--users", syn.users, "Override the number of users (or sequences)");
  synth->add_flag("--symbols", syn.symbols, "Emit symbol sequences with a planted motif instead");

  for (auto* sub : {encode, motifs, predict, synth}) sub->fallthrough();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  if (seed_opt->count() > 0) opt.seed = seed;
  parallel::set_jobs(opt.jobs);

  try {
    if (*encode) cmd_encode(enc, opt, out, err);
    if (*motifs) cmd_motifs(mot, opt, out, err);
    if (*predict) cmd_predict(pre, opt, out, err);
    if (*synth) cmd_synth(syn, opt, out);
  } catch (const std::exception& e) {
    err << "clickmine: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(std::move(args), std::cout, std::cerr);
}

}  // namespace clickmine::cli
