#include "clickmine/events.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "clickmine/stats.hpp"
#include "json.hpp"

namespace clickmine {

using json = nlohmann::json;

namespace {

constexpr std::string_view kKindNames[] = {"Pl", "Pa", "Sb", "Sf", "Rf", "Rs", "Rd"};
constexpr std::string_view kSymbolNames[] = {"Pl1", "Pl2", "Pl3", "Pa1", "Pa2", "Pa3",
                                             "Pa4", "Sb1", "Sb2", "Sb3", "Sb4", "Sf1",
                                             "Sf2", "Sf3", "Sf4", "Rf",  "Rs",  "Rd"};
constexpr double kZeroSkip = 1e-9;

}  // namespace

std::string_view to_string(EventKind k) { return kKindNames[static_cast<int>(k)]; }

DerivedEvents derive_events(const std::vector<RawClick>& clicks, const std::vector<bool>& mask,
                            double video_length_s) {
  DerivedEvents out;
  const std::size_t n = clicks.size();
  if (n > 0 && mask.size() + 1 != n) throw Error("derive_events: mask size does not match clicks");

  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = clicks[i];
    if (c.type == EventType::skip) {
      if (i == 0) {
        out.warnings.push_back("skip at trajectory start has no pre-skip position; dropped");
      } else {
        const auto& prev = clicks[i - 1];
        double before = prev.position_s;
        if (prev.state == PlayerState::playing)
          before = std::min(prev.position_s + (c.timestamp_s - prev.timestamp_s) * prev.rate, video_length_s);
        const double len = std::fabs(c.position_s - before);
        if (len < kZeroSkip) {
          out.warnings.push_back("zero-length skip dropped");
        } else {
          out.events.push_back({before > c.position_s ? EventKind::Sb : EventKind::Sf, std::nullopt, len,
                                c.timestamp_s});
        }
      }
    } else if (c.type == EventType::ratechange) {
      const EventKind k = c.rate > 1.0 ? EventKind::Rf : (c.rate < 1.0 ? EventKind::Rs : EventKind::Rd);
      out.events.push_back({k, std::nullopt, std::nullopt, c.timestamp_s});
    }

    if (i + 1 < n) {
      if (mask[i]) continue;
      const double d = clicks[i + 1].timestamp_s - c.timestamp_s;
      if (!(d > 0.0)) continue;
      if (c.state == PlayerState::playing) {
        const double end = std::min(c.position_s + d * c.rate, video_length_s);
        out.events.push_back({EventKind::Pl, d, std::max(0.0, end - c.position_s), c.timestamp_s});
      } else {
        out.events.push_back({EventKind::Pa, d, std::nullopt, c.timestamp_s});
      }
    } else if (c.state == PlayerState::playing) {
      const double len = video_length_s - c.position_s;
      if (len > 0.0) out.events.push_back({EventKind::Pl, len / c.rate, len, c.timestamp_s});
    }
  }
  return out;
}

std::string_view symbol_name(Symbol s) { return kSymbolNames[index(s)]; }

std::optional<Symbol> parse_symbol(std::string_view name) {
  for (std::size_t i = 0; i < kAlphabetSize; ++i)
    if (kSymbolNames[i] == name) return symbol_at(i);
  return std::nullopt;
}

EventKind symbol_kind(Symbol s) {
  const auto i = index(s);
  if (i < 3) return EventKind::Pl;
  if (i < 7) return EventKind::Pa;
  if (i < 11) return EventKind::Sb;
  if (i < 15) return EventKind::Sf;
  return static_cast<EventKind>(static_cast<int>(EventKind::Rf) + static_cast<int>(i - 15));
}

int symbol_bucket(Symbol s) {
  const auto i = static_cast<int>(index(s));
  if (i < 3) return i + 1;
  if (i < 15) return (i - 3) % 4 + 1;
  return 0;
}

Symbol make_symbol(EventKind kind, int bucket) {
  switch (kind) {
    case EventKind::Pl:
      if (bucket < 1 || bucket > 3) break;
      return symbol_at(static_cast<std::size_t>(bucket - 1));
    case EventKind::Pa:
    case EventKind::Sb:
    case EventKind::Sf: {
      if (bucket < 1 || bucket > 4) break;
      const int base = 3 + 4 * (static_cast<int>(kind) - static_cast<int>(EventKind::Pa));
      return symbol_at(static_cast<std::size_t>(base + bucket - 1));
    }
    case EventKind::Rf: return Symbol::Rf;
    case EventKind::Rs: return Symbol::Rs;
    case EventKind::Rd: return Symbol::Rd;
  }
  throw Error("bucket " + std::to_string(bucket) + " out of range for " + std::string(to_string(kind)));
}

char symbol_letter(Symbol s) { return kFastaLetters[index(s)]; }

std::optional<Symbol> symbol_from_letter(char c) {
  const auto pos = kFastaLetters.find(c);
  if (pos == std::string_view::npos) return std::nullopt;
  return symbol_at(pos);
}

const QuartileRow& QuartileTable::row(EventKind k) const {
  switch (k) {
    case EventKind::Pl: return pl;
    case EventKind::Pa: return pa;
    case EventKind::Sb: return sb;
    case EventKind::Sf: return sf;
    default: throw Error("no quartiles for rate-change events");
  }
}

QuartileRow& QuartileTable::row(EventKind k) {
  return const_cast<QuartileRow&>(std::as_const(*this).row(k));
}

void QuartileTable::validate() const {
  for (EventKind k : {EventKind::Pl, EventKind::Pa, EventKind::Sb, EventKind::Sf}) {
    const auto& r = row(k);
    if (!(r.q1 >= 0.0 && r.q1 <= r.q2 && r.q2 <= r.q3))
      throw Error("quartiles for " + std::string(to_string(k)) + " must satisfy 0 <= Q1 <= Q2 <= Q3");
  }
  if (!(pl.q3 > 0.0)) throw Error("Pl Q3 must be positive for play chunking");
}

QuartileRow compute_quartiles(std::vector<double> values) {
  if (values.size() < 4)
    throw Error("need at least 4 samples for quartiles (have " + std::to_string(values.size()) +
                "); supply an external quartile table");
  std::sort(values.begin(), values.end());
  QuartileRow r;
  r.q1 = stats::quantile_sorted(values, 0.25);
  r.q2 = stats::quantile_sorted(values, 0.50);
  r.q3 = stats::quantile_sorted(values, 0.75);
  r.count = values.size();
  return r;
}

QuartileTable build_quartile_table(const std::vector<std::vector<CanonicalEvent>>& corpus) {
  std::vector<double> pl, pa, sb, sf;
  for (const auto& events : corpus) {
    for (const auto& e : events) {
      switch (e.kind) {
        case EventKind::Pl: pl.push_back(*e.duration_s); break;
        case EventKind::Pa: pa.push_back(*e.duration_s); break;
        case EventKind::Sb:
          if (*e.length_s >= kMinSkipLength) sb.push_back(*e.length_s);
          break;
        case EventKind::Sf:
          if (*e.length_s >= kMinSkipLength) sf.push_back(*e.length_s);
          break;
        default: break;
      }
    }
  }
  const auto with_kind = [](std::vector<double> v, EventKind k) {
    try {
      return compute_quartiles(std::move(v));
    } catch (const Error& e) {
      throw Error(std::string(to_string(k)) + ": " + e.what());
    }
  };
  QuartileTable t;
  t.pl = with_kind(std::move(pl), EventKind::Pl);
  t.pa = with_kind(std::move(pa), EventKind::Pa);
  t.sb = with_kind(std::move(sb), EventKind::Sb);
  t.sf = with_kind(std::move(sf), EventKind::Sf);
  const double total = static_cast<double>(t.pl.count + t.pa.count + t.sb.count + t.sf.count);
  for (auto* r : {&t.pl, &t.pa, &t.sb, &t.sf}) r->fraction = static_cast<double>(r->count) / total;
  return t;
}

std::string serialize_quartiles(const QuartileTable& q) {
  json j;
  for (EventKind k : {EventKind::Pl, EventKind::Pa, EventKind::Sb, EventKind::Sf}) {
    const auto& r = q.row(k);
    j[std::string(to_string(k))] = {r.q1, r.q2, r.q3};
  }
  return j.dump() + "\n";
}

QuartileTable parse_quartiles(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(std::string("quartiles: malformed JSON: ") + e.what());
  }
  QuartileTable t;
  for (EventKind k : {EventKind::Pl, EventKind::Pa, EventKind::Sb, EventKind::Sf}) {
    const std::string key(to_string(k));
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != 3)
      throw Error("quartiles: \"" + key + "\" must be [q1, q2, q3]");
    auto& r = t.row(k);
    r.q1 = j[key][0].get<double>();
    r.q2 = j[key][1].get<double>();
    r.q3 = j[key][2].get<double>();
  }
  t.validate();
  return t;
}

int quartile_bucket(double value, const QuartileRow& row) {
  if (value < row.q1) return 1;
  if (value < row.q2) return 2;
  if (value < row.q3) return 3;
  return 4;
}

std::vector<int> play_chunks(double duration_s, const QuartileRow& row) {
  if (!(row.q3 > 0.0)) throw Error("play_chunks: Q3 must be positive");
  std::vector<int> chunks;
  double remaining = duration_s;
  while (remaining > row.q3) {
    chunks.push_back(3);
    remaining -= row.q3;
  }
  chunks.push_back(remaining <= row.q1 ? 1 : (remaining <= row.q2 ? 2 : 3));
  return chunks;
}

std::vector<Symbol> quantize(const std::vector<CanonicalEvent>& events, const QuartileTable& q) {
  std::vector<Symbol> out;
  out.reserve(events.size());
  for (const auto& e : events) {
    switch (e.kind) {
      case EventKind::Pl:
        for (int c : play_chunks(*e.duration_s, q.pl)) out.push_back(make_symbol(EventKind::Pl, c));
        break;
      case EventKind::Pa:
        out.push_back(make_symbol(EventKind::Pa, quartile_bucket(*e.duration_s, q.pa)));
        break;
      case EventKind::Sb:
      case EventKind::Sf:
        out.push_back(make_symbol(e.kind, quartile_bucket(*e.length_s, q.row(e.kind))));
        break;
      default:
        out.push_back(make_symbol(e.kind, 0));
        break;
    }
  }
  return out;
}

std::string render_symbols(const std::vector<Symbol>& symbols) {
  std::string out;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i) out += ' ';
    out += symbol_name(symbols[i]);
  }
  return out;
}

std::string export_fasta(const std::vector<EventSequence>& sequences) {
  std::string out;
  for (const auto& s : sequences) {
    out += '>';
    out += s.user_id;
    out += '|';
    out += s.video_id;
    out += '|';
    out += std::to_string(s.cfa);
    out += '\n';
    for (Symbol sym : s.symbols) out += symbol_letter(sym);
    out += '\n';
  }
  return out;
}

std::vector<EventSequence> import_fasta(std::istream& in) {
  std::vector<EventSequence> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '>') {
      EventSequence s;
      const auto header = line.substr(1);
      const auto a = header.find('|');
      const auto b = header.rfind('|');
      if (a == std::string::npos || a == b) throw Error("FASTA header must be user|video|cfa");
      s.user_id = header.substr(0, a);
      s.video_id = header.substr(a + 1, b - a - 1);
      s.cfa = std::stoi(header.substr(b + 1));
      out.push_back(std::move(s));
      continue;
    }
    if (out.empty()) throw Error("FASTA sequence data before the first header");
    for (char c : line) {
      const auto sym = symbol_from_letter(c);
      if (!sym) throw Error(std::string("FASTA letter '") + c + "' is outside the alphabet");
      out.back().symbols.push_back(*sym);
    }
  }
  return out;
}

std::string serialize_sequence(const EventSequence& s) {
  json sym = json::array();
  for (Symbol x : s.symbols) sym.push_back(std::string(symbol_name(x)));
  return json{{"u", s.user_id}, {"v", s.video_id}, {"cfa", s.cfa}, {"sym", sym}}.dump();
}

EventSequence parse_sequence_line(std::string_view line) {
  const auto j = json::parse(line);
  EventSequence s;
  s.user_id = j.at("u").get<std::string>();
  s.video_id = j.at("v").get<std::string>();
  s.cfa = j.at("cfa").get<int>();
  for (const auto& x : j.at("sym")) {
    const auto sym = parse_symbol(x.get<std::string>());
    if (!sym) throw Error("unknown symbol \"" + x.get<std::string>() + "\"");
    s.symbols.push_back(*sym);
  }
  return s;
}

std::vector<EventSequence> parse_sequences(std::istream& in) {
  std::vector<EventSequence> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_sequence_line(line));
    } catch (const std::exception& e) {
      throw Error("sequences line " + std::to_string(no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace clickmine
