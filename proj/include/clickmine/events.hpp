#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clickmine/common.hpp"
#include "clickmine/ingest.hpp"

namespace clickmine {

enum class EventKind : std::uint8_t { Pl, Pa, Sb, Sf, Rf, Rs, Rd };

std::string_view to_string(EventKind k);

/// A derived viewing action. Pl carries both duration and length, Pa only a
/// duration, Sb/Sf only a length, rate changes neither.
struct CanonicalEvent {
  EventKind kind = EventKind::Pl;
  std::optional<double> duration_s;
  std::optional<double> length_s;
  double start_s = 0.0;  // wall-clock time the event begins
};

struct DerivedEvents {
  std::vector<CanonicalEvent> events;
  Warnings warnings;
};

/// Turns a denoised trajectory into canonical events, inserting Pl/Pa for
/// every unmasked inter-click interval. A trailing playing click is closed
/// at the projected end of the video.
DerivedEvents derive_events(const std::vector<RawClick>& clicks, const std::vector<bool>& mask,
                            double video_length_s);

// ---------------------------------------------------------------------------
// Quantized alphabet

inline constexpr std::size_t kAlphabetSize = 18;

/// Pl1..Pl3, Pa1..Pa4, Sb1..Sb4, Sf1..Sf4, Rf, Rs, Rd in this order.
enum class Symbol : std::uint8_t {
  Pl1, Pl2, Pl3,
  Pa1, Pa2, Pa3, Pa4,
  Sb1, Sb2, Sb3, Sb4,
  Sf1, Sf2, Sf3, Sf4,
  Rf, Rs, Rd
};

constexpr std::size_t index(Symbol s) { return static_cast<std::size_t>(s); }
constexpr Symbol symbol_at(std::size_t i) { return static_cast<Symbol>(i); }

std::string_view symbol_name(Symbol s);
std::optional<Symbol> parse_symbol(std::string_view name);
EventKind symbol_kind(Symbol s);
/// Bucket suffix (1-based); 0 for the rate-change symbols.
int symbol_bucket(Symbol s);
Symbol make_symbol(EventKind kind, int bucket);

/// Letters used for FASTA export, one per alphabet entry in order.
inline constexpr std::string_view kFastaLetters = "ACDEFGHIKLMNPQRSTV";
char symbol_letter(Symbol s);
std::optional<Symbol> symbol_from_letter(char c);

// ---------------------------------------------------------------------------
// Quartiles and quantization

struct QuartileRow {
  double q1 = 0.0;
  double q2 = 0.0;
  double q3 = 0.0;
  std::size_t count = 0;
  double fraction = 0.0;
};

/// Quartiles per quantized kind: Pl and Pa by duration, Sb and Sf by length.
struct QuartileTable {
  QuartileRow pl, pa, sb, sf;

  const QuartileRow& row(EventKind k) const;
  QuartileRow& row(EventKind k);
  void validate() const;
};

/// Skip lengths under this are excluded from the Sb/Sf quartile samples.
inline constexpr double kMinSkipLength = 0.1;

/// Type-7 quartiles of `values`. Throws Error with fewer than four values.
QuartileRow compute_quartiles(std::vector<double> values);

/// Table over a whole corpus of derived events, with per-kind counts and
/// fractions.
QuartileTable build_quartile_table(const std::vector<std::vector<CanonicalEvent>>& corpus);

std::string serialize_quartiles(const QuartileTable& q);
QuartileTable parse_quartiles(std::istream& in);

/// Bucket q in 1..4 such that value lies in [Q_{q-1}, Q_q), Q_0 = 0, Q_4 = inf.
int quartile_bucket(double value, const QuartileRow& row);

/// Greedy chunking of a play duration: emit 3 while the remainder exceeds
/// Q3 (subtracting Q3 each time), then the smallest q with remainder <= Q_q.
std::vector<int> play_chunks(double duration_s, const QuartileRow& row);

std::vector<Symbol> quantize(const std::vector<CanonicalEvent>& events, const QuartileTable& q);

// ---------------------------------------------------------------------------
// Sequences and export formats

struct EventSequence {
  std::string user_id;
  std::string video_id;
  int cfa = -1;
  std::vector<Symbol> symbols;
};

std::string render_symbols(const std::vector<Symbol>& symbols);

/// One record per sequence: ">user|video|cfa" followed by the letters.
std::string export_fasta(const std::vector<EventSequence>& sequences);
std::vector<EventSequence> import_fasta(std::istream& in);

std::string serialize_sequence(const EventSequence& s);
EventSequence parse_sequence_line(std::string_view line);
std::vector<EventSequence> parse_sequences(std::istream& in);

}  // namespace clickmine
