#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"

#include "clickmine/denoise.hpp"
#include "clickmine/events.hpp"

using namespace clickmine;

namespace {

RawClick at(EventType e, double p, double t, PlayerState s = PlayerState::playing, double r = 1.0) {
  return RawClick{"u", "v", e, p, t, s, r};
}

QuartileTable table(const std::string& name) {
  std::ifstream in(std::string(CLICKMINE_TEST_DATA) + "/" + name);
  REQUIRE(in.good());
  return parse_quartiles(in);
}

std::vector<bool> open_mask(std::size_t n) { return std::vector<bool>(n ? n - 1 : 0, false); }

}  // namespace

TEST_CASE("play, forward skip, play, pause, back skip gives five events") {
  const std::vector<RawClick> clicks{at(EventType::play, 0, 0), at(EventType::skip, 50, 10),
                                     at(EventType::pause, 70, 30, PlayerState::paused),
                                     at(EventType::skip, 20, 45, PlayerState::paused)};
  const auto d = derive_events(clicks, open_mask(4), 300);
  REQUIRE(d.events.size() == 5);
  const EventKind kinds[] = {EventKind::Pl, EventKind::Sf, EventKind::Pl, EventKind::Pa, EventKind::Sb};
  for (int i = 0; i < 5; ++i) CHECK(d.events[static_cast<std::size_t>(i)].kind == kinds[i]);
  CHECK(*d.events[0].duration_s == 10.0);
  CHECK(*d.events[0].length_s == 10.0);  // (t2 - t1) * r
  CHECK(*d.events[1].length_s == 40.0);  // p2 - p'2
  CHECK(*d.events[2].duration_s == 20.0);
  CHECK(*d.events[3].duration_s == 15.0);
  CHECK_FALSE(d.events[3].length_s);
  CHECK(*d.events[4].length_s == 50.0);  // paused, so p' is the pause position
  CHECK_FALSE(d.events[4].duration_s);
}

TEST_CASE("a lone play click plays out to the end of the video") {
  const auto d = derive_events({at(EventType::play, 100, 5, PlayerState::playing, 2.0)}, {}, 300);
  REQUIRE(d.events.size() == 1);
  CHECK(d.events[0].kind == EventKind::Pl);
  CHECK(*d.events[0].duration_s == 100.0);
  CHECK(*d.events[0].length_s == 200.0);
}

TEST_CASE("skip pre-position follows the previous state") {
  SUBCASE("playing: extrapolated by elapsed time and rate") {
    const auto d = derive_events({at(EventType::play, 10, 0, PlayerState::playing, 1.5), at(EventType::skip, 5, 4)},
                                 open_mask(2), 300);
    // Pl then Sb with p' = 10 + 4 * 1.5 = 16.
    REQUIRE(d.events.size() == 3);
    CHECK(d.events[1].kind == EventKind::Sb);
    CHECK(*d.events[1].length_s == doctest::Approx(11.0));
  }
  SUBCASE("paused: the previous position") {
    const auto d = derive_events(
        {at(EventType::pause, 40, 0, PlayerState::paused), at(EventType::skip, 90, 100, PlayerState::paused)},
        open_mask(2), 300);
    REQUIRE(d.events.size() == 2);
    CHECK(d.events[1].kind == EventKind::Sf);
    CHECK(*d.events[1].length_s == 50.0);
  }
}

TEST_CASE("zero-length skips are dropped with a warning") {
  const auto d = derive_events(
      {at(EventType::pause, 40, 0, PlayerState::paused), at(EventType::skip, 40, 10, PlayerState::paused)},
      open_mask(2), 300);
  REQUIRE(d.events.size() == 1);
  CHECK(d.events[0].kind == EventKind::Pa);
  CHECK(d.warnings.size() == 1);
}

TEST_CASE("rate changes") {
  const auto d = derive_events({at(EventType::ratechange, 0, 0, PlayerState::paused, 1.5),
                                at(EventType::ratechange, 0, 10, PlayerState::paused, 0.75),
                                at(EventType::ratechange, 0, 20, PlayerState::paused, 1.0)},
                               open_mask(3), 300);
  std::vector<EventKind> rates;
  for (const auto& e : d.events)
    if (e.kind != EventKind::Pa) rates.push_back(e.kind);
  CHECK(rates == std::vector<EventKind>{EventKind::Rf, EventKind::Rs, EventKind::Rd});
}

TEST_CASE("masked pairs carry no inferred play or pause") {
  const std::vector<RawClick> clicks{at(EventType::pause, 10, 0, PlayerState::paused), at(EventType::play, 10, 5000)};
  DenoiseConfig cfg;
  const auto d = derive_events(clicks, gap_mask(clicks, cfg, 300), 300);
  REQUIRE(d.events.size() == 1);  // only the tail Pl of the last click
  CHECK(d.events[0].start_s == 5000.0);
}

TEST_CASE("play and pause durations tile each unmasked segment") {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<RawClick> clicks;
    double t = 1000.0, p = 0.0;
    for (int k = 0; k < 20; ++k) {
      const bool paused = u(gen) < 0.4;
      const EventType e = k == 0 ? EventType::play : (u(gen) < 0.5 ? EventType::skip : EventType::pause);
      clicks.push_back(at(e, p, t, paused ? PlayerState::paused : PlayerState::playing));
      t += 0.5 + 40.0 * u(gen);
      p = std::min(299.0, 300.0 * u(gen));
    }
    const auto d = derive_events(clicks, open_mask(clicks.size()), 300);
    double covered = 0.0;
    for (const auto& e : d.events)
      if ((e.kind == EventKind::Pl || e.kind == EventKind::Pa) && e.start_s < clicks.back().timestamp_s)
        covered += *e.duration_s;
    CHECK(covered == doctest::Approx(clicks.back().timestamp_s - clicks.front().timestamp_s).epsilon(1e-12));
  }
}

TEST_CASE("compute quartiles") {
  const auto r = compute_quartiles({1, 2, 3, 4});
  CHECK(r.q1 == 1.75);
  CHECK(r.q2 == 2.5);
  CHECK(r.q3 == 3.25);
  const auto c = compute_quartiles({7, 7, 7, 7, 7});
  CHECK(c.q1 == 7.0);
  CHECK(c.q3 == 7.0);
  CHECK_THROWS_WITH_AS(compute_quartiles({1, 2, 3}), doctest::Contains("external quartile table"), Error);
}

TEST_CASE("corpus table ignores skips under 0.1 s and reports shares") {
  std::vector<CanonicalEvent> ev;
  for (double v : {1.0, 2.0, 3.0, 4.0}) {
    ev.push_back({EventKind::Pl, v, v, 0});
    ev.push_back({EventKind::Pa, v, std::nullopt, 0});
    ev.push_back({EventKind::Sb, std::nullopt, v, 0});
    ev.push_back({EventKind::Sf, std::nullopt, v, 0});
  }
  ev.push_back({EventKind::Sb, std::nullopt, 0.05, 0});
  const auto t = build_quartile_table({ev});
  CHECK(t.sb.count == 4);
  CHECK(t.sb.q1 == 1.75);
  CHECK(t.pl.fraction == doctest::Approx(0.25));
  std::istringstream in(serialize_quartiles(t));
  const auto back = parse_quartiles(in);
  CHECK(back.pa.q2 == t.pa.q2);
}

TEST_CASE("a 20 s back skip is Sb2 in both course tables") {
  for (const char* name : {"quartiles_fmb.json", "quartiles_ni.json"}) {
    const auto q = table(name);
    const auto s = quantize({{EventKind::Sb, std::nullopt, 20.0, 0}}, q);
    CHECK(render_symbols(s) == "Sb2");
  }
}

TEST_CASE("a 550 s play splits into Pl3 Pl3 Pl2 under the NI table") {
  const auto q = table("quartiles_ni.json");
  CHECK(play_chunks(550.0, q.pl) == std::vector<int>{3, 3, 2});
  CHECK(render_symbols(quantize({{EventKind::Pl, 550.0, 550.0, 0}}, q)) == "Pl3 Pl3 Pl2");
}

TEST_CASE("bucket boundaries are lower-inclusive") {
  const QuartileRow r{4.5, 19.3, 58.8, 0, 0};
  CHECK(quartile_bucket(4.5, r) == 2);  // exactly Q1
  CHECK(quartile_bucket(4.4999, r) == 1);
  CHECK(quartile_bucket(58.8, r) == 4);
  CHECK(quartile_bucket(1e9, r) == 4);
  CHECK(quartile_bucket(0.0, r) == 1);
}

TEST_CASE("play chunking") {
  const QuartileRow r{10, 20, 30, 0, 0};
  CHECK(play_chunks(30.0, r) == std::vector<int>{3});  // not above Q3
  CHECK(play_chunks(30.5, r) == std::vector<int>{3, 1});
  CHECK(play_chunks(0.0, r) == std::vector<int>{1});
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> d(0.0, 1000.0);
  for (int i = 0; i < 500; ++i) {
    const double x = d(gen);
    const auto chunks = play_chunks(x, r);
    CHECK(chunks.size() <= static_cast<std::size_t>(std::ceil(x / r.q3)) + 1);
    for (std::size_t k = 0; k + 1 < chunks.size(); ++k) CHECK(chunks[k] == 3);
    CHECK(chunks.back() >= 1);
    CHECK(chunks.back() <= 3);
  }
}

TEST_CASE("quantized symbols stay within their kind's buckets; longer skips never drop a bucket") {
  const auto q = table("quartiles_fmb.json");
  int prev = 0;
  for (double len = 0.0; len < 400.0; len += 0.7) {
    const auto s = quantize({{EventKind::Sf, std::nullopt, len, 0}}, q);
    REQUIRE(s.size() == 1);
    CHECK(symbol_kind(s[0]) == EventKind::Sf);
    CHECK(symbol_bucket(s[0]) >= prev);
    prev = symbol_bucket(s[0]);
  }
  for (double d = 0.0; d < 2000.0; d += 13.1)
    for (Symbol s : quantize({{EventKind::Pl, d, d, 0}}, q)) CHECK(symbol_bucket(s) <= 3);
}

TEST_CASE("alphabet and fasta letters") {
  CHECK(kAlphabetSize == 18);
  CHECK(kFastaLetters.size() == 18);
  const std::vector<Symbol> s{Symbol::Pl1, Symbol::Pa4, Symbol::Sb2};
  EventSequence seq{"u1", "v1", 1, s};
  CHECK(export_fasta({seq}) == ">u1|v1|1\nAHK\n");
  CHECK(export_fasta({}).empty());
  for (std::size_t i = 0; i < kAlphabetSize; ++i) {
    const Symbol x = symbol_at(i);
    CHECK(parse_symbol(symbol_name(x)) == x);
    CHECK(symbol_from_letter(symbol_letter(x)) == x);
  }
}

TEST_CASE("fasta and ndjson round-trips") {
  std::mt19937_64 gen(2);
  std::vector<EventSequence> seqs;
  for (int i = 0; i < 50; ++i) {
    EventSequence s{"user" + std::to_string(i), "vid", i % 2, {}};
    for (int k = 0; k < i % 17; ++k) s.symbols.push_back(symbol_at(gen() % kAlphabetSize));
    seqs.push_back(s);
  }
  std::istringstream fa(export_fasta(seqs));
  const auto back = import_fasta(fa);
  REQUIRE(back.size() == seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    CHECK(back[i].symbols == seqs[i].symbols);
    CHECK(back[i].user_id == seqs[i].user_id);
    CHECK(back[i].cfa == seqs[i].cfa);
    CHECK(parse_sequence_line(serialize_sequence(seqs[i])).symbols == seqs[i].symbols);
  }
}
