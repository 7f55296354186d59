#include <doctest.h>

#include <algorithm>
#include <set>

#include "support/generators.hpp"
#include "graph_model.hpp"
#include "layout_codec.hpp"

using namespace kgs;
using namespace kgs::testing;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::kInternal;
}

std::vector<Row> random_table(Rng& rng, std::size_t n, std::uint64_t firsts,
                              std::uint64_t max_value) {
  const std::uint64_t k = std::min(firsts, max_value + 1);
  std::uniform_int_distribution<std::uint64_t> f(0, k - 1);
  std::uniform_int_distribution<std::uint64_t> v(0, max_value);
  std::set<Row> rows;
  const std::uint64_t step = std::max<std::uint64_t>(1, max_value / k);
  while (rows.size() < n) rows.insert({f(rng) * step, v(rng)});
  return {rows.begin(), rows.end()};
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("orderings parse and print") {
  CHECK(Ordering::all().size() == 6);
  std::set<std::string> names;
  for (const auto& o : Ordering::all()) {
    names.insert(o.str());
    CHECK(Ordering::parse(o.str()) == o);
  }
  CHECK(names.size() == 6);
  CHECK(PartialOrdering::parse("").empty());
  CHECK(PartialOrdering::parse("dr").str() == "dr");
  CHECK(code_of([] { PartialOrdering::parse("ss"); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { PartialOrdering::parse("srdx"); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { PartialOrdering::parse("x"); }) == ErrorCode::kInvalidArgument);
  CHECK_THROWS_AS(Ordering::parse("sr"), Error);
  CHECK_FALSE(Ordering::from_partial(PartialOrdering::parse("rs")).has_value());
}

TEST_CASE("prefix and difference") {
  CHECK(isprefix(PartialOrdering::parse(""), Ordering::parse("dsr")));
  CHECK(isprefix(PartialOrdering::parse("ds"), Ordering::parse("dsr")));
  CHECK_FALSE(isprefix(PartialOrdering::parse("sd"), Ordering::parse("dsr")));
  CHECK(ordering_minus(Ordering::parse("rds"), PartialOrdering::parse("s")).str() == "rd");
  CHECK(ordering_minus(PartialOrdering::parse("sd"), PartialOrdering::parse("sd")).empty());
  CHECK(complete_ordering(PartialOrdering::parse("d")).str() == "dsr");
  CHECK(complete_ordering(PartialOrdering::parse("r")).str() == "rsd");
  CHECK(complete_ordering(PartialOrdering::parse("s")).str() == "srd");
  CHECK(complete_ordering(PartialOrdering::parse("rd")).str() == "rds");
  CHECK(complete_ordering(PartialOrdering::parse("")).str() == "srd");
}

TEST_CASE("pattern matching with repeated variables") {
  const auto p = TriplePattern::parse_ids("?x", "7", "?x");
  CHECK(p.num_constants() == 1);
  CHECK(p.has_repeated_vars());
  CHECK(p.matches({3, 7, 3}));
  CHECK_FALSE(p.matches({3, 7, 4}));
  CHECK_FALSE(p.matches({3, 8, 3}));
  CHECK(bound(p).str() == "r");
  const auto q = TriplePattern::parse_ids("?a", "?b", "?c");
  CHECK_FALSE(q.has_repeated_vars());
  CHECK(q.matches({1, 2, 3}));
  CHECK(bound(TriplePattern::parse_ids("1", "?b", "3")).str() == "sd");
  CHECK(code_of([] { TriplePattern::parse_ids("x", "?b", "?c"); }) == ErrorCode::kParse);
}

TEST_CASE("select_ordering serves every bound set in every order") {
  // Property: the chosen stream starts with the bound fields, and sorting the
  // matching edges by it gives the order requested.
  Rng rng(31);
  std::uniform_int_distribution<TermId> v(0, 3);
  std::vector<Edge> edges;
  for (int i = 0; i < 400; ++i) edges.push_back({v(rng), v(rng), v(rng)});
  for (int mask = 0; mask < 8; ++mask) {
    for (const auto& w : Ordering::all()) {
      const Edge c{1, 2, 3};
      TriplePattern p;
      if (mask & 1) p.at(Field::kS) = PatternTerm::constant(c.s);
      if (mask & 2) p.at(Field::kR) = PatternTerm::constant(c.r);
      if (mask & 4) p.at(Field::kD) = PatternTerm::constant(c.d);
      const Ordering o = select_ordering(p, w);
      const PartialOrdering b = bound(p);
      for (std::size_t i = 0; i < b.size(); ++i) CHECK(b.contains(o[i]));
      std::vector<Edge> m;
      for (const auto& e : edges) {
        if (p.matches(e)) m.push_back(e);
      }
      auto by_o = m;
      auto by_w = m;
      std::sort(by_o.begin(), by_o.end(), [&](auto& a, auto& b2) { return o.less(a, b2); });
      std::sort(by_w.begin(), by_w.end(), [&](auto& a, auto& b2) { return w.less(a, b2); });
      CHECK(by_o == by_w);
    }
  }
}

}  // TEST_SUITE

TEST_SUITE("codec") {

TEST_CASE("bytes_needed boundaries") {
  CHECK(bytes_needed(0) == 1);
  CHECK(bytes_needed(255) == 1);
  CHECK(bytes_needed(256) == 2);
  CHECK(bytes_needed(65535) == 2);
  CHECK(bytes_needed(65536) == 3);
  CHECK(bytes_needed((1ull << 32) - 1) == 4);
  CHECK(bytes_needed(1ull << 32) == 5);
  CHECK(bytes_needed(kTermIdLimit - 1) == 5);
  CHECK(code_of([] { bytes_needed(kTermIdLimit); }) == ErrorCode::kValueTooLarge);
}

TEST_CASE("format byte round trip") {
  std::set<std::uint8_t> seen;
  for (int kind = 0; kind < 3; ++kind) {
    for (std::uint8_t w1 = 1; w1 <= 5; ++w1) {
      for (std::uint8_t w2 = 1; w2 <= 5; ++w2) {
        for (std::uint8_t w3 = 0; w3 <= 5; ++w3) {
          LayoutDescriptor d{static_cast<LayoutKind>(kind), w1, w2, w3};
          if (!d.valid()) continue;
          const TableFormat f{d, false};
          const std::uint8_t b = pack_format(f);
          CHECK(seen.insert(b).second);
          CHECK(unpack_format(b) == f);
          if (d.kind == LayoutKind::kCluster && d.w3 == 5) {
            // Aggregated tables carry only the two value widths.
            const std::uint8_t ab = pack_format({d, true});
            CHECK(seen.insert(ab).second);
            CHECK(unpack_format(ab) == TableFormat{d, true});
          }
        }
      }
    }
  }
  CHECK(seen.size() == 25 + 25 + 125 + 25);
  CHECK(*seen.rbegin() < 200);
  CHECK_THROWS_AS(unpack_format(200), Error);
}

TEST_CASE("layout selection rules") {
  std::vector<Row> one{{5, 9}};
  CHECK(select_layout(one).kind == LayoutKind::kRow);
  CHECK(select_layout(one) == LayoutDescriptor{LayoutKind::kRow, 1, 1, 0});
  // One first value with many rows clusters.
  std::vector<Row> star;
  for (TermId i = 0; i < 50; ++i) star.push_back({70000, i});
  CHECK(select_layout(star) == LayoutDescriptor{LayoutKind::kCluster, 3, 1, 1});
  // Too many rows or too many first values: COLUMN.
  CHECK(select_layout(star, {49, 32}).kind == LayoutKind::kColumn);
  std::vector<Row> spread;
  for (TermId i = 0; i < 40; ++i) spread.push_back({i, i});
  CHECK(select_layout(spread, {1000, 39}).kind == LayoutKind::kColumn);
  CHECK(select_layout(spread, {1000, 40}).kind == LayoutKind::kRow);
  CHECK(code_of([] { select_layout(std::vector<Row>{}); }) == ErrorCode::kEmptyTable);
}

TEST_CASE("encode rejects values wider than the descriptor") {
  std::vector<Row> t{{300, 1}};
  CHECK(code_of([&] { encode_table(t, {LayoutKind::kRow, 1, 1, 0}); }) ==
        ErrorCode::kWidthOverflow);
  CHECK(code_of([&] { encode_table(t, {LayoutKind::kRow, 9, 1, 0}); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("round trip in every layout") {
  Rng rng(77);
  const std::vector<std::pair<std::size_t, std::uint64_t>> shapes{
      {1, 1}, {2, 1}, {17, 3}, {300, 40}, {1000, 1000}};
  for (auto [n, firsts] : shapes) {
    for (std::uint64_t maxv : std::initializer_list<std::uint64_t>{200, 70000, kTermIdLimit - 1}) {
      const auto t = random_table(rng, n, firsts, maxv);
      const unsigned w1 = bytes_needed(t.back().first);
      unsigned w2 = 1;
      std::uint64_t group = 0, max_group = 0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        w2 = std::max(w2, bytes_needed(t[i].second));
        group = i > 0 && t[i].first == t[i - 1].first ? group + 1 : 1;
        max_group = std::max(max_group, group);
      }
      const std::vector<LayoutDescriptor> descs{
          {LayoutKind::kRow, std::uint8_t(w1), std::uint8_t(w2), 0},
          {LayoutKind::kColumn, std::uint8_t(w1), std::uint8_t(w2), 0},
          {LayoutKind::kCluster, std::uint8_t(w1), std::uint8_t(w2),
           std::uint8_t(bytes_needed(max_group))},
          {LayoutKind::kColumn, 5, 5, 0}};
      for (const auto& d : descs) {
        INFO(layout_name(d.kind) << " n=" << n << " maxv=" << maxv);
        const auto bytes = encode_table(t, d);
        CHECK(bytes.size() == encoded_size(t, d));
        CHECK(decode_scan(bytes, d, t.size()) == t);
        EncodedTable et(bytes, d, t.size());
        CHECK(et.byte_size() == bytes.size());
        std::set<TermId> firsts_seen;
        for (const auto& row : t) firsts_seen.insert(row.first);
        CHECK(et.groups() == firsts_seen.size());
        for (std::size_t i = 0; i < t.size(); i += 1 + t.size() / 13) CHECK(et.row(i) == t[i]);
        const TermId probe = t[t.size() / 2].first;
        const auto lo = std::lower_bound(t.begin(), t.end(), Row{probe, 0});
        const auto hi = std::upper_bound(t.begin(), t.end(), Row{probe, ~0ull});
        const auto r = et.search_first(probe);
        REQUIRE(r.has_value());
        CHECK(r->begin == std::uint64_t(lo - t.begin()));
        CHECK(r->end == std::uint64_t(hi - t.begin()));
        CHECK_FALSE(et.search_first(t.back().first + 1).has_value());
        // Truncated input is refused.
        if (bytes.size() > 1) {
          CHECK_THROWS_AS(EncodedTable(Bytes(bytes.data(), bytes.size() - 1), d, t.size()),
                          Error);
        }
      }
    }
  }
}

}  // TEST_SUITE
