#include <doctest.h>

#include "support/oracle.hpp"

using namespace kgs;
using namespace kgs::testing;

TEST_SUITE("primitives") {

TEST_CASE("example graph answers by hand") {
  TempDir work("prim");
  const Triples t = {{"Eli", "isA", "Professor"}, {"Eli", "livesIn", "Rome"},
                     {"Ann", "isA", "Student"}};
  load_triples(t, work.path(), "db", {});
  auto db = Database::open(work / "db", false);
  const Primitives prim = db->primitives();
  const TermId eli = *prim.nodid("Eli");
  const TermId isa = *prim.edgid("isA");
  CHECK(prim.lbl_n(eli) == "Eli");
  CHECK(prim.lbl_e(isa) == "isA");
  CHECK_FALSE(prim.nodid("isA-not-a-node"));

  TriplePattern p(PatternTerm::variable("x"), PatternTerm::constant(isa),
                  PatternTerm::variable("y"));
  CHECK(prim.cnt_edg(Ordering::parse("srd"), p) == 2);
  auto rows = drain(*prim.grp(PartialOrdering::parse("r"), TriplePattern()));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].count + rows[1].count == 3);
  CHECK_THROWS_AS(prim.pos(Ordering::parse("srd"), p, 2), Error);
}

TEST_CASE("random graphs match the naive oracle") {
  Rng rng(20240611);
  json totals = json::object();
  for (int g = 0; g < 12; ++g) {
    const RandomGraphSpec spec = random_spec(rng, 6000);
    const Triples t = random_graph(rng, spec);
    const LoadOptions o = random_load_options(rng);
    TempDir work("prim");
    const json report = load_triples(t, work.path(), "db", o);
    for (const auto& [k, v] : report["totals"].items()) {
      totals[k] = totals.value(k, std::uint64_t{0}) + v.get<std::uint64_t>();
    }
    auto db = Database::open(work / "db", false);
    OracleOptions oo;
    oo.seed = rng();
    const OracleReport rep = check_primitives(db->primitives(), t, oo);
    INFO("graph " << g << " " << std::string(graph_shape_name(spec.shape)) << " edges=" << t.size()
                  << " " << describe(o) << "\n" << rep.summary());
    CHECK(rep.ok());
  }
  // The sample must exercise every physical form.
  for (const char* k : {"row", "column", "cluster", "pruned", "aggregated"}) {
    INFO(k);
    CHECK(totals.value(k, std::uint64_t{0}) > 0);
  }
}

}
