#include <doctest.h>

#include <algorithm>

#include "bgp.hpp"
#include "support/oracle.hpp"

using namespace kgs;
using namespace kgs::testing;

namespace {

std::vector<std::vector<std::string>> labels_of(const BoundQuery& q, const Bindings& b,
                                                const Primitives& prim) {
  return label_bindings(q, b, prim).rows;
}

std::string random_query(Rng& rng, const Triples& t) {
  const char* vars[] = {"?a", "?b", "?c", "?d"};
  const std::size_t n = 2 + rng() % 3;
  std::string q = "SELECT * WHERE {";
  for (std::size_t i = 0; i < n; ++i) {
    const LabelTriple& e = t[rng() % t.size()];
    for (int k = 0; k < 3; ++k) {
      const bool var = rng() % 10 < (k == 1 ? 4 : 7);
      q += ' ';
      q += var ? std::string(vars[rng() % 4]) : ntriples_term(e[k]);
    }
    q += " .";
  }
  return q + " }";
}

}  // namespace

TEST_SUITE("bgp") {

TEST_CASE("query parsing") {
  const auto q = parse_query(
      "PREFIX ex: <http://ex.org/\n   a#>\nSELECT ?x WHERE { ?x a ex:C. ?x ex:p \"lit\" . "
      "?x <http://ex.org/q> ?y }");
  REQUIRE(q.patterns.size() == 3);
  CHECK(q.select == std::vector<std::string>{"x"});
  CHECK(q.patterns[0][1].text == kRdfType);
  CHECK(q.patterns[0][2].text == "http://ex.org/a#C");
  CHECK(q.patterns[1][2].text == "\"lit\"");
  CHECK(q.patterns[2][1].text == "http://ex.org/q");
  CHECK(parse_query("SELECT * { ?s ?p ?o }").select.empty());
  CHECK_THROWS_AS(parse_query("SELECT ?z { ?s ?p ?o }"), Error);
  CHECK_THROWS_AS(parse_query("SELECT ?s { ?s ?p }"), Error);
  CHECK_THROWS_AS(parse_query("SELECT ?s ?s ?p ?o }"), Error);
  CHECK_THROWS_AS(parse_query("SELECT ?s { ?s ?p ?o } extra"), Error);
}

TEST_CASE("example query has the single stated answer") {
  TempDir work("bgp");
  load_triples({{"Eli", "isA", "Professor"}, {"Eli", "livesIn", "Rome"}}, work.path(), "db", {});
  auto db = Database::open(work / "db", false);
  const auto r = run_query("SELECT ?s ?o { ?s isA ?o . ?s livesIn Rome . }", db->primitives());
  CHECK(r.columns == std::vector<std::string>{"s", "o"});
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0] == std::vector<std::string>{"Eli", "Professor"});
  CHECK(run_query("SELECT ?s { ?s livesIn Paris }", db->primitives()).rows.empty());
}

TEST_CASE("planner orders by count and picks merge joins") {
  TempDir work("bgp");
  Triples t;
  for (int i = 0; i < 50; ++i) t.push_back({"p" + std::to_string(i), "isA", "Person"});
  t.push_back({"p1", "livesIn", "Rome"});
  t.push_back({"p2", "livesIn", "Rome"});
  t.push_back({"x", "other", "y"});
  load_triples(t, work.path(), "db", {});
  auto db = Database::open(work / "db", false);
  const Primitives prim = db->primitives();
  const auto q = bind_query(parse_query("SELECT * { ?s isA ?o . ?s livesIn Rome . ?a other ?b }"),
                            prim);
  const Plan plan = plan_query(q, prim);
  REQUIRE(plan.steps.size() == 3);
  CHECK(plan.steps[0].pattern == 2);  // count 1
  CHECK(plan.steps[1].op == JoinOp::kCartesian);
  CHECK(plan.steps[1].pattern == 1);
  CHECK(plan.steps[2].op == JoinOp::kIndexLoop);

  const auto q2 = bind_query(parse_query("SELECT * { ?s isA ?o . ?s livesIn Rome }"), prim);
  const Plan p2 = plan_query(q2, prim);
  CHECK(p2.steps[0].pattern == 1);
  CHECK(p2.steps[0].estimate == 2);
  CHECK(p2.steps[1].op == JoinOp::kMerge);
  CHECK(p2.steps[1].join_var == "s");
  CHECK(execute_plan(q2, p2, prim).rows.size() == 2);
}

TEST_CASE("campus queries match the nested-loop oracle under every plan") {
  Rng rng(3);
  CampusSpec spec;
  spec.universities = 2;
  spec.departments = 3;
  spec.undergraduates = 20;
  const Triples t = campus_graph(rng, spec);
  TempDir work("bgp");
  load_triples(t, work.path(), "db", {});
  auto db = Database::open(work / "db", false);
  const Primitives prim = db->primitives();
  for (const auto& text : lubm_queries()) {
    const auto expect = oracle_bgp(t, text);
    const auto r = run_query(text, prim);
    CHECK(r.rows == expect);
    const BoundQuery q = bind_query(parse_query(text), prim);
    std::vector<std::size_t> order(q.patterns.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    int tried = 0;
    do {
      if (tried++ % 7 != 0) continue;
      for (auto forced : {std::optional<JoinOp>{}, std::optional<JoinOp>{JoinOp::kMerge},
                          std::optional<JoinOp>{JoinOp::kIndexLoop}}) {
        const Plan plan = plan_with_order(q, prim, order, forced);
        INFO(plan.describe());
        CHECK(labels_of(q, execute_plan(q, plan, prim), prim) == expect);
      }
    } while (std::next_permutation(order.begin(), order.end()));
  }
}

TEST_CASE("random basic graph patterns match the oracle") {
  Rng rng(11);
  for (int g = 0; g < 6; ++g) {
    RandomGraphSpec spec;
    spec.edges = 400;
    spec.nodes = 40 + g * 10;
    spec.relations = 4;
    spec.shape = g % 2 ? GraphShape::kDense : GraphShape::kSkewed;
    const Triples t = random_graph(rng, spec);
    TempDir work("bgp");
    LoadOptions o;
    o.build.ofr = g % 2;
    o.build.aggr = g % 3 == 0;
    load_triples(t, work.path(), "db", o);
    auto db = Database::open(work / "db", false);
    const Primitives prim = db->primitives();
    for (int k = 0; k < 40; ++k) {
      const std::string text = random_query(rng, t);
      INFO(text);
      const auto expect = oracle_bgp(t, text);
      CHECK(run_query(text, prim).rows == expect);
      const BoundQuery q = bind_query(parse_query(text), prim);
      if (q.unsatisfiable) continue;
      std::vector<std::size_t> order(q.patterns.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = order.size() - 1 - i;
      for (auto forced : {JoinOp::kMerge, JoinOp::kIndexLoop}) {
        const Plan plan = plan_with_order(q, prim, order, forced);
        CHECK(labels_of(q, execute_plan(q, plan, prim), prim) == expect);
      }
    }
  }
}

}
