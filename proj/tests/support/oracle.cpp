#include "oracle.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unistd.h>

#include "bgp.hpp"

namespace kgs::testing {

void OracleReport::merge(const OracleReport& o) {
  checks += o.checks;
  for (const auto& f : o.failures) fail(f);
}

std::string OracleReport::summary() const {
  std::ostringstream out;
  out << checks << " checks, " << failures.size() << " failures";
  for (const auto& f : failures) out << "\n  " << f;
  return out.str();
}

std::vector<Edge> oracle_edg(const std::vector<Edge>& edges, const Ordering& w,
                             const TriplePattern& p) {
  std::vector<Edge> out;
  for (const Edge& e : edges) {
    if (p.matches(e)) out.push_back(e);
  }
  std::sort(out.begin(), out.end(),
            [&](const Edge& a, const Edge& b) { return w.key(a) < w.key(b); });
  return out;
}

std::vector<GroupedRow> oracle_grp(const std::vector<Edge>& edges,
                                   const PartialOrdering& w,
                                   const TriplePattern& p) {
  std::map<std::array<TermId, 2>, std::uint64_t> groups;
  for (const Edge& e : edges) {
    if (!p.matches(e)) continue;
    std::array<TermId, 2> key{};
    for (std::size_t i = 0; i < w.size(); ++i) key[i] = get(e, w[i]);
    ++groups[key];
  }
  std::vector<GroupedRow> out;
  for (const auto& [k, n] : groups) {
    out.push_back({k, static_cast<std::uint8_t>(w.size()), n});
  }
  return out;
}

namespace {

std::string edge_str(const Edge& e) {
  return "(" + std::to_string(e.s) + "," + std::to_string(e.r) + "," +
         std::to_string(e.d) + ")";
}

std::vector<TriplePattern> make_patterns(const std::vector<Edge>& edges,
                                         std::size_t samples, Rng& rng) {
  const auto V = [](const char* n) { return PatternTerm::variable(n); };
  const auto C = [](TermId id) { return PatternTerm::constant(id); };
  std::vector<TriplePattern> out;
  // type 0 / 1
  out.emplace_back(V("a"), V("b"), V("c"));
  if (edges.empty()) {
    out.emplace_back(C(0), V("b"), V("c"));
    out.emplace_back(C(0), C(0), C(0));
    return out;
  }
  auto any_edge = [&]() -> const Edge& {
    return edges[std::uniform_int_distribution<std::size_t>(0, edges.size() - 1)(rng)];
  };
  TermId max_id = 0;
  for (const Edge& e : edges) max_id = std::max({max_id, e.s, e.r, e.d});
  const TermId absent = max_id + 1;

  for (Field f : {Field::kS, Field::kR, Field::kD}) {
    // types 2 / 3: one constant
    for (std::size_t k = 0; k < samples; ++k) {
      TriplePattern p(V("a"), V("b"), V("c"));
      p.at(f) = C(get(any_edge(), f));
      out.push_back(p);
    }
    // a value from another role, which may or may not occur here
    TriplePattern q(V("a"), V("b"), V("c"));
    q.at(f) = C(get(any_edge(), static_cast<Field>((static_cast<int>(f) + 1) % 3)));
    out.push_back(q);
    TriplePattern z(V("a"), V("b"), V("c"));
    z.at(f) = C(absent);
    out.push_back(z);
    // type 4: two constants, the free field is f
    for (std::size_t k = 0; k < samples; ++k) {
      const Edge& e = any_edge();
      TriplePattern p(C(e.s), C(e.r), C(e.d));
      p.at(f) = V("x");
      out.push_back(p);
    }
    // two constants from different edges
    {
      TriplePattern p(C(any_edge().s), C(any_edge().r), C(any_edge().d));
      p.at(f) = V("x");
      out.push_back(p);
    }
  }
  // three constants
  for (std::size_t k = 0; k < samples; ++k) {
    const Edge& e = any_edge();
    out.emplace_back(C(e.s), C(e.r), C(e.d));
  }
  out.emplace_back(C(any_edge().s), C(any_edge().r), C(any_edge().d));
  // repeated variables
  out.emplace_back(V("x"), V("y"), V("x"));
  out.emplace_back(V("x"), V("x"), V("y"));
  out.emplace_back(V("y"), V("x"), V("x"));
  out.emplace_back(V("x"), V("x"), V("x"));
  for (std::size_t k = 0; k < 2; ++k) {
    const Edge& e = any_edge();
    out.emplace_back(V("x"), C(e.r), V("x"));
    out.emplace_back(C(e.s), V("x"), V("x"));
  }
  // self loops, so the repeated-variable patterns match something
  for (const Edge& e : edges) {
    if (e.s == e.d) {
      out.emplace_back(V("x"), C(e.r), V("x"));
      break;
    }
  }
  return out;
}

std::vector<PartialOrdering> grouping_orders() {
  std::vector<PartialOrdering> out;
  for (const char* w : {"s", "r", "d", "sr", "sd", "rs", "rd", "ds", "dr"}) {
    out.push_back(PartialOrdering::parse(w));
  }
  return out;
}

template <typename F>
bool throws_code(F&& f, ErrorCode code) {
  try {
    f();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

void check_labels(const Primitives& prim, const Triples& visible,
                  std::vector<Edge>& edges, OracleReport& rep) {
  std::set<std::string> nodes, rels;
  for (const auto& t : visible) {
    nodes.insert(t[0]);
    rels.insert(t[1]);
    nodes.insert(t[2]);
  }
  std::map<std::string, TermId> node_id, rel_id;
  std::set<TermId> seen_nodes, seen_rels;
  for (const auto& l : nodes) {
    ++rep.checks;
    auto id = prim.nodid(l);
    if (!id) {
      rep.fail("nodid missing for " + l);
      continue;
    }
    if (!seen_nodes.insert(*id).second) rep.fail("nodid not injective at " + l);
    auto back = prim.lbl_n(*id);
    if (!back || *back != l) rep.fail("lbl_n(nodid(" + l + ")) mismatch");
    node_id[l] = *id;
  }
  for (const auto& l : rels) {
    ++rep.checks;
    auto id = prim.edgid(l);
    if (!id) {
      rep.fail("edgid missing for " + l);
      continue;
    }
    if (!seen_rels.insert(*id).second) rep.fail("edgid not injective at " + l);
    auto back = prim.lbl_e(*id);
    if (!back || *back != l) rep.fail("lbl_e(edgid(" + l + ")) mismatch");
    rel_id[l] = *id;
  }
  for (const char* l : {"http://example.org/never-seen", "\"absent literal\""}) {
    ++rep.checks;
    if (prim.nodid(l) || prim.edgid(l)) rep.fail(std::string("unknown label resolved: ") + l);
  }
  ++rep.checks;
  if (prim.lbl_n(kMaxTermId) || prim.lbl_e(kMaxTermId)) rep.fail("label for unused id");
  edges.clear();
  for (const auto& t : visible) {
    auto s = node_id.find(t[0]);
    auto r = rel_id.find(t[1]);
    auto d = node_id.find(t[2]);
    if (s == node_id.end() || r == rel_id.end() || d == node_id.end()) continue;
    edges.push_back({s->second, r->second, d->second});
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

}  // namespace

OracleReport check_primitives(const Primitives& prim, const Triples& visible,
                              const OracleOptions& opts) {
  OracleReport rep;
  std::vector<Edge> edges;
  check_labels(prim, visible, edges, rep);
  if (!rep.ok()) return rep;

  Rng rng(opts.seed);
  const auto patterns = make_patterns(edges, opts.samples, rng);
  const auto groupings = grouping_orders();

  for (const TriplePattern& p : patterns) {
    std::vector<Edge> matching;
    for (const Edge& e : edges) {
      if (p.matches(e)) matching.push_back(e);
    }
    for (const Ordering& w : Ordering::all()) {
      const std::string where = "p=" + p.str() + " w=" + w.str();
      auto expect = oracle_edg(matching, w, p);
      ++rep.checks;
      try {
        auto c = prim.edg(w, p);
        auto got = drain(*c);
        if (got != expect) {
          rep.fail("edg " + where + ": got " + std::to_string(got.size()) +
                   " edges, want " + std::to_string(expect.size()));
        }
        ++rep.checks;
        const auto n = prim.cnt_edg(w, p);
        if (n != expect.size()) {
          rep.fail("cnt edg " + where + ": got " + std::to_string(n) + " want " +
                   std::to_string(expect.size()));
        }
        std::vector<std::uint64_t> idx;
        if (!expect.empty()) {
          idx = {0, expect.size() / 2, expect.size() - 1};
          idx.push_back(std::uniform_int_distribution<std::uint64_t>(0, expect.size() - 1)(rng));
        }
        for (auto i : idx) {
          ++rep.checks;
          const Edge e = prim.pos(w, p, i);
          if (!(e == expect[i])) {
            rep.fail("pos " + where + " i=" + std::to_string(i) + ": got " + edge_str(e) +
                     " want " + edge_str(expect[i]));
          }
        }
        ++rep.checks;
        if (!throws_code([&] { prim.pos(w, p, expect.size()); }, ErrorCode::kOutOfRange)) {
          rep.fail("pos " + where + " past the end did not raise out-of-range");
        }
      } catch (const std::exception& ex) {
        rep.fail("edg/cnt/pos " + where + " threw: " + ex.what());
      }
    }
    for (const PartialOrdering& w : groupings) {
      const std::string where = "p=" + p.str() + " w=" + w.str();
      auto expect = oracle_grp(matching, w, p);
      ++rep.checks;
      try {
        auto c = prim.grp(w, p);
        auto got = drain(*c);
        if (got != expect) {
          rep.fail("grp " + where + ": got " + std::to_string(got.size()) +
                   " groups, want " + std::to_string(expect.size()));
        }
        ++rep.checks;
        const auto n = prim.cnt_grp(w, p);
        if (n != expect.size()) {
          rep.fail("cnt grp " + where + ": got " + std::to_string(n) + " want " +
                   std::to_string(expect.size()));
        }
      } catch (const std::exception& ex) {
        rep.fail("grp " + where + " threw: " + ex.what());
      }
    }
  }
  return rep;
}

std::vector<std::vector<std::string>> oracle_bgp(const Triples& triples,
                                                 const std::string& query) {
  const ParsedQuery q = parse_query(query);
  // Candidate lists per bound position, built once.
  std::array<std::unordered_map<std::string, std::vector<std::size_t>>, 3> index;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    for (int k = 0; k < 3; ++k) index[k][triples[i][k]].push_back(i);
  }
  std::vector<std::size_t> all(triples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const std::vector<std::size_t> none;
  std::vector<std::string> select = q.select;
  if (select.empty()) {
    for (const auto& p : q.patterns) {
      for (const auto& t : p) {
        if (t.is_var && std::find(select.begin(), select.end(), t.text) == select.end()) {
          select.push_back(t.text);
        }
      }
    }
  }
  std::set<std::vector<std::string>> rows;
  std::map<std::string, std::string> binding;
  std::vector<bool> done(q.patterns.size(), false);

  std::function<void(std::size_t)> solve = [&](std::size_t remaining) {
    if (remaining == 0) {
      std::vector<std::string> row;
      for (const auto& v : select) row.push_back(binding.at(v));
      rows.insert(row);
      return;
    }
    // Next pattern: the one with most bound terms.
    std::size_t best = 0;
    int best_bound = -1;
    for (std::size_t i = 0; i < q.patterns.size(); ++i) {
      if (done[i]) continue;
      int b = 0;
      for (const auto& t : q.patterns[i]) b += !t.is_var || binding.count(t.text);
      if (b > best_bound) {
        best = i;
        best_bound = b;
      }
    }
    const auto& p = q.patterns[best];
    auto value = [&](const QueryTerm& t) -> const std::string* {
      if (!t.is_var) return &t.text;
      auto it = binding.find(t.text);
      return it == binding.end() ? nullptr : &it->second;
    };
    const std::vector<std::size_t>* candidates = &all;
    for (int k = 0; k < 3; ++k) {
      if (const std::string* v = value(p[k])) {
        auto it = index[k].find(*v);
        const auto* c = it == index[k].end() ? &none : &it->second;
        if (c->size() < candidates->size()) candidates = c;
      }
    }
    done[best] = true;
    for (std::size_t i : *candidates) {
      const auto& t = triples[i];
      std::vector<std::string> added;
      bool ok = true;
      for (int k = 0; k < 3 && ok; ++k) {
        if (const std::string* v = value(p[k])) {
          ok = *v == t[k];
        } else {
          binding[p[k].text] = t[k];
          added.push_back(p[k].text);
        }
      }
      if (ok) solve(remaining - 1);
      for (const auto& v : added) binding.erase(v);
    }
    done[best] = false;
  };
  solve(q.patterns.size());
  return {rows.begin(), rows.end()};
}

json load_triples(const Triples& triples, const fs::path& work,
                  const std::string& name, const LoadOptions& opts) {
  const fs::path input = work / (name + ".nt");
  write_ntriples(input.string(), triples);
  return load_database(input, work / name, opts);
}

LoadOptions random_load_options(Rng& rng) {
  auto coin = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng) == 0; };
  auto range = [&](std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
  };
  LoadOptions o;
  o.nm = coin(2) ? NmBackend::kBTree : NmBackend::kArray;
  o.id_mode = coin(3) ? IdMode::kGlobal : IdMode::kSplit;
  if (coin(2)) o.build.layout.tau = range(4, 400);
  o.build.layout.upsilon = range(1, 64);
  o.build.ofr = coin(2);
  o.build.eta = range(1, 40);
  o.build.aggr = coin(2);
  o.proc_workers = static_cast<unsigned>(range(1, 4));
  o.io_workers = static_cast<unsigned>(range(1, 3));
  o.sort_memory = coin(2) ? (64u << 10) : (8u << 20);
  return o;
}

std::string describe(const LoadOptions& o) {
  std::ostringstream out;
  out << "nm=" << nm_backend_name(o.nm) << " ids=" << id_mode_name(o.id_mode)
      << " tau=" << o.build.layout.tau << " upsilon=" << o.build.layout.upsilon
      << " ofr=" << o.build.ofr << " eta=" << o.build.eta << " aggr=" << o.build.aggr
      << " proc=" << o.proc_workers << " io=" << o.io_workers
      << " sort=" << o.sort_memory;
  return out.str();
}

TempDir::TempDir(const std::string& tag) {
  std::string tmpl = (fs::temp_directory_path() / ("kgs-" + tag + "-XXXXXX")).string();
  if (!mkdtemp(tmpl.data())) throw_errno("mkdtemp");
  path_ = tmpl;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

}  // namespace kgs::testing
