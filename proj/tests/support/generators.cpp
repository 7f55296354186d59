#include "generators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace kgs::testing {

namespace {

std::size_t pick(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Index in [0, n) with probability roughly proportional to 1/(i+1).
std::size_t pick_skewed(Rng& rng, std::size_t n) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const auto i = static_cast<std::size_t>(std::exp(u * std::log(double(n) + 1.0)) - 1.0);
  return std::min(i, n - 1);
}

void finish(Triples& t) {
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
}

}  // namespace

const char* graph_shape_name(GraphShape s) {
  switch (s) {
    case GraphShape::kUniform: return "uniform";
    case GraphShape::kSkewed: return "skewed";
    case GraphShape::kDense: return "dense";
    case GraphShape::kStar: return "star";
  }
  return "?";
}

RandomGraphSpec random_spec(Rng& rng, std::size_t max_edges) {
  RandomGraphSpec s;
  s.shape = static_cast<GraphShape>(pick(rng, 4));
  s.edges = 1 + pick(rng, max_edges);
  switch (s.shape) {
    case GraphShape::kUniform:
      s.nodes = 2 + pick(rng, std::max<std::size_t>(2, s.edges));
      s.relations = 1 + pick(rng, 40);
      break;
    case GraphShape::kSkewed:
      s.nodes = 2 + pick(rng, std::max<std::size_t>(2, s.edges / 2));
      s.relations = 1 + pick(rng, 200);
      break;
    case GraphShape::kDense:
      s.nodes = 2 + pick(rng, 60);
      s.relations = 1 + pick(rng, 6);
      break;
    case GraphShape::kStar:
      s.nodes = 2 + pick(rng, std::max<std::size_t>(2, s.edges));
      s.relations = 1 + pick(rng, 12);
      break;
  }
  s.shared_labels = pick(rng, 3) == 0;
  return s;
}

Triples random_graph(Rng& rng, const RandomGraphSpec& spec) {
  auto node = [&](std::size_t i) { return "http://example.org/n" + std::to_string(i); };
  auto rel = [&](std::size_t i) {
    if (spec.shared_labels && i % 3 == 0) return node(i);
    return "http://example.org/r" + std::to_string(i);
  };
  const std::size_t hubs = std::max<std::size_t>(1, spec.nodes / 50);
  Triples out;
  out.reserve(spec.edges);
  for (std::size_t k = 0; k < spec.edges; ++k) {
    std::size_t s = 0, r = 0, d = 0;
    switch (spec.shape) {
      case GraphShape::kUniform:
      case GraphShape::kDense:
        s = pick(rng, spec.nodes);
        r = pick(rng, spec.relations);
        d = pick(rng, spec.nodes);
        break;
      case GraphShape::kSkewed:
        s = pick_skewed(rng, spec.nodes);
        r = pick_skewed(rng, spec.relations);
        d = pick_skewed(rng, spec.nodes);
        break;
      case GraphShape::kStar:
        if (pick(rng, 2) == 0) {
          s = pick(rng, hubs);
          d = pick(rng, spec.nodes);
        } else {
          s = pick(rng, spec.nodes);
          d = pick(rng, hubs);
        }
        r = pick(rng, spec.relations);
        break;
    }
    // Occasional self loops and s == r style repeats.
    if (pick(rng, 50) == 0) d = s;
    out.push_back({node(s), rel(r), node(d)});
  }
  finish(out);
  return out;
}

Triples ofr_graph(Rng& rng, std::size_t edges) {
  // 90% of the nodes are leaves touching a handful of edges; the rest are
  // hubs. Every edge joins a leaf and a hub.
  const std::size_t leaves = std::max<std::size_t>(10, edges / 4);
  const std::size_t hubs = std::max<std::size_t>(2, leaves / 9);
  const std::size_t relations = 6;
  Triples out;
  out.reserve(edges);
  while (out.size() < edges) {
    const std::string leaf = "http://example.org/leaf" + std::to_string(pick(rng, leaves));
    const std::string hub = "http://example.org/hub" + std::to_string(pick(rng, hubs));
    const std::string r = "http://example.org/p" + std::to_string(pick(rng, relations));
    if (pick(rng, 2) == 0) {
      out.push_back({leaf, r, hub});
    } else {
      out.push_back({hub, r, leaf});
    }
  }
  finish(out);
  return out;
}

Triples isa_graph(Rng& rng, std::size_t entities, std::size_t classes) {
  Triples out;
  const std::string isa = "http://example.org/isA";
  for (std::size_t e = 0; e < entities; ++e) {
    const std::string ent = "http://example.org/e" + std::to_string(e);
    const std::size_t types = 1 + pick(rng, 2);
    for (std::size_t t = 0; t < types; ++t) {
      out.push_back({ent, isa, "http://example.org/C" + std::to_string(pick_skewed(rng, classes))});
    }
    if (pick(rng, 3) == 0) {
      out.push_back({ent, "http://example.org/knows",
                     "http://example.org/e" + std::to_string(pick(rng, entities))});
    }
  }
  for (std::size_t c = 1; c < classes; ++c) {
    out.push_back({"http://example.org/C" + std::to_string(c), "http://example.org/subClassOf",
                   "http://example.org/C" + std::to_string(pick(rng, c))});
  }
  finish(out);
  return out;
}

Triples campus_graph(Rng& rng, const CampusSpec& spec) {
  const std::string type = kRdfTypeIri;
  const std::string ub = kUbPrefix;
  Triples out;
  auto add = [&](const std::string& s, const std::string& p, const std::string& o) {
    out.push_back({s, p, o});
  };
  const std::size_t all_universities = spec.universities * 2;
  auto university = [](std::size_t u) {
    return "http://www.University" + std::to_string(u) + ".edu";
  };
  for (std::size_t u = 0; u < all_universities; ++u) {
    add(university(u), type, ub + "University");
  }
  for (std::size_t u = 0; u < spec.universities; ++u) {
    for (std::size_t d = 0; d < spec.departments; ++d) {
      const std::string dep = "http://www.Department" + std::to_string(d) + ".University" +
                              std::to_string(u) + ".edu";
      add(dep, type, ub + "Department");
      add(dep, ub + "subOrganizationOf", university(u));
      for (std::size_t g = 0; g < spec.research_groups; ++g) {
        const std::string rg = dep + "/ResearchGroup" + std::to_string(g);
        add(rg, type, ub + "ResearchGroup");
        add(rg, ub + "subOrganizationOf", dep);
      }
      std::vector<std::string> courses;
      for (std::size_t c = 0; c < spec.courses; ++c) {
        courses.push_back(dep + "/Course" + std::to_string(c));
        add(courses.back(), type, ub + "Course");
      }
      std::vector<std::string> profs;
      for (std::size_t p = 0; p < spec.full_professors; ++p) {
        const std::string prof = dep + "/FullProfessor" + std::to_string(p);
        profs.push_back(prof);
        add(prof, type, ub + "FullProfessor");
        add(prof, ub + "worksFor", dep);
        add(prof, ub + "name", "\"FullProfessor" + std::to_string(p) + "\"");
        if (pick(rng, 8) != 0) {
          add(prof, ub + "emailAddress", "\"FullProfessor" + std::to_string(p) + "@Department" +
                                             std::to_string(d) + ".University" +
                                             std::to_string(u) + ".edu\"");
        }
        add(prof, ub + "telephone", "\"xxx-xxx-" + std::to_string(1000 + pick(rng, 9000)) + "\"");
        for (int k = 0; k < 2; ++k) add(prof, ub + "teacherOf", courses[pick(rng, courses.size())]);
        add(prof, ub + "undergraduateDegreeFrom", university(pick(rng, all_universities)));
      }
      for (std::size_t s = 0; s < spec.undergraduates; ++s) {
        const std::string st = dep + "/UndergraduateStudent" + std::to_string(s);
        add(st, type, ub + "UndergraduateStudent");
        add(st, ub + "memberOf", dep);
        for (int k = 0; k < 2; ++k) add(st, ub + "takesCourse", courses[pick(rng, courses.size())]);
        if (pick(rng, 4) == 0) add(st, ub + "advisor", profs[pick(rng, profs.size())]);
        if (pick(rng, 5) == 0) {
          add(st, ub + "undergraduateDegreeFrom",
              pick(rng, 2) ? university(u) : university(pick(rng, all_universities)));
        }
      }
      for (std::size_t s = 0; s < spec.graduates; ++s) {
        const std::string st = dep + "/GraduateStudent" + std::to_string(s);
        add(st, type, ub + "GraduateStudent");
        add(st, ub + "memberOf", dep);
        add(st, ub + "undergraduateDegreeFrom",
            pick(rng, 3) ? university(pick(rng, all_universities)) : university(u));
        add(st, ub + "advisor", profs[pick(rng, profs.size())]);
        for (int k = 0; k < 2; ++k) add(st, ub + "takesCourse", courses[pick(rng, courses.size())]);
      }
    }
  }
  finish(out);
  return out;
}

std::vector<std::string> lubm_queries() {
  const std::string prefixes =
      "PREFIX rdf: <http://www.w3.org/1999/02/\n"
      "             22-rdf-syntax-ns#>\n"
      "PREFIX ub:  <http://www.lehigh.edu/~zhp2/2004/\n"
      "             0401/univ-bench.owl#>\n";
  return {
      prefixes +
          "SELECT ?x WHERE {\n"
          "?x ub:subOrganizationOf\n"
          "   <http://www.Department0.University0.edu> .\n"
          "?x rdf:type ub:ResearchGroup . }\n",
      prefixes +
          "SELECT ?x WHERE {\n"
          "?x ub:worksFor <http://www.Department0.University0.edu> .\n"
          "?x rdf:type ub:FullProfessor . ?x ub:name ?y1 .\n"
          "?x ub:emailAddress ?y2 . ?x ub:telephone ?y3 . }\n",
      prefixes +
          "SELECT ?x ?y ?z WHERE {\n"
          "?y rdf:type ub:University . ?z ub:subOrganizationOf ?y .\n"
          "?z rdf:type ub:Department . ?x ub:memberOf ?z .\n"
          "?x ub:undergraduateDegreeFrom ?y .\n"
          "?x rdf:type ub:UndergraduateStudent. }\n",
      prefixes +
          "SELECT ?x ?y ?z WHERE {\n"
          "?y rdf:type ub:University . ?z ub:subOrganizationOf ?y .\n"
          "?z rdf:type ub:Department . ?x ub:memberOf ?z .\n"
          "?x rdf:type ub:GraduateStudent .\n"
          "?x ub:undergraduateDegreeFrom ?y . }\n",
      prefixes +
          "SELECT ?x ?y ?z WHERE {\n"
          "?y rdf:type ub:FullProfessor . ?y ub:teacherOf ?z .\n"
          "?z rdf:type ub:Course . ?x ub:advisor ?y .\n"
          "?x ub:takesCourse ?z . }\n",
  };
}

std::string ntriples_term(const std::string& label) {
  if (!label.empty() && label[0] == '"') return label;
  return "<" + label + ">";
}

void write_ntriples(const std::string& path, const Triples& triples) {
  std::ofstream out(path, std::ios::binary);
  for (const auto& t : triples) {
    out << ntriples_term(t[0]) << ' ' << ntriples_term(t[1]) << ' ' << ntriples_term(t[2])
        << " .\n";
  }
  if (!out) throw std::runtime_error("cannot write " + path);
}

std::uint64_t write_snap_graph(const std::string& path, std::uint64_t edges,
                               std::uint64_t nodes, std::uint64_t seed) {
  // Node count is rounded up to a prime so that stepping through targets
  // with any stride in [1, n) never repeats.
  auto is_prime = [](std::uint64_t v) {
    if (v < 2) return false;
    for (std::uint64_t f = 2; f * f <= v; ++f) {
      if (v % f == 0) return false;
    }
    return true;
  };
  std::uint64_t n = std::max<std::uint64_t>(nodes, 3);
  while (!is_prime(n)) ++n;

  Rng rng(seed);
  std::vector<double> w(n);
  double total = 0;
  for (auto& x : w) {
    const double u = std::uniform_real_distribution<double>(1e-9, 1.0)(rng);
    x = std::min(std::pow(u, -1.0 / 1.5), 1e4);
    total += x;
  }
  std::vector<std::uint64_t> deg(n);
  std::uint64_t assigned = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    deg[i] = std::min<std::uint64_t>(n - 1, static_cast<std::uint64_t>(w[i] / total * edges));
    assigned += deg[i];
  }
  for (std::uint64_t i = 0; assigned < edges; i = (i + 1) % n) {
    if (deg[i] < n - 1) {
      ++deg[i];
      ++assigned;
    }
  }

  std::ofstream out(path, std::ios::binary);
  out << "# synthetic directed graph\n# Nodes: " << n << " Edges: " << edges << "\n";
  std::string buf;
  buf.reserve(1 << 20);
  const std::uint64_t g = 7919 % n == 0 ? 1 : 7919;
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint64_t u = (i * g) % n;
    const std::uint64_t stride = 1 + rng() % (n - 1);
    const std::uint64_t start = rng() % n;
    for (std::uint64_t k = 0; k < deg[u]; ++k) {
      const std::uint64_t v = (start + k * stride) % n;
      buf += std::to_string(u);
      buf += '\t';
      buf += std::to_string(v);
      buf += '\n';
    }
    if (buf.size() > (1 << 20) - 64) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
  if (!out) throw std::runtime_error("cannot write " + path);
  return edges;
}

}  // namespace kgs::testing
