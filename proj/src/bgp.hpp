#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "primitives.hpp"

namespace kgs {

inline constexpr std::string_view kRdfType =
    "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

struct QueryTerm {
  bool is_var = false;
  std::string text;  // variable name without '?', or the constant's label

  friend bool operator==(const QueryTerm&, const QueryTerm&) = default;
};

using QueryPattern = std::array<QueryTerm, 3>;

struct ParsedQuery {
  std::vector<std::string> select;  // empty means *
  std::vector<QueryPattern> patterns;
};

// SELECT [DISTINCT] (?v ...|*) [WHERE] { s p o . ... } with PREFIX lines.
// IRIs lose their brackets, prefixed names are expanded, literals are kept
// verbatim and `a` in predicate position stands for rdf:type.
ParsedQuery parse_query(std::string_view text);

// Patterns over ids. `unsatisfiable` is set when a constant is unknown.
struct BoundQuery {
  std::vector<TriplePattern> patterns;
  std::vector<std::string> projection;
  bool unsatisfiable = false;
};

BoundQuery bind_query(const ParsedQuery& q, const Primitives& prim);

enum class JoinOp { kScan, kMerge, kIndexLoop, kCartesian };
const char* join_op_name(JoinOp op);

struct PlanStep {
  std::size_t pattern = 0;
  JoinOp op = JoinOp::kScan;
  std::string join_var;                // primary join variable
  std::vector<std::string> shared;     // all variables shared with the prefix
  std::uint64_t estimate = 0;          // exact cnt of the pattern alone
};

struct Plan {
  std::vector<PlanStep> steps;
  std::string describe() const;
};

// Greedy: cheapest pattern first, then most shared variables with what is
// bound, ties by cnt and then input order.
Plan plan_query(const BoundQuery& q, const Primitives& prim);

// Plan with a fixed pattern order; ops, when given, override the operator of
// every step after the first (CARTESIAN is kept where nothing is shared).
Plan plan_with_order(const BoundQuery& q, const Primitives& prim,
                     const std::vector<std::size_t>& order,
                     std::optional<JoinOp> forced = std::nullopt);

struct Bindings {
  std::vector<std::string> vars;
  std::vector<std::vector<TermId>> rows;  // sorted, duplicate-free
};

Bindings execute_plan(const BoundQuery& q, const Plan& plan,
                      const Primitives& prim);

struct QueryResult {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;  // sorted by label tuple
  Plan plan;
};

QueryResult run_query(std::string_view text, const Primitives& prim);
// Maps bindings to labels, projecting and sorting.
QueryResult label_bindings(const BoundQuery& q, const Bindings& b,
                           const Primitives& prim);

}  // namespace kgs
