#include "bgp.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

namespace kgs {

namespace {

[[noreturn]] void query_error(const std::string& what) {
  throw Error(ErrorCode::kParse, "query: " + what);
}

class Lexer {
 public:
  explicit Lexer(std::string_view s) : s_(s) {}

  void skip() {
    for (;;) {
      while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
      if (i_ < s_.size() && s_[i_] == '#') {
        while (i_ < s_.size() && s_[i_] != '\n') ++i_;
        continue;
      }
      return;
    }
  }

  bool done() {
    skip();
    return i_ >= s_.size();
  }

  char peek() {
    skip();
    return i_ < s_.size() ? s_[i_] : '\0';
  }

  bool accept(char c) {
    if (peek() == c) {
      ++i_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) query_error(std::string("expected '") + c + "'");
  }

  // Case-insensitive keyword match followed by a non-word character.
  bool accept_keyword(std::string_view kw) {
    skip();
    if (s_.size() - i_ < kw.size()) return false;
    for (std::size_t k = 0; k < kw.size(); ++k) {
      if (std::toupper(static_cast<unsigned char>(s_[i_ + k])) != kw[k]) return false;
    }
    const std::size_t end = i_ + kw.size();
    if (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) ||
                            s_[end] == '_' || s_[end] == ':')) {
      return false;
    }
    i_ = end;
    return true;
  }

  std::string iri() {
    expect('<');
    std::string out;
    while (i_ < s_.size() && s_[i_] != '>') {
      // IRIs may be wrapped over several lines.
      if (!std::isspace(static_cast<unsigned char>(s_[i_]))) out += s_[i_];
      ++i_;
    }
    if (i_ >= s_.size()) query_error("unterminated IRI");
    ++i_;
    return out;
  }

  std::string literal() {
    const std::size_t start = i_;
    ++i_;
    while (i_ < s_.size() && s_[i_] != '"') {
      if (s_[i_] == '\\') ++i_;
      ++i_;
    }
    if (i_ >= s_.size()) query_error("unterminated literal");
    ++i_;
    if (i_ < s_.size() && s_[i_] == '@') {
      while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) ||
                                s_[i_] == '-' || s_[i_] == '@')) {
        ++i_;
      }
    } else if (i_ + 1 < s_.size() && s_[i_] == '^' && s_[i_ + 1] == '^') {
      i_ += 2;
      if (i_ < s_.size() && s_[i_] == '<') {
        const std::size_t end = s_.find('>', i_);
        if (end == std::string_view::npos) query_error("unterminated datatype");
        i_ = end + 1;
      } else {
        word();
      }
    }
    return std::string(s_.substr(start, i_ - start));
  }

  // A run of characters up to whitespace or a structural character. A final
  // '.' is left for the pattern separator.
  std::string word() {
    skip();
    const std::size_t start = i_;
    while (i_ < s_.size()) {
      const char c = s_[i_];
      if (std::isspace(static_cast<unsigned char>(c)) || c == '{' || c == '}' ||
          c == '<' || c == '"' || c == '#') {
        break;
      }
      ++i_;
    }
    while (i_ > start && s_[i_ - 1] == '.') --i_;
    return std::string(s_.substr(start, i_ - start));
  }

 private:
  std::string_view s_;
  std::size_t i_ = 0;
};

QueryTerm read_term(Lexer& lx, const std::map<std::string, std::string>& prefixes,
                    bool predicate) {
  const char c = lx.peek();
  if (c == '<') return {false, lx.iri()};
  if (c == '"') return {false, lx.literal()};
  if (c == '?' || c == '$') {
    std::string w = lx.word();
    if (w.size() < 2) query_error("empty variable name");
    return {true, w.substr(1)};
  }
  std::string w = lx.word();
  if (w.empty()) query_error("expected a term");
  if (predicate && w == "a") return {false, std::string(kRdfType)};
  const std::size_t colon = w.find(':');
  if (colon != std::string::npos) {
    auto it = prefixes.find(w.substr(0, colon));
    if (it != prefixes.end()) return {false, it->second + w.substr(colon + 1)};
  }
  return {false, w};
}

std::vector<std::string> pattern_vars(const TriplePattern& p) {
  std::vector<std::string> out;
  for (Field f : {Field::kS, Field::kR, Field::kD}) {
    const PatternTerm& t = p.at(f);
    if (t.is_var && std::find(out.begin(), out.end(), t.var) == out.end()) {
      out.push_back(t.var);
    }
  }
  return out;
}

std::optional<Field> field_of(const TriplePattern& p, const std::string& var) {
  for (Field f : {Field::kS, Field::kR, Field::kD}) {
    if (p.at(f).is_var && p.at(f).var == var) return f;
  }
  return std::nullopt;
}

// Ordering that returns p's answers sorted by var (constants fixed).
Ordering ordering_by(const TriplePattern& p, const std::optional<std::string>& var) {
  PartialOrdering w;
  if (var) {
    if (auto f = field_of(p, *var)) w.push_back(*f);
  }
  return complete_ordering(w);
}

TermId value(const Edge& e, Field f) { return get(e, f); }

Plan build_plan(const BoundQuery& q, const std::vector<std::size_t>& order,
                const std::vector<std::uint64_t>& est,
                std::optional<JoinOp> forced) {
  Plan plan;
  std::set<std::string> bound;
  std::string sort_var;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const TriplePattern& p = q.patterns[order[k]];
    const auto vars = pattern_vars(p);
    PlanStep step;
    step.pattern = order[k];
    step.estimate = est[order[k]];
    if (k == 0) {
      step.op = JoinOp::kScan;
      // Sort the first input on the variable the next step joins on.
      if (order.size() > 1) {
        const auto next_vars = pattern_vars(q.patterns[order[1]]);
        for (const auto& v : next_vars) {
          if (std::find(vars.begin(), vars.end(), v) != vars.end()) {
            step.join_var = v;
            break;
          }
        }
      }
      if (step.join_var.empty() && !vars.empty()) step.join_var = vars[0];
      sort_var = step.join_var;
    } else {
      for (const auto& v : vars) {
        if (bound.count(v)) step.shared.push_back(v);
      }
      if (step.shared.empty()) {
        step.op = JoinOp::kCartesian;
      } else {
        step.join_var = std::find(step.shared.begin(), step.shared.end(),
                                  sort_var) != step.shared.end()
                            ? sort_var
                            : step.shared[0];
        step.op = step.join_var == sort_var ? JoinOp::kMerge : JoinOp::kIndexLoop;
        if (forced && (*forced == JoinOp::kMerge || *forced == JoinOp::kIndexLoop)) {
          step.op = *forced;
        }
        if (step.op == JoinOp::kMerge) sort_var = step.join_var;
      }
    }
    for (const auto& v : vars) bound.insert(v);
    plan.steps.push_back(step);
  }
  return plan;
}

std::vector<std::uint64_t> estimates(const BoundQuery& q, const Primitives& prim) {
  std::vector<std::uint64_t> est;
  for (const auto& p : q.patterns) {
    est.push_back(prim.cnt_edg(stream_ordering(StreamId::kTS), p));
  }
  return est;
}

struct Intermediate {
  std::vector<std::string> vars;
  std::vector<std::vector<TermId>> rows;
  std::optional<std::size_t> sort_col;

  std::optional<std::size_t> col(const std::string& v) const {
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (vars[i] == v) return i;
    }
    return std::nullopt;
  }
};

// Positions in p of variables not yet in `have`, one field per variable.
std::vector<std::pair<std::string, Field>> new_vars(const TriplePattern& p,
                                                    const Intermediate& have) {
  std::vector<std::pair<std::string, Field>> out;
  for (Field f : {Field::kS, Field::kR, Field::kD}) {
    const PatternTerm& t = p.at(f);
    if (!t.is_var || have.col(t.var)) continue;
    bool seen = false;
    for (const auto& [v, ff] : out) seen = seen || v == t.var;
    if (!seen) out.push_back({t.var, f});
  }
  return out;
}

void scan_step(Intermediate& cur, const TriplePattern& p, const PlanStep& step,
               const Primitives& prim) {
  const auto nv = new_vars(p, cur);
  for (const auto& [v, f] : nv) cur.vars.push_back(v);
  std::optional<std::string> sv;
  if (!step.join_var.empty()) sv = step.join_var;
  auto c = prim.edg(ordering_by(p, sv), p);
  Edge e;
  while (c->next(e)) {
    std::vector<TermId> row;
    row.reserve(nv.size());
    for (const auto& [v, f] : nv) row.push_back(value(e, f));
    cur.rows.push_back(std::move(row));
  }
  cur.sort_col = sv ? cur.col(*sv) : std::nullopt;
}

void merge_step(Intermediate& cur, const TriplePattern& p, const PlanStep& step,
                const Primitives& prim) {
  const std::size_t jc = *cur.col(step.join_var);
  if (cur.sort_col != jc) {
    std::stable_sort(cur.rows.begin(), cur.rows.end(),
                     [jc](const auto& a, const auto& b) { return a[jc] < b[jc]; });
    cur.sort_col = jc;
  }
  const Field jf = *field_of(p, step.join_var);
  std::vector<std::pair<std::size_t, Field>> checks;
  for (const auto& v : step.shared) {
    if (v != step.join_var) checks.push_back({*cur.col(v), *field_of(p, v)});
  }
  const auto nv = new_vars(p, cur);
  auto c = prim.edg(ordering_by(p, step.join_var), p);

  std::vector<std::vector<TermId>> out;
  std::size_t li = 0;
  Edge e;
  bool have = c->next(e);
  bool have_prev = false;
  TermId prev = 0;
  std::vector<Edge> group;
  while (have) {
    const TermId key = value(e, jf);
    if (have_prev && key < prev) {
      throw Error(ErrorCode::kInternal, "merge join input not sorted");
    }
    have_prev = true;
    prev = key;
    group.clear();
    while (have && value(e, jf) == key) {
      group.push_back(e);
      have = c->next(e);
    }
    while (li < cur.rows.size() && cur.rows[li][jc] < key) {
      if (li + 1 < cur.rows.size() && cur.rows[li + 1][jc] < cur.rows[li][jc]) {
        throw Error(ErrorCode::kInternal, "merge join input not sorted");
      }
      ++li;
    }
    std::size_t lj = li;
    while (lj < cur.rows.size() && cur.rows[lj][jc] == key) {
      for (const Edge& g : group) {
        bool ok = true;
        for (const auto& [col, f] : checks) ok = ok && cur.rows[lj][col] == value(g, f);
        if (!ok) continue;
        std::vector<TermId> row = cur.rows[lj];
        for (const auto& [v, f] : nv) row.push_back(value(g, f));
        out.push_back(std::move(row));
      }
      ++lj;
    }
  }
  for (const auto& [v, f] : nv) cur.vars.push_back(v);
  cur.rows = std::move(out);
}

void index_loop_step(Intermediate& cur, const TriplePattern& p,
                     const Primitives& prim) {
  const auto nv = new_vars(p, cur);
  std::vector<std::pair<Field, std::size_t>> subst;
  for (Field f : {Field::kS, Field::kR, Field::kD}) {
    const PatternTerm& t = p.at(f);
    if (t.is_var) {
      if (auto col = cur.col(t.var)) subst.push_back({f, *col});
    }
  }
  std::vector<std::vector<TermId>> out;
  const Ordering srd = stream_ordering(StreamId::kTS);
  for (const auto& row : cur.rows) {
    TriplePattern q = p;
    for (const auto& [f, col] : subst) q.at(f) = PatternTerm::constant(row[col]);
    auto c = prim.edg(srd, q);
    Edge e;
    while (c->next(e)) {
      std::vector<TermId> r = row;
      for (const auto& [v, f] : nv) r.push_back(value(e, f));
      out.push_back(std::move(r));
    }
  }
  for (const auto& [v, f] : nv) cur.vars.push_back(v);
  cur.rows = std::move(out);
}

void cartesian_step(Intermediate& cur, const TriplePattern& p,
                    const Primitives& prim) {
  Intermediate right;
  PlanStep scan;
  scan_step(right, p, scan, prim);
  std::vector<std::vector<TermId>> out;
  for (const auto& l : cur.rows) {
    for (const auto& r : right.rows) {
      std::vector<TermId> row = l;
      row.insert(row.end(), r.begin(), r.end());
      out.push_back(std::move(row));
    }
  }
  cur.vars.insert(cur.vars.end(), right.vars.begin(), right.vars.end());
  cur.rows = std::move(out);
}

bool var_is_relation_only(const BoundQuery& q, const std::string& v) {
  for (const auto& p : q.patterns) {
    for (Field f : {Field::kS, Field::kD}) {
      if (p.at(f).is_var && p.at(f).var == v) return false;
    }
  }
  return true;
}

}  // namespace

ParsedQuery parse_query(std::string_view text) {
  Lexer lx(text);
  std::map<std::string, std::string> prefixes;
  while (lx.accept_keyword("PREFIX")) {
    std::string name = lx.word();
    if (name.empty() || name.back() != ':') query_error("bad PREFIX name");
    name.pop_back();
    prefixes[name] = lx.iri();
  }
  ParsedQuery q;
  if (!lx.accept_keyword("SELECT")) query_error("expected SELECT");
  lx.accept_keyword("DISTINCT");
  if (lx.accept('*')) {
    // all variables
  } else {
    while (lx.peek() == '?' || lx.peek() == '$') {
      q.select.push_back(lx.word().substr(1));
    }
    if (q.select.empty()) query_error("SELECT needs variables or *");
  }
  lx.accept_keyword("WHERE");
  lx.expect('{');
  while (!lx.accept('}')) {
    if (lx.done()) query_error("missing '}'");
    QueryPattern p;
    p[0] = read_term(lx, prefixes, false);
    p[1] = read_term(lx, prefixes, true);
    p[2] = read_term(lx, prefixes, false);
    q.patterns.push_back(std::move(p));
    if (!lx.accept('.') && lx.peek() != '}') query_error("expected '.' or '}'");
  }
  if (!lx.done()) query_error("trailing content after '}'");
  if (q.patterns.empty()) query_error("empty graph pattern");
  for (const auto& v : q.select) {
    bool found = false;
    for (const auto& p : q.patterns) {
      for (const auto& t : p) found = found || (t.is_var && t.text == v);
    }
    if (!found) query_error("selected variable ?" + v + " is not used");
  }
  return q;
}

BoundQuery bind_query(const ParsedQuery& q, const Primitives& prim) {
  BoundQuery out;
  for (const auto& qp : q.patterns) {
    TriplePattern p;
    for (int k = 0; k < 3; ++k) {
      const Field f = static_cast<Field>(k);
      const QueryTerm& t = qp[k];
      if (t.is_var) {
        p.at(f) = PatternTerm::variable(t.text);
        continue;
      }
      auto id = f == Field::kR ? prim.edgid(t.text) : prim.nodid(t.text);
      if (!id) {
        out.unsatisfiable = true;
        id = 0;
      }
      p.at(f) = PatternTerm::constant(*id);
    }
    out.patterns.push_back(std::move(p));
  }
  if (!q.select.empty()) {
    out.projection = q.select;
  } else {
    for (const auto& p : out.patterns) {
      for (const auto& v : pattern_vars(p)) {
        if (std::find(out.projection.begin(), out.projection.end(), v) ==
            out.projection.end()) {
          out.projection.push_back(v);
        }
      }
    }
  }
  return out;
}

const char* join_op_name(JoinOp op) {
  switch (op) {
    case JoinOp::kScan: return "SCAN";
    case JoinOp::kMerge: return "MERGE";
    case JoinOp::kIndexLoop: return "INDEX_LOOP";
    case JoinOp::kCartesian: return "CARTESIAN";
  }
  return "?";
}

std::string Plan::describe() const {
  std::ostringstream out;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const PlanStep& s = steps[k];
    if (k) out << "; ";
    out << join_op_name(s.op) << " p" << s.pattern << " (cnt " << s.estimate << ")";
    if (!s.join_var.empty()) out << (k == 0 ? " by ?" : " on ?") << s.join_var;
  }
  return out.str();
}

Plan plan_query(const BoundQuery& q, const Primitives& prim) {
  const auto est = estimates(q, prim);
  std::vector<std::size_t> order;
  std::vector<bool> used(q.patterns.size(), false);
  std::set<std::string> bound;
  for (std::size_t k = 0; k < q.patterns.size(); ++k) {
    std::optional<std::size_t> best;
    std::size_t best_shared = 0;
    for (std::size_t i = 0; i < q.patterns.size(); ++i) {
      if (used[i]) continue;
      std::size_t shared = 0;
      if (k > 0) {
        for (const auto& v : pattern_vars(q.patterns[i])) shared += bound.count(v);
      }
      if (!best || shared > best_shared ||
          (shared == best_shared && est[i] < est[*best])) {
        best = i;
        best_shared = shared;
      }
    }
    used[*best] = true;
    order.push_back(*best);
    for (const auto& v : pattern_vars(q.patterns[*best])) bound.insert(v);
  }
  return build_plan(q, order, est, std::nullopt);
}

Plan plan_with_order(const BoundQuery& q, const Primitives& prim,
                     const std::vector<std::size_t>& order,
                     std::optional<JoinOp> forced) {
  std::vector<std::size_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted.size() != q.patterns.size() || sorted[i] != i) {
      throw Error(ErrorCode::kInvalidArgument, "order must permute the patterns");
    }
  }
  return build_plan(q, order, estimates(q, prim), forced);
}

Bindings execute_plan(const BoundQuery& q, const Plan& plan,
                      const Primitives& prim) {
  Bindings out;
  out.vars = q.projection;
  if (q.unsatisfiable || plan.steps.empty()) return out;
  Intermediate cur;
  for (std::size_t k = 0; k < plan.steps.size(); ++k) {
    const PlanStep& step = plan.steps[k];
    const TriplePattern& p = q.patterns[step.pattern];
    switch (step.op) {
      case JoinOp::kScan: scan_step(cur, p, step, prim); break;
      case JoinOp::kMerge: merge_step(cur, p, step, prim); break;
      case JoinOp::kIndexLoop: index_loop_step(cur, p, prim); break;
      case JoinOp::kCartesian: cartesian_step(cur, p, prim); break;
    }
    if (cur.rows.empty()) break;
  }
  std::vector<std::size_t> cols;
  for (const auto& v : q.projection) {
    auto c = cur.col(v);
    if (!c) {
      if (cur.rows.empty()) return out;
      throw Error(ErrorCode::kInternal, "projected variable not bound: " + v);
    }
    cols.push_back(*c);
  }
  for (const auto& row : cur.rows) {
    std::vector<TermId> r;
    r.reserve(cols.size());
    for (std::size_t c : cols) r.push_back(row[c]);
    out.rows.push_back(std::move(r));
  }
  std::sort(out.rows.begin(), out.rows.end());
  out.rows.erase(std::unique(out.rows.begin(), out.rows.end()), out.rows.end());
  return out;
}

QueryResult label_bindings(const BoundQuery& q, const Bindings& b,
                           const Primitives& prim) {
  QueryResult out;
  out.columns = b.vars;
  std::vector<bool> relation;
  for (const auto& v : b.vars) relation.push_back(var_is_relation_only(q, v));
  for (const auto& row : b.rows) {
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < row.size(); ++i) {
      auto l = relation[i] ? prim.lbl_e(row[i]) : prim.lbl_n(row[i]);
      if (!l) throw Error(ErrorCode::kCorrupt, "id without label: " + std::to_string(row[i]));
      labels.push_back(std::move(*l));
    }
    out.rows.push_back(std::move(labels));
  }
  std::sort(out.rows.begin(), out.rows.end());
  out.rows.erase(std::unique(out.rows.begin(), out.rows.end()), out.rows.end());
  return out;
}

QueryResult run_query(std::string_view text, const Primitives& prim) {
  const ParsedQuery parsed = parse_query(text);
  const BoundQuery q = bind_query(parsed, prim);
  if (q.unsatisfiable) {
    QueryResult r;
    r.columns = q.projection;
    return r;
  }
  const Plan plan = plan_query(q, prim);
  QueryResult r = label_bindings(q, execute_plan(q, plan, prim), prim);
  r.plan = plan;
  return r;
}

}  // namespace kgs
