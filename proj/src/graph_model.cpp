#include "graph_model.hpp"

#include <charconv>

namespace kgs {

char field_char(Field f) {
  switch (f) {
    case Field::kS: return 's';
    case Field::kR: return 'r';
    case Field::kD: return 'd';
  }
  return '?';
}

std::optional<Field> parse_field(char c) {
  switch (c) {
    case 's': return Field::kS;
    case 'r': return Field::kR;
    case 'd': return Field::kD;
    default: return std::nullopt;
  }
}

PartialOrdering PartialOrdering::parse(std::string_view text) {
  if (text.size() > 3) {
    throw Error(ErrorCode::kInvalidArgument,
                "partial ordering too long: " + std::string(text));
  }
  PartialOrdering p;
  for (char c : text) {
    auto f = parse_field(c);
    if (!f || p.contains(*f)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "bad partial ordering: " + std::string(text));
    }
    p.push_back(*f);
  }
  return p;
}

bool PartialOrdering::contains(Field f) const {
  for (std::size_t i = 0; i < size_; ++i) {
    if (fields_[i] == f) return true;
  }
  return false;
}

void PartialOrdering::push_back(Field f) {
  if (size_ == 3) throw Error(ErrorCode::kInternal, "partial ordering full");
  fields_[size_++] = f;
}

std::string PartialOrdering::str() const {
  std::string out;
  for (std::size_t i = 0; i < size_; ++i) out += field_char(fields_[i]);
  return out;
}

Ordering::Ordering(Field a, Field b, Field c) : fields_{a, b, c} {
  if (a == b || b == c || a == c) {
    throw Error(ErrorCode::kInvalidArgument, "ordering repeats a field");
  }
}

Ordering Ordering::parse(std::string_view text) {
  auto p = PartialOrdering::parse(text);
  auto o = from_partial(p);
  if (!o) {
    throw Error(ErrorCode::kInvalidArgument,
                "ordering must be a permutation of srd: " + std::string(text));
  }
  return *o;
}

std::optional<Ordering> Ordering::from_partial(const PartialOrdering& p) {
  if (p.size() != 3) return std::nullopt;
  return Ordering(p[0], p[1], p[2]);
}

const std::array<Ordering, 6>& Ordering::all() {
  static const std::array<Ordering, 6> kAll = {
      Ordering(Field::kS, Field::kR, Field::kD),
      Ordering(Field::kS, Field::kD, Field::kR),
      Ordering(Field::kR, Field::kS, Field::kD),
      Ordering(Field::kR, Field::kD, Field::kS),
      Ordering(Field::kD, Field::kR, Field::kS),
      Ordering(Field::kD, Field::kS, Field::kR),
  };
  return kAll;
}

std::size_t Ordering::position_of(Field f) const {
  for (std::size_t i = 0; i < 3; ++i) {
    if (fields_[i] == f) return i;
  }
  return 3;
}

std::string Ordering::str() const { return as_partial().str(); }

PartialOrdering Ordering::as_partial() const {
  PartialOrdering p;
  for (Field f : fields_) p.push_back(f);
  return p;
}

bool isprefix(const PartialOrdering& a, const PartialOrdering& b) {
  if (a.size() > b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

bool isprefix(const PartialOrdering& a, const Ordering& b) {
  return isprefix(a, b.as_partial());
}

PartialOrdering ordering_minus(const PartialOrdering& a,
                               const PartialOrdering& b) {
  PartialOrdering out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!b.contains(a[i])) out.push_back(a[i]);
  }
  return out;
}

PartialOrdering ordering_minus(const Ordering& a, const PartialOrdering& b) {
  return ordering_minus(a.as_partial(), b);
}

TriplePattern TriplePattern::parse_ids(std::string_view s, std::string_view r,
                                       std::string_view d) {
  auto term = [](std::string_view t) {
    if (!t.empty() && t[0] == '?') {
      return PatternTerm::variable(std::string(t.substr(1)));
    }
    TermId id = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), id);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
      throw Error(ErrorCode::kParse, "bad pattern term: " + std::string(t));
    }
    return PatternTerm::constant(id);
  };
  return TriplePattern(term(s), term(r), term(d));
}

std::size_t TriplePattern::num_constants() const {
  std::size_t n = 0;
  for (const auto& t : terms_) n += t.is_var ? 0 : 1;
  return n;
}

bool TriplePattern::has_repeated_vars() const {
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = i + 1; j < 3; ++j) {
      if (terms_[i].is_var && terms_[j].is_var &&
          terms_[i].var == terms_[j].var) {
        return true;
      }
    }
  }
  return false;
}

bool TriplePattern::repeats_hold(const Edge& e) const {
  const TermId v[3] = {e.s, e.r, e.d};
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = i + 1; j < 3; ++j) {
      if (terms_[i].is_var && terms_[j].is_var &&
          terms_[i].var == terms_[j].var && v[i] != v[j]) {
        return false;
      }
    }
  }
  return true;
}

bool TriplePattern::matches(const Edge& e) const {
  const TermId v[3] = {e.s, e.r, e.d};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!terms_[i].is_var && terms_[i].id != v[i]) return false;
  }
  return repeats_hold(e);
}

std::string TriplePattern::str() const {
  std::string out;
  for (std::size_t i = 0; i < 3; ++i) {
    if (i) out += ' ';
    out += terms_[i].is_var ? "?" + terms_[i].var : std::to_string(terms_[i].id);
  }
  return out;
}

PartialOrdering bound(const TriplePattern& p) {
  PartialOrdering out;
  for (Field f : {Field::kS, Field::kR, Field::kD}) {
    if (!p.at(f).is_var) out.push_back(f);
  }
  return out;
}

Ordering select_ordering(const TriplePattern& p, const Ordering& w) {
  const PartialOrdering b = bound(p);
  const PartialOrdering rest = ordering_minus(w, b);
  for (const Ordering& candidate : Ordering::all()) {
    if (isprefix(b, candidate) && ordering_minus(candidate, b) == rest) {
      return candidate;
    }
  }
  throw Error(ErrorCode::kInvalidOrdering,
              "no stream serves pattern " + p.str() + " in order " + w.str());
}

Ordering complete_ordering(const PartialOrdering& w) {
  PartialOrdering full = w;
  for (Field f : {Field::kS, Field::kR, Field::kD}) {
    if (!full.contains(f)) full.push_back(f);
  }
  return *Ordering::from_partial(full);
}

}  // namespace kgs
