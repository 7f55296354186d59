#pragma once

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <string_view>

#include "common.hpp"

namespace kgs {

// Positions of an edge r(s,d).
enum class Field : std::uint8_t { kS = 0, kR = 1, kD = 2 };

char field_char(Field f);
std::optional<Field> parse_field(char c);

inline TermId get(const Edge& e, Field f) {
  switch (f) {
    case Field::kS: return e.s;
    case Field::kR: return e.r;
    case Field::kD: return e.d;
  }
  return 0;
}

inline void set(Edge& e, Field f, TermId v) {
  switch (f) {
    case Field::kS: e.s = v; break;
    case Field::kR: e.r = v; break;
    case Field::kD: e.d = v; break;
  }
}

// A string of 0..3 distinct characters over {s,r,d}. Also used for the
// output of bound(), which can be of length three.
class PartialOrdering {
 public:
  PartialOrdering() = default;

  static PartialOrdering parse(std::string_view text);

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  Field operator[](std::size_t i) const { return fields_[i]; }
  bool contains(Field f) const;
  void push_back(Field f);
  std::string str() const;

  friend bool operator==(const PartialOrdering& a, const PartialOrdering& b) {
    if (a.size_ != b.size_) return false;
    for (std::size_t i = 0; i < a.size_; ++i) {
      if (a.fields_[i] != b.fields_[i]) return false;
    }
    return true;
  }

 private:
  std::array<Field, 3> fields_{};
  std::uint8_t size_ = 0;
};

// A permutation of {s,r,d}.
class Ordering {
 public:
  Ordering() : fields_{Field::kS, Field::kR, Field::kD} {}
  Ordering(Field a, Field b, Field c);

  static Ordering parse(std::string_view text);
  static std::optional<Ordering> from_partial(const PartialOrdering& p);
  // srd, sdr, rsd, rds, drs, dsr
  static const std::array<Ordering, 6>& all();

  Field operator[](std::size_t i) const { return fields_[i]; }
  std::size_t position_of(Field f) const;
  std::string str() const;
  PartialOrdering as_partial() const;

  // Edge fields permuted into this ordering.
  std::array<TermId, 3> key(const Edge& e) const {
    return {get(e, fields_[0]), get(e, fields_[1]), get(e, fields_[2])};
  }
  Edge compose(TermId a, TermId b, TermId c) const {
    Edge e;
    set(e, fields_[0], a);
    set(e, fields_[1], b);
    set(e, fields_[2], c);
    return e;
  }
  bool less(const Edge& a, const Edge& b) const { return key(a) < key(b); }

  friend bool operator==(const Ordering&, const Ordering&) = default;

 private:
  std::array<Field, 3> fields_;
};

bool isprefix(const PartialOrdering& a, const Ordering& b);
bool isprefix(const PartialOrdering& a, const PartialOrdering& b);

// `a` with every character of `b` removed, order of `a` preserved.
PartialOrdering ordering_minus(const PartialOrdering& a, const PartialOrdering& b);
PartialOrdering ordering_minus(const Ordering& a, const PartialOrdering& b);

struct PatternTerm {
  bool is_var = true;
  TermId id = 0;
  std::string var;

  static PatternTerm constant(TermId id) { return {false, id, {}}; }
  static PatternTerm variable(std::string name) {
    return {true, 0, std::move(name)};
  }

  friend bool operator==(const PatternTerm&, const PatternTerm&) = default;
};

class TriplePattern {
 public:
  TriplePattern() = default;
  TriplePattern(PatternTerm s, PatternTerm r, PatternTerm d)
      : terms_{std::move(s), std::move(r), std::move(d)} {}

  // Convenience for tests: "?x" is a variable, anything else must be a
  // decimal id.
  static TriplePattern parse_ids(std::string_view s, std::string_view r,
                                 std::string_view d);

  const PatternTerm& at(Field f) const {
    return terms_[static_cast<std::size_t>(f)];
  }
  PatternTerm& at(Field f) { return terms_[static_cast<std::size_t>(f)]; }

  std::size_t num_constants() const;
  bool has_repeated_vars() const;
  // True iff e satisfies every constant and every variable co-occurrence.
  bool matches(const Edge& e) const;
  // Only checks co-occurring variables.
  bool repeats_hold(const Edge& e) const;
  std::string str() const;

  friend bool operator==(const TriplePattern&, const TriplePattern&) = default;

 private:
  std::array<PatternTerm, 3> terms_{PatternTerm::variable("s"),
                                    PatternTerm::variable("r"),
                                    PatternTerm::variable("d")};
};

PartialOrdering bound(const TriplePattern& p);

// Picks the stream ordering that serves p as a range scan while returning
// edges in the order requested by w.
Ordering select_ordering(const TriplePattern& p, const Ordering& w);

// Completes a grouping order like "d" or "rs" to a full ordering by appending
// the missing fields in s,r,d order.
Ordering complete_ordering(const PartialOrdering& w);

}  // namespace kgs
