#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dictionary.hpp"
#include "store.hpp"

namespace kgs {

enum class DeltaKind { kAddition, kRemoval };

const char* delta_kind_name(DeltaKind k);

struct DeltaLayer {
  std::uint64_t seq = 0;
  DeltaKind kind = DeltaKind::kAddition;
  std::shared_ptr<const Store> store;
};

// What a reader sees: the base database and sealed deltas in timestamp
// order, plus the dictionary covering all of them.
struct Snapshot {
  std::shared_ptr<const Store> base;
  std::vector<DeltaLayer> deltas;
  std::shared_ptr<const Dictionary> dict;
};

struct GroupedRow {
  std::array<TermId, 2> key{};
  std::uint8_t arity = 1;
  std::uint64_t count = 0;

  friend bool operator==(const GroupedRow&, const GroupedRow&) = default;
};

class GroupCursor {
 public:
  virtual ~GroupCursor() = default;
  virtual bool next(GroupedRow& out) = 0;
};

std::vector<GroupedRow> drain(GroupCursor& c);

// Description of an f5-f16 call, as taken by cnt.
struct Request {
  enum class Kind { kEdg, kGrp };
  Kind kind = Kind::kEdg;
  PartialOrdering ordering;
  TriplePattern pattern;

  static Request edg(const Ordering& w, const TriplePattern& p) {
    return {Kind::kEdg, w.as_partial(), p};
  }
  static Request grp(const PartialOrdering& w, const TriplePattern& p) {
    return {Kind::kGrp, w, p};
  }
};

class Primitives {
 public:
  explicit Primitives(std::shared_ptr<const Snapshot> snapshot);

  const Snapshot& snapshot() const { return *snap_; }

  // f1-f4: one B+Tree lookup per dictionary segment.
  std::optional<std::string> lbl_n(TermId id) const;
  std::optional<std::string> lbl_e(TermId id) const;
  std::optional<TermId> nodid(std::string_view label) const;
  std::optional<TermId> edgid(std::string_view label) const;

  // f5-f10. With a constant: one NM lookup, a search inside one table, then
  // constant work per edge returned. Without constants: a scan of one stream.
  std::unique_ptr<EdgeCursor> edg(const Ordering& w, const TriplePattern& p) const;
  // f11-f16: w has one or two fields. Linear in the rows grouped; groups
  // that are whole tables are read from the header.
  std::unique_ptr<GroupCursor> grp(const PartialOrdering& w,
                                   const TriplePattern& p) const;
  // f17. Constant time from NM cardinalities or header entries when no
  // variable repeats and no delta is involved, else linear in the result.
  std::uint64_t cnt(const Request& q) const;
  std::uint64_t cnt_edg(const Ordering& w, const TriplePattern& p) const {
    return cnt(Request::edg(w, p));
  }
  std::uint64_t cnt_grp(const PartialOrdering& w, const TriplePattern& p) const {
    return cnt(Request::grp(w, p));
  }
  // f18-f23, 0-based. Constant time inside ROW tables, logarithmic in the
  // runs of COLUMN tables, a walk over group headers in CLUSTER tables;
  // without constants the header is walked to the owning table first.
  Edge pos(const Ordering& w, const TriplePattern& p, std::uint64_t i) const;

  // True when some delta may hold edges matching p's constants, which
  // disables every metadata shortcut for p.
  bool touched(const TriplePattern& p) const;

 private:
  std::unique_ptr<EdgeCursor> overlay(const Ordering& stream_order,
                                      const TriplePattern& p) const;
  std::optional<std::uint64_t> grp_count_shortcut(const PartialOrdering& w,
                                                  const TriplePattern& p) const;
  std::optional<std::uint64_t> header_groups(StreamId id, TermId key) const;

  std::shared_ptr<const Snapshot> snap_;
};

}  // namespace kgs
