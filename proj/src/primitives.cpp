#include "primitives.hpp"

namespace kgs {

namespace {

// k-way merge of base and delta cursors over the same ordering. For an edge
// present in several sources the newest one decides visibility.
class OverlayCursor : public EdgeCursor {
 public:
  struct Source {
    std::unique_ptr<EdgeCursor> cursor;
    bool removal = false;
    Edge head{};
    bool valid = false;
  };

  OverlayCursor(const Ordering& o, std::vector<Source> sources)
      : order_(o), sources_(std::move(sources)) {
    for (Source& s : sources_) s.valid = s.cursor->next(s.head);
  }

  bool next(Edge& out) override {
    for (;;) {
      const Edge* min = nullptr;
      for (const Source& s : sources_) {
        if (s.valid && (!min || order_.less(s.head, *min))) min = &s.head;
      }
      if (!min) return false;
      const Edge e = *min;
      bool removed = false;
      for (Source& s : sources_) {
        if (s.valid && s.head == e) {
          removed = s.removal;  // later sources are newer
          s.valid = s.cursor->next(s.head);
        }
      }
      if (!removed) {
        out = e;
        return true;
      }
    }
  }

 private:
  Ordering order_;
  std::vector<Source> sources_;
};

class GroupingCursor : public GroupCursor {
 public:
  GroupingCursor(std::unique_ptr<EdgeCursor> edges, const PartialOrdering& w)
      : edges_(std::move(edges)), w_(w) {
    have_ = edges_->next(head_);
  }

  bool next(GroupedRow& out) override {
    if (!have_) return false;
    out = GroupedRow{};
    out.arity = static_cast<std::uint8_t>(w_.size());
    const auto k = key(head_);
    out.key = k;
    out.count = 0;
    while (have_ && key(head_) == k) {
      ++out.count;
      have_ = edges_->next(head_);
    }
    return true;
  }

 private:
  std::array<TermId, 2> key(const Edge& e) const {
    std::array<TermId, 2> k{};
    for (std::size_t i = 0; i < w_.size(); ++i) k[i] = get(e, w_[i]);
    return k;
  }

  std::unique_ptr<EdgeCursor> edges_;
  PartialOrdering w_;
  Edge head_{};
  bool have_ = false;
};

// Distinct keys of a stream with their row counts, straight from the header.
class HeaderGroupCursor : public GroupCursor {
 public:
  HeaderGroupCursor(const EdgeStore& s, StreamId id) : s_(s), id_(id) {}

  bool next(GroupedRow& out) override {
    if (i_ >= s_.entry_count(id_)) return false;
    const HeaderEntry e = s_.entry(id_, i_++);
    out = GroupedRow{};
    out.key[0] = e.key;
    out.count = e.n;
    return true;
  }

 private:
  const EdgeStore& s_;
  StreamId id_;
  std::uint64_t i_ = 0;
};

class VectorGroupCursor : public GroupCursor {
 public:
  explicit VectorGroupCursor(std::vector<GroupedRow> rows) : rows_(std::move(rows)) {}
  bool next(GroupedRow& out) override {
    if (pos_ >= rows_.size()) return false;
    out = rows_[pos_++];
    return true;
  }

 private:
  std::vector<GroupedRow> rows_;
  std::size_t pos_ = 0;
};

Field third_field(Field a, Field b) {
  for (Field f : {Field::kS, Field::kR, Field::kD}) {
    if (f != a && f != b) return f;
  }
  return Field::kS;
}

StreamId stream_of(Field a, Field b) {
  return stream_for(Ordering(a, b, third_field(a, b)));
}

// The single constant of p, if it has exactly one.
std::optional<std::pair<Field, TermId>> single_constant(const TriplePattern& p) {
  if (p.num_constants() != 1) return std::nullopt;
  for (Field f : {Field::kS, Field::kR, Field::kD}) {
    if (!p.at(f).is_var) return std::make_pair(f, p.at(f).id);
  }
  return std::nullopt;
}

}  // namespace

const char* delta_kind_name(DeltaKind k) {
  return k == DeltaKind::kAddition ? "add" : "remove";
}

std::vector<GroupedRow> drain(GroupCursor& c) {
  std::vector<GroupedRow> out;
  GroupedRow g;
  while (c.next(g)) out.push_back(g);
  return out;
}

Primitives::Primitives(std::shared_ptr<const Snapshot> snapshot)
    : snap_(std::move(snapshot)) {
  if (!snap_ || !snap_->base || !snap_->dict) {
    throw Error(ErrorCode::kInvalidArgument, "incomplete snapshot");
  }
}

std::optional<std::string> Primitives::lbl_n(TermId id) const {
  return snap_->dict->lookup_label(id, TermKind::kEntity);
}

std::optional<std::string> Primitives::lbl_e(TermId id) const {
  return snap_->dict->lookup_label(id, TermKind::kRelation);
}

std::optional<TermId> Primitives::nodid(std::string_view label) const {
  return snap_->dict->lookup_id(label, TermKind::kEntity);
}

std::optional<TermId> Primitives::edgid(std::string_view label) const {
  return snap_->dict->lookup_id(label, TermKind::kRelation);
}

bool Primitives::touched(const TriplePattern& p) const {
  for (const DeltaLayer& d : snap_->deltas) {
    if (p.num_constants() == 0) {
      if (d.store->edge_count() > 0) return true;
      continue;
    }
    bool all = true;
    for (Field f : {Field::kS, Field::kR, Field::kD}) {
      const PatternTerm& t = p.at(f);
      if (t.is_var) continue;
      auto rec = d.store->record(t.id);
      if (!rec || rec->cardinality(f) == 0) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

std::unique_ptr<EdgeCursor> Primitives::overlay(const Ordering& o,
                                                const TriplePattern& p) const {
  std::vector<OverlayCursor::Source> sources;
  sources.push_back({snap_->base->edg(o, p), false});
  for (const DeltaLayer& d : snap_->deltas) {
    sources.push_back({d.store->edg(o, p), d.kind == DeltaKind::kRemoval});
  }
  return std::make_unique<OverlayCursor>(o, std::move(sources));
}

std::unique_ptr<EdgeCursor> Primitives::edg(const Ordering& w,
                                            const TriplePattern& p) const {
  const Ordering o = select_ordering(p, w);
  if (touched(p)) return overlay(o, p);
  return snap_->base->edg(o, p);
}

std::unique_ptr<GroupCursor> Primitives::grp(const PartialOrdering& w,
                                             const TriplePattern& p) const {
  if (w.size() < 1 || w.size() > 2) {
    throw Error(ErrorCode::kInvalidOrdering, "grp needs one or two fields");
  }
  if (w.size() == 1 && !p.has_repeated_vars() && !touched(p)) {
    const Field f = w[0];
    if (!p.at(f).is_var) {
      std::vector<GroupedRow> rows;
      const std::uint64_t n = cnt_edg(complete_ordering(w), p);
      if (n > 0) {
        GroupedRow g;
        g.key[0] = p.at(f).id;
        g.count = n;
        rows.push_back(g);
      }
      return std::make_unique<VectorGroupCursor>(std::move(rows));
    }
    if (p.num_constants() == 0) {
      const StreamId id = stream_for(complete_ordering(w));
      return std::make_unique<HeaderGroupCursor>(snap_->base->edges(), id);
    }
  }
  return std::make_unique<GroupingCursor>(edg(complete_ordering(w), p), w);
}

std::optional<std::uint64_t> Primitives::header_groups(StreamId id, TermId key) const {
  const EdgeStore& s = snap_->base->edges();
  auto i = s.find(id, key);
  if (!i) return 0;
  const HeaderEntry e = s.entry(id, *i);
  // Pruned tables carry no group count.
  if (e.groups == kUnknownGroups) return std::nullopt;
  return e.groups;
}

std::optional<std::uint64_t> Primitives::grp_count_shortcut(
    const PartialOrdering& w, const TriplePattern& p) const {
  if (p.has_repeated_vars() || p.num_constants() > 1 || touched(p)) {
    return std::nullopt;
  }
  const Store& base = *snap_->base;
  const auto c = single_constant(p);
  if (w.size() == 1) {
    const Field f = w[0];
    if (!c) return base.edges().entry_count(stream_for(complete_ordering(w)));
    auto rec = base.record(c->second);
    if (c->first == f) return rec && rec->cardinality(f) > 0 ? 1 : 0;
    return header_groups(stream_of(c->first, f), c->second);
  }
  const Field f1 = w[0];
  const Field f2 = w[1];
  if (!c) {
    // The pair count is the same in both streams keyed by f1 or f2.
    for (StreamId id : {stream_of(f1, f2), stream_of(f2, f1)}) {
      if (base.edges().has_pruned(id)) continue;
      const StreamReader& s = base.edges().stream(id);
      std::uint64_t total = 0;
      for (std::uint64_t i = 0; i < s.entry_count(); ++i) total += s.entry(i).groups;
      return total;
    }
    return std::nullopt;
  }
  if (c->first == f1) return header_groups(stream_of(f1, f2), c->second);
  if (c->first == f2) return header_groups(stream_of(f2, f1), c->second);
  auto rec = base.record(c->second);
  return rec ? rec->cardinality(c->first) : 0;
}

std::uint64_t Primitives::cnt(const Request& q) const {
  const TriplePattern& p = q.pattern;
  if (q.kind == Request::Kind::kGrp) {
    if (q.ordering.size() < 1 || q.ordering.size() > 2) {
      throw Error(ErrorCode::kInvalidOrdering, "grp needs one or two fields");
    }
    if (auto n = grp_count_shortcut(q.ordering, p)) return *n;
    auto c = grp(q.ordering, p);
    std::uint64_t n = 0;
    GroupedRow g;
    while (c->next(g)) ++n;
    return n;
  }
  auto w = Ordering::from_partial(q.ordering);
  if (!w) throw Error(ErrorCode::kInvalidOrdering, "edg needs a full ordering");
  if (!p.has_repeated_vars() && !touched(p)) {
    const Store& base = *snap_->base;
    if (p.num_constants() == 0) return base.edge_count();
    if (auto c = single_constant(p)) {
      auto rec = base.record(c->second);
      return rec ? rec->cardinality(c->first) : 0;
    }
    return base.slice(select_ordering(p, *w), p).range.size();
  }
  auto c = edg(*w, p);
  std::uint64_t n = 0;
  Edge e;
  while (c->next(e)) ++n;
  return n;
}

Edge Primitives::pos(const Ordering& w, const TriplePattern& p,
                     std::uint64_t i) const {
  auto out_of_range = [&]() {
    return Error(ErrorCode::kOutOfRange,
                 "index " + std::to_string(i) + " beyond answer set");
  };
  if (p.has_repeated_vars() || touched(p)) {
    auto c = edg(w, p);
    Edge e;
    for (std::uint64_t k = 0; c->next(e); ++k) {
      if (k == i) return e;
    }
    throw out_of_range();
  }
  const Store& base = *snap_->base;
  const Ordering o = select_ordering(p, w);
  if (p.num_constants() == 0) {
    const StreamId id = stream_for(o);
    const EdgeStore& s = base.edges();
    std::uint64_t acc = 0;
    for (std::uint64_t k = 0; k < s.entry_count(id); ++k) {
      const HeaderEntry e = s.entry(id, k);
      if (i < acc + e.n) {
        const Row r = base.edges().open_entry(id, e).row(i - acc);
        return o.compose(e.key, r.first, r.second);
      }
      acc += e.n;
    }
    throw out_of_range();
  }
  const TableSlice sl = base.slice(o, p);
  if (i >= sl.range.size()) throw out_of_range();
  const Row r = sl.table->row(sl.range.begin + i);
  return o.compose(sl.key, r.first, r.second);
}

}  // namespace kgs
