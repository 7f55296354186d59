#include "store.hpp"

namespace kgs {

namespace {

class SliceCursor : public EdgeCursor {
 public:
  SliceCursor(TableSlice slice, const Ordering& o, const TriplePattern& p)
      : slice_(std::move(slice)), order_(o), pattern_(p),
        filter_(p.has_repeated_vars()) {
    if (slice_.table && !slice_.range.empty()) {
      rows_ = slice_.table->cursor(slice_.range.begin, slice_.range.end);
    }
  }

  bool next(Edge& out) override {
    if (!rows_) return false;
    Row r;
    while (rows_->next(r)) {
      out = order_.compose(slice_.key, r.first, r.second);
      if (!filter_ || pattern_.repeats_hold(out)) return true;
    }
    rows_.reset();
    return false;
  }

 private:
  TableSlice slice_;
  Ordering order_;
  TriplePattern pattern_;
  bool filter_;
  std::unique_ptr<RowCursor> rows_;
};

class StreamCursor : public EdgeCursor {
 public:
  StreamCursor(const EdgeStore& store, StreamId id, const TriplePattern* p)
      : store_(store), id_(id), order_(stream_ordering(id)) {
    if (p && p->has_repeated_vars()) pattern_ = *p;
  }

  bool next(Edge& out) override {
    Row r;
    for (;;) {
      if (rows_ && rows_->next(r)) {
        out = order_.compose(key_, r.first, r.second);
        if (!pattern_ || pattern_->repeats_hold(out)) return true;
        continue;
      }
      rows_.reset();
      table_.reset();
      if (entry_ >= store_.entry_count(id_)) return false;
      const HeaderEntry e = store_.entry(id_, entry_++);
      key_ = e.key;
      table_.emplace(store_.open_entry(id_, e));
      rows_ = table_->cursor();
    }
  }

 private:
  const EdgeStore& store_;
  StreamId id_;
  Ordering order_;
  std::optional<TriplePattern> pattern_;
  std::uint64_t entry_ = 0;
  TermId key_ = 0;
  std::optional<Table> table_;
  std::unique_ptr<RowCursor> rows_;
};

}  // namespace

std::vector<Edge> drain(EdgeCursor& c) {
  std::vector<Edge> out;
  Edge e;
  while (c.next(e)) out.push_back(e);
  return out;
}

Store::Store(const fs::path& dir, NmBackend backend, IoStats* stats)
    : dir_(dir),
      edges_(std::make_unique<EdgeStore>(dir, stats)),
      nm_(open_node_manager(dir, backend)) {}

std::optional<Table> Store::get_table(StreamId id, TermId key) const {
  auto rec = nm_->get(key);
  if (!rec || !rec->has_table(id)) return std::nullopt;
  const auto i = static_cast<std::size_t>(id);
  return edges_->open_table(id, key, rec->coord[i], rec->cardinality(stream_key_field(id)),
                            rec->format[i], rec->pruned(id));
}

TableSlice Store::slice(const Ordering& o, const TriplePattern& p) const {
  TableSlice out;
  out.stream = stream_for(o);
  const PatternTerm& k = p.at(o[0]);
  if (k.is_var) {
    throw Error(ErrorCode::kInternal, "slice needs a constant key");
  }
  out.key = k.id;
  out.table = get_table(out.stream, k.id);
  if (!out.table) return out;
  out.range = {0, out.table->size()};
  const PatternTerm& second = p.at(o[1]);
  if (!second.is_var) {
    auto r = out.table->search_first(second.id);
    if (!r) {
      out.range = {};
      return out;
    }
    out.range = *r;
    const PatternTerm& third = p.at(o[2]);
    if (!third.is_var) out.range = out.table->search_second(out.range, third.id);
  }
  return out;
}

std::unique_ptr<EdgeCursor> Store::edg(const Ordering& o,
                                       const TriplePattern& p) const {
  if (p.num_constants() == 0) {
    return std::make_unique<StreamCursor>(*edges_, stream_for(o), &p);
  }
  return std::make_unique<SliceCursor>(slice(o, p), o, p);
}

std::unique_ptr<EdgeCursor> Store::scan(StreamId id) const {
  return std::make_unique<StreamCursor>(*edges_, id, nullptr);
}

bool Store::contains(const Edge& e) const {
  TriplePattern p(PatternTerm::constant(e.s), PatternTerm::constant(e.r),
                  PatternTerm::constant(e.d));
  return !slice(stream_ordering(StreamId::kTS), p).range.empty();
}

}  // namespace kgs
