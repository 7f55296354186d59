#include "edge_store.hpp"

#include <algorithm>

namespace kgs {

namespace {

constexpr char kStreamMagic[8] = {'K', 'G', 'S', 'T', 'R', 'M', '0', '1'};
constexpr char kStreamEnd[8] = {'K', 'G', 'S', 'T', 'E', 'N', 'D', '1'};

void check_width(std::uint64_t v, unsigned width, const char* what) {
  if (v >= (std::uint64_t{1} << (8 * width))) {
    throw Error(ErrorCode::kWidthOverflow, std::string(what) + " too large");
  }
}

class EncodedRowCursor : public RowCursor {
 public:
  EncodedRowCursor(const EncodedTable& t, std::uint64_t begin, std::uint64_t end)
      : table_(t), cursor_(table_.cursor(begin, end)) {}
  bool next(Row& out) override { return cursor_.next(out); }

 private:
  EncodedTable table_;
  EncodedTable::Cursor cursor_;
};

class VectorRowCursor : public RowCursor {
 public:
  VectorRowCursor(Table::Materialized rows, std::uint64_t begin,
                  std::uint64_t end)
      : rows_(std::move(rows)),
        pos_(begin),
        end_(std::min<std::uint64_t>(end, rows_->size())) {}
  bool next(Row& out) override {
    if (pos_ >= end_) return false;
    out = (*rows_)[pos_++];
    return true;
  }

 private:
  Table::Materialized rows_;
  std::uint64_t pos_;
  std::uint64_t end_;
};

}  // namespace

class AggregatedRowCursor : public RowCursor {
 public:
  AggregatedRowCursor(const AggregatedTable& t, std::uint64_t begin,
                      std::uint64_t end)
      : table_(t), pos_(begin), end_(std::min(end, t.size())) {
    if (pos_ >= end_) return;
    p_ = table_.bytes_.data();
    std::uint64_t base = 0;
    const unsigned w1 = table_.w1_;
    for (;;) {
      const std::uint8_t tag = p_[0];
      const std::uint64_t count = load_le(p_ + 1 + w1, 5);
      if (pos_ < base + count) break;
      p_ += 1 + w1 + 5 +
            (tag == 0 ? count * table_.w2_ : AggregatedTable::kReferenceSize);
      base += count;
    }
    enter(base);
  }

  bool next(Row& out) override {
    if (pos_ >= end_) return false;
    if (pos_ == part_.begin + part_.count) enter(pos_);
    out.first = part_.first;
    if (inner_) {
      Row r;
      inner_->next(r);
      out.second = r.second;
    } else {
      const unsigned w2 = table_.w2_;
      out.second = load_le(part_.inline_values + (pos_ - part_.begin) * w2, w2);
    }
    ++pos_;
    return true;
  }

 private:
  void enter(std::uint64_t begin) {
    inner_.reset();
    part_ = table_.partition_at(p_, begin);
    if (part_.target) {
      const std::uint64_t skip = pos_ - part_.begin;
      inner_.emplace(part_.target->cursor(part_.target_row + skip,
                                          part_.target_row + part_.count));
    }
  }

  AggregatedTable table_;
  std::uint64_t pos_;
  std::uint64_t end_;
  const std::uint8_t* p_ = nullptr;
  AggregatedTable::Partition part_;
  std::optional<EncodedTable::Cursor> inner_;
};


const char* stream_name(StreamId id) {
  switch (id) {
    case StreamId::kTS: return "TS";
    case StreamId::kTSp: return "TS'";
    case StreamId::kTR: return "TR";
    case StreamId::kTRp: return "TR'";
    case StreamId::kTD: return "TD";
    case StreamId::kTDp: return "TD'";
  }
  return "?";
}

const char* stream_file_name(StreamId id) {
  switch (id) {
    case StreamId::kTS: return "ts.bin";
    case StreamId::kTSp: return "tsp.bin";
    case StreamId::kTR: return "tr.bin";
    case StreamId::kTRp: return "trp.bin";
    case StreamId::kTD: return "td.bin";
    case StreamId::kTDp: return "tdp.bin";
  }
  return "?";
}

Ordering stream_ordering(StreamId id) {
  switch (id) {
    case StreamId::kTS: return Ordering(Field::kS, Field::kR, Field::kD);
    case StreamId::kTSp: return Ordering(Field::kS, Field::kD, Field::kR);
    case StreamId::kTR: return Ordering(Field::kR, Field::kS, Field::kD);
    case StreamId::kTRp: return Ordering(Field::kR, Field::kD, Field::kS);
    case StreamId::kTD: return Ordering(Field::kD, Field::kS, Field::kR);
    case StreamId::kTDp: return Ordering(Field::kD, Field::kR, Field::kS);
  }
  return {};
}

StreamId stream_for(const Ordering& o) {
  for (StreamId id : kAllStreams) {
    if (stream_ordering(id) == o) return id;
  }
  throw Error(ErrorCode::kInternal, "no stream for ordering " + o.str());
}

bool is_primed(StreamId id) {
  return id == StreamId::kTSp || id == StreamId::kTRp || id == StreamId::kTDp;
}

StreamId counterpart(StreamId id) {
  auto v = static_cast<std::uint8_t>(id);
  return static_cast<StreamId>(v ^ 1u);
}

Field stream_key_field(StreamId id) { return stream_ordering(id)[0]; }

void encode_entry(const HeaderEntry& e, std::uint8_t* out) {
  check_width(e.key, 5, "entry key");
  check_width(e.offset, 6, "entry offset");
  check_width(e.n, 5, "entry rows");
  check_width(e.groups, 5, "entry groups");
  check_width(e.length, 5, "entry length");
  store_le(out, e.key, 5);
  store_le(out + 5, e.offset, 6);
  store_le(out + 11, e.n, 5);
  store_le(out + 16, e.groups, 5);
  store_le(out + 21, e.length, 5);
  out[26] = e.format;
  out[27] = e.flags;
}

HeaderEntry decode_entry(const std::uint8_t* in) {
  HeaderEntry e;
  e.key = load_le(in, 5);
  e.offset = load_le(in + 5, 6);
  e.n = load_le(in + 11, 5);
  e.groups = load_le(in + 16, 5);
  e.length = load_le(in + 21, 5);
  e.format = in[26];
  e.flags = in[27];
  return e;
}

StreamReader::StreamReader(const fs::path& path, StreamId id)
    : file_(path), id_(id) {
  Bytes b = file_.bytes();
  auto corrupt = [&](const char* what) {
    throw Error(ErrorCode::kCorrupt, path.string() + ": " + what);
  };
  if (b.size() < kStreamHeaderSize + kStreamFooterSize ||
      std::memcmp(b.data(), kStreamMagic, 8) != 0) {
    corrupt("not a stream file");
  }
  if (std::memcmp(b.data() + b.size() - 8, kStreamEnd, 8) != 0) {
    corrupt("missing footer");
  }
  if (b[8] != static_cast<std::uint8_t>(id)) corrupt("stream id mismatch");
  options_ = b[9];
  entries_ = load_le(b.data() + 16, 8);
  edges_ = load_le(b.data() + 24, 8);
  const std::uint64_t data_len = load_le(b.data() + 32, 8);
  const std::uint64_t data_off = load_le(b.data() + 40, 8);
  const std::uint64_t footer_len = load_le(b.data() + b.size() - 16, 8);
  if (data_off != kStreamHeaderSize + entries_ * kEntrySize ||
      footer_len != data_off ||
      data_off + data_len + kStreamFooterSize != b.size()) {
    corrupt("inconsistent header");
  }
  entry_bytes_ = b.subspan(kStreamHeaderSize, entries_ * kEntrySize);
  data_ = b.subspan(data_off, data_len);
}

HeaderEntry StreamReader::entry(std::uint64_t i) const {
  if (i >= entries_) throw Error(ErrorCode::kOutOfRange, "entry index");
  return decode_entry(entry_bytes_.data() + i * kEntrySize);
}

std::optional<std::uint64_t> StreamReader::find(TermId key) const {
  std::uint64_t lo = 0;
  std::uint64_t hi = entries_;
  while (lo < hi) {
    std::uint64_t mid = (lo + hi) / 2;
    if (load_le(entry_bytes_.data() + mid * kEntrySize, 5) < key) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo < entries_ && load_le(entry_bytes_.data() + lo * kEntrySize, 5) == key) {
    return lo;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

AggregatedTable::AggregatedTable(Bytes bytes, const TableFormat& f,
                                 std::uint64_t n, const EdgeStore* store)
    : bytes_(bytes), w1_(f.desc.w1), w2_(f.desc.w2), n_(n), store_(store) {
  std::uint64_t pos = 0;
  std::uint64_t rows = 0;
  auto need = [&](std::uint64_t k) {
    if (pos + k > bytes_.size()) {
      throw Error(ErrorCode::kCorrupt, "truncated-input");
    }
  };
  while (rows < n_) {
    need(1 + w1_ + 5);
    const std::uint8_t tag = bytes_[pos];
    const std::uint64_t count = load_le(bytes_.data() + pos + 1 + w1_, 5);
    if (tag > 1 || count == 0 || rows + count > n_) {
      throw Error(ErrorCode::kCorrupt, "corrupt-run-length");
    }
    pos += 1 + w1_ + 5;
    if (tag == 0) {
      need(count * w2_);
      pos += count * w2_;
    } else {
      need(kReferenceSize);
      pos += kReferenceSize;
      ++references_;
    }
    rows += count;
    ++partitions_;
  }
  byte_size_ = pos;
}

AggregatedTable::Partition AggregatedTable::partition_at(
    const std::uint8_t*& p, std::uint64_t begin) const {
  Partition part;
  const std::uint8_t tag = p[0];
  part.first = load_le(p + 1, w1_);
  part.count = load_le(p + 1 + w1_, 5);
  part.begin = begin;
  p += 1 + w1_ + 5;
  if (tag == 0) {
    part.inline_values = p;
    p += part.count * w2_;
    return part;
  }
  const auto sid = static_cast<StreamId>(p[0]);
  const TableFormat tf = unpack_format(p[1]);
  const std::uint64_t off = load_le(p + 2, 6);
  const std::uint64_t tn = load_le(p + 8, 5);
  part.target_row = load_le(p + 13, 5);
  p += kReferenceSize;
  if (store_ == nullptr || static_cast<std::uint8_t>(sid) > 5 || tf.aggregated) {
    throw Error(ErrorCode::kCorrupt, "bad aggregated reference");
  }
  Bytes data = store_->stream(sid).data();
  if (off > data.size()) throw Error(ErrorCode::kCorrupt, "reference offset");
  part.target.emplace(data.subspan(off), tf.desc, tn);
  if (part.target_row + part.count > tn) {
    throw Error(ErrorCode::kCorrupt, "reference range");
  }
  if (IoStats* s = store_->stats()) {
    s->tables_opened++;
    s->table_bytes += part.target->byte_size();
  }
  return part;
}

Row AggregatedTable::row(std::uint64_t i) const {
  if (i >= n_) throw Error(ErrorCode::kOutOfRange, "row index out of range");
  Row out;
  // Skip whole partitions without resolving references.
  const std::uint8_t* p = bytes_.data();
  std::uint64_t begin = 0;
  for (;;) {
    const std::uint8_t tag = p[0];
    const std::uint64_t count = load_le(p + 1 + w1_, 5);
    if (i < begin + count) {
      Partition part = partition_at(p, begin);
      out.first = part.first;
      if (part.target) {
        out.second = part.target->row(part.target_row + (i - begin)).second;
      } else {
        out.second = load_le(part.inline_values + (i - begin) * w2_, w2_);
      }
      return out;
    }
    p += 1 + w1_ + 5 + (tag == 0 ? count * w2_ : kReferenceSize);
    begin += count;
  }
}

std::optional<RowRange> AggregatedTable::search_first(TermId key) const {
  const std::uint8_t* p = bytes_.data();
  std::uint64_t begin = 0;
  for (std::uint64_t k = 0; k < partitions_; ++k) {
    const std::uint8_t tag = p[0];
    const TermId first = load_le(p + 1, w1_);
    const std::uint64_t count = load_le(p + 1 + w1_, 5);
    if (first == key) return RowRange{begin, begin + count};
    if (first > key) break;
    p += 1 + w1_ + 5 + (tag == 0 ? count * w2_ : kReferenceSize);
    begin += count;
  }
  return std::nullopt;
}

std::unique_ptr<RowCursor> AggregatedTable::cursor(std::uint64_t begin,
                                                   std::uint64_t end) const {
  return std::make_unique<AggregatedRowCursor>(*this, begin, end);
}

// ---------------------------------------------------------------------------

std::uint64_t Table::size() const {
  return std::visit(
      [](const auto& t) -> std::uint64_t {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, Materialized>) {
          return t->size();
        } else {
          return t.size();
        }
      },
      impl_);
}

std::uint64_t Table::groups() const {
  if (auto* m = std::get_if<Materialized>(&impl_)) {
    std::uint64_t g = 0;
    for (std::size_t i = 0; i < (*m)->size(); ++i) {
      if (i == 0 || (**m)[i].first != (**m)[i - 1].first) ++g;
    }
    return g;
  }
  if (auto* e = std::get_if<EncodedTable>(&impl_)) return e->groups();
  return std::get<AggregatedTable>(impl_).groups();
}

Row Table::row(std::uint64_t i) const {
  if (auto* m = std::get_if<Materialized>(&impl_)) {
    if (i >= (*m)->size()) {
      throw Error(ErrorCode::kOutOfRange, "row index out of range");
    }
    return (**m)[i];
  }
  if (auto* e = std::get_if<EncodedTable>(&impl_)) return e->row(i);
  return std::get<AggregatedTable>(impl_).row(i);
}

std::optional<RowRange> Table::search_first(TermId key) const {
  if (auto* m = std::get_if<Materialized>(&impl_)) {
    const auto& v = **m;
    auto lo = std::lower_bound(v.begin(), v.end(), key,
                               [](const Row& r, TermId k) { return r.first < k; });
    auto hi = std::upper_bound(lo, v.end(), key,
                               [](TermId k, const Row& r) { return k < r.first; });
    if (lo == hi) return std::nullopt;
    return RowRange{static_cast<std::uint64_t>(lo - v.begin()),
                    static_cast<std::uint64_t>(hi - v.begin())};
  }
  if (auto* e = std::get_if<EncodedTable>(&impl_)) return e->search_first(key);
  return std::get<AggregatedTable>(impl_).search_first(key);
}

RowRange Table::search_second(RowRange within, TermId second) const {
  if (within.empty()) return within;
  if (!random_access()) {
    // Linear pass for layouts without constant-time row access.
    RowRange out{within.end, within.end};
    auto c = cursor(within.begin, within.end);
    Row r;
    std::uint64_t i = within.begin;
    bool found = false;
    while (c->next(r)) {
      if (r.second == second) {
        if (!found) out.begin = i;
        found = true;
        out.end = i + 1;
      } else if (r.second > second) {
        break;
      }
      ++i;
    }
    if (!found) return {within.end, within.end};
    return out;
  }
  std::uint64_t lo = within.begin;
  std::uint64_t hi = within.end;
  while (lo < hi) {
    std::uint64_t mid = (lo + hi) / 2;
    if (row(mid).second < second) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  std::uint64_t end = lo;
  while (end < within.end && row(end).second == second) ++end;
  return {lo, end};
}

std::unique_ptr<RowCursor> Table::cursor(std::uint64_t begin,
                                         std::uint64_t end) const {
  if (auto* m = std::get_if<Materialized>(&impl_)) {
    return std::make_unique<VectorRowCursor>(*m, begin, end);
  }
  if (auto* e = std::get_if<EncodedTable>(&impl_)) {
    return std::make_unique<EncodedRowCursor>(*e, begin, end);
  }
  return std::get<AggregatedTable>(impl_).cursor(begin, end);
}

std::vector<Row> Table::materialize() const {
  std::vector<Row> rows;
  rows.reserve(size());
  auto c = cursor();
  Row r;
  while (c->next(r)) rows.push_back(r);
  return rows;
}

bool Table::random_access() const {
  if (std::holds_alternative<Materialized>(impl_)) return true;
  if (auto* e = std::get_if<EncodedTable>(&impl_)) {
    return e->descriptor().kind != LayoutKind::kCluster;
  }
  return false;
}

// ---------------------------------------------------------------------------

EdgeStore::EdgeStore(const fs::path& dir, IoStats* stats) : stats_(stats) {
  for (StreamId id : kAllStreams) {
    streams_[static_cast<std::size_t>(id)] =
        std::make_unique<StreamReader>(dir / stream_file_name(id), id);
  }
}

Table EdgeStore::open_table(StreamId id, TermId key, std::uint64_t offset,
                            std::uint64_t n, std::uint8_t format,
                            bool pruned) const {
  if (pruned) return Table(ofr_reconstruct(id, key));
  Bytes data = stream(id).data();
  if (offset > data.size()) {
    throw Error(ErrorCode::kCorrupt, "table offset outside stream");
  }
  const TableFormat f = unpack_format(format);
  if (f.aggregated) {
    AggregatedTable t(data.subspan(offset), f, n, this);
    if (stats_) {
      stats_->tables_opened++;
      stats_->table_bytes += t.byte_size();
    }
    return Table(std::move(t));
  }
  EncodedTable t(data.subspan(offset), f.desc, n);
  if (stats_) {
    stats_->tables_opened++;
    stats_->table_bytes += t.byte_size();
  }
  return Table(std::move(t));
}

Table EdgeStore::open_entry(StreamId id, const HeaderEntry& e) const {
  return open_table(id, e.key, e.offset, e.n, e.format, e.pruned());
}

std::optional<Table> EdgeStore::get_table_via_header(StreamId id,
                                                     TermId key) const {
  auto i = find(id, key);
  if (!i) return std::nullopt;
  return open_entry(id, entry(id, *i));
}

bool EdgeStore::has_pruned(StreamId id) const {
  if (!is_primed(id)) return false;
  return stream(id).entry_count() < stream(counterpart(id)).entry_count();
}

std::uint64_t EdgeStore::entry_count(StreamId id) const {
  return has_pruned(id) ? stream(counterpart(id)).entry_count()
                        : stream(id).entry_count();
}

HeaderEntry EdgeStore::entry(StreamId id, std::uint64_t i) const {
  if (!has_pruned(id)) return stream(id).entry(i);
  const HeaderEntry c = stream(counterpart(id)).entry(i);
  if (auto j = stream(id).find(c.key)) return stream(id).entry(*j);
  HeaderEntry e;
  e.key = c.key;
  e.n = c.n;
  e.groups = kUnknownGroups;
  e.format = c.format;
  e.flags = kEntryPruned;
  return e;
}

std::optional<std::uint64_t> EdgeStore::find(StreamId id, TermId key) const {
  return has_pruned(id) ? stream(counterpart(id)).find(key) : stream(id).find(key);
}

Table::Materialized EdgeStore::ofr_reconstruct(StreamId primed,
                                               TermId key) const {
  const auto cache_key = std::make_pair(static_cast<std::uint8_t>(primed), key);
  {
    std::lock_guard<std::mutex> lock(ofr_mu_);
    auto it = ofr_cache_.find(cache_key);
    if (it != ofr_cache_.end()) return it->second;
  }
  const StreamId source = counterpart(primed);
  auto i = stream(source).find(key);
  if (!i) throw Error(ErrorCode::kCorrupt, "pruned table without counterpart");
  const HeaderEntry e = stream(source).entry(*i);
  if (e.pruned()) throw Error(ErrorCode::kCorrupt, "counterpart is pruned");
  Table t = open_entry(source, e);
  std::vector<Row> rows = t.materialize();
  for (Row& r : rows) std::swap(r.first, r.second);
  std::sort(rows.begin(), rows.end());
  auto shared = std::make_shared<const std::vector<Row>>(std::move(rows));
  if (stats_) stats_->reconstructions++;
  std::lock_guard<std::mutex> lock(ofr_mu_);
  ofr_cache_.emplace(cache_key, shared);
  return shared;
}

// ---------------------------------------------------------------------------

StreamSummary summarize_stream(const EdgeStore& store, StreamId id) {
  const StreamReader& s = store.stream(id);
  StreamSummary out;
  out.id = id;
  out.file_bytes = s.file_size();
  for (std::uint64_t i = 0; i < store.entry_count(id); ++i) {
    const HeaderEntry e = store.entry(id, i);
    out.tables++;
    out.rows += e.n;
    if (e.pruned()) {
      out.pruned_tables++;
      continue;
    }
    const TableFormat f = unpack_format(e.format);
    if (f.aggregated) {
      out.aggregated_tables++;
      AggregatedTable t(s.data().subspan(e.offset), f, e.n, nullptr);
      out.aggregated_references += t.references();
      continue;
    }
    switch (f.desc.kind) {
      case LayoutKind::kRow: out.row_tables++; break;
      case LayoutKind::kColumn: out.column_tables++; break;
      case LayoutKind::kCluster: out.cluster_tables++; break;
    }
  }
  return out;
}

std::vector<HeaderEntry> read_header_entries(const fs::path& stream_path,
                                             WorkerPool* io) {
  BlockReader in(stream_path, io);
  std::uint8_t head[kStreamHeaderSize];
  if (in.read(head, sizeof head) != sizeof head ||
      std::memcmp(head, kStreamMagic, 8) != 0) {
    throw Error(ErrorCode::kCorrupt, "not a stream file: " + stream_path.string());
  }
  const std::uint64_t count = load_le(head + 16, 8);
  std::vector<HeaderEntry> out;
  out.reserve(count);
  std::uint8_t buf[kEntrySize];
  for (std::uint64_t i = 0; i < count; ++i) {
    if (in.read(buf, kEntrySize) != kEntrySize) {
      throw Error(ErrorCode::kCorrupt, "truncated stream header");
    }
    out.push_back(decode_entry(buf));
  }
  return out;
}

// ---------------------------------------------------------------------------

struct StreamBuilder::TdpIndex {
  explicit TdpIndex(const fs::path& path) : reader(path, StreamId::kTDp) {}
  StreamReader reader;
};

StreamBuilder::StreamBuilder(const fs::path& dir, StreamId id,
                             const BuildOptions& opts, WorkerPool* io)
    : dir_(dir),
      id_(id),
      ordering_(stream_ordering(id)),
      opts_(opts),
      io_(io),
      data_path_(dir / (std::string(stream_file_name(id)) + ".data.tmp")),
      spill_path_(dir / (std::string(stream_file_name(id)) + ".spill.tmp")) {
  summary_.id = id;
  data_ = std::make_unique<BlockWriter>(data_path_, io_);
  if (opts_.aggr && id_ == StreamId::kTRp) {
    tdp_ = std::make_unique<TdpIndex>(dir_ / stream_file_name(StreamId::kTDp));
  }
}

StreamBuilder::~StreamBuilder() {
  spill_.reset();
  data_.reset();
  std::error_code ec;
  fs::remove(data_path_, ec);
  fs::remove(spill_path_, ec);
}

void StreamBuilder::add(const Edge& e) {
  if (have_last_) {
    if (e == last_) return;
    if (!ordering_.less(last_, e)) {
      throw Error(ErrorCode::kUnsorted,
                  std::string("edges out of order for stream ") + stream_name(id_));
    }
  }
  have_last_ = true;
  last_ = e;
  const auto k = ordering_.key(e);
  if (!have_key_ || k[0] != key_) {
    if (have_key_) flush_table();
    have_key_ = true;
    key_ = k[0];
  }
  const Row row{k[1], k[2]};
  if (spilling_) {
    if (runs_.empty() || runs_.back().first != row.first) {
      runs_.push_back({row.first, spilled_rows_ + 1});
    } else {
      runs_.back().second = spilled_rows_ + 1;
    }
    std::uint8_t b[5];
    store_le(b, row.second, 5);
    spill_->write(b, 5);
    ++spilled_rows_;
    return;
  }
  rows_.push_back(row);
  if (rows_.size() > opts_.layout.tau) {
    // Switch to streaming COLUMN output for this key.
    spilling_ = true;
    spill_ = std::make_unique<BlockWriter>(spill_path_, io_);
    runs_.clear();
    spilled_rows_ = 0;
    for (const Row& r : rows_) {
      if (runs_.empty() || runs_.back().first != r.first) {
        runs_.push_back({r.first, spilled_rows_ + 1});
      } else {
        runs_.back().second = spilled_rows_ + 1;
      }
      std::uint8_t b[5];
      store_le(b, r.second, 5);
      spill_->write(b, 5);
      ++spilled_rows_;
    }
    rows_.clear();
    rows_.shrink_to_fit();
  }
}

void StreamBuilder::flush_table() {
  if (spilling_) {
    write_large_column(key_);
    spilling_ = false;
  } else if (!rows_.empty()) {
    if (opts_.ofr && is_primed(id_) && rows_.size() < opts_.eta) {
      count_pruned(rows_);
    } else {
      write_table(key_, rows_);
    }
  }
  rows_.clear();
}

void StreamBuilder::write_table(TermId key, std::span<const Row> rows) {
  const LayoutDescriptor d = select_layout(rows, opts_.layout);
  scratch_.clear();
  encode_table(rows, d, scratch_);
  HeaderEntry e;
  e.key = key;
  e.offset = data_->offset();
  e.n = rows.size();
  e.groups = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i == 0 || rows[i].first != rows[i - 1].first) ++e.groups;
  }
  e.format = pack_format({d, false});
  if (tdp_) {
    if (auto agg = try_aggregate(rows, scratch_.size())) {
      scratch_ = std::move(*agg);
      TermId max_second = 0;
      for (const Row& r : rows) max_second = std::max(max_second, r.second);
      e.format = pack_format(
          {{LayoutKind::kCluster,
            static_cast<std::uint8_t>(bytes_needed(rows.back().first)),
            static_cast<std::uint8_t>(bytes_needed(max_second)), 5},
           true});
      e.flags |= kEntryAggregated;
    }
  }
  if (unpack_format(e.format).aggregated) {
    summary_.aggregated_tables++;
  } else {
    switch (d.kind) {
      case LayoutKind::kRow: summary_.row_tables++; break;
      case LayoutKind::kColumn: summary_.column_tables++; break;
      case LayoutKind::kCluster: summary_.cluster_tables++; break;
    }
  }
  e.length = scratch_.size();
  data_->write(scratch_.data(), scratch_.size());
  entries_.push_back(e);
  summary_.tables++;
  summary_.rows += e.n;
}

void StreamBuilder::write_large_column(TermId key) {
  spill_->close();
  if (spilled_rows_ > 0xffffffffull) {
    throw Error(ErrorCode::kWidthOverflow, "COLUMN table too long");
  }
  HeaderEntry e;
  e.key = key;
  e.offset = data_->offset();
  e.n = spilled_rows_;
  e.groups = runs_.size();
  e.format = pack_format({{LayoutKind::kColumn, 5, 5, 0}, false});
  std::uint8_t b[9];
  store_le(b, runs_.size(), 4);
  data_->write(b, 4);
  for (const auto& [value, end] : runs_) {
    store_le(b, value, 5);
    store_le(b + 5, end, 4);
    data_->write(b, 9);
  }
  copy_into(*data_, spill_path_, io_);
  spill_.reset();
  std::error_code ec;
  fs::remove(spill_path_, ec);
  e.length = data_->offset() - e.offset;
  entries_.push_back(e);
  summary_.tables++;
  summary_.rows += e.n;
  summary_.column_tables++;
  runs_.clear();
  spilled_rows_ = 0;
}

// Pruned tables leave no trace in the stream; readers rebuild their entries
// from the counterpart header.
void StreamBuilder::count_pruned(std::span<const Row> rows) {
  summary_.tables++;
  summary_.rows += rows.size();
  summary_.pruned_tables++;
}

std::optional<std::vector<std::uint8_t>> StreamBuilder::try_aggregate(
    std::span<const Row> rows, std::uint64_t plain_size) {
  // rows are (d, s) for relation key_; partition d's values equal the
  // (r = key_) slice of TD' table d.
  const unsigned w1 = bytes_needed(rows.back().first);
  TermId max_second = 0;
  for (const Row& r : rows) max_second = std::max(max_second, r.second);
  const unsigned w2 = bytes_needed(max_second);
  const StreamReader& tdp = tdp_->reader;
  std::vector<std::uint8_t> out;
  std::uint64_t refs = 0;
  for (std::size_t i = 0; i < rows.size();) {
    std::size_t j = i;
    while (j < rows.size() && rows[j].first == rows[i].first) ++j;
    const std::uint64_t count = j - i;
    const std::size_t at = out.size();
    bool referenced = false;
    if (count * w2 > AggregatedTable::kReferenceSize) {
      auto idx = tdp.find(rows[i].first);
      if (idx) {
        const HeaderEntry te = tdp.entry(*idx);
        if (!te.aggregated()) {
          EncodedTable t(tdp.data().subspan(te.offset),
                         unpack_format(te.format).desc, te.n);
          auto range = t.search_first(key_);
          if (range && range->size() == count) {
            out.resize(at + 1 + w1 + 5 + AggregatedTable::kReferenceSize);
            std::uint8_t* p = out.data() + at;
            p[0] = 1;
            store_le(p + 1, rows[i].first, w1);
            store_le(p + 1 + w1, count, 5);
            p += 1 + w1 + 5;
            p[0] = static_cast<std::uint8_t>(StreamId::kTDp);
            p[1] = te.format;
            store_le(p + 2, te.offset, 6);
            store_le(p + 8, te.n, 5);
            store_le(p + 13, range->begin, 5);
            referenced = true;
            ++refs;
          }
        }
      }
    }
    if (!referenced) {
      out.resize(at + 1 + w1 + 5 + count * w2);
      std::uint8_t* p = out.data() + at;
      p[0] = 0;
      store_le(p + 1, rows[i].first, w1);
      store_le(p + 1 + w1, count, 5);
      p += 1 + w1 + 5;
      for (std::size_t k = i; k < j; ++k) {
        store_le(p, rows[k].second, w2);
        p += w2;
      }
    }
    i = j;
  }
  if (refs == 0 || out.size() >= plain_size) return std::nullopt;
  summary_.aggregated_references += refs;
  return out;
}

StreamSummary StreamBuilder::finish() {
  if (have_key_) flush_table();
  have_key_ = false;
  data_->close();
  const std::uint64_t data_len = data_->offset();
  data_.reset();

  const fs::path final_path = dir_ / stream_file_name(id_);
  const fs::path tmp_path = dir_ / (std::string(stream_file_name(id_)) + ".tmp");
  {
    BlockWriter out(tmp_path, io_);
    std::uint8_t head[kStreamHeaderSize] = {};
    std::memcpy(head, kStreamMagic, 8);
    head[8] = static_cast<std::uint8_t>(id_);
    head[9] = static_cast<std::uint8_t>((opts_.ofr ? 1 : 0) | (opts_.aggr ? 2 : 0));
    const std::uint64_t header_len = kStreamHeaderSize + entries_.size() * kEntrySize;
    store_le(head + 16, entries_.size(), 8);
    store_le(head + 24, summary_.rows, 8);
    store_le(head + 32, data_len, 8);
    store_le(head + 40, header_len, 8);
    out.write(head, sizeof head);
    std::uint8_t buf[kEntrySize];
    for (const HeaderEntry& e : entries_) {
      encode_entry(e, buf);
      out.write(buf, kEntrySize);
    }
    copy_into(out, data_path_, io_);
    std::uint8_t foot[kStreamFooterSize];
    store_le(foot, header_len, 8);
    std::memcpy(foot + 8, kStreamEnd, 8);
    out.write(foot, sizeof foot);
    out.close();
    summary_.file_bytes = out.offset();
  }
  fs::rename(tmp_path, final_path);
  std::error_code ec;
  fs::remove(data_path_, ec);
  entries_.clear();
  entries_.shrink_to_fit();
  return summary_;
}

}  // namespace kgs
