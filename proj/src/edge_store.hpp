#pragma once

#include <array>
#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <variant>

#include "graph_model.hpp"
#include "io.hpp"
#include "layout_codec.hpp"

namespace kgs {

// The six byte streams. F_x tables go to the unprimed stream, G_x tables
// (columns swapped) to the primed one.
enum class StreamId : std::uint8_t { kTS = 0, kTSp, kTR, kTRp, kTD, kTDp };

inline constexpr std::array<StreamId, 6> kAllStreams = {
    StreamId::kTS, StreamId::kTSp, StreamId::kTR,
    StreamId::kTRp, StreamId::kTD, StreamId::kTDp};

const char* stream_name(StreamId id);      // "TS", "TS'", ...
const char* stream_file_name(StreamId id); // "ts.bin", "tsp.bin", ...
Ordering stream_ordering(StreamId id);
StreamId stream_for(const Ordering& o);
bool is_primed(StreamId id);
StreamId counterpart(StreamId id);  // TS <-> TS', ...
// Which node-record cardinality a stream's tables are counted in.
Field stream_key_field(StreamId id);

// Counters for table bytes actually handed to decoders.
struct IoStats {
  std::atomic<std::uint64_t> tables_opened{0};
  std::atomic<std::uint64_t> table_bytes{0};
  std::atomic<std::uint64_t> reconstructions{0};

  void reset() {
    tables_opened = 0;
    table_bytes = 0;
    reconstructions = 0;
  }
};

inline constexpr std::uint8_t kEntryPruned = 1;
inline constexpr std::uint64_t kUnknownGroups = ~std::uint64_t{0};
inline constexpr std::uint8_t kEntryAggregated = 2;

struct HeaderEntry {
  TermId key = 0;
  std::uint64_t offset = 0;  // into the data section
  std::uint64_t n = 0;       // rows
  std::uint64_t groups = 0;  // distinct first values
  std::uint64_t length = 0;  // bytes, 0 when pruned
  std::uint8_t format = kNoDescriptor;
  std::uint8_t flags = 0;

  bool pruned() const { return (flags & kEntryPruned) != 0; }
  bool aggregated() const { return (flags & kEntryAggregated) != 0; }
  friend bool operator==(const HeaderEntry&, const HeaderEntry&) = default;
};

// Stream file layout (integers little-endian):
//   0   "KGSTRM01"
//   8   stream id u8, option flags u8 (1 = OFR, 2 = AGGR), 6 pad bytes
//   16  entry count u64, edge count u64, data length u64, data offset u64
//   48  16 pad bytes
//   64  entries, 28 bytes each, ascending by key:
//       key u40, offset u48, n u40, groups u40, length u40, format u8, flags u8
//   data section
//   footer: header length u64, "KGSTEND1"
// Tables pruned by OFR have no entry in their primed stream.
inline constexpr std::size_t kStreamHeaderSize = 64;
inline constexpr std::size_t kEntrySize = 28;
inline constexpr std::size_t kStreamFooterSize = 16;

void encode_entry(const HeaderEntry& e, std::uint8_t* out);
HeaderEntry decode_entry(const std::uint8_t* in);

class StreamReader {
 public:
  StreamReader(const fs::path& path, StreamId id);

  StreamId id() const { return id_; }
  std::uint64_t entry_count() const { return entries_; }
  std::uint64_t edge_count() const { return edges_; }
  HeaderEntry entry(std::uint64_t i) const;
  // Index of the entry with this key.
  std::optional<std::uint64_t> find(TermId key) const;
  Bytes data() const { return data_; }
  std::uint64_t file_size() const { return file_.size(); }
  std::uint8_t options() const { return options_; }

 private:
  MappedFile file_;
  StreamId id_;
  std::uint8_t options_ = 0;
  std::uint64_t entries_ = 0;
  std::uint64_t edges_ = 0;
  Bytes entry_bytes_;
  Bytes data_;
};

class EdgeStore;
class AggregatedRowCursor;

class RowCursor {
 public:
  virtual ~RowCursor() = default;
  virtual bool next(Row& out) = 0;
};

// A binary table as stored in TR' when partitions are replaced by references
// into TD'. Per partition (ascending by first value):
//   tag u8 (0 inline, 1 reference), first:w1, count u40, then either
//   count x second:w2, or
//   stream u8, format u8, table offset u48, table rows u40, first row u40
class AggregatedTable {
 public:
  static constexpr std::uint64_t kReferenceSize = 18;

  AggregatedTable(Bytes bytes, const TableFormat& f, std::uint64_t n,
                  const EdgeStore* store);

  std::uint64_t size() const { return n_; }
  std::uint64_t groups() const { return partitions_; }
  std::uint64_t byte_size() const { return byte_size_; }
  std::uint64_t references() const { return references_; }

  struct Partition {
    TermId first = 0;
    std::uint64_t begin = 0;  // row index of the partition's first row
    std::uint64_t count = 0;
    const std::uint8_t* inline_values = nullptr;
    // reference
    std::optional<EncodedTable> target;
    std::uint64_t target_row = 0;
  };
  Row row(std::uint64_t i) const;
  std::optional<RowRange> search_first(TermId key) const;
  std::unique_ptr<RowCursor> cursor(std::uint64_t begin, std::uint64_t end) const;

 private:
  friend class AggregatedRowCursor;
  Partition partition_at(const std::uint8_t*& p, std::uint64_t begin) const;

  Bytes bytes_;
  unsigned w1_;
  unsigned w2_;
  std::uint64_t n_;
  const EdgeStore* store_;
  std::uint64_t partitions_ = 0;
  std::uint64_t references_ = 0;
  std::uint64_t byte_size_ = 0;
};

// Uniform read access to a binary table, whatever its physical form.
class Table {
 public:
  using Materialized = std::shared_ptr<const std::vector<Row>>;

  explicit Table(EncodedTable t) : impl_(std::move(t)) {}
  explicit Table(AggregatedTable t) : impl_(std::move(t)) {}
  explicit Table(Materialized rows) : impl_(std::move(rows)) {}

  std::uint64_t size() const;
  std::uint64_t groups() const;
  Row row(std::uint64_t i) const;
  std::optional<RowRange> search_first(TermId key) const;
  // Rows in `within` whose second field equals `second`; within must share
  // a single first value.
  RowRange search_second(RowRange within, TermId second) const;
  std::unique_ptr<RowCursor> cursor(std::uint64_t begin, std::uint64_t end) const;
  std::unique_ptr<RowCursor> cursor() const { return cursor(0, size()); }
  std::vector<Row> materialize() const;

  bool is_materialized() const {
    return std::holds_alternative<Materialized>(impl_);
  }
  bool is_aggregated() const {
    return std::holds_alternative<AggregatedTable>(impl_);
  }
  // Random access is constant time (ROW, COLUMN, materialized).
  bool random_access() const;

 private:
  std::variant<EncodedTable, AggregatedTable, Materialized> impl_;
};

// Read side of the six streams of one database (base or delta).
class EdgeStore {
 public:
  EdgeStore(const fs::path& dir, IoStats* stats);

  const StreamReader& stream(StreamId id) const {
    return *streams_[static_cast<std::size_t>(id)];
  }
  std::uint64_t edge_count() const { return stream(StreamId::kTS).edge_count(); }

  // Table with the given location. Pruned tables are rebuilt from their
  // counterpart.
  Table open_table(StreamId id, TermId key, std::uint64_t offset,
                   std::uint64_t n, std::uint8_t format, bool pruned) const;
  Table open_entry(StreamId id, const HeaderEntry& e) const;
  std::optional<Table> get_table_via_header(StreamId id, TermId key) const;

  // Logical header of a stream. Tables pruned by OFR have no entry on disk;
  // they are listed here with the counterpart's key, row count and format,
  // the pruned flag and groups = kUnknownGroups.
  std::uint64_t entry_count(StreamId id) const;
  HeaderEntry entry(StreamId id, std::uint64_t i) const;
  std::optional<std::uint64_t> find(StreamId id, TermId key) const;
  bool has_pruned(StreamId id) const;

  // Counterpart table with columns swapped, cached after the first call.
  Table::Materialized ofr_reconstruct(StreamId primed, TermId key) const;

  IoStats* stats() const { return stats_; }

 private:
  std::array<std::unique_ptr<StreamReader>, 6> streams_;
  IoStats* stats_;
  mutable std::mutex ofr_mu_;
  mutable std::map<std::pair<std::uint8_t, TermId>, Table::Materialized>
      ofr_cache_;
};

// ---------------------------------------------------------------------------
// Building

struct BuildOptions {
  LayoutThresholds layout;
  bool ofr = false;
  std::uint64_t eta = 20;
  bool aggr = false;
};

// Per-stream layout histogram.
struct StreamSummary {
  StreamId id = StreamId::kTS;
  std::uint64_t tables = 0;
  std::uint64_t rows = 0;
  std::uint64_t row_tables = 0;
  std::uint64_t column_tables = 0;
  std::uint64_t cluster_tables = 0;
  std::uint64_t pruned_tables = 0;
  std::uint64_t aggregated_tables = 0;
  std::uint64_t aggregated_references = 0;
  std::uint64_t file_bytes = 0;
};

StreamSummary summarize_stream(const EdgeStore& store, StreamId id);

// Writes one stream from edges delivered in the stream's ordering.
// Consecutive duplicates are dropped; out-of-order edges are rejected.
class StreamBuilder {
 public:
  StreamBuilder(const fs::path& dir, StreamId id, const BuildOptions& opts,
                WorkerPool* io);
  ~StreamBuilder();

  void add(const Edge& e);
  StreamSummary finish();

 private:
  struct TdpIndex;

  void flush_table();
  void write_table(TermId key, std::span<const Row> rows);
  void write_large_column(TermId key);
  void count_pruned(std::span<const Row> rows);
  std::optional<std::vector<std::uint8_t>> try_aggregate(
      std::span<const Row> rows, std::uint64_t plain_size);

  fs::path dir_;
  StreamId id_;
  Ordering ordering_;
  BuildOptions opts_;
  WorkerPool* io_;
  fs::path data_path_;
  fs::path spill_path_;
  std::unique_ptr<BlockWriter> data_;
  std::vector<HeaderEntry> entries_;
  StreamSummary summary_;

  bool have_key_ = false;
  TermId key_ = 0;
  bool have_last_ = false;
  Edge last_{};
  std::vector<Row> rows_;
  // Large-table mode once rows exceed tau.
  bool spilling_ = false;
  std::unique_ptr<BlockWriter> spill_;
  std::vector<std::pair<TermId, std::uint64_t>> runs_;
  std::uint64_t spilled_rows_ = 0;
  Row last_row_{};

  std::unique_ptr<TdpIndex> tdp_;
  std::vector<std::uint8_t> scratch_;
};

// Reads the header entries of a finished stream file sequentially.
std::vector<HeaderEntry> read_header_entries(const fs::path& stream_path,
                                             WorkerPool* io);

}  // namespace kgs
