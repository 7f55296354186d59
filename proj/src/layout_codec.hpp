#pragma once

#include <compare>
#include <optional>
#include <span>
#include <vector>

#include "btree.hpp"
#include "common.hpp"

namespace kgs {

enum class LayoutKind : std::uint8_t { kRow = 0, kColumn = 1, kCluster = 2 };

const char* layout_name(LayoutKind k);

// Chosen layout plus byte widths of the first field, the second field and
// (CLUSTER only) the group size.
struct LayoutDescriptor {
  LayoutKind kind = LayoutKind::kRow;
  std::uint8_t w1 = 5;
  std::uint8_t w2 = 5;
  std::uint8_t w3 = 0;

  bool valid() const;
  friend bool operator==(const LayoutDescriptor&,
                         const LayoutDescriptor&) = default;
};

struct Row {
  TermId first = 0;
  TermId second = 0;

  friend bool operator==(const Row&, const Row&) = default;
  friend auto operator<=>(const Row&, const Row&) = default;
};

struct RowRange {
  std::uint64_t begin = 0;
  std::uint64_t end = 0;

  std::uint64_t size() const { return end - begin; }
  bool empty() const { return begin == end; }
  friend bool operator==(const RowRange&, const RowRange&) = default;
};

struct LayoutThresholds {
  std::uint64_t tau = 1'000'000;  // row threshold
  std::uint64_t upsilon = 32;     // distinct first-value threshold
};

// Minimal number of bytes k in [1,5] with v < 2^(8k).
unsigned bytes_needed(std::uint64_t v);

// Layout selection for a sorted, non-empty table.
LayoutDescriptor select_layout(std::span<const Row> table,
                               const LayoutThresholds& thresholds = {});

// Wire formats, integers little-endian:
//   ROW      n x (first:w1, second:w2)
//   COLUMN   runs:u32, runs x (first:w1, end:u32), n x second:w2
//            where `end` is the row count up to and including the run
//   CLUSTER  per group: first:w1, count:w3, count x second:w2
void encode_table(std::span<const Row> table, const LayoutDescriptor& d,
                  std::vector<std::uint8_t>& out);
std::vector<std::uint8_t> encode_table(std::span<const Row> table,
                                       const LayoutDescriptor& d);

// Size in bytes that encode_table would produce.
std::uint64_t encoded_size(std::span<const Row> table, const LayoutDescriptor& d);

// One byte packs a descriptor and whether the table is stored in aggregated
// form: ROW 0..24, COLUMN 25..49, CLUSTER 50..174, aggregated 175..199.
inline constexpr std::uint8_t kNoDescriptor = 0xff;

struct TableFormat {
  LayoutDescriptor desc;
  bool aggregated = false;
  friend bool operator==(const TableFormat&, const TableFormat&) = default;
};

std::uint8_t pack_format(const TableFormat& f);
TableFormat unpack_format(std::uint8_t byte);

// Read access to one encoded table. Construction validates the framing.
class EncodedTable {
 public:
  EncodedTable(Bytes bytes, const LayoutDescriptor& d, std::uint64_t n);

  std::uint64_t size() const { return n_; }
  const LayoutDescriptor& descriptor() const { return d_; }
  // Exact number of bytes the table occupies.
  std::uint64_t byte_size() const { return byte_size_; }
  // Number of distinct first values.
  std::uint64_t groups() const;

  Row row(std::uint64_t i) const;
  std::optional<RowRange> search_first(TermId key) const;

  class Cursor {
   public:
    bool next(Row& out);

   private:
    friend class EncodedTable;
    const EncodedTable* t_ = nullptr;
    std::uint64_t pos_ = 0;
    std::uint64_t end_ = 0;
    // COLUMN: current run; CLUSTER: current group header.
    std::uint64_t run_ = 0;
    std::uint64_t run_end_ = 0;
    TermId run_value_ = 0;
    const std::uint8_t* ptr_ = nullptr;
  };

  Cursor cursor(std::uint64_t begin, std::uint64_t end) const;
  Cursor cursor() const { return cursor(0, n_); }

 private:
  TermId run_value(std::uint64_t j) const;
  std::uint64_t run_end(std::uint64_t j) const;
  std::uint64_t run_for_row(std::uint64_t i) const;

  Bytes bytes_;
  LayoutDescriptor d_;
  std::uint64_t n_;
  std::uint64_t runs_ = 0;   // COLUMN run count, CLUSTER group count
  const std::uint8_t* second_ = nullptr;  // COLUMN second column
  std::uint64_t byte_size_ = 0;
};

std::vector<Row> decode_scan(Bytes bytes, const LayoutDescriptor& d,
                             std::uint64_t n);
std::optional<RowRange> search_first(Bytes bytes, const LayoutDescriptor& d,
                                     std::uint64_t n, TermId key);

}  // namespace kgs
