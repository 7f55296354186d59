#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "io.hpp"

namespace kgs {

using Bytes = std::span<const std::uint8_t>;

inline Bytes as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

// Immutable on-disk B+Tree, bulk-loaded bottom-up from keys supplied in
// strictly ascending byte order. Keys and values are arbitrary byte strings;
// a node holds up to `fanout` entries and is stored as one variable-length
// record, so long keys never need overflow pages.
//
// File layout (integers little-endian):
//   header   64 bytes: "KGBTREE1", fanout u32, height u32, entries u64,
//            root offset u64, first leaf offset u64, leaf count u64, 0-pad
//   nodes    kind u8 (0 leaf, 1 inner), pad u8, count u16, byte length u32,
//            count x u32 entry offsets (relative to the node), then entries.
//            leaf entry:  varint klen, key, varint vlen, value
//            inner entry: varint klen, first key of child, child offset u64
// Leaves are written first and are contiguous in key order.
class BTreeWriter {
 public:
  static constexpr std::uint32_t kDefaultFanout = 128;

  explicit BTreeWriter(const fs::path& path,
                       std::uint32_t fanout = kDefaultFanout,
                       WorkerPool* io = nullptr);

  void add(Bytes key, Bytes value);
  void finish();

 private:
  struct NodeRef {
    std::vector<std::uint8_t> first_key;
    std::uint64_t offset;
  };

  void flush_leaf();
  std::uint64_t write_node(std::uint8_t kind,
                           const std::vector<std::vector<std::uint8_t>>& entries);

  fs::path path_;
  std::uint32_t fanout_;
  BlockWriter out_;
  std::vector<std::vector<std::uint8_t>> pending_;
  std::vector<std::uint8_t> pending_first_key_;
  std::vector<std::uint8_t> last_key_;
  bool has_last_ = false;
  std::vector<NodeRef> level_;
  std::uint64_t entries_ = 0;
  bool finished_ = false;
};

class BTreeReader {
 public:
  explicit BTreeReader(const fs::path& path);

  std::optional<Bytes> find(Bytes key) const;

  // Calls fn for every entry in key order; stops early when fn returns false.
  void for_each(const std::function<bool(Bytes, Bytes)>& fn) const;

  std::uint64_t size() const { return entries_; }
  std::uint32_t height() const { return height_; }
  std::uint32_t fanout() const { return fanout_; }
  // Nodes visited by all find() calls so far.
  std::uint64_t node_visits() const { return visits_.load(); }

 private:
  MappedFile file_;
  std::uint32_t fanout_ = 0;
  std::uint32_t height_ = 0;
  std::uint64_t entries_ = 0;
  std::uint64_t root_ = 0;
  std::uint64_t first_leaf_ = 0;
  std::uint64_t leaf_count_ = 0;
  mutable std::atomic<std::uint64_t> visits_{0};
};

}  // namespace kgs
