#pragma once

#include <array>
#include <memory>
#include <optional>
#include <vector>

#include "btree.hpp"
#include "edge_store.hpp"

namespace kgs {

inline constexpr std::uint64_t kAbsentCoord = (std::uint64_t{1} << 40) - 1;

// Everything known about one label: how many edges use it in each role, and
// where its six tables live (indexed by StreamId).
struct NodeRecord {
  std::array<std::uint64_t, 3> card{};  // by Field: s, r, d
  std::array<std::uint64_t, 6> coord{kAbsentCoord, kAbsentCoord, kAbsentCoord,
                                     kAbsentCoord, kAbsentCoord, kAbsentCoord};
  std::array<std::uint8_t, 6> format{kNoDescriptor, kNoDescriptor,
                                     kNoDescriptor, kNoDescriptor,
                                     kNoDescriptor, kNoDescriptor};

  std::uint64_t cardinality(Field f) const {
    return card[static_cast<std::size_t>(f)];
  }
  bool has_table(StreamId id) const {
    return cardinality(stream_key_field(id)) > 0;
  }
  bool pruned(StreamId id) const {
    return has_table(id) && coord[static_cast<std::size_t>(id)] == kAbsentCoord;
  }

  friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

// 64-byte wire form: card_s, card_r, card_d (u40 each), six coordinates
// (u40 each, all-ones when absent), six format bytes, 13 zero bytes.
inline constexpr std::size_t kNodeRecordSize = 64;
void encode_record(const NodeRecord& r, std::uint8_t* out);
NodeRecord decode_record(const std::uint8_t* in);

enum class NmBackend { kBTree, kArray };
const char* nm_backend_name(NmBackend b);
NmBackend parse_nm_backend(std::string_view s);
const char* nm_file_name(NmBackend b);

class NodeManager {
 public:
  virtual ~NodeManager() = default;
  virtual std::optional<NodeRecord> get(TermId id) const = 0;
  virtual std::uint64_t size() const = 0;
  virtual NmBackend backend() const = 0;
};

// nm.btree: key = id as u40 big-endian, value = 64-byte record.
class BTreeNodeManager : public NodeManager {
 public:
  explicit BTreeNodeManager(const fs::path& path);
  std::optional<NodeRecord> get(TermId id) const override;
  std::uint64_t size() const override { return tree_.size(); }
  NmBackend backend() const override { return NmBackend::kBTree; }
  const BTreeReader& tree() const { return tree_; }

 private:
  BTreeReader tree_;
};

// nm.arr: "KGNMARR1", count u64, then count x (id u64, record), ascending.
// Held in memory; direct indexing when ids are 0..count-1.
class ArrayNodeManager : public NodeManager {
 public:
  explicit ArrayNodeManager(const fs::path& path);
  std::optional<NodeRecord> get(TermId id) const override;
  std::uint64_t size() const override { return ids_.size(); }
  NmBackend backend() const override { return NmBackend::kArray; }
  bool dense() const { return dense_; }

 private:
  std::vector<TermId> ids_;
  std::vector<NodeRecord> records_;
  bool dense_ = false;
};

std::unique_ptr<NodeManager> open_node_manager(const fs::path& dir,
                                               NmBackend backend);

// Builds the NM file of the given backend by merging the six stream headers.
// Returns the number of records written.
std::uint64_t build_node_manager(const fs::path& dir, NmBackend backend,
                                 WorkerPool* io);

}  // namespace kgs
