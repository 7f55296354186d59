#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "btree.hpp"

namespace kgs {

enum class IdMode { kGlobal, kSplit };
enum class TermKind { kEntity, kRelation };

const char* id_mode_name(IdMode m);
IdMode parse_id_mode(std::string_view s);

// One persisted batch of label <-> id mappings:
//   labels.blk     "KGLABEL1", block size u32, pad u32; then records
//                  (varint length, bytes) that never straddle a block
//                  boundary unless longer than a block
//   dict_l.btree   label bytes -> id (u40 LE); entities only in split mode
//   dict_i.btree   id (u40 BE) -> offset u64 LE, length u32 LE in labels.blk
//   rel.btree      split mode only: 'I' + id (u40 BE) -> location and
//                  'L' + label -> id, for relation labels
class DictionarySegment {
 public:
  explicit DictionarySegment(const fs::path& dir);

  static bool exists(const fs::path& dir);

  std::optional<TermId> lookup_id(std::string_view label, TermKind kind) const;
  std::optional<std::string> lookup_label(TermId id, TermKind kind) const;
  void for_each(
      const std::function<void(TermKind, TermId, std::string_view)>& fn) const;

  bool split() const { return rel_ != nullptr; }
  std::uint64_t size() const;
  const BTreeReader& label_index() const { return *dict_l_; }
  const BTreeReader& id_index() const { return *dict_i_; }

 private:
  std::string read_label(Bytes location) const;

  MappedFile labels_;
  std::unique_ptr<BTreeReader> dict_l_;
  std::unique_ptr<BTreeReader> dict_i_;
  std::unique_ptr<BTreeReader> rel_;
};

// Ordered stack of read-only segments plus in-memory assignments that have
// not been committed yet. In global mode entities and relations share one
// counter and one namespace; in split mode each kind has its own.
class Dictionary {
 public:
  static constexpr std::uint32_t kDefaultBlockSize = 4096;

  Dictionary(IdMode mode, TermId next_entity = 0, TermId next_relation = 0);

  void add_segment(std::shared_ptr<const DictionarySegment> segment);

  TermId assign_id(std::string_view label, TermKind kind);
  std::optional<TermId> lookup_id(std::string_view label, TermKind kind) const;
  std::optional<std::string> lookup_label(TermId id, TermKind kind) const;

  // Persists pending assignments into dir as a new segment and adds it.
  void commit(const fs::path& dir, WorkerPool* io = nullptr,
              std::uint32_t block_size = kDefaultBlockSize);

  IdMode mode() const { return mode_; }
  TermId next_entity_id() const { return next_[0]; }
  TermId next_relation_id() const {
    return mode_ == IdMode::kGlobal ? next_[0] : next_[1];
  }
  std::uint64_t pending_count() const;
  // Total number of assigned ids across segments and pending.
  std::uint64_t size() const;
  const std::vector<std::shared_ptr<const DictionarySegment>>& segments() const {
    return segments_;
  }

 private:
  struct LabelHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const {
      return std::hash<std::string_view>{}(s);
    }
  };
  struct Pending {
    std::unordered_map<std::string, TermId, LabelHash, std::equal_to<>>
        by_label;
    std::vector<const std::string*> in_order;
    TermId first_id = 0;
  };

  std::size_t slot(TermKind kind) const {
    return mode_ == IdMode::kSplit && kind == TermKind::kRelation ? 1 : 0;
  }

  IdMode mode_;
  TermId next_[2];
  Pending pending_[2];
  std::vector<std::shared_ptr<const DictionarySegment>> segments_;
};

}  // namespace kgs
