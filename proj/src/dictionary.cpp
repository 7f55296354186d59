#include "dictionary.hpp"

#include <algorithm>

namespace kgs {

namespace {

constexpr char kLabelMagic[8] = {'K', 'G', 'L', 'A', 'B', 'E', 'L', '1'};
constexpr std::size_t kLabelHeader = 16;

std::array<std::uint8_t, 5> id_key(TermId id) {
  std::array<std::uint8_t, 5> k{};
  store_be(k.data(), id, 5);
  return k;
}

std::vector<std::uint8_t> prefixed(char tag, Bytes rest) {
  std::vector<std::uint8_t> k;
  k.reserve(rest.size() + 1);
  k.push_back(static_cast<std::uint8_t>(tag));
  k.insert(k.end(), rest.begin(), rest.end());
  return k;
}

// Appends labels to labels.blk in id order and returns their locations.
class LabelWriter {
 public:
  LabelWriter(const fs::path& path, WorkerPool* io, std::uint32_t block_size)
      : out_(path, io), block_size_(block_size) {
    std::uint8_t header[kLabelHeader] = {};
    std::memcpy(header, kLabelMagic, 8);
    store_le(header + 8, block_size, 4);
    out_.write(header, sizeof header);
  }

  std::array<std::uint8_t, 12> append(std::string_view label) {
    std::uint8_t len[10];
    std::size_t n = 0;
    std::uint64_t v = label.size();
    while (v >= 0x80) {
      len[n++] = static_cast<std::uint8_t>(v | 0x80);
      v >>= 7;
    }
    len[n++] = static_cast<std::uint8_t>(v);
    const std::uint64_t record = n + label.size();
    const std::uint64_t in_block = (out_.offset() - kLabelHeader) % block_size_;
    if (in_block != 0 && in_block + record > block_size_ &&
        record <= block_size_) {
      std::vector<std::uint8_t> pad(block_size_ - in_block, 0);
      out_.write(pad.data(), pad.size());
    }
    out_.write(len, n);
    std::array<std::uint8_t, 12> loc{};
    store_le(loc.data(), out_.offset(), 8);
    store_le(loc.data() + 8, label.size(), 4);
    out_.write(label.data(), label.size());
    return loc;
  }

  void close() { out_.close(); }

 private:
  BlockWriter out_;
  std::uint32_t block_size_;
};

}  // namespace

const char* id_mode_name(IdMode m) {
  return m == IdMode::kGlobal ? "global" : "split";
}

IdMode parse_id_mode(std::string_view s) {
  if (s == "global") return IdMode::kGlobal;
  if (s == "split") return IdMode::kSplit;
  throw Error(ErrorCode::kInvalidArgument, "unknown id mode: " + std::string(s));
}

DictionarySegment::DictionarySegment(const fs::path& dir)
    : labels_(dir / "labels.blk") {
  Bytes b = labels_.bytes();
  if (b.size() < kLabelHeader || std::memcmp(b.data(), kLabelMagic, 8) != 0) {
    throw Error(ErrorCode::kCorrupt, "bad labels.blk in " + dir.string());
  }
  dict_l_ = std::make_unique<BTreeReader>(dir / "dict_l.btree");
  dict_i_ = std::make_unique<BTreeReader>(dir / "dict_i.btree");
  if (fs::exists(dir / "rel.btree")) {
    rel_ = std::make_unique<BTreeReader>(dir / "rel.btree");
  }
}

bool DictionarySegment::exists(const fs::path& dir) {
  return fs::exists(dir / "labels.blk");
}

std::uint64_t DictionarySegment::size() const {
  return dict_i_->size() + (rel_ ? rel_->size() / 2 : 0);
}

std::string DictionarySegment::read_label(Bytes location) const {
  if (location.size() != 12) throw Error(ErrorCode::kCorrupt, "label location");
  std::uint64_t off = load_le(location.data(), 8);
  std::uint64_t len = load_le(location.data() + 8, 4);
  Bytes b = labels_.bytes();
  if (off + len > b.size()) throw Error(ErrorCode::kCorrupt, "label range");
  return std::string(reinterpret_cast<const char*>(b.data() + off),
                     static_cast<std::size_t>(len));
}

std::optional<TermId> DictionarySegment::lookup_id(std::string_view label,
                                                   TermKind kind) const {
  std::optional<Bytes> v;
  if (rel_ && kind == TermKind::kRelation) {
    auto key = prefixed('L', as_bytes(label));
    v = rel_->find(key);
  } else {
    v = dict_l_->find(as_bytes(label));
  }
  if (!v) return std::nullopt;
  return load_le(v->data(), 5);
}

std::optional<std::string> DictionarySegment::lookup_label(TermId id,
                                                           TermKind kind) const {
  auto k = id_key(id);
  std::optional<Bytes> v;
  if (rel_ && kind == TermKind::kRelation) {
    auto key = prefixed('I', k);
    v = rel_->find(key);
  } else {
    v = dict_i_->find(k);
  }
  if (!v) return std::nullopt;
  return read_label(*v);
}

void DictionarySegment::for_each(
    const std::function<void(TermKind, TermId, std::string_view)>& fn) const {
  dict_i_->for_each([&](Bytes k, Bytes v) {
    fn(TermKind::kEntity, load_be(k.data(), 5), read_label(v));
    return true;
  });
  if (rel_) {
    rel_->for_each([&](Bytes k, Bytes v) {
      if (k[0] != 'I') return false;
      fn(TermKind::kRelation, load_be(k.data() + 1, 5), read_label(v));
      return true;
    });
  }
}

Dictionary::Dictionary(IdMode mode, TermId next_entity, TermId next_relation)
    : mode_(mode), next_{next_entity, next_relation} {
  pending_[0].first_id = next_[0];
  pending_[1].first_id = next_[1];
}

void Dictionary::add_segment(std::shared_ptr<const DictionarySegment> segment) {
  segments_.push_back(std::move(segment));
}

TermId Dictionary::assign_id(std::string_view label, TermKind kind) {
  if (auto id = lookup_id(label, kind)) return *id;
  const std::size_t k = slot(kind);
  if (next_[k] >= kTermIdLimit) {
    throw Error(ErrorCode::kIdSpaceExhausted, "no more 40-bit ids");
  }
  Pending& p = pending_[k];
  if (p.in_order.empty()) p.first_id = next_[k];
  const TermId id = next_[k]++;
  auto [it, inserted] = p.by_label.emplace(std::string(label), id);
  p.in_order.push_back(&it->first);
  return id;
}

std::optional<TermId> Dictionary::lookup_id(std::string_view label,
                                            TermKind kind) const {
  const Pending& p = pending_[slot(kind)];
  if (!p.by_label.empty()) {
    auto it = p.by_label.find(label);
    if (it != p.by_label.end()) return it->second;
  }
  for (const auto& seg : segments_) {
    if (auto id = seg->lookup_id(label, kind)) return id;
  }
  return std::nullopt;
}

std::optional<std::string> Dictionary::lookup_label(TermId id,
                                                    TermKind kind) const {
  const Pending& p = pending_[slot(kind)];
  if (!p.in_order.empty() && id >= p.first_id &&
      id < p.first_id + p.in_order.size()) {
    return *p.in_order[id - p.first_id];
  }
  for (const auto& seg : segments_) {
    if (auto l = seg->lookup_label(id, kind)) return l;
  }
  return std::nullopt;
}

std::uint64_t Dictionary::pending_count() const {
  return pending_[0].in_order.size() + pending_[1].in_order.size();
}

std::uint64_t Dictionary::size() const {
  std::uint64_t n = pending_count();
  for (const auto& seg : segments_) n += seg->size();
  return n;
}

void Dictionary::commit(const fs::path& dir, WorkerPool* io,
                        std::uint32_t block_size) {
  fs::create_directories(dir);
  LabelWriter labels(dir / "labels.blk", io, block_size);

  auto write_kind = [&](Pending& p, bool relation_index) {
    std::vector<std::array<std::uint8_t, 12>> locs;
    locs.reserve(p.in_order.size());
    for (const std::string* s : p.in_order) locs.push_back(labels.append(*s));
    std::vector<std::size_t> by_label(p.in_order.size());
    for (std::size_t i = 0; i < by_label.size(); ++i) by_label[i] = i;
    std::sort(by_label.begin(), by_label.end(), [&](std::size_t a, std::size_t b) {
      return *p.in_order[a] < *p.in_order[b];
    });
    if (relation_index) {
      BTreeWriter rel(dir / "rel.btree", BTreeWriter::kDefaultFanout, io);
      for (std::size_t i = 0; i < p.in_order.size(); ++i) {
        auto key = prefixed('I', id_key(p.first_id + i));
        rel.add(key, locs[i]);
      }
      for (std::size_t i : by_label) {
        auto key = prefixed('L', as_bytes(*p.in_order[i]));
        std::uint8_t v[5];
        store_le(v, p.first_id + i, 5);
        rel.add(key, Bytes(v, 5));
      }
      rel.finish();
      return;
    }
    BTreeWriter dict_i(dir / "dict_i.btree", BTreeWriter::kDefaultFanout, io);
    for (std::size_t i = 0; i < p.in_order.size(); ++i) {
      dict_i.add(id_key(p.first_id + i), locs[i]);
    }
    dict_i.finish();
    BTreeWriter dict_l(dir / "dict_l.btree", BTreeWriter::kDefaultFanout, io);
    for (std::size_t i : by_label) {
      std::uint8_t v[5];
      store_le(v, p.first_id + i, 5);
      dict_l.add(as_bytes(*p.in_order[i]), Bytes(v, 5));
    }
    dict_l.finish();
  };

  // The sort in write_kind compares std::string, i.e. unsigned bytes as
  // char_traits<char>::compare does, matching the btree's memcmp order.
  write_kind(pending_[0], false);
  if (mode_ == IdMode::kSplit) write_kind(pending_[1], true);
  labels.close();

  for (auto& p : pending_) {
    p.by_label.clear();
    p.in_order.clear();
  }
  pending_[0].first_id = next_[0];
  pending_[1].first_id = next_[1];
  add_segment(std::make_shared<DictionarySegment>(dir));
}

}  // namespace kgs
