#include "btree.hpp"

#include <algorithm>

namespace kgs {

namespace {

constexpr char kMagic[8] = {'K', 'G', 'B', 'T', 'R', 'E', 'E', '1'};
constexpr std::size_t kHeaderSize = 64;
constexpr std::size_t kNodeHeader = 8;

void put_varint(std::vector<std::uint8_t>& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<std::uint8_t>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint64_t get_varint(const std::uint8_t*& p, const std::uint8_t* end) {
  std::uint64_t v = 0;
  for (unsigned shift = 0; shift < 64; shift += 7) {
    if (p >= end) throw Error(ErrorCode::kCorrupt, "btree: truncated varint");
    std::uint8_t b = *p++;
    v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
    if ((b & 0x80) == 0) return v;
  }
  throw Error(ErrorCode::kCorrupt, "btree: bad varint");
}

int compare(Bytes a, Bytes b) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n > 0) {
    int c = std::memcmp(a.data(), b.data(), n);
    if (c != 0) return c;
  }
  if (a.size() == b.size()) return 0;
  return a.size() < b.size() ? -1 : 1;
}

struct NodeView {
  std::uint8_t kind;
  std::uint16_t count;
  const std::uint8_t* base;
  const std::uint8_t* end;

  // Key of entry i and a pointer just past it.
  Bytes key(std::uint16_t i, const std::uint8_t** after) const {
    const std::uint8_t* p =
        base + load_le(base + kNodeHeader + 4 * std::size_t{i}, 4);
    std::uint64_t klen = get_varint(p, end);
    if (p + klen > end) throw Error(ErrorCode::kCorrupt, "btree: bad key");
    Bytes k(p, static_cast<std::size_t>(klen));
    *after = p + klen;
    return k;
  }
};

NodeView node_at(Bytes file, std::uint64_t off) {
  if (off + kNodeHeader > file.size()) {
    throw Error(ErrorCode::kCorrupt, "btree: node offset out of range");
  }
  const std::uint8_t* base = file.data() + off;
  NodeView v{base[0], static_cast<std::uint16_t>(load_le(base + 2, 2)), base,
             nullptr};
  std::uint64_t len = load_le(base + 4, 4);
  if (off + len > file.size() || len < kNodeHeader + 4u * v.count) {
    throw Error(ErrorCode::kCorrupt, "btree: node length out of range");
  }
  v.end = base + len;
  return v;
}

}  // namespace

BTreeWriter::BTreeWriter(const fs::path& path, std::uint32_t fanout,
                         WorkerPool* io)
    : path_(path), fanout_(std::max<std::uint32_t>(fanout, 2)),
      out_(path, io) {
  if (fanout_ > 65535) fanout_ = 65535;
  std::vector<std::uint8_t> placeholder(kHeaderSize, 0);
  out_.write(placeholder);
}

void BTreeWriter::add(Bytes key, Bytes value) {
  if (finished_) throw Error(ErrorCode::kInternal, "btree already finished");
  if (has_last_ && compare(Bytes(last_key_), key) >= 0) {
    throw Error(ErrorCode::kUnsorted,
                "btree keys must be strictly ascending: " + path_.string());
  }
  last_key_.assign(key.begin(), key.end());
  has_last_ = true;
  if (pending_.empty()) pending_first_key_.assign(key.begin(), key.end());
  std::vector<std::uint8_t> e;
  e.reserve(key.size() + value.size() + 4);
  put_varint(e, key.size());
  e.insert(e.end(), key.begin(), key.end());
  put_varint(e, value.size());
  e.insert(e.end(), value.begin(), value.end());
  pending_.push_back(std::move(e));
  ++entries_;
  if (pending_.size() == fanout_) flush_leaf();
}

std::uint64_t BTreeWriter::write_node(
    std::uint8_t kind, const std::vector<std::vector<std::uint8_t>>& entries) {
  const std::uint64_t off = out_.offset();
  std::size_t len = kNodeHeader + 4 * entries.size();
  for (const auto& e : entries) len += e.size();
  std::vector<std::uint8_t> node;
  node.reserve(len);
  node.resize(kNodeHeader + 4 * entries.size());
  node[0] = kind;
  node[1] = 0;
  store_le(&node[2], entries.size(), 2);
  store_le(&node[4], len, 4);
  std::size_t pos = kNodeHeader + 4 * entries.size();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    store_le(&node[kNodeHeader + 4 * i], pos, 4);
    node.insert(node.end(), entries[i].begin(), entries[i].end());
    pos += entries[i].size();
  }
  out_.write(node);
  return off;
}

void BTreeWriter::flush_leaf() {
  if (pending_.empty()) return;
  std::uint64_t off = write_node(0, pending_);
  level_.push_back({pending_first_key_, off});
  pending_.clear();
}

void BTreeWriter::finish() {
  if (finished_) return;
  flush_leaf();
  const std::uint64_t first_leaf = kHeaderSize;
  const std::uint64_t leaf_count = level_.size();
  std::uint32_t height = level_.empty() ? 0 : 1;
  std::uint64_t root = 0;
  if (level_.size() == 1) root = level_[0].offset;
  while (level_.size() > 1) {
    std::vector<NodeRef> next;
    for (std::size_t i = 0; i < level_.size(); i += fanout_) {
      std::vector<std::vector<std::uint8_t>> entries;
      const std::size_t end = std::min(level_.size(), i + fanout_);
      for (std::size_t j = i; j < end; ++j) {
        std::vector<std::uint8_t> e;
        put_varint(e, level_[j].first_key.size());
        e.insert(e.end(), level_[j].first_key.begin(),
                 level_[j].first_key.end());
        std::uint8_t child[8];
        store_le(child, level_[j].offset, 8);
        e.insert(e.end(), child, child + 8);
        entries.push_back(std::move(e));
      }
      std::uint64_t off = write_node(1, entries);
      next.push_back({level_[i].first_key, off});
    }
    level_ = std::move(next);
    ++height;
    if (level_.size() == 1) root = level_[0].offset;
  }
  out_.close();

  std::vector<std::uint8_t> header(kHeaderSize, 0);
  std::memcpy(header.data(), kMagic, 8);
  store_le(&header[8], fanout_, 4);
  store_le(&header[12], height, 4);
  store_le(&header[16], entries_, 8);
  store_le(&header[24], root, 8);
  store_le(&header[32], first_leaf, 8);
  store_le(&header[40], leaf_count, 8);
  FILE* f = std::fopen(path_.c_str(), "r+b");
  if (f == nullptr) throw_errno("reopen " + path_.string());
  bool ok = std::fwrite(header.data(), 1, header.size(), f) == header.size();
  ok = (std::fclose(f) == 0) && ok;
  if (!ok) throw Error(ErrorCode::kStorage, "write header " + path_.string());
  finished_ = true;
}

BTreeReader::BTreeReader(const fs::path& path) : file_(path) {
  Bytes b = file_.bytes();
  if (b.size() < kHeaderSize || std::memcmp(b.data(), kMagic, 8) != 0) {
    throw Error(ErrorCode::kCorrupt, "not a btree file: " + path.string());
  }
  fanout_ = static_cast<std::uint32_t>(load_le(&b[8], 4));
  height_ = static_cast<std::uint32_t>(load_le(&b[12], 4));
  entries_ = load_le(&b[16], 8);
  root_ = load_le(&b[24], 8);
  first_leaf_ = load_le(&b[32], 8);
  leaf_count_ = load_le(&b[40], 8);
}

std::optional<Bytes> BTreeReader::find(Bytes key) const {
  if (entries_ == 0) return std::nullopt;
  Bytes file = file_.bytes();
  std::uint64_t off = root_;
  for (;;) {
    visits_.fetch_add(1, std::memory_order_relaxed);
    NodeView node = node_at(file, off);
    if (node.count == 0) return std::nullopt;
    if (node.kind == 1) {
      // Last child whose first key <= key.
      std::uint16_t lo = 0;
      std::uint16_t hi = node.count;
      while (hi - lo > 1) {
        std::uint16_t mid = static_cast<std::uint16_t>((lo + hi) / 2);
        const std::uint8_t* after = nullptr;
        if (compare(node.key(mid, &after), key) <= 0) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      const std::uint8_t* after = nullptr;
      node.key(lo, &after);
      if (after + 8 > node.end) throw Error(ErrorCode::kCorrupt, "btree child");
      off = load_le(after, 8);
      continue;
    }
    std::uint16_t lo = 0;
    std::uint16_t hi = node.count;
    while (lo < hi) {
      std::uint16_t mid = static_cast<std::uint16_t>((lo + hi) / 2);
      const std::uint8_t* after = nullptr;
      int c = compare(node.key(mid, &after), key);
      if (c == 0) {
        std::uint64_t vlen = get_varint(after, node.end);
        if (after + vlen > node.end) {
          throw Error(ErrorCode::kCorrupt, "btree: bad value");
        }
        return Bytes(after, static_cast<std::size_t>(vlen));
      }
      if (c < 0) {
        lo = static_cast<std::uint16_t>(mid + 1);
      } else {
        hi = mid;
      }
    }
    return std::nullopt;
  }
}

void BTreeReader::for_each(const std::function<bool(Bytes, Bytes)>& fn) const {
  Bytes file = file_.bytes();
  std::uint64_t off = first_leaf_;
  for (std::uint64_t leaf = 0; leaf < leaf_count_; ++leaf) {
    NodeView node = node_at(file, off);
    for (std::uint16_t i = 0; i < node.count; ++i) {
      const std::uint8_t* after = nullptr;
      Bytes k = node.key(i, &after);
      std::uint64_t vlen = get_varint(after, node.end);
      if (after + vlen > node.end) throw Error(ErrorCode::kCorrupt, "btree");
      if (!fn(k, Bytes(after, static_cast<std::size_t>(vlen)))) return;
    }
    off += static_cast<std::uint64_t>(node.end - node.base);
  }
}

}  // namespace kgs
