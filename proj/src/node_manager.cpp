#include "node_manager.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>

namespace kgs {

namespace {

constexpr char kArrMagic[8] = {'K', 'G', 'N', 'M', 'A', 'R', 'R', '1'};

// Sequential walk over the entries of one stream header.
class HeaderWalker {
 public:
  HeaderWalker(const fs::path& path, WorkerPool* io) : in_(path, io) {
    std::uint8_t head[kStreamHeaderSize];
    if (in_.read(head, sizeof head) != sizeof head) {
      throw Error(ErrorCode::kCorrupt, "truncated stream " + path.string());
    }
    left_ = load_le(head + 16, 8);
    advance();
  }

  bool valid() const { return valid_; }
  const HeaderEntry& current() const { return cur_; }

  void advance() {
    if (left_ == 0) {
      valid_ = false;
      return;
    }
    std::uint8_t buf[kEntrySize];
    if (in_.read(buf, kEntrySize) != kEntrySize) {
      throw Error(ErrorCode::kCorrupt, "truncated stream header");
    }
    cur_ = decode_entry(buf);
    --left_;
    valid_ = true;
  }

 private:
  BlockReader in_;
  std::uint64_t left_ = 0;
  HeaderEntry cur_;
  bool valid_ = false;
};

}  // namespace

void encode_record(const NodeRecord& r, std::uint8_t* out) {
  std::memset(out, 0, kNodeRecordSize);
  for (std::size_t i = 0; i < 3; ++i) store_le(out + 5 * i, r.card[i], 5);
  for (std::size_t i = 0; i < 6; ++i) {
    if (r.coord[i] > kAbsentCoord) {
      throw Error(ErrorCode::kWidthOverflow, "table offset exceeds 40 bits");
    }
    store_le(out + 15 + 5 * i, r.coord[i], 5);
  }
  for (std::size_t i = 0; i < 6; ++i) out[45 + i] = r.format[i];
}

NodeRecord decode_record(const std::uint8_t* in) {
  NodeRecord r;
  for (std::size_t i = 0; i < 3; ++i) r.card[i] = load_le(in + 5 * i, 5);
  for (std::size_t i = 0; i < 6; ++i) r.coord[i] = load_le(in + 15 + 5 * i, 5);
  for (std::size_t i = 0; i < 6; ++i) r.format[i] = in[45 + i];
  return r;
}

const char* nm_backend_name(NmBackend b) {
  return b == NmBackend::kBTree ? "btree" : "array";
}

NmBackend parse_nm_backend(std::string_view s) {
  if (s == "btree") return NmBackend::kBTree;
  if (s == "array" || s == "arr") return NmBackend::kArray;
  throw Error(ErrorCode::kInvalidArgument, "unknown NM backend: " + std::string(s));
}

const char* nm_file_name(NmBackend b) {
  return b == NmBackend::kBTree ? "nm.btree" : "nm.arr";
}

BTreeNodeManager::BTreeNodeManager(const fs::path& path) : tree_(path) {}

std::optional<NodeRecord> BTreeNodeManager::get(TermId id) const {
  std::uint8_t key[5];
  store_be(key, id, 5);
  auto v = tree_.find(Bytes(key, 5));
  if (!v) return std::nullopt;
  if (v->size() != kNodeRecordSize) throw Error(ErrorCode::kCorrupt, "NM record");
  return decode_record(v->data());
}

ArrayNodeManager::ArrayNodeManager(const fs::path& path) {
  MappedFile f(path);
  Bytes b = f.bytes();
  if (b.size() < 16 || std::memcmp(b.data(), kArrMagic, 8) != 0) {
    throw Error(ErrorCode::kCorrupt, "bad nm.arr");
  }
  const std::uint64_t count = load_le(b.data() + 8, 8);
  const std::size_t stride = 8 + kNodeRecordSize;
  if (b.size() != 16 + count * stride) throw Error(ErrorCode::kCorrupt, "nm.arr size");
  ids_.reserve(count);
  records_.reserve(count);
  dense_ = true;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint8_t* p = b.data() + 16 + i * stride;
    ids_.push_back(load_le(p, 8));
    records_.push_back(decode_record(p + 8));
    if (ids_.back() != i) dense_ = false;
  }
}

std::optional<NodeRecord> ArrayNodeManager::get(TermId id) const {
  if (dense_) {
    if (id >= records_.size()) return std::nullopt;
    return records_[id];
  }
  auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) return std::nullopt;
  return records_[static_cast<std::size_t>(it - ids_.begin())];
}

std::unique_ptr<NodeManager> open_node_manager(const fs::path& dir,
                                               NmBackend backend) {
  const fs::path p = dir / nm_file_name(backend);
  if (backend == NmBackend::kBTree) return std::make_unique<BTreeNodeManager>(p);
  return std::make_unique<ArrayNodeManager>(p);
}

std::uint64_t build_node_manager(const fs::path& dir, NmBackend backend,
                                 WorkerPool* io) {
  std::vector<std::unique_ptr<HeaderWalker>> walkers;
  for (StreamId id : kAllStreams) {
    walkers.push_back(std::make_unique<HeaderWalker>(dir / stream_file_name(id), io));
  }
  const fs::path path = dir / nm_file_name(backend);
  const fs::path tmp = dir / (std::string(nm_file_name(backend)) + ".tmp");
  std::unique_ptr<BTreeWriter> tree;
  std::unique_ptr<BlockWriter> arr;
  if (backend == NmBackend::kBTree) {
    tree = std::make_unique<BTreeWriter>(tmp, BTreeWriter::kDefaultFanout, io);
  } else {
    arr = std::make_unique<BlockWriter>(tmp, io);
    std::uint8_t head[16] = {};
    std::memcpy(head, kArrMagic, 8);
    arr->write(head, sizeof head);
  }

  std::uint64_t count = 0;
  std::uint8_t rec[kNodeRecordSize];
  for (;;) {
    bool any = false;
    TermId key = 0;
    for (const auto& w : walkers) {
      if (w->valid() && (!any || w->current().key < key)) {
        key = w->current().key;
        any = true;
      }
    }
    if (!any) break;
    NodeRecord r;
    for (std::size_t i = 0; i < walkers.size(); ++i) {
      HeaderWalker& w = *walkers[i];
      if (!w.valid() || w.current().key != key) continue;
      const HeaderEntry& e = w.current();
      const auto sid = static_cast<StreamId>(i);
      r.card[static_cast<std::size_t>(stream_key_field(sid))] = e.n;
      r.coord[i] = e.pruned() ? kAbsentCoord : e.offset;
      r.format[i] = e.format;
      w.advance();
    }
    // Pruned primed tables have no header entry; keep the counterpart's
    // descriptor in their place.
    for (StreamId id : kAllStreams) {
      const auto i = static_cast<std::size_t>(id);
      if (is_primed(id) && r.coord[i] == kAbsentCoord && r.card[static_cast<std::size_t>(stream_key_field(id))] > 0) {
        r.format[i] = r.format[static_cast<std::size_t>(counterpart(id))];
      }
    }
    encode_record(r, rec);
    if (tree) {
      std::uint8_t k[5];
      store_be(k, key, 5);
      tree->add(Bytes(k, 5), Bytes(rec, kNodeRecordSize));
    } else {
      std::uint8_t id[8];
      store_le(id, key, 8);
      arr->write(id, 8);
      arr->write(rec, kNodeRecordSize);
    }
    ++count;
  }
  if (tree) {
    tree->finish();
  } else {
    arr->close();
    arr.reset();
    // Patch the record count into the header.
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CLOEXEC);
    if (fd < 0) throw_errno("open " + tmp.string());
    std::uint8_t c[8];
    store_le(c, count, 8);
    const bool ok = ::pwrite(fd, c, 8, 8) == 8;
    ::close(fd);
    if (!ok) throw_errno("write " + tmp.string());
  }
  fs::rename(tmp, path);
  return count;
}

}  // namespace kgs
