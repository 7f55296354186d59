#pragma once

#include <vector>

#include "graph_model.hpp"
#include "io.hpp"

namespace kgs {

// Encoded triples on disk: s, r, d as u40 little-endian, 15 bytes each.
inline constexpr std::size_t kTripleSize = 15;

inline void encode_triple(const Edge& e, std::uint8_t* out) {
  store_le(out, e.s, 5);
  store_le(out + 5, e.r, 5);
  store_le(out + 10, e.d, 5);
}

inline Edge decode_triple(const std::uint8_t* in) {
  return {load_le(in, 5), load_le(in + 5, 5), load_le(in + 10, 5)};
}

class TripleWriter {
 public:
  TripleWriter(const fs::path& path, WorkerPool* io) : out_(path, io) {}
  void add(const Edge& e) {
    std::uint8_t b[kTripleSize];
    encode_triple(e, b);
    out_.write(b, kTripleSize);
    ++count_;
  }
  std::uint64_t count() const { return count_; }
  void close() { out_.close(); }

 private:
  BlockWriter out_;
  std::uint64_t count_ = 0;
};

class TripleReader {
 public:
  TripleReader(const fs::path& path, WorkerPool* io,
               std::size_t block_size = 1 << 20)
      : in_(path, io, block_size) {}
  bool next(Edge& e) {
    std::uint8_t b[kTripleSize];
    const std::size_t n = in_.read(b, kTripleSize);
    if (n == 0) return false;
    if (n != kTripleSize) throw Error(ErrorCode::kCorrupt, "truncated triple file");
    e = decode_triple(b);
    return true;
  }
  std::uint64_t size() const { return in_.file_size() / kTripleSize; }

 private:
  BlockReader in_;
};

struct SortConfig {
  std::uint64_t memory_budget = 512ull << 20;  // bytes
  fs::path temp_dir;
};

struct SortStats {
  std::uint64_t input_triples = 0;
  std::uint64_t output_triples = 0;
  std::uint64_t runs = 0;
  std::uint64_t merge_passes = 0;
};

// Sorts the triples of `input` by ordering o into `output`, dropping
// duplicates. Run sorting happens on `proc`; all file traffic goes through
// `io` when given.
SortStats external_sort(const fs::path& input, const fs::path& output,
                        const Ordering& o, const SortConfig& cfg,
                        WorkerPool& proc, WorkerPool* io);

}  // namespace kgs
