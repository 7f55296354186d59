#include "layout_codec.hpp"

#include <algorithm>

namespace kgs {

namespace {

constexpr std::uint64_t kRunEndWidth = 4;

[[noreturn]] void truncated() {
  throw Error(ErrorCode::kCorrupt, "truncated-input");
}

void put(std::vector<std::uint8_t>& out, std::uint64_t v, unsigned width) {
  if (width < 8 && v >= (std::uint64_t{1} << (8 * width))) {
    throw Error(ErrorCode::kWidthOverflow,
                "value " + std::to_string(v) + " does not fit " +
                    std::to_string(width) + " bytes");
  }
  const std::size_t at = out.size();
  out.resize(at + width);
  store_le(out.data() + at, v, width);
}

}  // namespace

const char* layout_name(LayoutKind k) {
  switch (k) {
    case LayoutKind::kRow: return "ROW";
    case LayoutKind::kColumn: return "COLUMN";
    case LayoutKind::kCluster: return "CLUSTER";
  }
  return "?";
}

bool LayoutDescriptor::valid() const {
  if (w1 < 1 || w1 > 5 || w2 < 1 || w2 > 5) return false;
  if (kind == LayoutKind::kCluster) return w3 >= 1 && w3 <= 5;
  return w3 == 0;
}

unsigned bytes_needed(std::uint64_t v) {
  if (v >= kTermIdLimit) {
    throw Error(ErrorCode::kValueTooLarge,
                "value exceeds 40 bits: " + std::to_string(v));
  }
  unsigned k = 1;
  while (k < 5 && v >= (std::uint64_t{1} << (8 * k))) ++k;
  return k;
}

LayoutDescriptor select_layout(std::span<const Row> table,
                               const LayoutThresholds& thresholds) {
  if (table.empty()) throw Error(ErrorCode::kEmptyTable, "empty table");
  const std::uint64_t n = table.size();
  // Count distinct first values, giving up once the threshold is exceeded.
  std::uint64_t distinct = 0;
  if (n <= thresholds.tau) {
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (i == 0 || table[i].first != table[i - 1].first) {
        if (++distinct > thresholds.upsilon) break;
      }
    }
  }
  if (n > thresholds.tau || distinct > thresholds.upsilon) {
    return {LayoutKind::kColumn, 5, 5, 0};
  }
  TermId m1 = 0;
  TermId m2 = 0;
  std::uint64_t m3 = 0;
  std::uint64_t group = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (i > 0 && table[i].first != table[i - 1].first) group = 0;
    ++group;
    m1 = std::max(m1, table[i].first);
    m2 = std::max(m2, table[i].second);
    m3 = std::max(m3, group);
  }
  const std::uint64_t s1 = bytes_needed(m1);
  const std::uint64_t s2 = bytes_needed(m2);
  const std::uint64_t s3 = bytes_needed(m3);
  const std::uint64_t t_c = distinct * (s1 + s3) + n * s2;
  const std::uint64_t t_r = n * (s1 + s2);
  if (t_r <= t_c) {
    return {LayoutKind::kRow, static_cast<std::uint8_t>(s1),
            static_cast<std::uint8_t>(s2), 0};
  }
  return {LayoutKind::kCluster, static_cast<std::uint8_t>(s1),
          static_cast<std::uint8_t>(s2), static_cast<std::uint8_t>(s3)};
}

void encode_table(std::span<const Row> table, const LayoutDescriptor& d,
                  std::vector<std::uint8_t>& out) {
  if (!d.valid()) throw Error(ErrorCode::kInvalidArgument, "bad descriptor");
  switch (d.kind) {
    case LayoutKind::kRow:
      out.reserve(out.size() + table.size() * (d.w1 + d.w2));
      for (const Row& r : table) {
        put(out, r.first, d.w1);
        put(out, r.second, d.w2);
      }
      return;
    case LayoutKind::kColumn: {
      if (table.size() > 0xffffffffull) {
        throw Error(ErrorCode::kWidthOverflow, "COLUMN table too long");
      }
      const std::size_t count_at = out.size();
      out.resize(count_at + 4);
      std::uint64_t runs = 0;
      for (std::size_t i = 0; i < table.size(); ++i) {
        if (i + 1 == table.size() || table[i + 1].first != table[i].first) {
          put(out, table[i].first, d.w1);
          put(out, i + 1, kRunEndWidth);
          ++runs;
        }
      }
      store_le(out.data() + count_at, runs, 4);
      for (const Row& r : table) put(out, r.second, d.w2);
      return;
    }
    case LayoutKind::kCluster:
      for (std::size_t i = 0; i < table.size();) {
        std::size_t j = i;
        while (j < table.size() && table[j].first == table[i].first) ++j;
        put(out, table[i].first, d.w1);
        put(out, j - i, d.w3);
        for (std::size_t k = i; k < j; ++k) put(out, table[k].second, d.w2);
        i = j;
      }
      return;
  }
}

std::vector<std::uint8_t> encode_table(std::span<const Row> table,
                                       const LayoutDescriptor& d) {
  std::vector<std::uint8_t> out;
  encode_table(table, d, out);
  return out;
}

std::uint64_t encoded_size(std::span<const Row> table,
                           const LayoutDescriptor& d) {
  std::uint64_t groups = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (i == 0 || table[i].first != table[i - 1].first) ++groups;
  }
  const std::uint64_t n = table.size();
  switch (d.kind) {
    case LayoutKind::kRow: return n * (d.w1 + d.w2);
    case LayoutKind::kColumn:
      return 4 + groups * (d.w1 + kRunEndWidth) + n * d.w2;
    case LayoutKind::kCluster: return groups * (d.w1 + d.w3) + n * d.w2;
  }
  return 0;
}

std::uint8_t pack_format(const TableFormat& f) {
  const LayoutDescriptor& d = f.desc;
  if (!d.valid()) throw Error(ErrorCode::kInvalidArgument, "bad descriptor");
  const unsigned a = d.w1 - 1u;
  const unsigned b = d.w2 - 1u;
  if (f.aggregated) return static_cast<std::uint8_t>(175 + a * 5 + b);
  switch (d.kind) {
    case LayoutKind::kRow: return static_cast<std::uint8_t>(a * 5 + b);
    case LayoutKind::kColumn: return static_cast<std::uint8_t>(25 + a * 5 + b);
    case LayoutKind::kCluster:
      return static_cast<std::uint8_t>(50 + a * 25 + b * 5 + (d.w3 - 1u));
  }
  return kNoDescriptor;
}

TableFormat unpack_format(std::uint8_t byte) {
  auto w = [](unsigned v) { return static_cast<std::uint8_t>(v + 1); };
  if (byte < 25) return {{LayoutKind::kRow, w(byte / 5), w(byte % 5), 0}, false};
  if (byte < 50) {
    byte -= 25;
    return {{LayoutKind::kColumn, w(byte / 5), w(byte % 5), 0}, false};
  }
  if (byte < 175) {
    byte -= 50;
    return {{LayoutKind::kCluster, w(byte / 25), w(byte / 5 % 5), w(byte % 5)},
            false};
  }
  if (byte < 200) {
    byte -= 175;
    // Aggregated tables keep partition sizes in 5 bytes.
    return {{LayoutKind::kCluster, w(byte / 5), w(byte % 5), 5}, true};
  }
  throw Error(ErrorCode::kCorrupt, "bad descriptor byte " + std::to_string(byte));
}

EncodedTable::EncodedTable(Bytes bytes, const LayoutDescriptor& d,
                           std::uint64_t n)
    : bytes_(bytes), d_(d), n_(n) {
  if (!d.valid()) throw Error(ErrorCode::kCorrupt, "bad descriptor");
  switch (d.kind) {
    case LayoutKind::kRow:
      byte_size_ = n * (d.w1 + d.w2);
      if (byte_size_ > bytes.size()) truncated();
      break;
    case LayoutKind::kColumn: {
      if (n == 0) {
        byte_size_ = bytes.size() >= 4 ? 4 : 0;
        break;
      }
      if (bytes.size() < 4) truncated();
      runs_ = load_le(bytes.data(), 4);
      const std::uint64_t runs_bytes = runs_ * (d.w1 + kRunEndWidth);
      byte_size_ = 4 + runs_bytes + n * d.w2;
      if (byte_size_ > bytes.size()) truncated();
      if (runs_ == 0 || runs_ > n || run_end(runs_ - 1) != n) {
        throw Error(ErrorCode::kCorrupt, "corrupt-run-length");
      }
      second_ = bytes.data() + 4 + runs_bytes;
      break;
    }
    case LayoutKind::kCluster: {
      std::uint64_t pos = 0;
      std::uint64_t rows = 0;
      while (rows < n) {
        if (pos + d.w1 + d.w3 > bytes.size()) truncated();
        std::uint64_t count = load_le(bytes.data() + pos + d.w1, d.w3);
        if (count == 0 || rows + count > n) {
          throw Error(ErrorCode::kCorrupt, "corrupt-run-length");
        }
        pos += d.w1 + d.w3 + count * d.w2;
        if (pos > bytes.size()) truncated();
        rows += count;
        ++runs_;
      }
      byte_size_ = pos;
      break;
    }
  }
}

std::uint64_t EncodedTable::groups() const {
  if (d_.kind != LayoutKind::kRow) return runs_;
  std::uint64_t g = 0;
  TermId prev = 0;
  const unsigned stride = d_.w1 + d_.w2;
  for (std::uint64_t i = 0; i < n_; ++i) {
    TermId f = load_le(bytes_.data() + i * stride, d_.w1);
    if (i == 0 || f != prev) ++g;
    prev = f;
  }
  return g;
}

TermId EncodedTable::run_value(std::uint64_t j) const {
  return load_le(bytes_.data() + 4 + j * (d_.w1 + kRunEndWidth), d_.w1);
}

std::uint64_t EncodedTable::run_end(std::uint64_t j) const {
  return load_le(bytes_.data() + 4 + j * (d_.w1 + kRunEndWidth) + d_.w1,
                 kRunEndWidth);
}

std::uint64_t EncodedTable::run_for_row(std::uint64_t i) const {
  std::uint64_t lo = 0;
  std::uint64_t hi = runs_;
  while (lo < hi) {
    std::uint64_t mid = (lo + hi) / 2;
    if (run_end(mid) > i) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

Row EncodedTable::row(std::uint64_t i) const {
  if (i >= n_) throw Error(ErrorCode::kOutOfRange, "row index out of range");
  switch (d_.kind) {
    case LayoutKind::kRow: {
      const std::uint8_t* p = bytes_.data() + i * (d_.w1 + d_.w2);
      return {load_le(p, d_.w1), load_le(p + d_.w1, d_.w2)};
    }
    case LayoutKind::kColumn:
      return {run_value(run_for_row(i)), load_le(second_ + i * d_.w2, d_.w2)};
    case LayoutKind::kCluster: {
      const std::uint8_t* p = bytes_.data();
      std::uint64_t base = 0;
      for (;;) {
        std::uint64_t count = load_le(p + d_.w1, d_.w3);
        if (i < base + count) {
          return {load_le(p, d_.w1),
                  load_le(p + d_.w1 + d_.w3 + (i - base) * d_.w2, d_.w2)};
        }
        base += count;
        p += d_.w1 + d_.w3 + count * d_.w2;
      }
    }
  }
  return {};
}

std::optional<RowRange> EncodedTable::search_first(TermId key) const {
  switch (d_.kind) {
    case LayoutKind::kRow: {
      const unsigned stride = d_.w1 + d_.w2;
      auto first_at = [&](std::uint64_t i) {
        return load_le(bytes_.data() + i * stride, d_.w1);
      };
      std::uint64_t lo = 0;
      std::uint64_t hi = n_;
      while (lo < hi) {
        std::uint64_t mid = (lo + hi) / 2;
        if (first_at(mid) < key) {
          lo = mid + 1;
        } else {
          hi = mid;
        }
      }
      if (lo == n_ || first_at(lo) != key) return std::nullopt;
      std::uint64_t end = lo;
      std::uint64_t top = n_;
      while (end < top) {
        std::uint64_t mid = (end + top) / 2;
        if (first_at(mid) <= key) {
          end = mid + 1;
        } else {
          top = mid;
        }
      }
      return RowRange{lo, end};
    }
    case LayoutKind::kColumn: {
      std::uint64_t lo = 0;
      std::uint64_t hi = runs_;
      while (lo < hi) {
        std::uint64_t mid = (lo + hi) / 2;
        if (run_value(mid) < key) {
          lo = mid + 1;
        } else {
          hi = mid;
        }
      }
      if (lo == runs_ || run_value(lo) != key) return std::nullopt;
      return RowRange{lo == 0 ? 0 : run_end(lo - 1), run_end(lo)};
    }
    case LayoutKind::kCluster: {
      const std::uint8_t* p = bytes_.data();
      std::uint64_t base = 0;
      for (std::uint64_t g = 0; g < runs_; ++g) {
        TermId v = load_le(p, d_.w1);
        std::uint64_t count = load_le(p + d_.w1, d_.w3);
        if (v == key) return RowRange{base, base + count};
        if (v > key) break;
        base += count;
        p += d_.w1 + d_.w3 + count * d_.w2;
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

EncodedTable::Cursor EncodedTable::cursor(std::uint64_t begin,
                                          std::uint64_t end) const {
  Cursor c;
  c.t_ = this;
  c.end_ = std::min(end, n_);
  c.pos_ = std::min(begin, c.end_);
  if (c.pos_ == c.end_) return c;
  switch (d_.kind) {
    case LayoutKind::kRow:
      c.ptr_ = bytes_.data() + c.pos_ * (d_.w1 + d_.w2);
      break;
    case LayoutKind::kColumn:
      c.run_ = run_for_row(c.pos_);
      c.run_value_ = run_value(c.run_);
      c.run_end_ = run_end(c.run_);
      c.ptr_ = second_ + c.pos_ * d_.w2;
      break;
    case LayoutKind::kCluster: {
      const std::uint8_t* p = bytes_.data();
      std::uint64_t base = 0;
      for (;;) {
        std::uint64_t count = load_le(p + d_.w1, d_.w3);
        if (c.pos_ < base + count) {
          c.run_value_ = load_le(p, d_.w1);
          c.run_end_ = base + count;
          c.ptr_ = p + d_.w1 + d_.w3 + (c.pos_ - base) * d_.w2;
          break;
        }
        base += count;
        p += d_.w1 + d_.w3 + count * d_.w2;
      }
      break;
    }
  }
  return c;
}

bool EncodedTable::Cursor::next(Row& out) {
  if (pos_ >= end_) return false;
  const LayoutDescriptor& d = t_->d_;
  switch (d.kind) {
    case LayoutKind::kRow:
      out.first = load_le(ptr_, d.w1);
      out.second = load_le(ptr_ + d.w1, d.w2);
      ptr_ += d.w1 + d.w2;
      break;
    case LayoutKind::kColumn:
      if (pos_ == run_end_) {
        ++run_;
        run_value_ = t_->run_value(run_);
        run_end_ = t_->run_end(run_);
      }
      out.first = run_value_;
      out.second = load_le(ptr_, d.w2);
      ptr_ += d.w2;
      break;
    case LayoutKind::kCluster:
      if (pos_ == run_end_) {
        // ptr_ now sits on the next group header.
        run_value_ = load_le(ptr_, d.w1);
        run_end_ += load_le(ptr_ + d.w1, d.w3);
        ptr_ += d.w1 + d.w3;
      }
      out.first = run_value_;
      out.second = load_le(ptr_, d.w2);
      ptr_ += d.w2;
      break;
  }
  ++pos_;
  return true;
}

std::vector<Row> decode_scan(Bytes bytes, const LayoutDescriptor& d,
                             std::uint64_t n) {
  EncodedTable t(bytes, d, n);
  std::vector<Row> rows;
  rows.reserve(n);
  auto c = t.cursor();
  Row r;
  while (c.next(r)) rows.push_back(r);
  return rows;
}

std::optional<RowRange> search_first(Bytes bytes, const LayoutDescriptor& d,
                                     std::uint64_t n, TermId key) {
  return EncodedTable(bytes, d, n).search_first(key);
}

}  // namespace kgs
