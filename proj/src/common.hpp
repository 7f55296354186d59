#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>

namespace kgs {

/// Numeric identifier of a label. Only the low 40 bits are ever used.
using TermId = std::uint64_t;

inline constexpr TermId kTermIdLimit = TermId{1} << 40;
inline constexpr TermId kMaxTermId = kTermIdLimit - 1;

struct Edge {
  TermId s = 0;
  TermId r = 0;
  TermId d = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

enum class ErrorCode {
  kInvalidArgument,
  kParse,
  kStorage,
  kBusy,
  kNotFound,
  kOutOfRange,
  kInvalidOrdering,
  kIdSpaceExhausted,
  kCorrupt,
  kEmptyTable,
  kValueTooLarge,
  kWidthOverflow,
  kUnsorted,
  kInternal,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void throw_errno(const std::string& what);

// Little-endian fixed-width integers, width in [1, 8] bytes.
inline void store_le(std::uint8_t* out, std::uint64_t v, unsigned width) {
  for (unsigned i = 0; i < width; ++i) {
    out[i] = static_cast<std::uint8_t>(v >> (8 * i));
  }
}

inline std::uint64_t load_le(const std::uint8_t* in, unsigned width) {
  std::uint64_t v = 0;
  for (unsigned i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  }
  return v;
}

// Big-endian, used where byte-wise comparison must follow numeric order.
inline void store_be(std::uint8_t* out, std::uint64_t v, unsigned width) {
  for (unsigned i = 0; i < width; ++i) {
    out[width - 1 - i] = static_cast<std::uint8_t>(v >> (8 * i));
  }
}

inline std::uint64_t load_be(const std::uint8_t* in, unsigned width) {
  std::uint64_t v = 0;
  for (unsigned i = 0; i < width; ++i) {
    v = (v << 8) | in[i];
  }
  return v;
}

}  // namespace kgs
