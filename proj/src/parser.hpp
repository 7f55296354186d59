#pragma once

#include <array>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "io.hpp"

namespace kgs {

enum class InputFormat { kNTriples, kSnap };

const char* input_format_name(InputFormat f);
InputFormat parse_input_format(std::string_view s);

// Relation label given to every edge of a SNAP edge list.
inline constexpr std::string_view kSnapRelation = "snap:edge";

using LabelTriple = std::array<std::string, 3>;

// Splits one N-Triples line into subject, predicate and object labels.
// IRIs lose their angle brackets, literals are kept verbatim (quotes, escapes,
// language tag or datatype included), blank nodes keep their "_:" prefix and
// bare tokens are taken as they are. Returns false for blank and comment
// lines. Throws kParse with `line_no` in the message on malformed input.
bool parse_ntriples_line(std::string_view line, std::uint64_t line_no,
                         LabelTriple& out);

// "src dst" per line, whitespace separated; '#' starts a comment line.
bool parse_snap_line(std::string_view line, std::uint64_t line_no,
                     LabelTriple& out);

// Line reader over plain or gzip-compressed files.
class LineReader {
 public:
  explicit LineReader(const fs::path& path);
  ~LineReader();
  LineReader(const LineReader&) = delete;
  LineReader& operator=(const LineReader&) = delete;

  // Appends up to max_lines lines to out (without newline); returns the
  // number appended, 0 at end of input.
  std::size_t read_lines(std::vector<std::string>& out, std::size_t max_lines);

 private:
  void* gz_ = nullptr;
  fs::path path_;
  std::string carry_;
  std::vector<char> buf_;
  bool eof_ = false;
};

// Parses a whole file; for updates and tests.
std::vector<LabelTriple> parse_file(const fs::path& path, InputFormat format);

}  // namespace kgs
