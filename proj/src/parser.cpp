#include "parser.hpp"

#include <zlib.h>

namespace kgs {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

[[noreturn]] void parse_error(std::uint64_t line_no, const std::string& what) {
  throw Error(ErrorCode::kParse,
              "line " + std::to_string(line_no) + ": " + what);
}

// Reads one term starting at line[i]; advances i past it.
std::string read_term(std::string_view line, std::size_t& i,
                      std::uint64_t line_no) {
  const std::size_t start = i;
  const char c = line[i];
  if (c == '<') {
    const std::size_t end = line.find('>', i + 1);
    if (end == std::string_view::npos) parse_error(line_no, "unterminated IRI");
    i = end + 1;
    return std::string(line.substr(start + 1, end - start - 1));
  }
  if (c == '"') {
    std::size_t j = i + 1;
    while (j < line.size() && line[j] != '"') {
      if (line[j] == '\\') ++j;
      ++j;
    }
    if (j >= line.size()) parse_error(line_no, "unterminated literal");
    ++j;
    if (j < line.size() && line[j] == '@') {
      while (j < line.size() && !is_space(line[j])) ++j;
    } else if (j + 1 < line.size() && line[j] == '^' && line[j + 1] == '^') {
      j += 2;
      if (j < line.size() && line[j] == '<') {
        const std::size_t end = line.find('>', j);
        if (end == std::string_view::npos) {
          parse_error(line_no, "unterminated datatype IRI");
        }
        j = end + 1;
      } else {
        while (j < line.size() && !is_space(line[j])) ++j;
      }
    }
    i = j;
    return std::string(line.substr(start, j - start));
  }
  while (i < line.size() && !is_space(line[i])) ++i;
  std::string_view tok = line.substr(start, i - start);
  // A bare token glued to the final dot.
  if (tok.size() > 1 && tok.back() == '.' && i == line.size()) {
    tok.remove_suffix(1);
    i -= 1;
  }
  return std::string(tok);
}

void skip_space(std::string_view line, std::size_t& i) {
  while (i < line.size() && is_space(line[i])) ++i;
}

}  // namespace

const char* input_format_name(InputFormat f) {
  return f == InputFormat::kNTriples ? "ntriples" : "snap";
}

InputFormat parse_input_format(std::string_view s) {
  if (s == "ntriples" || s == "nt") return InputFormat::kNTriples;
  if (s == "snap") return InputFormat::kSnap;
  throw Error(ErrorCode::kInvalidArgument, "unknown input format: " + std::string(s));
}

bool parse_ntriples_line(std::string_view line, std::uint64_t line_no,
                         LabelTriple& out) {
  std::size_t i = 0;
  skip_space(line, i);
  if (i == line.size() || line[i] == '#') return false;
  for (int k = 0; k < 3; ++k) {
    skip_space(line, i);
    if (i == line.size() || (k > 0 && line[i] == '.' && i + 1 == line.size())) {
      parse_error(line_no, "expected three terms");
    }
    out[k] = read_term(line, i, line_no);
    if (out[k].empty()) parse_error(line_no, "empty term");
  }
  skip_space(line, i);
  if (i < line.size() && line[i] == '.') {
    ++i;
    skip_space(line, i);
  }
  if (i < line.size() && line[i] != '#') {
    parse_error(line_no, "trailing content after triple");
  }
  return true;
}

bool parse_snap_line(std::string_view line, std::uint64_t line_no,
                     LabelTriple& out) {
  std::size_t i = 0;
  skip_space(line, i);
  if (i == line.size() || line[i] == '#' || line[i] == '%') return false;
  std::string_view toks[2];
  for (auto& t : toks) {
    skip_space(line, i);
    const std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (start == i) parse_error(line_no, "expected \"src dst\"");
    t = line.substr(start, i - start);
  }
  skip_space(line, i);
  if (i != line.size()) parse_error(line_no, "expected two columns");
  out[0] = std::string(toks[0]);
  out[1] = std::string(kSnapRelation);
  out[2] = std::string(toks[1]);
  return true;
}

LineReader::LineReader(const fs::path& path) : path_(path), buf_(1 << 20) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw Error(ErrorCode::kStorage, "cannot open " + path.string());
  gzbuffer(f, 1 << 18);
  gz_ = f;
}

LineReader::~LineReader() {
  if (gz_) gzclose(static_cast<gzFile>(gz_));
}

std::size_t LineReader::read_lines(std::vector<std::string>& out,
                                   std::size_t max_lines) {
  std::size_t got = 0;
  auto emit = [&](std::string&& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    out.push_back(std::move(s));
    ++got;
  };
  // Complete lines already buffered in carry_.
  std::size_t pos = 0;
  for (;;) {
    while (got < max_lines) {
      const std::size_t nl = carry_.find('\n', pos);
      if (nl == std::string::npos) break;
      emit(carry_.substr(pos, nl - pos));
      pos = nl + 1;
    }
    carry_.erase(0, pos);
    pos = 0;
    if (got == max_lines) return got;
    if (eof_) {
      if (!carry_.empty()) {
        emit(std::move(carry_));
        carry_.clear();
      }
      return got;
    }
    const int n = gzread(static_cast<gzFile>(gz_), buf_.data(),
                         static_cast<unsigned>(buf_.size()));
    if (n < 0) {
      int err = 0;
      const char* msg = gzerror(static_cast<gzFile>(gz_), &err);
      throw Error(ErrorCode::kStorage,
                  "read " + path_.string() + ": " + (msg ? msg : "error"));
    }
    if (n == 0) {
      eof_ = true;
    } else {
      carry_.append(buf_.data(), static_cast<std::size_t>(n));
    }
  }
}

std::vector<LabelTriple> parse_file(const fs::path& path, InputFormat format) {
  LineReader in(path);
  std::vector<LabelTriple> out;
  std::vector<std::string> lines;
  std::uint64_t line_no = 0;
  LabelTriple t;
  while (in.read_lines(lines, 1 << 14) > 0) {
    for (const std::string& l : lines) {
      ++line_no;
      const bool ok = format == InputFormat::kNTriples
                          ? parse_ntriples_line(l, line_no, t)
                          : parse_snap_line(l, line_no, t);
      if (ok) out.push_back(t);
    }
    lines.clear();
  }
  return out;
}

}  // namespace kgs
