#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "tmprompt/error.hpp"

// Helpers shared by the line-oriented, tab-separated, versioned file
// formats (store, index, Model 1 table, toy model, retrieval cache).
namespace tmprompt::io {

inline void write_header(std::ostream& out, std::string_view magic,
                         int version) {
  out << magic << '\t' << version << '\n';
}

inline void check_field(std::string_view field) {
  if (field.find_first_of("\t\n\r") != std::string_view::npos) {
    throw InvalidArgument("field contains tab or newline: '" +
                          std::string(field) + "'");
  }
}

inline std::string join_checked(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (t.empty() || t.find_first_of(" \t\n\r") != std::string::npos) {
      throw InvalidArgument("token is empty or contains whitespace: '" + t +
                            "'");
    }
    if (i) out.push_back(' ');
    out += t;
  }
  return out;
}

inline std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.emplace_back(line.substr(start, tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view text, std::string_view what) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw FormatError("bad " + std::string(what) + ": '" + std::string(text) +
                      "'");
  }
  return value;
}

// Reads a versioned record file line by line, turning every structural
// problem into a FormatError that names the file kind and line number.
class LineReader {
 public:
  LineReader(std::istream& in, std::string kind)
      : in_(in), kind_(std::move(kind)) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(kind_ + " file, line " + std::to_string(line_no_) +
                      ": " + what);
  }

  std::string next() {
    std::string line;
    if (!std::getline(in_, line)) {
      ++line_no_;
      fail("unexpected end of file (truncated?)");
    }
    ++line_no_;
    return line;
  }

  void expect_header(std::string_view magic, int version) {
    auto f = split_tabs(next());
    if (f.size() != 2 || f[0] != magic) {
      fail("not a " + std::string(magic) + " file");
    }
    int got = 0;
    try {
      got = parse_number<int>(f[1], "version");
    } catch (const FormatError&) {
      fail("bad version field");
    }
    if (got != version) {
      fail("unsupported format version " + std::to_string(got) +
           " (expected " + std::to_string(version) + ")");
    }
  }

  std::vector<std::string> split_next(std::size_t n) {
    auto f = split_tabs(next());
    if (f.size() != n) {
      fail("expected " + std::to_string(n) + " fields, got " +
           std::to_string(f.size()));
    }
    return f;
  }

  std::vector<std::string> fields(std::string_view tag, std::size_t n) {
    auto f = split_next(n);
    if (f[0] != tag) fail("expected '" + std::string(tag) + "' record");
    return f;
  }

  std::size_t count_line(std::string_view tag) {
    auto f = fields(tag, 2);
    return number<std::size_t>(f[1], tag);
  }

  template <class T>
  T number(std::string_view text, std::string_view what) const {
    try {
      return parse_number<T>(text, what);
    } catch (const FormatError& e) {
      fail(e.what());
    }
  }

  void expect_end() {
    if (next() != "end") fail("missing end marker");
  }

 private:
  std::istream& in_;
  std::string kind_;
  std::size_t line_no_ = 0;
};

template <class Writer>
void save_file(const std::string& path, Writer&& write) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write(out);
  out.flush();
  if (!out) throw IoError("error while writing '" + path + "'");
}

template <class Reader>
auto load_file(const std::string& path, Reader&& read) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return read(in);
}

// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace tmprompt::io
