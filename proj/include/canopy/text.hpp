#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "canopy/error.hpp"

// Small string and CSV helpers shared by the file formats.
namespace canopy::text {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
  s = trim(s);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

/// Shortest representation that parses back to the identical double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

/// Row-oriented CSV table with a header. Fields never contain commas in the
/// formats this project writes, so no quoting is supported.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("csv: missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("csv: cannot open " + path.string());
  CsvTable table;
  std::string line;
  bool first = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    for (auto f : split(line, ',')) fields.emplace_back(trim(f));
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != table.header.size()) {
        throw Error("csv: " + path.string() + " line " + std::to_string(line_no) + " has " +
                    std::to_string(fields.size()) + " fields, expected " +
                    std::to_string(table.header.size()));
      }
      table.rows.push_back(std::move(fields));
    }
  }
  if (first) throw Error("csv: " + path.string() + " is empty");
  return table;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : out_(path), path_(path) {
    if (!out_) throw Error("csv: cannot write " + path.string());
  }

  template <class Range>
  void row(const Range& fields) {
    bool first = true;
    for (const auto& f : fields) {
      if (!first) out_ << ',';
      out_ << f;
      first = false;
    }
    out_ << '\n';
  }

  void row(std::initializer_list<std::string> fields) {
    row(std::vector<std::string>(fields));
  }

  ~CsvWriter() = default;

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

inline double require_double(std::string_view s, std::string_view what) {
  auto v = parse_double(s);
  if (!v) throw Error("expected a number for " + std::string(what) + ", got '" + std::string(s) + "'");
  return *v;
}

inline long long require_int(std::string_view s, std::string_view what) {
  auto v = parse_int(s);
  if (!v) throw Error("expected an integer for " + std::string(what) + ", got '" + std::string(s) + "'");
  return *v;
}

}  // namespace canopy::text
