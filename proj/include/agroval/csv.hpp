/*
 * Copyright 2026 the agroval authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "agroval/errors.hpp"

namespace agroval {

/// Strict comma-separated reader for the artifact's wire formats: UTF-8,
/// '.' decimal separator, no quoting (no field ever contains a comma).
/// Rows are reported with 1-based line numbers for error messages.
class CsvReader {
 public:
  explicit CsvReader(const std::string& path) : path_(path), in_(path) {
    if (!in_)
      throw Error::data("FileNotFound", "cannot open '" + path + "'");
  }

  const std::string& path() const { return path_; }
  std::size_t line_number() const { return line_number_; }

  /// Reads the next row; returns false at end of file. Trailing '\r' from
  /// CRLF files is stripped. Empty lines are skipped.
  bool next_row(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_number_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      fields.clear();
      std::size_t start = 0;
      for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
          fields.push_back(line.substr(start));
          break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
      }
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error::data("MalformedRow", path_ + ":" +
                                          std::to_string(line_number_) + ": " +
                                          what);
  }

  double parse_double(const std::string& field, const char* column) const {
    double v = 0.0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last)
      fail(std::string("bad numeric value '") + field + "' in column " +
           column);
    return v;
  }

  int parse_int(const std::string& field, const char* column) const {
    int v = 0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last)
      fail(std::string("bad integer value '") + field + "' in column " +
           column);
    return v;
  }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t line_number_ = 0;
};

/// Shortest representation that round-trips the exact double. This is what
/// makes write(load(f)) byte-identical for canonical files.
inline std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    if (!out_)
      throw Error::run("FileWriteFailed", "cannot open '" + path +
                                              "' for writing");
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
  }

  std::ofstream& stream() { return out_; }

 private:
  std::ofstream out_;
};

}  // namespace agroval
