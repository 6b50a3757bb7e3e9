#pragma once

#include <charconv>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "graphbss/errors.hpp"

namespace graphbss {

/**
 * RFC 4180 CSV emission: header row first, CRLF line endings, fields quoted
 * only when they contain a comma, quote or line break. Numbers are written in
 * the shortest form that parses back to the same double, so output bytes are
 * a pure function of the values.
 */
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header)
      : out_(&out), width_(header.size()) {
    if (header.empty()) throw ParameterError("CSV header must name at least one column");
    write_row(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != width_)
      throw ParameterError("CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                           std::to_string(width_));
    write_row(cells);
  }

  static std::string format(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  }

  static std::string format(long v) { return std::to_string(v); }
  static std::string format(int v) { return std::to_string(v); }
  static std::string format(std::uint64_t v) { return std::to_string(v); }

 private:
  static std::string escape(const std::string& cell) {
    const bool needs_quotes = cell.find_first_of(",\"\r\n") != std::string::npos;
    if (!needs_quotes) return cell;
    std::string out = "\"";
    for (char c : cell) {
      if (c == '"') out += '"';
      out += c;
    }
    out += '"';
    return out;
  }

  void write_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) *out_ << ',';
      *out_ << escape(cells[i]);
    }
    *out_ << "\r\n";
  }

  std::ostream* out_;
  std::size_t width_;
};

}  // namespace graphbss
