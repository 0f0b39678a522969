#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "loadveil/trace.hpp"

namespace loadveil {

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) {
      cell.pop_back();
    }
    std::size_t b = 0;
    while (b < cell.size() && cell[b] == ' ') ++b;
    cells.push_back(cell.substr(b));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline bool is_time_column(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return name == "time" || name == "timestamp" || name == "t";
}

// Shortest-ish decimal form that round-trips a double.
inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace detail

// Reads one PowerTrace per named appliance column. The first row is a header
// of appliance names; a leading time/timestamp column, if any, is ignored and
// rows are aligned by index. `schema` selects the columns to extract; leave
// it empty to take every non-time column.
inline std::map<std::string, PowerTrace> load_traces_csv(
    const std::string& path, const std::vector<std::string>& schema = {}) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open trace file: " + path);
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("trace file is empty: " + path);
  }
  const auto header = detail::split_csv_line(line);
  if (header.empty()) {
    throw std::runtime_error("trace file has an empty header: " + path);
  }

  std::vector<std::size_t> columns;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& name = header[c];
    if (schema.empty()) {
      if (detail::is_time_column(name)) continue;
      columns.push_back(c);
      names.push_back(name);
    } else if (std::find(schema.begin(), schema.end(), name) != schema.end()) {
      columns.push_back(c);
      names.push_back(name);
    }
  }
  if (!schema.empty() && columns.size() != schema.size()) {
    throw std::runtime_error("trace file " + path +
                             " is missing requested appliance columns");
  }
  if (columns.empty()) {
    throw std::runtime_error("trace file has no appliance columns: " + path);
  }

  std::map<std::string, PowerTrace> out;
  for (const auto& n : names) {
    if (out.count(n)) {
      throw std::runtime_error("duplicate appliance column '" + n + "' in " + path);
    }
    out[n] = PowerTrace{};
  }

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error(path + ": row " + std::to_string(row) +
                               " has " + std::to_string(cells.size()) +
                               " cells, header has " +
                               std::to_string(header.size()));
    }
    for (std::size_t k = 0; k < columns.size(); ++k) {
      const std::string& cell = cells[columns[k]];
      double value = 0.0;
      const auto res =
          std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
        throw std::runtime_error(path + ": row " + std::to_string(row) +
                                 ", column '" + names[k] +
                                 "': not a number: '" + cell + "'");
      }
      if (value < 0.0) {
        throw std::runtime_error(path + ": row " + std::to_string(row) +
                                 ", column '" + names[k] +
                                 "': negative power " + cell);
      }
      out[names[k]].samples.push_back(value);
    }
  }
  if (out.begin()->second.samples.empty()) {
    throw std::runtime_error("trace file has no data rows: " + path);
  }
  return out;
}

// Column-wise CSV writer used for emitted traces; values round-trip exactly.
inline void write_series_csv(const std::string& path,
                             const std::vector<std::string>& names,
                             const std::vector<const std::vector<double>*>& cols) {
  std::ofstream outf(path);
  if (!outf) {
    throw std::runtime_error("cannot write trace file: " + path);
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    outf << (i ? "," : "") << names[i];
  }
  outf << "\n";
  const std::size_t n = cols.empty() ? 0 : cols.front()->size();
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      outf << (c ? "," : "") << detail::format_full((*cols[c])[t]);
    }
    outf << "\n";
  }
  if (!outf) {
    throw std::runtime_error("short write on trace file: " + path);
  }
}

}  // namespace loadveil
