#pragma once

// Tabular artifacts and their CSV / JSON serialization.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dblms/errors.hpp"

namespace dblms::cli {

inline constexpr const char* kSchemaVersion = "1";

enum class OutputFormat { csv, json };

using Cell = std::variant<double, std::int64_t, std::string>;

/// One output artifact: fixed header, fixed column order.
struct Table {
  std::string name;  ///< file stem
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) {
      throw std::logic_error("row width does not match header of " + name);
    }
    rows.push_back(std::move(row));
  }
};

/// 9 significant digits; nan / inf / -inf spelled out.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string format_cell(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
  if (const auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  return std::get<std::string>(c);
}

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    if (i) out += ',';
    out += t.columns[i];
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_cell(row[i]);
    }
    out += '\n';
  }
  return out;
}

inline nlohmann::ordered_json cell_json(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) {
    if (!std::isfinite(*d)) return nullptr;
    // Round through the CSV text so both formats carry the same digits.
    return std::strtod(format_number(*d).c_str(), nullptr);
  }
  if (const auto* i = std::get_if<std::int64_t>(&c)) return *i;
  return std::get<std::string>(c);
}

inline std::string to_json(const Table& t) {
  nlohmann::ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["artifact"] = t.name;
  j["columns"] = t.columns;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    auto r = nlohmann::ordered_json::array();
    for (const auto& c : row) r.push_back(cell_json(c));
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

/// Writes <dir>/<name>.csv or .json and returns the path.
inline std::filesystem::path write_table(const Table& t,
                                         const std::filesystem::path& dir,
                                         OutputFormat format) {
  std::filesystem::create_directories(dir);
  const auto path =
      dir / (t.name + (format == OutputFormat::csv ? ".csv" : ".json"));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << (format == OutputFormat::csv ? to_csv(t) : to_json(t));
  if (!out) throw std::runtime_error("write failed for " + path.string());
  return path;
}

}  // namespace dblms::cli
