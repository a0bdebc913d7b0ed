#pragma once

// Row tables written as CSV or as a JSON array of row objects.

#include <cstdio>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "crm/error.hpp"

namespace crm::cli {

using Cell = std::variant<long long, double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw FormatError("table: row width does not match header");
    rows.push_back(std::move(row));
  }
};

enum class Format { Csv, Json };

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string cell_text(const Cell& c) {
  if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
  if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
  return std::get<std::string>(c);
}

inline void write_csv(std::ostream& out, const Table& t) {
  for (std::size_t k = 0; k < t.columns.size(); ++k) out << (k ? "," : "") << t.columns[k];
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << cell_text(row[k]);
    out << '\n';
  }
}

inline void write_json(std::ostream& out, const Table& t) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < row.size(); ++k) {
      std::visit([&](const auto& v) { obj[t.columns[k]] = v; }, row[k]);
    }
    arr.push_back(std::move(obj));
  }
  out << arr.dump(1) << '\n';
}

inline void write_table(std::ostream& out, const Table& t, Format f) {
  if (f == Format::Json) {
    write_json(out, t);
  } else {
    write_csv(out, t);
  }
}

}  // namespace crm::cli
