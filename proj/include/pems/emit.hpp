#pragma once

// Tabular output. Every report table is built once as a Table and written as
// either CSV or JSON, so both formats carry the same numbers by construction.
// Non-finite values become empty CSV cells and JSON nulls.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "pems/common.hpp"

namespace pems {

using Cell = std::variant<std::monostate, std::string, double, std::int64_t>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw config_error("table " + name + ": row width mismatch");
    rows.push_back(std::move(row));
  }
};

inline Cell cell(double v) { return std::isfinite(v) ? Cell(v) : Cell(std::monostate{}); }
inline Cell cell(std::optional<double> v) { return v ? cell(*v) : Cell(std::monostate{}); }
inline Cell cell(std::size_t v) { return Cell(static_cast<std::int64_t>(v)); }
inline Cell cell(int v) { return Cell(static_cast<std::int64_t>(v)); }
inline Cell cell(std::string_view v) { return Cell(std::string(v)); }
inline Cell cell(const char* v) { return Cell(std::string(v)); }

enum class OutputFormat { Csv, Json };

inline std::string_view extension(OutputFormat f) { return f == OutputFormat::Csv ? ".csv" : ".json"; }

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_csv(const Table& t, std::ostream& out) {
  for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << csv_escape(t.columns[c]);
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::string>) out << csv_escape(v);
            else if constexpr (std::is_same_v<T, double>) out << format_number(v);
            else if constexpr (std::is_same_v<T, std::int64_t>) out << v;
          },
          row[c]);
    }
    out << '\n';
  }
}

inline nlohmann::ordered_json to_json(const Table& t) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::monostate>) obj[t.columns[c]] = nullptr;
            else obj[t.columns[c]] = v;
          },
          row[c]);
    }
    arr.push_back(std::move(obj));
  }
  return arr;
}

inline void write_table(const Table& t, const std::filesystem::path& dir, OutputFormat fmt) {
  const auto path = dir / (t.name + std::string(extension(fmt)));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path.string());
  if (fmt == OutputFormat::Csv) {
    write_csv(t, out);
  } else {
    out << to_json(t).dump(2) << '\n';
  }
  if (!out) throw io_error("failed writing " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path.string());
  out << text;
  if (!out) throw io_error("failed writing " + path.string());
}

}  // namespace pems
