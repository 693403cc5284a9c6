#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pems/common.hpp"

namespace pems {

// One hourly turbine reading.
struct ObservationRecord {
  double at = 0.0;    // ambient temperature, C
  double ap = 0.0;    // ambient pressure, mbar
  double ah = 0.0;    // ambient humidity, %
  double afdp = 0.0;  // air filter difference pressure, mbar
  double tit = 0.0;   // turbine inlet temperature, C
  double tat = 0.0;   // turbine after (exhaust) temperature, C
  double tep = 0.0;   // turbine exhaust pressure, mbar
  double tey = 0.0;   // turbine energy yield, MWh
  double cdp = 0.0;   // compressor discharge pressure, bar
  double nox = 0.0;   // mg/m3
  std::optional<double> co;
  int year = 0;

  bool operator==(const ObservationRecord&) const = default;
};

inline double value_of(const ObservationRecord& r, Variable v) {
  switch (v) {
    case Variable::AT: return r.at;
    case Variable::AP: return r.ap;
    case Variable::AH: return r.ah;
    case Variable::AFDP: return r.afdp;
    case Variable::TIT: return r.tit;
    case Variable::TAT: return r.tat;
    case Variable::TEP: return r.tep;
    case Variable::TEY: return r.tey;
    case Variable::CDP: return r.cdp;
    case Variable::NOX: return r.nox;
    case Variable::CO: return r.co.value_or(std::numeric_limits<double>::quiet_NaN());
  }
  return std::numeric_limits<double>::quiet_NaN();
}

inline double& slot_of(ObservationRecord& r, Variable v) {
  switch (v) {
    case Variable::AT: return r.at;
    case Variable::AP: return r.ap;
    case Variable::AH: return r.ah;
    case Variable::AFDP: return r.afdp;
    case Variable::TIT: return r.tit;
    case Variable::TAT: return r.tat;
    case Variable::TEP: return r.tep;
    case Variable::TEY: return r.tey;
    case Variable::CDP: return r.cdp;
    case Variable::NOX: return r.nox;
    case Variable::CO:
      if (!r.co) r.co = 0.0;
      return *r.co;
  }
  throw config_error("unknown variable slot");
}

// Immutable, year-tagged collection of readings. Records keep file order within
// each year; years ascend.
class Dataset {
 public:
  Dataset() = default;

  explicit Dataset(std::vector<ObservationRecord> records, std::vector<int> years = {})
      : records_(std::move(records)), years_(std::move(years)) {
    if (years_.empty()) {
      std::set<int> seen;
      for (const auto& r : records_) seen.insert(r.year);
      years_.assign(seen.begin(), seen.end());
    }
    std::sort(years_.begin(), years_.end());
    years_.erase(std::unique(years_.begin(), years_.end()), years_.end());
    for (const auto& r : records_) has_co_ = has_co_ || r.co.has_value();
  }

  const std::vector<ObservationRecord>& records() const { return records_; }
  const std::vector<int>& years() const { return years_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  bool has_co() const { return has_co_; }
  const ObservationRecord& operator[](std::size_t i) const { return records_[i]; }

  static std::vector<std::string> variable_names() {
    std::vector<std::string> out;
    for (auto v : kPredictors) out.emplace_back(name_of(v));
    return out;
  }

  std::vector<double> column(Variable v) const {
    std::vector<double> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(value_of(r, v));
    return out;
  }

  // Indices of the records of one year, in file order.
  std::vector<std::size_t> rows_of_year(int year) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records_.size(); ++i) {
      if (records_[i].year == year) out.push_back(i);
    }
    return out;
  }

  Dataset filter_year(int year) const {
    std::vector<ObservationRecord> out;
    for (const auto& r : records_) {
      if (r.year == year) out.push_back(r);
    }
    return Dataset(std::move(out), {year});
  }

  bool operator==(const Dataset& other) const {
    return records_ == other.records_ && years_ == other.years_;
  }

 private:
  std::vector<ObservationRecord> records_;
  std::vector<int> years_;
  bool has_co_ = false;
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

struct ColumnLayout {
  std::map<Variable, std::size_t> index;
  std::optional<std::size_t> year_column;
};

inline ColumnLayout parse_header(std::string_view header, const std::string& source) {
  if (header.size() >= 3 && header.substr(0, 3) == "\xEF\xBB\xBF") header.remove_prefix(3);
  ColumnLayout layout;
  const auto cells = split_csv_line(header);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto cell = trim(cells[c]);
    if (to_upper(cell) == "YEAR") {
      layout.year_column = c;
      continue;
    }
    if (auto v = parse_variable(cell)) {
      if (layout.index.count(*v)) {
        throw io_error(source + ": duplicate column for " + std::string(name_of(*v)));
      }
      layout.index[*v] = c;
    }
  }
  for (auto v : kPredictors) {
    if (!layout.index.count(v)) {
      throw io_error(source + ": header missing required column " + std::string(name_of(v)));
    }
  }
  if (!layout.index.count(Variable::NOX)) {
    throw io_error(source + ": header missing required column NOX");
  }
  return layout;
}

// Parses data rows; the record year comes from `fixed_year` when given, else
// from the YEAR column.
inline std::vector<ObservationRecord> parse_rows(std::istream& in, const std::string& source,
                                                 std::optional<int> fixed_year) {
  std::string line;
  if (!std::getline(in, line)) throw io_error(source + ": empty file, header row expected");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const ColumnLayout layout = parse_header(line, source);
  if (!fixed_year && !layout.year_column) throw io_error(source + ": header missing YEAR column");

  std::vector<ObservationRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    ObservationRecord rec;
    auto read_cell = [&](std::size_t col, std::string_view label) -> double {
      if (col >= cells.size()) {
        throw io_error(source + ": row " + std::to_string(line_no) + ", column " +
                       std::string(label) + ": missing cell");
      }
      auto v = parse_number(cells[col]);
      if (!v) {
        throw io_error(source + ": row " + std::to_string(line_no) + ", column " +
                       std::string(label) + ": non-numeric value '" + std::string(trim(cells[col])) +
                       "'");
      }
      if (!std::isfinite(*v)) {
        throw io_error(source + ": row " + std::to_string(line_no) + ", column " +
                       std::string(label) + ": non-finite value");
      }
      return *v;
    };
    for (const auto& [var, col] : layout.index) slot_of(rec, var) = read_cell(col, name_of(var));
    if (fixed_year) {
      rec.year = *fixed_year;
    } else {
      const double y = read_cell(*layout.year_column, "YEAR");
      if (y != std::floor(y)) {
        throw io_error(source + ": row " + std::to_string(line_no) + ", column YEAR: not an integer");
      }
      rec.year = static_cast<int>(y);
    }
    out.push_back(rec);
  }
  return out;
}

inline std::optional<int> year_in_filename(const std::string& filename) {
  static const std::regex pattern(R"((^|[^0-9])((19|20)[0-9]{2})([^0-9]|$))");
  std::smatch m;
  if (std::regex_search(filename, m, pattern)) return std::stoi(m[2].str());
  return std::nullopt;
}

inline bool has_csv_extension(const std::filesystem::path& p) {
  return to_upper(p.extension().string()) == ".CSV";
}

}  // namespace detail

// Year labels of every `*YYYY*.csv` file in a directory, ascending.
inline std::vector<int> discover_years(const std::filesystem::path& data_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(data_dir, ec)) {
    throw io_error("data directory not found: " + data_dir.string());
  }
  std::set<int> years;
  for (const auto& entry : fs::directory_iterator(data_dir)) {
    if (!entry.is_regular_file() || !detail::has_csv_extension(entry.path())) continue;
    if (auto y = detail::year_in_filename(entry.path().filename().string())) years.insert(*y);
  }
  return {years.begin(), years.end()};
}

// Loads one CSV per requested year. A year's file is the unique `*.csv` in
// data_dir whose name contains that year as a standalone 4-digit number
// (e.g. gt_2011.csv).
inline Dataset load_dataset(const std::filesystem::path& data_dir, std::vector<int> years) {
  namespace fs = std::filesystem;
  if (years.empty()) throw config_error("no years requested");
  std::sort(years.begin(), years.end());
  years.erase(std::unique(years.begin(), years.end()), years.end());
  std::error_code ec;
  if (!fs::is_directory(data_dir, ec)) {
    throw io_error("data directory not found: " + data_dir.string());
  }

  std::map<int, std::vector<fs::path>> files;
  for (const auto& entry : fs::directory_iterator(data_dir)) {
    if (!entry.is_regular_file() || !detail::has_csv_extension(entry.path())) continue;
    if (auto y = detail::year_in_filename(entry.path().filename().string())) {
      files[*y].push_back(entry.path());
    }
  }

  std::vector<ObservationRecord> records;
  for (int year : years) {
    auto it = files.find(year);
    if (it == files.end()) {
      throw io_error("missing file for year " + std::to_string(year) + " in " + data_dir.string());
    }
    if (it->second.size() > 1) {
      throw io_error("more than one file for year " + std::to_string(year) + " in " +
                     data_dir.string());
    }
    const auto& path = it->second.front();
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    auto rows = detail::parse_rows(in, path.string(), year);
    records.insert(records.end(), rows.begin(), rows.end());
  }
  return Dataset(std::move(records), years);
}

// Canonical export: AT,AP,AH,AFDP,TIT,TAT,TEP,TEY,CDP,NOX[,CO],YEAR.
inline void export_csv(const Dataset& ds, std::ostream& out) {
  for (auto v : kPredictors) out << name_of(v) << ',';
  out << "NOX,";
  if (ds.has_co()) out << "CO,";
  out << "YEAR\n";
  for (const auto& r : ds.records()) {
    for (auto v : kPredictors) out << format_number(value_of(r, v)) << ',';
    out << format_number(r.nox) << ',';
    if (ds.has_co()) out << format_number(r.co.value_or(0.0)) << ',';
    out << r.year << '\n';
  }
}

inline void export_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path.string());
  export_csv(ds, out);
}

// Reads a canonical export back (single file with a YEAR column).
inline Dataset load_canonical_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open " + path.string());
  return Dataset(detail::parse_rows(in, path.string(), std::nullopt));
}

inline Dataset parse_canonical_csv(const std::string& text) {
  std::istringstream in(text);
  return Dataset(detail::parse_rows(in, "<memory>", std::nullopt));
}

struct Violation {
  std::size_t row = 0;
  std::string column;
  std::string rule;
};

struct ValidationReport {
  std::size_t rows_checked = 0;
  std::vector<Violation> violations;

  std::map<std::string, std::size_t> counts_by_rule() const {
    std::map<std::string, std::size_t> out;
    for (const auto& v : violations) ++out[v.rule];
    return out;
  }
};

// Checks every record invariant; never throws and never modifies the dataset.
inline ValidationReport validate(const Dataset& ds) {
  ValidationReport report;
  report.rows_checked = ds.size();
  const auto& years = ds.years();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& r = ds[i];
    auto flag = [&](Variable v, const char* rule) {
      report.violations.push_back({i, std::string(name_of(v)), rule});
    };
    for (auto v : kAllVariables) {
      if (v == Variable::CO && !r.co) continue;
      if (!std::isfinite(value_of(r, v))) {
        flag(v, "non-finite value");
      }
    }
    if (std::isfinite(r.ah) && (r.ah < 0.0 || r.ah > 100.0)) flag(Variable::AH, "humidity out of range");
    if (std::isfinite(r.ap) && r.ap <= 0.0) flag(Variable::AP, "non-positive pressure");
    if (std::isfinite(r.cdp) && r.cdp <= 0.0) flag(Variable::CDP, "non-positive pressure");
    if (std::isfinite(r.tey) && r.tey <= 0.0) flag(Variable::TEY, "non-positive energy yield");
    if (std::isfinite(r.nox) && r.nox < 0.0) flag(Variable::NOX, "negative concentration");
    if (!std::binary_search(years.begin(), years.end(), r.year)) {
      report.violations.push_back({i, "YEAR", "undeclared year"});
    }
  }
  return report;
}

}  // namespace pems
