#pragma once

// Synthetic turbine telemetry for tests. A latent load drives the process
// variables, weather drives AT/AH/AP, and NOx depends on both. Year index
// shifts the CDP~TEP relation so drift is visible. Normal draws use a
// hand-rolled Box-Muller on pems::Rng so fixtures are identical everywhere.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "pems/ingest.hpp"
#include "pems/random.hpp"

namespace fixture {

class Normal {
 public:
  explicit Normal(std::uint64_t seed) : rng_(seed) {}

  double uniform() {
    // 53 random bits in (0, 1).
    return (static_cast<double>(rng_.next() >> 11) + 0.5) * 0x1.0p-53;
  }

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  pems::Rng rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline pems::ObservationRecord make_record(Normal& g, int year, int year_index) {
  pems::ObservationRecord r;
  const double load = g.uniform();
  const double t = static_cast<double>(year_index);
  r.year = year;
  r.at = 17.0 + 7.5 * g();
  r.ah = std::clamp(78.0 - 1.1 * (r.at - 17.0) + 9.0 * g(), 25.0, 100.0);
  r.ap = 1013.0 - 0.3 * (r.at - 17.0) + 5.0 * g();
  r.tit = 1060.0 + 40.0 * load + 0.15 * (r.at - 17.0) + 3.0 * g();
  r.tey = 110.0 + 40.0 * load - 0.3 * (r.at - 17.0) + 1.5 * g();
  r.cdp = 11.0 + 3.5 * load + 0.12 * g();
  const double slope = 0.2636 - 0.006 * t;
  r.tep = (r.cdp - 5.44 - 0.02 * t) / slope + (0.3 + 0.4 * t) * g();
  r.afdp = 3.5 + 1.5 * load + 0.35 * g();
  r.tat = 548.0 - 12.0 * load + 0.2 * (r.at - 17.0) + 2.5 * g();
  r.nox = std::max(20.0, 66.0 - 0.9 * (r.at - 17.0) - 0.12 * (r.tit - 1080.0) + 0.02 * (r.ah - 78.0) +
                             1.5 * t + 2.0 * g());
  r.co = std::abs(2.0 + 1.2 * g());
  return r;
}

// `rows_per_year` rows for each year, in year order.
inline pems::Dataset make_dataset(const std::vector<int>& years, std::size_t rows_per_year,
                                  std::uint64_t seed = 7) {
  Normal g(seed);
  std::vector<pems::ObservationRecord> records;
  for (std::size_t y = 0; y < years.size(); ++y) {
    for (std::size_t i = 0; i < rows_per_year; ++i) {
      records.push_back(make_record(g, years[y], static_cast<int>(y)));
    }
  }
  return pems::Dataset(std::move(records), years);
}

// Writes one file per year in the layout of the public dataset
// (AT,AP,AH,AFDP,GTEP,TIT,TAT,TEY,CDP,CO,NOX; no YEAR column).
inline void write_year_files(const pems::Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (int year : ds.years()) {
    std::ofstream out(dir / ("gt_" + std::to_string(year) + ".csv"));
    out << "AT,AP,AH,AFDP,GTEP,TIT,TAT,TEY,CDP,CO,NOX\n";
    for (auto i : ds.rows_of_year(year)) {
      const auto& r = ds[i];
      out << pems::format_number(r.at) << ',' << pems::format_number(r.ap) << ','
          << pems::format_number(r.ah) << ',' << pems::format_number(r.afdp) << ','
          << pems::format_number(r.tep) << ',' << pems::format_number(r.tit) << ','
          << pems::format_number(r.tat) << ',' << pems::format_number(r.tey) << ','
          << pems::format_number(r.cdp) << ',' << pems::format_number(r.co.value_or(0.0)) << ','
          << pems::format_number(r.nox) << '\n';
    }
  }
}

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("pems_" + tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace fixture
