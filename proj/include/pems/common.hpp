#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <vector>

namespace pems {

// Error taxonomy. The CLI maps each class onto a distinct exit code.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Missing files, unreadable input, malformed cells.
struct io_error : error {
  using error::error;
};

// Invalid parameters or option combinations.
struct config_error : error {
  using error::error;
};

// Zero variance, singular fits and other numerically degenerate inputs.
struct numeric_error : error {
  using error::error;
};

enum class Variable : std::uint8_t { AT, AP, AH, AFDP, TIT, TAT, TEP, TEY, CDP, NOX, CO };

inline constexpr std::array<Variable, 11> kAllVariables = {
    Variable::AT,  Variable::AP,  Variable::AH,  Variable::AFDP, Variable::TIT, Variable::TAT,
    Variable::TEP, Variable::TEY, Variable::CDP, Variable::NOX,  Variable::CO};

// Canonical predictor order used throughout the toolkit.
inline constexpr std::array<Variable, 9> kPredictors = {
    Variable::AT,  Variable::AP,  Variable::AH,  Variable::AFDP, Variable::TIT,
    Variable::TAT, Variable::TEP, Variable::TEY, Variable::CDP};

inline constexpr std::array<Variable, 3> kWeatherPredictors = {Variable::AT, Variable::AP,
                                                               Variable::AH};

inline constexpr std::array<Variable, 6> kProcessPredictors = {
    Variable::AFDP, Variable::TIT, Variable::TAT, Variable::TEP, Variable::TEY, Variable::CDP};

inline constexpr std::string_view name_of(Variable v) {
  switch (v) {
    case Variable::AT: return "AT";
    case Variable::AP: return "AP";
    case Variable::AH: return "AH";
    case Variable::AFDP: return "AFDP";
    case Variable::TIT: return "TIT";
    case Variable::TAT: return "TAT";
    case Variable::TEP: return "TEP";
    case Variable::TEY: return "TEY";
    case Variable::CDP: return "CDP";
    case Variable::NOX: return "NOX";
    case Variable::CO: return "CO";
  }
  return "?";
}

inline bool is_weather(Variable v) {
  return std::find(kWeatherPredictors.begin(), kWeatherPredictors.end(), v) !=
         kWeatherPredictors.end();
}

inline std::string to_upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Accepts canonical names and the source-data spellings (GTEP, TET), case-insensitive.
inline std::optional<Variable> parse_variable(std::string_view name) {
  const std::string n = to_upper(trim(name));
  if (n == "TET") return Variable::TAT;
  if (n == "GTEP") return Variable::TEP;
  for (auto v : kAllVariables) {
    if (n == name_of(v)) return v;
  }
  return std::nullopt;
}

inline Variable require_variable(std::string_view name) {
  if (auto v = parse_variable(name)) return *v;
  throw config_error("unknown variable '" + std::string(name) + "'");
}

inline std::vector<std::string> names_of(const std::vector<Variable>& vars) {
  std::vector<std::string> out;
  out.reserve(vars.size());
  for (auto v : vars) out.emplace_back(name_of(v));
  return out;
}

// Shortest decimal text that parses back to the same double.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "NaN";
  if (std::isinf(x)) return x > 0 ? "Inf" : "-Inf";
  if (x == 0.0) return "0";
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

inline std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

// Runs fn(i) for i in [0, n) over a fixed set of worker threads. Each index is
// visited exactly once, so callers writing to slot i get scheduling-independent
// results.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace pems
