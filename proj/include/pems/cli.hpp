#pragma once

// Command-line front end: one subcommand per analysis, shared flags, and an
// optional key=value config file that flags override.
//
// Exit codes: 0 success, 2 input/IO error, 3 config error, 4 numeric degeneracy.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pems/drift.hpp"
#include "pems/emit.hpp"
#include "pems/ingest.hpp"
#include "pems/knn.hpp"
#include "pems/model_io.hpp"
#include "pems/screening.hpp"
#include "pems/stats.hpp"
#include "pems/svg.hpp"
#include "pems/varclus.hpp"

namespace pems::cli {

inline constexpr const char* kDataDirEnv = "PEMS_DATA_DIR";

enum ExitCode : int { kOk = 0, kIoError = 2, kConfigError = 3, kNumericError = 4 };

struct RunConfig {
  std::string data_dir;
  std::string years;  // "2011,2012" or "2011-2015"; empty = every year found
  std::string target = "NOX";
  std::string predictors;  // empty = all nine predictors
  bool exclude_weather = false;
  std::string split = "0.7,0.15,0.15";
  std::uint64_t seed = 1;
  std::optional<std::size_t> k;
  std::size_t k_max = 10;
  std::string weighting = "inverse_distance";
  bool no_leave_self_out = false;
  double threshold = 1.0;
  std::size_t trees = 100;
  std::size_t min_leaf = 5;
  std::optional<std::size_t> mtry;
  std::string out = "csv";
  bool plots = false;
  std::string out_dir = "pems_out";
  std::optional<int> reference_year;
  std::string tep_unit = "bar";
  std::size_t bins = 30;
  double high_nox_quantile = 0.8;
};

// Settings resolved from a RunConfig.
struct Resolved {
  std::filesystem::path data_dir;
  std::vector<int> years;
  Variable target = Variable::NOX;
  std::vector<Variable> predictors;
  SplitFractions fractions;
  Weighting weighting = Weighting::InverseDistance;
  OutputFormat format = OutputFormat::Csv;
  std::filesystem::path out_dir;
  double tep_scale = 0.001;
};

inline std::vector<int> parse_years(const std::string& text) {
  std::vector<int> years;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = std::string(trim(item));
    if (t.empty()) continue;
    const auto dash = t.find('-', 1);
    try {
      if (dash != std::string::npos) {
        const int a = std::stoi(t.substr(0, dash));
        const int b = std::stoi(t.substr(dash + 1));
        if (b < a) throw config_error("bad year range '" + t + "'");
        for (int y = a; y <= b; ++y) years.push_back(y);
      } else {
        std::size_t used = 0;
        years.push_back(std::stoi(t, &used));
        if (used != t.size()) throw config_error("bad year '" + t + "'");
      }
    } catch (const std::logic_error&) {
      throw config_error("bad year '" + t + "'");
    }
  }
  if (years.empty()) throw config_error("no years requested");
  return years;
}

inline SplitFractions parse_split(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto v = parse_number(item);
    if (!v) throw config_error("bad split fraction '" + item + "'");
    parts.push_back(*v);
  }
  if (parts.size() != 3) throw config_error("--split needs three fractions a,b,c");
  SplitFractions f{parts[0], parts[1], parts[2]};
  check_fractions(f);
  return f;
}

inline std::vector<Variable> parse_variable_list(const std::string& text) {
  std::vector<Variable> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    const Variable v = require_variable(item);
    if (std::find(out.begin(), out.end(), v) != out.end()) {
      throw config_error("variable listed twice: " + std::string(name_of(v)));
    }
    out.push_back(v);
  }
  if (out.empty()) throw config_error("empty variable list");
  return out;
}

inline Resolved resolve(const RunConfig& cfg) {
  Resolved r;
  std::string dir = cfg.data_dir;
  if (dir.empty()) {
    if (const char* env = std::getenv(kDataDirEnv)) dir = env;
  }
  if (dir.empty()) throw config_error("no data directory: pass --data-dir or set PEMS_DATA_DIR");
  r.data_dir = dir;
  r.years = cfg.years.empty() ? discover_years(r.data_dir) : parse_years(cfg.years);
  if (r.years.empty()) throw io_error("no per-year CSV files found in " + r.data_dir.string());

  r.target = require_variable(cfg.target);
  if (r.target != Variable::NOX && r.target != Variable::CO) {
    throw config_error("target must be NOX or CO");
  }
  r.predictors = cfg.predictors.empty() ? std::vector<Variable>(kPredictors.begin(), kPredictors.end())
                                        : parse_variable_list(cfg.predictors);
  if (cfg.exclude_weather) {
    std::erase_if(r.predictors, [](Variable v) { return is_weather(v); });
    if (r.predictors.empty()) throw config_error("no predictors left after excluding weather");
  }
  for (auto v : r.predictors) {
    if (v == r.target) throw config_error("target cannot also be a predictor");
  }
  r.fractions = parse_split(cfg.split);
  r.weighting = parse_weighting(cfg.weighting);
  const auto fmt = to_upper(cfg.out);
  if (fmt == "CSV") r.format = OutputFormat::Csv;
  else if (fmt == "JSON") r.format = OutputFormat::Json;
  else throw config_error("--out must be csv or json");
  const auto unit = to_upper(cfg.tep_unit);
  if (unit == "BAR") r.tep_scale = 0.001;
  else if (unit == "MBAR") r.tep_scale = 1.0;
  else throw config_error("--tep-unit must be mbar or bar");
  if (cfg.bins == 0) throw config_error("--bins must be at least 1");
  if (!(cfg.high_nox_quantile >= 0.0 && cfg.high_nox_quantile < 1.0)) {
    throw config_error("--high-nox-quantile must lie in [0, 1)");
  }
  if (cfg.k && *cfg.k == 0) throw config_error("--k must be at least 1");
  if (cfg.k_max == 0) throw config_error("--k-max must be at least 1");
  r.out_dir = cfg.out_dir;
  return r;
}

inline Dataset load(const Resolved& r) {
  Dataset ds = load_dataset(r.data_dir, r.years);
  if (ds.empty()) throw io_error("no records loaded from " + r.data_dir.string());
  if (r.target == Variable::CO && !ds.has_co()) throw io_error("dataset has no CO column");
  return ds;
}

// Tables and plots produced by one analysis.
struct Section {
  std::string key;
  std::vector<Table> tables;
  std::map<std::string, std::string> svgs;  // file name -> document
};

// ---------------------------------------------------------------------------

inline Section summary_section(const Dataset& ds, const RunConfig& cfg, const Resolved& r) {
  std::vector<Variable> vars = r.predictors;
  vars.push_back(r.target);
  const auto summaries = summarize(ds, cfg.bins, vars);
  Section s{"summary", {}, {}};
  Table t{"summary", {"variable", "count", "mean", "std", "min", "q1", "median", "q3", "max"}, {}};
  Table h{"histograms", {"variable", "bin", "lower", "upper", "count"}, {}};
  for (const auto& v : summaries) {
    t.add({cell(v.name), cell(v.count), cell(v.mean), cell(v.std), cell(v.min), cell(v.q1), cell(v.median),
           cell(v.q3), cell(v.max)});
    for (std::size_t b = 0; b < v.histogram.size(); ++b) {
      const auto& bin = v.histogram[b];
      h.add({cell(v.name), cell(b + 1), cell(bin.lower), cell(bin.upper), cell(bin.count)});
    }
  }
  Table y{"year_counts", {"year", "rows"}, {}};
  for (int year : ds.years()) y.add({cell(year), cell(ds.rows_of_year(year).size())});
  s.tables = {std::move(t), std::move(h), std::move(y)};
  if (cfg.plots) {
    std::vector<svg::Panel> panels;
    for (const auto& v : summaries) {
      svg::Panel p{v.name, v.name, "count", {}};
      svg::Series bars{"curve", {}, {}, true};
      for (const auto& bin : v.histogram) {
        bars.x.insert(bars.x.end(), {bin.lower, bin.lower, bin.upper, bin.upper});
        bars.y.insert(bars.y.end(), {0.0, static_cast<double>(bin.count), static_cast<double>(bin.count), 0.0});
      }
      p.series.push_back(std::move(bars));
      panels.push_back(std::move(p));
    }
    s.svgs["histograms.svg"] = svg::render(panels, 5);
  }
  return s;
}

inline Section correlation_section(const Dataset& ds, const RunConfig& cfg, const Resolved& r) {
  const auto cm = correlation_matrix(ds, r.predictors);
  Section s{"correlation", {}, {}};
  Table t{"correlation", {"variable"}, {}};
  for (const auto& n : cm.names) t.columns.push_back(n);
  for (std::size_t i = 0; i < cm.names.size(); ++i) {
    std::vector<Cell> row{cell(cm.names[i])};
    for (std::size_t j = 0; j < cm.names.size(); ++j) row.push_back(cell(cm.values(i, j)));
    t.add(std::move(row));
  }
  const auto mask = flag_high_nox(ds, cfg.high_nox_quantile);
  Table f{"high_nox", {"quantile", "threshold", "flagged", "total"}, {}};
  f.add({cell(cfg.high_nox_quantile), cell(high_nox_threshold(ds, cfg.high_nox_quantile)),
         cell(static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true))), cell(ds.size())});
  s.tables = {std::move(t), std::move(f)};
  if (cfg.plots) {
    const auto keep = svg::thin(ds.size(), 1500);
    std::vector<svg::Panel> panels;
    for (std::size_t i = 0; i < r.predictors.size(); ++i) {
      for (std::size_t j = i + 1; j < r.predictors.size(); ++j) {
        const Variable a = r.predictors[j];
        const Variable b = r.predictors[i];
        svg::Panel p{std::string(name_of(a)) + " vs " + std::string(name_of(b)) + " (r=" +
                         svg::detail::tick(cm.values(i, j)) + ")",
                     std::string(name_of(a)), std::string(name_of(b)), {}};
        svg::Series normal{"normal", {}, {}, false};
        svg::Series flagged{"flagged", {}, {}, false};
        for (auto row : keep) {
          auto& dst = mask[row] ? flagged : normal;
          dst.x.push_back(value_of(ds[row], a));
          dst.y.push_back(value_of(ds[row], b));
        }
        p.series = {std::move(normal), std::move(flagged)};
        panels.push_back(std::move(p));
      }
    }
    if (!panels.empty()) s.svgs["scatter_matrix.svg"] = svg::render(panels, 6, 240, 200);
  }
  return s;
}

inline Section varclus_section(const Dataset& ds, const RunConfig& cfg, const Resolved& r) {
  if (!(cfg.threshold > 0.0)) throw config_error("--threshold must be positive");
  const auto rep = cluster_variables(ds, r.predictors, cfg.threshold);
  Section s{"varclus", {}, {}};
  Table t{"varclus", {"cluster", "member", "r2_own", "r2_next", "ratio", "comment"}, {}};
  for (const auto& m : rep.members) {
    const auto& c = rep.clusters[m.cluster - 1];
    t.add({cell(m.cluster), cell(m.name), cell(m.r2_own), cell(m.r2_next), cell(m.ratio),
           cell(c.process_dependent ? "Process Dependent" : "Weather Dependent")});
  }
  Table c{"varclus_clusters", {"cluster", "size", "eigenvalue1", "eigenvalue2", "members"}, {}};
  for (const auto& vc : rep.clusters) {
    std::string members;
    for (const auto& m : vc.members) members += (members.empty() ? "" : " ") + m;
    c.add({cell(vc.id), cell(vc.members.size()), cell(vc.eigenvalue1), cell(vc.eigenvalue2), cell(members)});
  }
  s.tables = {std::move(t), std::move(c)};
  return s;
}

inline Section screening_section(const Dataset& ds, const RunConfig& cfg, const Resolved& r) {
  ForestConfig fc;
  fc.n_trees = cfg.trees;
  fc.min_samples_per_leaf = cfg.min_leaf;
  fc.predictors_per_split = cfg.mtry;
  fc.seed = cfg.seed;
  const auto res = screen_predictors(ds, r.predictors, r.target, fc);
  Section s{"screening", {}, {}};
  Table t{"screening", {"predictor", "contribution", "portion", "rank"}, {}};
  for (const auto& p : res.ranked()) t.add({cell(p.name), cell(p.contribution), cell(p.portion), cell(p.rank)});
  s.tables = {std::move(t)};
  return s;
}

inline Section drift_section(const Dataset& ds, const RunConfig& cfg, const Resolved& r) {
  const int ref = cfg.reference_year.value_or(ds.years().front());
  const auto rep = drift_report(ds, ref, r.predictors, r.tep_scale);
  Section s{"drift", {}, {}};

  Table fits{"drift_fits", {"year", "n", "intercept", "slope", "r_squared"}, {}};
  for (const auto& y : rep.years) {
    fits.add({cell(y.year), cell(y.fit.n), cell(y.fit.intercept), cell(y.fit.slope), cell(y.fit.r_squared)});
  }
  Table pca{"drift_pca", {"component", "eigenvalue"}, {}};
  for (auto v : rep.pca.variables) pca.columns.emplace_back(name_of(v));
  for (std::size_t k = 0; k < rep.pca.dimension(); ++k) {
    std::vector<Cell> row{cell(k + 1), cell(rep.pca.eigenvalues[k])};
    for (std::size_t j = 0; j < rep.pca.dimension(); ++j) row.push_back(cell(rep.pca.loadings(j, k)));
    pca.add(std::move(row));
  }
  const std::size_t n_comp = std::min<std::size_t>(2, rep.pca.dimension());
  const Matrix scores = project(rep.pca, ds, n_comp);
  const auto mask = flag_high_nox(ds, cfg.high_nox_quantile);
  Table sc{"drift_scores", {"row", "year", "pc1", "pc2", "high_nox"}, {}};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    sc.add({cell(i), cell(ds[i].year), cell(scores(i, 0)), cell(n_comp > 1 ? scores(i, 1) : 0.0),
            cell(mask[i] ? std::size_t{1} : std::size_t{0})});
  }
  s.tables = {std::move(fits), std::move(pca)};
  if (rep.years.size() > 1) {
    Table cen{"drift_centroids", {"year", "rows", "pc1", "pc2", "displacement"}, {}};
    for (const auto& y : rep.years) {
      cen.add({cell(y.year), cell(y.rows), cell(y.pc1), cell(y.pc2), cell(y.displacement)});
    }
    s.tables.push_back(std::move(cen));
  }
  s.tables.push_back(std::move(sc));

  if (cfg.plots) {
    std::vector<svg::Panel> pc_panels;
    std::vector<svg::Panel> fit_panels;
    for (const auto& y : rep.years) {
      const auto rows = ds.rows_of_year(y.year);
      const auto keep = svg::thin(rows.size(), 2000);
      svg::Panel p{std::to_string(y.year) + " PC1 vs PC2", "PC1", "PC2", {}};
      svg::Series normal{"normal", {}, {}, false};
      svg::Series flagged{"flagged", {}, {}, false};
      svg::Panel f{std::to_string(y.year) + " CDP vs TEP (r2=" + svg::detail::tick(y.fit.r_squared) + ")",
                   "TEP", "CDP", {}};
      svg::Series pts{"normal", {}, {}, false};
      double lo = INFINITY, hi = -INFINITY;
      for (auto k : keep) {
        const std::size_t i = rows[k];
        auto& dst = mask[i] ? flagged : normal;
        dst.x.push_back(scores(i, 0));
        dst.y.push_back(n_comp > 1 ? scores(i, 1) : 0.0);
        const double x = ds[i].tep * r.tep_scale;
        pts.x.push_back(x);
        pts.y.push_back(ds[i].cdp);
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
      p.series = {std::move(normal), std::move(flagged)};
      pc_panels.push_back(std::move(p));
      f.series = {std::move(pts), svg::Series{"reference", {lo, hi}, {y.fit(lo), y.fit(hi)}, true}};
      fit_panels.push_back(std::move(f));
    }
    s.svgs["drift_pc.svg"] = svg::render(pc_panels, 5);
    s.svgs["drift_cdp_tep.svg"] = svg::render(fit_panels, 5);
  }
  return s;
}

inline Cell r2_cell(const EvalMetrics& m) { return cell(m.r_squared); }

struct KnnOutcome {
  Section section;
  KnnModel pooled_model;
};

inline KnnOutcome knn_section(const Dataset& ds, const RunConfig& cfg, const Resolved& r) {
  KnnSpec spec;
  spec.predictors = r.predictors;
  spec.target = r.target;
  spec.weighting = r.weighting;
  spec.leave_self_out = !cfg.no_leave_self_out;
  const auto cmp = knn_study(ds, r.fractions, cfg.seed, cfg.k_max, spec, cfg.k);
  const bool yearly = ds.years().size() > 1;

  Section s{"knn", {}, {}};
  Table curve{"knn_k_curve", {"model", "k", "validation_rase", "chosen"}, {}};
  auto add_curve = [&](const std::string& model, const KSelectionCurve& c) {
    for (const auto& [k, rase] : c.points) {
      curve.add({cell(model), cell(k), cell(rase), cell(k == c.chosen_k ? std::size_t{1} : std::size_t{0})});
    }
  };
  add_curve("pooled", cmp.pooled_curve);
  if (yearly) {
    for (const auto& y : cmp.per_year) add_curve(std::to_string(y.year), y.curve);
  }

  Table metrics{"knn_metrics", {"partition", "pooled_r2", "pooled_rase", "pooled_aae"}, {}};
  if (yearly) metrics.columns.insert(metrics.columns.end(), {"by_year_r2", "by_year_rase", "by_year_aae"});
  metrics.columns.push_back("freq");
  auto metric_row = [&](const std::string& label, const EvalMetrics& pooled, const EvalMetrics& by_year) {
    std::vector<Cell> row{cell(label), r2_cell(pooled), cell(pooled.rase), cell(pooled.aae)};
    if (yearly) row.insert(row.end(), {r2_cell(by_year), cell(by_year.rase), cell(by_year.aae)});
    row.push_back(cell(pooled.freq));
    metrics.add(std::move(row));
  };
  for (auto p : kPartitions) {
    if (cmp.pooled[p].freq == 0) continue;
    metric_row(std::string(name_of(p)), cmp.pooled[p], cmp.by_year[p]);
  }
  metric_row("Total", cmp.pooled.total, cmp.by_year.total);

  Table by_year{"knn_by_year", {"year", "k", "partition", "r2", "rase", "aae", "freq"}, {}};
  for (const auto& y : cmp.per_year) {
    for (auto p : kPartitions) {
      const auto& m = y.metrics[p];
      if (m.freq == 0) continue;
      by_year.add({cell(y.year), cell(y.curve.chosen_k), cell(name_of(p)), r2_cell(m), cell(m.rase), cell(m.aae),
                   cell(m.freq)});
    }
    const auto& t = y.metrics.total;
    by_year.add({cell(y.year), cell(y.curve.chosen_k), cell("Total"), r2_cell(t), cell(t.rase), cell(t.aae),
                 cell(t.freq)});
  }

  Table res{"knn_residuals",
            {"row", "year", "partition", "actual", "pooled_predicted", "pooled_residual", "yearly_predicted",
             "yearly_residual"},
            {}};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double actual = value_of(ds[i], r.target);
    res.add({cell(i), cell(ds[i].year), cell(name_of(cmp.assignment.labels[i])), cell(actual),
             cell(cmp.pooled_predictions[i]), cell(actual - cmp.pooled_predictions[i]),
             cell(cmp.yearly_predictions[i]), cell(actual - cmp.yearly_predictions[i])});
  }
  s.tables = {std::move(curve), std::move(metrics), std::move(by_year), std::move(res)};

  if (cfg.plots) {
    if (!cmp.pooled_curve.points.empty()) {
      svg::Panel p{"Root average square error versus K", "K", "validation RASE", {}};
      svg::Series line{"curve", {}, {}, true};
      for (const auto& [k, rase] : cmp.pooled_curve.points) {
        line.x.push_back(static_cast<double>(k));
        line.y.push_back(rase);
      }
      svg::Series pts{"flagged", line.x, line.y, false};
      p.series = {std::move(line), std::move(pts)};
      s.svgs["knn_rase_vs_k.svg"] = svg::render({p}, 1, 480, 320);
    }
    std::vector<svg::Panel> resid_panels;
    std::vector<svg::Panel> fit_panels;
    for (auto part : kPartitions) {
      svg::Panel rp{std::string(name_of(part)) + " residuals", "predicted", "residual", {}};
      svg::Panel fp{std::string(name_of(part)) + " predicted vs actual", "actual", "predicted", {}};
      svg::Series rs{"normal", {}, {}, false};
      svg::Series fs{"normal", {}, {}, false};
      double lo = INFINITY, hi = -INFINITY;
      const auto rows = cmp.assignment.rows(part);
      for (auto k : svg::thin(rows.size(), 3000)) {
        const std::size_t i = rows[k];
        const double actual = value_of(ds[i], r.target);
        const double pred = cmp.yearly_predictions[i];
        rs.x.push_back(pred);
        rs.y.push_back(actual - pred);
        fs.x.push_back(actual);
        fs.y.push_back(pred);
        lo = std::min(lo, actual);
        hi = std::max(hi, actual);
      }
      const double xmin = rs.x.empty() ? 0.0 : *std::min_element(rs.x.begin(), rs.x.end());
      const double xmax = rs.x.empty() ? 1.0 : *std::max_element(rs.x.begin(), rs.x.end());
      rp.series = {std::move(rs), svg::Series{"reference", {xmin, xmax}, {0.0, 0.0}, true}};
      fp.series = {std::move(fs), svg::Series{"reference", {lo, hi}, {lo, hi}, true}};
      resid_panels.push_back(std::move(rp));
      fit_panels.push_back(std::move(fp));
    }
    s.svgs["knn_residuals.svg"] = svg::render(resid_panels, 3);
    s.svgs["knn_pred_vs_actual.svg"] = svg::render(fit_panels, 3);
  }
  return {std::move(s), cmp.pooled_model};
}

// ---------------------------------------------------------------------------

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw io_error("cannot create output directory " + dir.string());
}

inline void write_section(const Section& s, const Resolved& r, std::ostream& out) {
  ensure_dir(r.out_dir);
  for (const auto& t : s.tables) {
    write_table(t, r.out_dir, r.format);
    out << (r.out_dir / (t.name + std::string(extension(r.format)))).string() << '\n';
  }
  for (const auto& [name, doc] : s.svgs) {
    write_text(r.out_dir / name, doc);
    out << (r.out_dir / name).string() << '\n';
  }
}

inline nlohmann::ordered_json section_json(const Section& s) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& t : s.tables) j[t.name] = to_json(t);
  return j;
}

inline std::string index_html(const nlohmann::ordered_json& report) {
  std::ostringstream html;
  html << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>NOx emission analysis</title></head>\n"
       << "<body>\n<h1>NOx emission analysis</h1>\n<p>Full results: <a href=\"report.json\">report.json</a></p>\n";
  for (const auto& [key, section] : report.items()) {
    if (key == "config") continue;
    html << "<h2>" << key << "</h2>\n<ul>\n";
    for (const auto& [table, rows] : section.items()) {
      html << "<li>" << table << " (" << rows.size() << " rows)</li>\n";
    }
    html << "</ul>\n";
  }
  html << "</body></html>\n";
  return html.str();
}

inline nlohmann::ordered_json config_json(const RunConfig& cfg, const Resolved& r) {
  nlohmann::ordered_json j;
  j["years"] = r.years;
  j["target"] = std::string(name_of(r.target));
  j["predictors"] = names_of(r.predictors);
  j["split"] = {r.fractions.training, r.fractions.validation, r.fractions.test};
  j["seed"] = cfg.seed;
  j["k"] = cfg.k ? nlohmann::ordered_json(*cfg.k) : nlohmann::ordered_json(nullptr);
  j["k_max"] = cfg.k_max;
  j["weighting"] = std::string(name_of(r.weighting));
  j["leave_self_out"] = !cfg.no_leave_self_out;
  j["threshold"] = cfg.threshold;
  j["trees"] = cfg.trees;
  j["min_leaf"] = cfg.min_leaf;
  j["tep_scale"] = r.tep_scale;
  j["bins"] = cfg.bins;
  j["high_nox_quantile"] = cfg.high_nox_quantile;
  return j;
}

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const io_error*>(&e)) return kIoError;
  if (dynamic_cast<const config_error*>(&e)) return kConfigError;
  if (dynamic_cast<const numeric_error*>(&e)) return kNumericError;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return kIoError;
  return kNumericError;
}

// Entry point; args excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  RunConfig cfg;
  CLI::App app{"Predictive NOx emission analysis for gas-turbine telemetry", "pems"};
  app.set_config("--config", "", "key=value file; flags given on the command line win");
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("--data-dir", cfg.data_dir, "directory with one CSV per year (default: $PEMS_DATA_DIR)");
  app.add_option("--years", cfg.years, "years to load, e.g. 2011,2012 or 2011-2015 (default: all found)");
  app.add_option("--target", cfg.target, "NOX or CO");
  app.add_option("--predictors", cfg.predictors, "comma-separated predictor list");
  app.add_flag("--exclude-weather", cfg.exclude_weather, "drop AT, AH and AP from the predictors");
  app.add_option("--split", cfg.split, "training,validation,test fractions");
  app.add_option("--seed", cfg.seed, "seed for every random choice");
  app.add_option("--k", cfg.k, "fixed number of neighbours (skips K selection)");
  app.add_option("--k-max", cfg.k_max, "largest K tried during selection");
  app.add_option("--weighting", cfg.weighting, "inverse_distance or uniform");
  app.add_flag("--no-leave-self-out", cfg.no_leave_self_out, "let training rows be their own neighbour");
  app.add_option("--threshold", cfg.threshold, "second-eigenvalue split threshold");
  app.add_option("--trees", cfg.trees, "trees in the screening forest");
  app.add_option("--min-leaf", cfg.min_leaf, "minimum samples per tree leaf");
  app.add_option("--mtry", cfg.mtry, "predictors tried per split (default ceil(p/3))");
  app.add_option("--out", cfg.out, "output format: csv or json");
  app.add_flag("--plots", cfg.plots, "also write SVG charts");
  app.add_option("--out-dir", cfg.out_dir, "output directory");
  app.add_option("--reference-year", cfg.reference_year, "year the drift PCA is fitted on");
  app.add_option("--tep-unit", cfg.tep_unit, "TEP unit for the CDP~TEP fits: bar or mbar");
  app.add_option("--bins", cfg.bins, "histogram bins");
  app.add_option("--high-nox-quantile", cfg.high_nox_quantile, "NOx quantile above which records are flagged");

  auto* summary = app.add_subcommand("summary", "variable summaries and histograms");
  auto* correlate = app.add_subcommand("correlate", "Pearson correlation matrix");
  auto* cluster = app.add_subcommand("cluster-vars", "principal-component variable clustering");
  auto* screen = app.add_subcommand("screen", "bootstrap-forest predictor screening");
  auto* drift = app.add_subcommand("drift", "yearly PCA drift and CDP~TEP fits");
  auto* knn = app.add_subcommand("knn", "KNN regression, pooled vs per-year");
  auto* report = app.add_subcommand("report", "every analysis in one JSON document");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "pems: error: " << e.what() << '\n';
    return kConfigError;
  }

  try {
    const Resolved r = resolve(cfg);
    const Dataset ds = load(r);
    if (summary->parsed()) {
      write_section(summary_section(ds, cfg, r), r, out);
    } else if (correlate->parsed()) {
      write_section(correlation_section(ds, cfg, r), r, out);
    } else if (cluster->parsed()) {
      write_section(varclus_section(ds, cfg, r), r, out);
    } else if (screen->parsed()) {
      write_section(screening_section(ds, cfg, r), r, out);
    } else if (drift->parsed()) {
      write_section(drift_section(ds, cfg, r), r, out);
    } else if (knn->parsed()) {
      auto outcome = knn_section(ds, cfg, r);
      write_section(outcome.section, r, out);
      save_model(outcome.pooled_model, r.out_dir / "knn_model.json");
      out << (r.out_dir / "knn_model.json").string() << '\n';
    } else if (report->parsed()) {
      nlohmann::ordered_json doc;
      doc["config"] = config_json(cfg, r);
      doc["summary"] = section_json(summary_section(ds, cfg, r));
      doc["correlation"] = section_json(correlation_section(ds, cfg, r));
      doc["varclus"] = section_json(varclus_section(ds, cfg, r));
      doc["screening"] = section_json(screening_section(ds, cfg, r));
      doc["drift"] = section_json(drift_section(ds, cfg, r));
      doc["knn"] = section_json(knn_section(ds, cfg, r).section);
      ensure_dir(r.out_dir);
      write_text(r.out_dir / "report.json", doc.dump(2) + "\n");
      write_text(r.out_dir / "index.html", index_html(doc));
      out << (r.out_dir / "report.json").string() << '\n' << (r.out_dir / "index.html").string() << '\n';
    }
    return kOk;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "pems: error: " << msg << '\n';
    return exit_code_for(e);
  }
}

}  // namespace pems::cli
