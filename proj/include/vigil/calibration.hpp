#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "vigil/dataset.hpp"
#include "vigil/errors.hpp"
#include "vigil/evaluation.hpp"
#include "vigil/pipeline.hpp"
#include "vigil/taxonomy.hpp"

namespace vigil {

struct GridConfig {
  double tau = 0.1;
  double delta = 0.0;
  bool boxes = false;

  // Tie-break order: smaller tau, then smaller delta, then boxes=false.
  auto operator<=>(const GridConfig&) const = default;
};

inline std::string to_string(const GridConfig& g) {
  std::ostringstream os;
  os << "tau=" << g.tau << " delta=" << g.delta << " boxes=" << (g.boxes ? "true" : "false");
  return os.str();
}

struct GridAxes {
  std::vector<double> tau{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  std::vector<double> delta{0.0, 0.1, 0.2};
  std::vector<bool> boxes{false, true};
};

// Cartesian product in (tau, delta, boxes) order. Duplicates are an error.
inline std::vector<GridConfig> expand_grid(const GridAxes& axes) {
  std::vector<GridConfig> grid;
  std::set<GridConfig> seen;
  for (double t : axes.tau)
    for (double d : axes.delta)
      for (bool b : axes.boxes) {
        GridConfig g{t, d, b};
        if (!seen.insert(g).second) throw ConfigError("duplicate grid point: " + to_string(g));
        if (!(t >= -1.0 && t <= 1.0)) throw ConfigError("grid tau outside [-1, 1]");
        if (!(d >= 0.0)) throw ConfigError("grid delta must be >= 0");
        grid.push_back(g);
      }
  return grid;
}

inline GridAxes parse_grid_axes(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("grid file must be a JSON object");
  GridAxes a;
  for (auto it = j.begin(); it != j.end(); ++it) {
    try {
      if (it.key() == "tau") a.tau = it->get<std::vector<double>>();
      else if (it.key() == "delta") a.delta = it->get<std::vector<double>>();
      else if (it.key() == "boxes") a.boxes = it->get<std::vector<bool>>();
      else throw ConfigError("unknown grid key: " + it.key());
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("bad value for grid key: " + it.key());
    }
  }
  return a;
}

// Rows are grid points; column C holds macro-F1 over every category
// except C.
struct ScoreTable {
  struct Row {
    GridConfig config;
    std::map<ProductCategory, double> heldout;
  };
  std::vector<Row> rows;

  bool empty() const { return rows.empty(); }
};

inline constexpr const char* kScoreTableHeader =
    "threshold,margin,boxes,cars,clothes,cosmetics,electronics,furniture";

namespace detail {

inline const std::array<ProductCategory, 5> kScoreColumns = {
    ProductCategory::cars, ProductCategory::clothing, ProductCategory::cosmetics,
    ProductCategory::electronics, ProductCategory::furniture};

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

inline double parse_real(const std::string& cell, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used == cell.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw ValidationError("line " + std::to_string(line_no) + ": not a number: \"" + cell + "\"");
}

inline bool parse_bool(std::string cell, std::size_t line_no) {
  for (auto& c : cell) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (cell == "true") return true;
  if (cell == "false") return false;
  throw ValidationError("line " + std::to_string(line_no) + ": boxes must be true/false, got \"" + cell + "\"");
}

}  // namespace detail

inline ScoreTable parse_score_table(std::istream& in) {
  ScoreTable t;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  std::set<GridConfig> seen;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty()) continue;
    if (!header) {
      if (line != kScoreTableHeader)
        throw ValidationError("line " + std::to_string(line_no) + ": expected header " + kScoreTableHeader);
      header = true;
      continue;
    }
    auto cells = detail::split_csv(line);
    if (cells.size() != 8)
      throw ValidationError("line " + std::to_string(line_no) + ": expected 8 columns, got " +
                            std::to_string(cells.size()));
    for (auto& c : cells) c = detail::trim(c);
    ScoreTable::Row row;
    row.config = {detail::parse_real(cells[0], line_no), detail::parse_real(cells[1], line_no),
                  detail::parse_bool(cells[2], line_no)};
    if (!(row.config.tau >= -1.0 && row.config.tau <= 1.0))
      throw ValidationError("line " + std::to_string(line_no) + ": threshold outside [-1, 1]");
    if (row.config.delta < 0.0) throw ValidationError("line " + std::to_string(line_no) + ": negative margin");
    if (!seen.insert(row.config).second)
      throw ValidationError("line " + std::to_string(line_no) + ": duplicate grid point");
    for (std::size_t k = 0; k < 5; ++k) {
      const double v = detail::parse_real(cells[3 + k], line_no);
      if (v < 0.0 || v > 1.0) throw ValidationError("line " + std::to_string(line_no) + ": score outside [0, 1]");
      row.heldout[detail::kScoreColumns[k]] = v;
    }
    t.rows.push_back(std::move(row));
  }
  if (!header) throw ValidationError("score table lacks the header line");
  return t;
}

inline ScoreTable load_score_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open score table: " + path.string());
  return parse_score_table(in);
}

inline std::string format_score_table(const ScoreTable& t) {
  std::ostringstream os;
  os << kScoreTableHeader << "\n";
  char buf[64];
  for (const auto& r : t.rows) {
    std::snprintf(buf, sizeof buf, "%.1f,%.1f,%s", r.config.tau, r.config.delta, r.config.boxes ? "True" : "False");
    os << buf;
    for (auto c : detail::kScoreColumns) {
      std::snprintf(buf, sizeof buf, ",%.4f", r.heldout.at(c));
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

struct Selection {
  GridConfig config;
  double score = 0.0;
};

// Argmax of the held-out column; ties go to the smallest config.
inline Selection select_best(const ScoreTable& t, ProductCategory heldout) {
  if (t.empty()) throw ValidationError("cannot select from an empty score table");
  std::optional<Selection> best;
  for (const auto& r : t.rows) {
    auto it = r.heldout.find(heldout);
    if (it == r.heldout.end())
      throw ValidationError("score table has no column for " + std::string(to_string(heldout)));
    if (!best || it->second > best->score || (it->second == best->score && r.config < best->config))
      best = Selection{r.config, it->second};
  }
  return *best;
}

// Scores the predictions for a subset of samples against their ground
// truth; the default is macro-F1 of the multi-label task.
using Evaluator = std::function<double(const std::vector<const Sample*>& samples,
                                       const std::vector<HallucinationAnnotation>& predicted)>;

inline double macro_f1_evaluator(const std::vector<const Sample*>& samples,
                                 const std::vector<HallucinationAnnotation>& predicted) {
  std::vector<LabelVector> p, t;
  for (const auto& a : predicted) p.push_back(binarize(a));
  for (const auto* s : samples) t.push_back(binarize(s->annotation));
  return multilabel_f1(p, t).macro_f1;
}

class PartialTableError : public Error {
public:
  PartialTableError(const std::string& what, std::vector<std::string> missing)
      : Error(what), missing_(std::move(missing)) {}
  const std::vector<std::string>& missing_cells() const { return missing_; }

private:
  std::vector<std::string> missing_;
};

// Runs the pipeline once per grid point over the whole dataset and fills
// every held-out column from the other four categories. The client's
// transport should cache: segmentations and embeddings do not depend on
// tau, and reason calls repeat across grid points.
inline ScoreTable grid_search(const Dataset& ds, const std::vector<GridConfig>& grid, const ModelClient& client,
                              const Evaluator& evaluator = macro_f1_evaluator,
                              const PipelineConfig& base = {}, unsigned workers = 1) {
  {
    std::set<GridConfig> seen;
    for (const auto& g : grid)
      if (!seen.insert(g).second) throw ConfigError("duplicate grid point: " + to_string(g));
  }
  std::set<ProductCategory> present;
  for (const auto& s : ds.samples) present.insert(s.category);
  if (present.size() != kAllProductCategories.size())
    throw ValidationError("grid search needs samples from all five product categories");

  ScoreTable table;
  std::vector<std::string> missing;
  for (const auto& g : grid) {
    PipelineConfig cfg = base;
    cfg.tau = g.tau;
    cfg.background.margin_delta = g.delta;
    cfg.use_roi_boxes = g.boxes;
    const auto outcomes = run_samples(ds.samples, cfg, client, {.baseline = false, .workers = workers});

    ScoreTable::Row row{g, {}};
    for (auto heldout : kAllProductCategories) {
      std::vector<const Sample*> subset;
      std::vector<HallucinationAnnotation> pred;
      bool complete = true;
      for (std::size_t i = 0; i < ds.samples.size() && complete; ++i) {
        const auto& s = ds.samples[i];
        if (s.category == heldout) continue;
        const auto& o = outcomes[i];
        if (o.status == SampleStatus::failed) {
          complete = false;
          continue;
        }
        subset.push_back(&s);
        // Skipped samples (no entities) count as a clean prediction.
        pred.push_back(o.report ? o.report->hallucination : HallucinationAnnotation{});
      }
      if (!complete) {
        missing.push_back(to_string(g) + " / " + std::string(to_string(heldout)));
        continue;
      }
      for (const auto* s : subset)
        if (s->category == heldout) throw Error("held-out category leaked into its own score cell");
      row.heldout[heldout] = evaluator(subset, pred);
    }
    table.rows.push_back(std::move(row));
  }
  if (!missing.empty())
    throw PartialTableError("grid search incomplete: " + std::to_string(missing.size()) + " missing cells",
                            std::move(missing));
  return table;
}

}  // namespace vigil
