#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "thermosleep/panel_engine.hpp"
#include "thermosleep/weather_link.hpp"

namespace thermosleep {

// ---------------------------------------------------------------------------
// Piecewise-linear dose response on a truncated-power basis:
//   f(t) = b0*t + sum_k bk*max(0, t - knot_k)   (+ irrelevant level)
// Continuity at the knots is exact by construction.
// ---------------------------------------------------------------------------

struct SplineModel {
  std::vector<double> knots = {-20.0, 10.0};
  double base_slope = 0.0;           // coefficient on t
  std::vector<double> hinge_slopes;  // one per knot
  double intercept = 0.0;            // cancels in deltas

  double predict(double t) const {
    double v = intercept + base_slope * t;
    for (std::size_t k = 0; k < knots.size(); ++k)
      v += hinge_slopes[k] * std::max(0.0, t - knots[k]);
    return v;
  }

  // Net slope on each segment, left to right (knots.size() + 1 entries).
  std::vector<double> segment_slopes() const {
    std::vector<double> out{base_slope};
    for (const double h : hinge_slopes) out.push_back(out.back() + h);
    return out;
  }

  void validate() const {
    if (hinge_slopes.size() != knots.size())
      throw ValidationError("spline: one hinge slope per knot required");
    for (std::size_t k = 1; k < knots.size(); ++k)
      if (!(knots[k - 1] < knots[k])) throw ValidationError("spline: knots not ascending");
  }
};

inline std::vector<double> spline_basis(double t, const std::vector<double>& knots = {-20.0, 10.0}) {
  if (!std::isfinite(t)) throw ValidationError("spline_basis: non-finite input");
  std::vector<double> b{t};
  for (const double k : knots) b.push_back(std::max(0.0, t - k));
  return b;
}

// Extracts the spline from a panel fit whose design used spline_columns
// (t column first, then one hinge per knot). A hinge column dropped as
// collinear (no data beyond that knot) contributes slope zero.
inline SplineModel spline_from_fit(const FitResult& fit, const std::vector<std::string>& spline_columns,
                                   const std::vector<double>& knots) {
  if (spline_columns.size() != knots.size() + 1)
    throw ValidationError("spline_from_fit: expected one column per basis term");
  SplineModel m;
  m.knots = knots;
  m.base_slope = fit.coef_or_zero(spline_columns[0]);
  for (std::size_t k = 0; k < knots.size(); ++k)
    m.hinge_slopes.push_back(fit.coef_or_zero(spline_columns[k + 1]));
  m.validate();
  return m;
}

// Predicted change in nightly sleep minutes moving from t_base to t_future.
inline double predict_delta(const SplineModel& model, double t_future, double t_base) {
  return model.predict(t_future) - model.predict(t_base);
}

// ---------------------------------------------------------------------------
// Scenario grids: per-cell daily minimum temperature on a fixed 365-day year
// (Feb 29 dropped upstream so annual sums are uniform).
// ---------------------------------------------------------------------------

struct GridCellSeries {
  double lat = 0.0;
  double lon = 0.0;
  std::array<double, 365> tmin{};
  std::array<bool, 365> present{};
};

class ScenarioGrid {
 public:
  void set(double lat, double lon, int doy, double tmin_c) {
    if (doy == 366) return;  // leap day dropped
    if (doy < 1 || doy > 365)
      throw ValidationError("scenario grid: doy " + std::to_string(doy) + " out of range");
    auto [it, inserted] = index_.try_emplace(key(lat, lon), cells_.size());
    if (inserted) {
      cells_.push_back(GridCellSeries{});
      cells_.back().lat = lat;
      cells_.back().lon = lon;
    }
    GridCellSeries& c = cells_[it->second];
    if (c.present[static_cast<std::size_t>(doy - 1)])
      throw ValidationError("scenario grid: duplicate (" + fmt_double(lat) + "," + fmt_double(lon) +
                            ") doy " + std::to_string(doy));
    c.tmin[static_cast<std::size_t>(doy - 1)] = tmin_c;
    c.present[static_cast<std::size_t>(doy - 1)] = true;
  }

  // Canonical cell order: (lat, lon) ascending.
  void finalize() {
    std::sort(cells_.begin(), cells_.end(), [](const GridCellSeries& a, const GridCellSeries& b) {
      return a.lat != b.lat ? a.lat < b.lat : a.lon < b.lon;
    });
    index_.clear();
    for (std::size_t i = 0; i < cells_.size(); ++i)
      index_.emplace(key(cells_[i].lat, cells_[i].lon), i);
  }

  const std::vector<GridCellSeries>& cells() const { return cells_; }
  const GridCellSeries* find(double lat, double lon) const {
    const auto it = index_.find(key(lat, lon));
    return it == index_.end() ? nullptr : &cells_[it->second];
  }

  static std::int64_t key(double lat, double lon) {
    return std::llround(lat * 1e6) * 4000000000LL + std::llround(lon * 1e6);
  }

 private:
  std::vector<GridCellSeries> cells_;
  std::map<std::int64_t, std::size_t> index_;
};

inline ScenarioGrid read_scenario_grid_csv(const std::string& path) {
  CsvReader in(path);
  const std::size_t c_lat = in.col("lat"), c_lon = in.col("lon");
  const std::size_t c_doy = in.col("doy"), c_tmin = in.col("tmin_c");
  ScenarioGrid grid;
  while (in.next())
    grid.set(in.num_field(c_lat, "lat"), in.num_field(c_lon, "lon"),
             static_cast<int>(parse_int(in.field(c_doy), in.context("doy"))),
             in.num_field(c_tmin, "tmin_c"));
  grid.finalize();
  if (grid.cells().empty()) throw ValidationError(path + ": empty scenario grid");
  return grid;
}

// ---------------------------------------------------------------------------
// Annual per-person loss: day-of-year d in the scenario year is compared
// with the same day in the baseline year, daily deltas summed over the
// 365-day year. Sign convention: positive hours = sleep lost.
// ---------------------------------------------------------------------------

inline double annual_loss(const GridCellSeries& scenario, const GridCellSeries& baseline,
                          const SplineModel& model) {
  std::string gaps;
  int n_gaps = 0;
  for (std::size_t d = 0; d < 365; ++d) {
    if (!scenario.present[d] || !baseline.present[d]) {
      ++n_gaps;
      if (n_gaps <= 5) gaps += (gaps.empty() ? "" : ",") + std::to_string(d + 1);
    }
  }
  if (n_gaps > 0)
    throw ValidationError("annual_loss: cell (" + fmt_double(scenario.lat) + "," +
                          fmt_double(scenario.lon) + ") missing " + std::to_string(n_gaps) +
                          " day(s): doy " + gaps + (n_gaps > 5 ? ",..." : ""));
  KahanSum minutes;
  for (std::size_t d = 0; d < 365; ++d)
    minutes.add(predict_delta(model, scenario.tmin[d], baseline.tmin[d]));
  return -minutes.value() / 60.0;
}

// ---------------------------------------------------------------------------
// Equal-area (cosine latitude) averaging.
// ---------------------------------------------------------------------------

// Cosine in degrees, exact at the angles whose cosine is representable in
// binary64 (so pole rows get weight exactly 0 and 60 degrees exactly 1/2);
// elsewhere defers to std::cos.
inline double cos_degrees(double deg) {
  double a = std::fmod(std::abs(deg), 360.0);
  if (a > 180.0) a = 360.0 - a;
  if (a == 0.0) return 1.0;
  if (a == 60.0) return 0.5;
  if (a == 90.0) return 0.0;
  if (a == 120.0) return -0.5;
  if (a == 180.0) return -1.0;
  return std::cos(deg * kDegToRad);
}

inline double equal_area_average(const std::vector<double>& lats,
                                 const std::vector<double>& values) {
  if (lats.empty() || lats.size() != values.size())
    throw ValidationError("equal_area_average: need matching non-empty lat/value lists");
  KahanSum num, den;
  for (std::size_t i = 0; i < lats.size(); ++i) {
    const double w = cos_degrees(lats[i]);
    if (w < 0.0) throw ValidationError("equal_area_average: latitude outside [-90, 90]");
    num.add(w * values[i]);
    den.add(w);
  }
  if (den.value() == 0.0) throw NumericError("equal_area_average: zero total weight");
  return num.value() / den.value();
}

// ---------------------------------------------------------------------------
// Per-model projection grids and the cross-model ensemble.
// ---------------------------------------------------------------------------

struct LossCell {
  double lat = 0.0;
  double lon = 0.0;
  double loss_hours = 0.0;
};

struct ModelLossGrid {
  std::string model;
  std::vector<LossCell> cells;  // canonical (lat, lon) order

  double global_equal_area() const {
    std::vector<double> lats, vals;
    lats.reserve(cells.size());
    vals.reserve(cells.size());
    for (const LossCell& c : cells) {
      lats.push_back(c.lat);
      vals.push_back(c.loss_hours);
    }
    return equal_area_average(lats, vals);
  }
};

// Cells are independent: parallel map, deterministic per-cell results.
inline ModelLossGrid project_annual_loss(const std::string& model_name,
                                         const ScenarioGrid& scenario,
                                         const ScenarioGrid& baseline, const SplineModel& model,
                                         unsigned threads = 0) {
  if (scenario.cells().size() != baseline.cells().size())
    throw ValidationError("projection: scenario and baseline grids have different cell counts");
  ModelLossGrid out;
  out.model = model_name;
  out.cells.resize(scenario.cells().size());
  parallel_for(
      scenario.cells().size(),
      [&](std::size_t i) {
        const GridCellSeries& s = scenario.cells()[i];
        const GridCellSeries* b = baseline.find(s.lat, s.lon);
        if (!b)
          throw ValidationError("projection: baseline grid lacks cell (" + fmt_double(s.lat) +
                                "," + fmt_double(s.lon) + ")");
        out.cells[i] = LossCell{s.lat, s.lon, annual_loss(s, *b, model)};
      },
      threads);
  return out;
}

struct EnsembleResult {
  std::vector<LossCell> mean_cells;                       // cell-wise ensemble mean
  std::vector<std::pair<std::string, double>> model_global;  // per-model equal-area scalar
  double global_mean = 0.0;
};

inline EnsembleResult ensemble_aggregate(const std::vector<ModelLossGrid>& grids) {
  if (grids.empty()) throw ValidationError("ensemble_aggregate: no model grids");
  const std::size_t n_cells = grids.front().cells.size();
  for (const ModelLossGrid& g : grids) {
    if (g.cells.size() != n_cells)
      throw ValidationError("ensemble_aggregate: geometry mismatch for model '" + g.model + "'");
    for (std::size_t i = 0; i < n_cells; ++i)
      if (g.cells[i].lat != grids.front().cells[i].lat ||
          g.cells[i].lon != grids.front().cells[i].lon)
        throw ValidationError("ensemble_aggregate: cell geometry mismatch for model '" + g.model +
                              "'");
  }
  EnsembleResult out;
  out.mean_cells.resize(n_cells);
  for (std::size_t i = 0; i < n_cells; ++i) {
    KahanSum s;
    for (const ModelLossGrid& g : grids) s.add(g.cells[i].loss_hours);
    out.mean_cells[i] =
        LossCell{grids.front().cells[i].lat, grids.front().cells[i].lon,
                 s.value() / static_cast<double>(grids.size())};
  }
  for (const ModelLossGrid& g : grids) out.model_global.emplace_back(g.model, g.global_equal_area());
  std::vector<double> lats, vals;
  for (const LossCell& c : out.mean_cells) {
    lats.push_back(c.lat);
    vals.push_back(c.loss_hours);
  }
  out.global_mean = equal_area_average(lats, vals);
  return out;
}

// ---------------------------------------------------------------------------
// Country aggregation: equal-area average inside each country's cells per
// model, then the ensemble mean. Countries with no cells are omitted (the
// caller receives them in `empty_countries`).
// ---------------------------------------------------------------------------

struct CountryMask {
  std::map<std::int64_t, std::string> cell_to_country;  // ScenarioGrid::key -> iso3
  std::vector<std::string> countries;                   // sorted unique
};

inline CountryMask read_country_mask_csv(const std::string& path) {
  CsvReader in(path);
  const std::size_t c_lat = in.col("lat"), c_lon = in.col("lon"), c_iso = in.col("iso3");
  CountryMask mask;
  std::set<std::string> seen;
  while (in.next()) {
    const double lat = in.num_field(c_lat, "lat");
    const double lon = in.num_field(c_lon, "lon");
    const std::string iso(in.field(c_iso));
    if (!mask.cell_to_country.emplace(ScenarioGrid::key(lat, lon), iso).second)
      throw ValidationError(in.context("iso3") + ": cell assigned to more than one country");
    seen.insert(iso);
  }
  mask.countries.assign(seen.begin(), seen.end());
  return mask;
}

struct CountryLoss {
  std::string iso3;
  double loss_hours = 0.0;  // ensemble mean of per-model country averages
};

struct CountryAggregate {
  std::vector<CountryLoss> losses;            // sorted by iso3
  std::vector<std::string> empty_countries;   // in the mask but matching no cells
};

inline CountryAggregate country_aggregate(const std::vector<ModelLossGrid>& grids,
                                          const CountryMask& mask) {
  if (grids.empty()) throw ValidationError("country_aggregate: no model grids");
  CountryAggregate out;
  for (const std::string& iso : mask.countries) {
    KahanSum model_sum;
    std::size_t models_with_cells = 0;
    bool any_cells = false;
    for (const ModelLossGrid& g : grids) {
      std::vector<double> lats, vals;
      for (const LossCell& c : g.cells) {
        const auto it = mask.cell_to_country.find(ScenarioGrid::key(c.lat, c.lon));
        if (it == mask.cell_to_country.end() || it->second != iso) continue;
        lats.push_back(c.lat);
        vals.push_back(c.loss_hours);
      }
      if (lats.empty()) continue;
      any_cells = true;
      ++models_with_cells;
      model_sum.add(equal_area_average(lats, vals));
    }
    if (!any_cells) {
      out.empty_countries.push_back(iso);
      continue;
    }
    out.losses.push_back(
        CountryLoss{iso, model_sum.value() / static_cast<double>(models_with_cells)});
  }
  return out;
}

}  // namespace thermosleep
