#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "thermosleep/panel_engine.hpp"
#include "thermosleep/weather_link.hpp"

namespace thermosleep {

// ---------------------------------------------------------------------------
// Bin schemes. Bins are left-closed right-open with open-ended extremes:
// edges e0..e_{k-1} define k+1 bins (-inf,e0), [e0,e1), ..., [e_{k-1},+inf).
// ---------------------------------------------------------------------------

struct BinScheme {
  std::string variable;
  std::vector<double> edges;      // strictly ascending
  std::size_t reference_bin = 0;  // omitted indicator

  std::size_t n_bins() const { return edges.size() + 1; }

  void validate() const {
    if (edges.empty()) throw ValidationError("bin scheme '" + variable + "': no edges");
    for (std::size_t i = 1; i < edges.size(); ++i)
      if (!(edges[i - 1] < edges[i]))
        throw ValidationError("bin scheme '" + variable + "': edges not strictly ascending");
    if (reference_bin >= n_bins())
      throw ValidationError("bin scheme '" + variable + "': reference bin out of range");
  }

  double bin_lo(std::size_t i) const {
    return i == 0 ? -std::numeric_limits<double>::infinity() : edges[i - 1];
  }
  double bin_hi(std::size_t i) const {
    return i == edges.size() ? std::numeric_limits<double>::infinity() : edges[i];
  }
  std::string bin_label(std::size_t i) const {
    const std::string lo = i == 0 ? "(-inf" : "[" + fmt_double(edges[i - 1]);
    const std::string hi = i == edges.size() ? "+inf)" : fmt_double(edges[i]) + ")";
    return lo + "," + hi;
  }
  std::string column_name(std::size_t i) const { return variable + bin_label(i); }
};

// Index of the [a,b) interval containing x.
inline std::size_t bin_value(double x, const BinScheme& scheme) {
  if (!std::isfinite(x)) throw ValidationError("bin_value: non-finite input");
  return static_cast<std::size_t>(
      std::upper_bound(scheme.edges.begin(), scheme.edges.end(), x) - scheme.edges.begin());
}

namespace detail {

inline BinScheme make_scheme(std::string variable, double lo, double hi, double width,
                             double reference_value) {
  BinScheme s;
  s.variable = std::move(variable);
  for (double e = lo; e <= hi + width / 2; e += width) s.edges.push_back(e);
  s.reference_bin = bin_value(reference_value, s);
  s.validate();
  return s;
}

}  // namespace detail

// The regression bin ladders: 5 C temperature and diurnal-range bins
// (reference [5,10)), 1 cm precipitation (reference [0,1)), 5 m/s wind
// (reference [0,5)), 20-point cloud and humidity bins (references [0,20) and
// [60,80)), 1 C anomaly bins centered on integers (reference [-0.5,0.5)).
// The extended temperature ladder reaches the >30 C and <-20 C end bins.
struct DefaultSchemes {
  BinScheme tmin = detail::make_scheme("tmin", -25.0, 25.0, 5.0, 7.5);
  BinScheme tmin_extended = detail::make_scheme("tmin", -20.0, 30.0, 5.0, 7.5);
  BinScheme trange = detail::make_scheme("trange", 0.0, 25.0, 5.0, 7.5);
  BinScheme prcp = detail::make_scheme("prcp", 0.0, 5.0, 1.0, 0.5);
  BinScheme wind = detail::make_scheme("wind", 0.0, 15.0, 5.0, 2.5);
  BinScheme cloud = detail::make_scheme("cloud", 0.0, 80.0, 20.0, 10.0);
  BinScheme rh = detail::make_scheme("rh", 0.0, 80.0, 20.0, 70.0);
  BinScheme anomaly = detail::make_scheme("tmin_anomaly", -10.5, 10.5, 1.0, 0.0);
  BinScheme heat_index = detail::make_scheme("heat_index", -25.0, 40.0, 5.0, 7.5);
};

inline const DefaultSchemes& default_schemes() {
  static const DefaultSchemes kSchemes;
  return kSchemes;
}

// ---------------------------------------------------------------------------
// Season and acclimatization labels (meteorological convention, hemisphere
// flipped at the equator; latitude >= 0 counts as northern).
// ---------------------------------------------------------------------------

enum class Season { Winter = 0, Spring = 1, Summer = 2, Fall = 3 };

inline const char* season_name(Season s) {
  static constexpr const char* kNames[] = {"winter", "spring", "summer", "fall"};
  return kNames[static_cast<int>(s)];
}

inline Season season_of(const CivilDate& date, double latitude) {
  if (std::abs(latitude) > 90.0) throw ValidationError("latitude out of range");
  // Northern meteorological seasons by month; southern hemisphere shifts two.
  static constexpr Season kNorth[] = {Season::Winter, Season::Winter, Season::Spring,
                                      Season::Spring, Season::Spring, Season::Summer,
                                      Season::Summer, Season::Summer, Season::Fall,
                                      Season::Fall,   Season::Fall,   Season::Winter};
  Season s = kNorth[date.month - 1];
  if (latitude < 0.0) s = static_cast<Season>((static_cast<int>(s) + 2) % 4);
  return s;
}

enum class SummerMonth { First, Last, Excluded };

// First/last month of local summer: June/August in the north, December/
// February in the south.
inline SummerMonth summer_month_label(const CivilDate& date, double latitude) {
  if (std::abs(latitude) > 90.0) throw ValidationError("latitude out of range");
  if (latitude >= 0.0) {
    if (date.month == 6) return SummerMonth::First;
    if (date.month == 8) return SummerMonth::Last;
  } else {
    if (date.month == 12) return SummerMonth::First;
    if (date.month == 2) return SummerMonth::Last;
  }
  return SummerMonth::Excluded;
}

// ---------------------------------------------------------------------------
// Model specification.
// ---------------------------------------------------------------------------

enum class Outcome { Duration, Duration24h, Onset, Midsleep, Offset, Short7, Short6, Short5 };
enum class Treatment {
  TminLinear,
  TminBinned,
  TminBinnedExtended,
  AnomalyLinear,
  AnomalyBinned,
  HeatIndexBinned,
  TminSpline
};
enum class ControlsForm { None, Linear, Binned };
enum class InteractionKind { None, Season, Category, SummerMonth };
enum class FePlan { Adm1Month, Adm1Week };

struct ModelSpec {
  Outcome outcome = Outcome::Duration;
  Treatment treatment = Treatment::TminLinear;
  ControlsForm controls = ControlsForm::Linear;
  bool include_tmin_normal = true;  // forced off for anomaly / heat-index specs
  InteractionKind interaction = InteractionKind::None;
  std::string interaction_column;            // users.csv category column
  std::vector<std::string> category_labels;  // optional declared label set
  FePlan fe_plan = FePlan::Adm1Month;
  std::vector<std::string> fe_dims = {"user", "date", "adm1period"};
  std::string cluster_dim = "admin1";  // admin1 | admin2 | user
  std::vector<double> spline_knots = {-20.0, 10.0};

  bool treatment_is_binned() const {
    return treatment == Treatment::TminBinned || treatment == Treatment::TminBinnedExtended ||
           treatment == Treatment::AnomalyBinned || treatment == Treatment::HeatIndexBinned;
  }
  bool treatment_is_anomaly() const {
    return treatment == Treatment::AnomalyLinear || treatment == Treatment::AnomalyBinned;
  }

  void validate() const {
    if (interaction != InteractionKind::None && treatment != Treatment::TminLinear &&
        treatment != Treatment::AnomalyLinear)
      throw ValidationError("interactions require a linear treatment term");
    if (interaction == InteractionKind::Category && interaction_column.empty())
      throw ValidationError("category interaction needs a users.csv column name");
    if (fe_dims.empty()) throw ValidationError("model needs at least one fixed-effect dimension");
  }
};

inline const char* outcome_name(Outcome o) {
  static constexpr const char* kNames[] = {"duration", "duration_24h", "onset",  "midsleep",
                                           "offset",   "short7",       "short6", "short5"};
  return kNames[static_cast<int>(o)];
}

inline const char* outcome_units(Outcome o) {
  return (o == Outcome::Short7 || o == Outcome::Short6 || o == Outcome::Short5) ? "probability"
                                                                                : "minutes";
}

// ---------------------------------------------------------------------------
// Design construction: joined person-night table -> Panel.
// ---------------------------------------------------------------------------

struct BuildReport {
  std::size_t n_input = 0;
  std::size_t n_missing_dropped = 0;      // incomplete exposure / outcome / category
  std::size_t n_interaction_excluded = 0; // summer-month subset rule
  std::size_t n_rows = 0;
};

struct DesignResult {
  Panel panel;
  BuildReport report;
  std::optional<BinScheme> treatment_scheme;     // binned treatments
  std::vector<std::size_t> treatment_histogram;  // rows per bin incl. reference
  std::vector<std::string> interaction_columns;  // slope column per category
  std::vector<std::string> interaction_labels;
  std::vector<std::size_t> interaction_counts;
  std::vector<std::string> spline_columns;  // spline treatment
};

namespace detail {

inline std::optional<double> outcome_value(const SleepRecord& r, Outcome o) {
  switch (o) {
    case Outcome::Duration: return static_cast<double>(r.duration_min);
    case Outcome::Duration24h:
      return r.total_24h_min ? std::optional<double>(static_cast<double>(*r.total_24h_min))
                             : std::nullopt;
    case Outcome::Onset: return static_cast<double>(r.onset_min);
    case Outcome::Midsleep: return r.midsleep_min;
    case Outcome::Offset: return static_cast<double>(r.offset_min);
    case Outcome::Short7: return short_sleep_flags(r.duration_min).lt7 ? 1.0 : 0.0;
    case Outcome::Short6: return short_sleep_flags(r.duration_min).lt6 ? 1.0 : 0.0;
    case Outcome::Short5: return short_sleep_flags(r.duration_min).lt5 ? 1.0 : 0.0;
  }
  return std::nullopt;
}

struct ColumnPlan {
  std::string name;
  // Row value from (exposure, interaction category index). nullopt => drop row.
  std::function<std::optional<double>(const Exposure&, int)> value;
};

}  // namespace detail

inline DesignResult build_design(const ModelSpec& spec, const std::vector<SleepRecord>& records,
                                 const std::vector<Exposure>& exposures,
                                 const std::map<std::string, UserInfo>& users,
                                 const DefaultSchemes& schemes = default_schemes()) {
  spec.validate();
  DesignResult out;
  out.report.n_input = records.size();

  std::map<std::pair<std::string, std::int64_t>, const Exposure*> exp_index;
  for (const Exposure& e : exposures)
    exp_index[{e.user_id, days_from_civil(e.night_date)}] = &e;

  // --- interaction categories -------------------------------------------
  const bool interacted = spec.interaction != InteractionKind::None;
  std::vector<std::string> labels = spec.category_labels;
  auto row_label = [&](const SleepRecord& r, const UserInfo& u) -> std::optional<std::string> {
    switch (spec.interaction) {
      case InteractionKind::None: return std::nullopt;
      case InteractionKind::Season: return season_name(season_of(r.night_date, u.lat));
      case InteractionKind::SummerMonth: {
        const SummerMonth m = summer_month_label(r.night_date, u.lat);
        if (m == SummerMonth::Excluded) return std::nullopt;
        return m == SummerMonth::First ? "first" : "last";
      }
      case InteractionKind::Category: {
        const auto it = u.categories.find(spec.interaction_column);
        if (it == u.categories.end()) return std::nullopt;
        return it->second;
      }
    }
    return std::nullopt;
  };
  if (interacted && labels.empty()) {
    if (spec.interaction == InteractionKind::Season)
      labels = {"winter", "spring", "summer", "fall"};
    else if (spec.interaction == InteractionKind::SummerMonth)
      labels = {"first", "last"};
    else {
      std::set<std::string> seen;
      for (const auto& [id, u] : users) {
        const auto it = u.categories.find(spec.interaction_column);
        if (it != u.categories.end()) seen.insert(it->second);
      }
      labels.assign(seen.begin(), seen.end());
      if (labels.empty())
        throw ValidationError("no values found for category column '" + spec.interaction_column +
                              "'");
    }
  }
  auto label_index = [&](const std::string& l) -> int {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == l) return static_cast<int>(i);
    return -1;
  };

  // --- column plan ---------------------------------------------------------
  using detail::ColumnPlan;
  std::vector<ColumnPlan> plan;
  auto treatment_value = [&](const Exposure& e) -> std::optional<double> {
    if (spec.treatment_is_anomaly()) return e.tmin_anomaly;
    if (spec.treatment == Treatment::HeatIndexBinned) return e.heat_index_c;
    return e.tmin;
  };
  const std::string treat_name =
      spec.treatment_is_anomaly()
          ? "tmin_anomaly"
          : (spec.treatment == Treatment::HeatIndexBinned ? "heat_index" : "tmin");

  if (spec.treatment_is_binned()) {
    const BinScheme& s = spec.treatment == Treatment::TminBinned ? schemes.tmin
                         : spec.treatment == Treatment::TminBinnedExtended ? schemes.tmin_extended
                         : spec.treatment == Treatment::AnomalyBinned ? schemes.anomaly
                                                                      : schemes.heat_index;
    out.treatment_scheme = s;
    out.treatment_histogram.assign(s.n_bins(), 0);
    for (std::size_t b = 0; b < s.n_bins(); ++b) {
      if (b == s.reference_bin) continue;
      plan.push_back(ColumnPlan{s.column_name(b), [&, b, s](const Exposure& e, int) -> std::optional<double> {
                                  const auto v = treatment_value(e);
                                  if (!v) return std::nullopt;
                                  return bin_value(*v, s) == b ? 1.0 : 0.0;
                                }});
    }
  } else if (spec.treatment == Treatment::TminSpline) {
    out.spline_columns.push_back(treat_name);
    plan.push_back(ColumnPlan{treat_name, [&](const Exposure& e, int) { return e.tmin; }});
    for (const double knot : spec.spline_knots) {
      const std::string name = treat_name + "_hinge_" + fmt_double(knot);
      out.spline_columns.push_back(name);
      plan.push_back(ColumnPlan{name, [&, knot](const Exposure& e, int) -> std::optional<double> {
                                  if (!e.tmin) return std::nullopt;
                                  return std::max(0.0, *e.tmin - knot);
                                }});
    }
  } else if (interacted) {
    // Full set of category-specific slopes, main effect absorbed.
    for (std::size_t c = 0; c < labels.size(); ++c) {
      const std::string name = treat_name + ":" + labels[c];
      out.interaction_columns.push_back(name);
      plan.push_back(ColumnPlan{name, [&, c](const Exposure& e, int cat) -> std::optional<double> {
                                  const auto v = treatment_value(e);
                                  if (!v) return std::nullopt;
                                  return cat == static_cast<int>(c) ? *v : 0.0;
                                }});
    }
    out.interaction_labels = labels;
    out.interaction_counts.assign(labels.size(), 0);
  } else {
    plan.push_back(
        ColumnPlan{treat_name, [&](const Exposure& e, int) { return treatment_value(e); }});
  }

  const bool with_tmin_normal = spec.include_tmin_normal && !spec.treatment_is_anomaly() &&
                                spec.treatment != Treatment::HeatIndexBinned;
  if (with_tmin_normal)
    plan.push_back(ColumnPlan{"tmin_normal", [](const Exposure& e, int) { return e.tmin_normal; }});

  if (spec.controls != ControlsForm::None) {
    struct Control {
      const char* name;
      std::optional<double> Exposure::* field;
      const BinScheme* scheme;
    };
    const std::vector<Control> controls = {
        {"prcp", &Exposure::prcp, &schemes.prcp},     {"trange", &Exposure::trange, &schemes.trange},
        {"cloud", &Exposure::cloud, &schemes.cloud},  {"rh", &Exposure::rh, &schemes.rh},
        {"wind", &Exposure::wind, &schemes.wind}};
    for (const Control& c : controls) {
      if (spec.treatment == Treatment::HeatIndexBinned && std::string(c.name) == "rh")
        continue;  // heat index substitutes for tmin and rh jointly
      if (spec.controls == ControlsForm::Linear) {
        plan.push_back(ColumnPlan{c.name, [field = c.field](const Exposure& e, int) {
                                    return e.*field;
                                  }});
      } else {
        const BinScheme& s = *c.scheme;
        for (std::size_t b = 0; b < s.n_bins(); ++b) {
          if (b == s.reference_bin) continue;
          plan.push_back(ColumnPlan{s.column_name(b),
                                    [field = c.field, b, s](const Exposure& e, int) -> std::optional<double> {
                                      const auto v = e.*field;
                                      if (!v) return std::nullopt;
                                      return bin_value(*v, s) == b ? 1.0 : 0.0;
                                    }});
        }
      }
    }
    struct NormalCol {
      const char* name;
      std::optional<double> Exposure::* field;
    };
    const std::vector<NormalCol> normal_cols = {{"prcp_normal", &Exposure::prcp_normal},
                                                {"trange_normal", &Exposure::trange_normal},
                                                {"cloud_normal", &Exposure::cloud_normal},
                                                {"rh_normal", &Exposure::rh_normal},
                                                {"wind_normal", &Exposure::wind_normal}};
    for (const NormalCol& c : normal_cols) {
      if (spec.treatment == Treatment::HeatIndexBinned && std::string(c.name) == "rh_normal")
        continue;
      plan.push_back(ColumnPlan{c.name, [field = c.field](const Exposure& e, int) {
                                  return e.*field;
                                }});
    }
  }

  // --- assemble rows -------------------------------------------------------
  Panel& panel = out.panel;
  panel.x_names.reserve(plan.size());
  for (const ColumnPlan& c : plan) {
    panel.x_names.push_back(c.name);
    panel.x.emplace_back();
  }
  for (const std::string& dim : spec.fe_dims) {
    panel.fe.emplace_back();
    panel.fe.back().name = dim;
  }
  panel.cluster.name = spec.cluster_dim;

  std::vector<double> row_values(plan.size());
  for (const SleepRecord& r : records) {
    const auto uit = users.find(r.user_id);
    if (uit == users.end())
      throw ValidationError("no user metadata for '" + r.user_id + "'");
    const UserInfo& u = uit->second;
    const auto eit = exp_index.find({r.user_id, days_from_civil(r.night_date)});
    if (eit == exp_index.end()) {
      ++out.report.n_missing_dropped;
      continue;
    }
    const Exposure& e = *eit->second;

    int cat = -1;
    if (interacted) {
      const auto l = row_label(r, u);
      if (!l) {
        if (spec.interaction == InteractionKind::SummerMonth)
          ++out.report.n_interaction_excluded;
        else
          ++out.report.n_missing_dropped;
        continue;
      }
      cat = label_index(*l);
      if (cat < 0)
        throw ValidationError("unknown category label '" + *l + "' for user '" + r.user_id +
                              "' night " + date_to_string(r.night_date));
    }

    const auto yv = detail::outcome_value(r, spec.outcome);
    if (!yv) {
      ++out.report.n_missing_dropped;
      continue;
    }
    bool complete = true;
    for (std::size_t j = 0; j < plan.size(); ++j) {
      const auto v = plan[j].value(e, cat);
      if (!v) {
        complete = false;
        break;
      }
      row_values[j] = *v;
    }
    if (!complete) {
      ++out.report.n_missing_dropped;
      continue;
    }

    panel.y.push_back(*yv);
    for (std::size_t j = 0; j < plan.size(); ++j) panel.x[j].push_back(row_values[j]);
    for (std::size_t d = 0; d < spec.fe_dims.size(); ++d) {
      const std::string& dim = spec.fe_dims[d];
      std::string key;
      if (dim == "user")
        key = r.user_id;
      else if (dim == "date")
        key = date_to_string(r.night_date);
      else if (dim == "adm1period")
        key = u.admin1 + "x" + (spec.fe_plan == FePlan::Adm1Month ? month_key(r.night_date)
                                                                  : iso_week_key(r.night_date));
      else if (dim == "admin1")
        key = u.admin1;
      else if (dim == "admin2")
        key = u.admin2;
      else
        throw ValidationError("unknown fixed-effect dimension '" + dim + "'");
      panel.fe[d].push(key);
    }
    if (spec.cluster_dim == "admin1")
      panel.cluster.push(u.admin1);
    else if (spec.cluster_dim == "admin2")
      panel.cluster.push(u.admin2);
    else if (spec.cluster_dim == "user")
      panel.cluster.push(r.user_id);
    else
      throw ValidationError("unknown cluster dimension '" + spec.cluster_dim + "'");

    if (out.treatment_scheme) {
      const auto v = treatment_value(e);
      ++out.treatment_histogram[bin_value(*v, *out.treatment_scheme)];
    }
    if (interacted) ++out.interaction_counts[static_cast<std::size_t>(cat)];
  }
  out.report.n_rows = panel.n_rows();
  return out;
}

// ---------------------------------------------------------------------------
// Dose-response curve assembled from a binned fit.
// ---------------------------------------------------------------------------

struct CurvePoint {
  double lo = 0.0;
  double hi = 0.0;
  std::optional<double> coef;  // absent when the bin's indicator was dropped
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n_obs = 0;
  bool reference = false;
};

struct ResponseCurve {
  BinScheme scheme;
  std::string outcome_units;
  std::vector<CurvePoint> points;  // one per bin, ascending
};

inline ResponseCurve response_curve(const FitResult& fit, const BinScheme& scheme,
                                    const std::vector<std::size_t>& histogram,
                                    const std::string& units) {
  ResponseCurve curve;
  curve.scheme = scheme;
  curve.outcome_units = units;
  for (std::size_t b = 0; b < scheme.n_bins(); ++b) {
    CurvePoint p;
    p.lo = scheme.bin_lo(b);
    p.hi = scheme.bin_hi(b);
    p.n_obs = b < histogram.size() ? histogram[b] : 0;
    if (b == scheme.reference_bin) {
      p.reference = true;
      p.coef = 0.0;
    } else if (const auto i = fit.index_of(scheme.column_name(b))) {
      p.coef = fit.beta[static_cast<Eigen::Index>(*i)];
      p.se = fit.se(*i);
      p.ci_lo = *p.coef - 1.96 * p.se;
      p.ci_hi = *p.coef + 1.96 * p.se;
    }
    curve.points.push_back(p);
  }
  return curve;
}

inline void write_curve_csv(const std::string& path, const ResponseCurve& curve) {
  CsvWriter out(path, {"bin_lo", "bin_hi", "coef", "ci_lo", "ci_hi", "n_obs"});
  for (const CurvePoint& p : curve.points) {
    out.write_row({fmt_double(p.lo), fmt_double(p.hi), p.coef ? fmt_double(*p.coef) : std::string(),
                   p.coef ? fmt_double(p.ci_lo) : std::string(),
                   p.coef ? fmt_double(p.ci_hi) : std::string(), fmt_int(static_cast<long long>(p.n_obs))});
  }
  out.commit();
}

inline ResponseCurve read_curve_csv(const std::string& path) {
  CsvReader in(path);
  const std::size_t c_lo = in.col("bin_lo"), c_hi = in.col("bin_hi"), c_coef = in.col("coef");
  const std::size_t c_cl = in.col("ci_lo"), c_ch = in.col("ci_hi"), c_n = in.col("n_obs");
  ResponseCurve curve;
  while (in.next()) {
    CurvePoint p;
    p.lo = in.num_field(c_lo, "bin_lo");
    p.hi = in.num_field(c_hi, "bin_hi");
    p.coef = in.opt_num_field(c_coef, "coef");
    if (const auto v = in.opt_num_field(c_cl, "ci_lo")) p.ci_lo = *v;
    if (const auto v = in.opt_num_field(c_ch, "ci_hi")) p.ci_hi = *v;
    p.n_obs = static_cast<std::size_t>(parse_int(in.field(c_n), in.context("n_obs")));
    if (p.coef && !(p.ci_lo <= *p.coef && *p.coef <= p.ci_hi) && !(p.ci_lo == 0 && p.ci_hi == 0))
      throw ValidationError(in.context("coef") + ": confidence bounds do not bracket coefficient");
    curve.points.push_back(p);
  }
  if (curve.points.empty()) throw ValidationError(path + ": empty curve");
  return curve;
}

// ---------------------------------------------------------------------------
// Marginal effects of an interacted fit: per-category slope with delta-method
// (here: direct coordinate) SEs and pairwise Wald z-tests.
// ---------------------------------------------------------------------------

struct MarginalEffect {
  std::string category;
  double slope = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n_obs = 0;
};

struct PairwiseTest {
  std::string a, b;
  double diff = 0.0;
  double se = 0.0;
  double z = 0.0;
  double p = 1.0;
};

struct MarginsResult {
  std::vector<MarginalEffect> effects;
  std::vector<PairwiseTest> pairs;
};

inline MarginsResult marginal_effects(const FitResult& fit,
                                      const std::vector<std::string>& interaction_columns,
                                      const std::vector<std::string>& labels,
                                      const std::vector<std::size_t>& counts = {}) {
  if (interaction_columns.empty())
    throw ValidationError("marginal_effects: fit carries no interaction columns");
  std::vector<std::size_t> idx;
  for (const std::string& col : interaction_columns) {
    const auto i = fit.index_of(col);
    if (!i) throw ValidationError("category column '" + col + "' absent from fit");
    idx.push_back(*i);
  }
  MarginsResult out;
  for (std::size_t c = 0; c < idx.size(); ++c) {
    MarginalEffect m;
    m.category = c < labels.size() ? labels[c] : interaction_columns[c];
    m.slope = fit.beta[static_cast<Eigen::Index>(idx[c])];
    m.se = fit.se(idx[c]);
    m.ci_lo = m.slope - 1.96 * m.se;
    m.ci_hi = m.slope + 1.96 * m.se;
    m.n_obs = c < counts.size() ? counts[c] : 0;
    out.effects.push_back(m);
  }
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      PairwiseTest t;
      t.a = out.effects[a].category;
      t.b = out.effects[b].category;
      t.diff = out.effects[a].slope - out.effects[b].slope;
      const Eigen::Index ia = static_cast<Eigen::Index>(idx[a]);
      const Eigen::Index ib = static_cast<Eigen::Index>(idx[b]);
      const double var = fit.vcov(ia, ia) + fit.vcov(ib, ib) - 2.0 * fit.vcov(ia, ib);
      t.se = std::sqrt(std::max(0.0, var));
      t.z = t.se > 0 ? t.diff / t.se : 0.0;
      t.p = t.se > 0 ? normal_two_sided_p(t.z) : 1.0;
      out.pairs.push_back(t);
    }
  }
  return out;
}

// Joint Wald test of named coefficients against hypothesized values.
struct WaldResult {
  double stat = 0.0;
  std::size_t df = 0;
  double p = 1.0;
};

inline WaldResult joint_wald(const FitResult& fit, const std::vector<std::string>& names,
                             const std::vector<double>& hypothesized) {
  if (names.size() != hypothesized.size())
    throw ValidationError("joint_wald: name/value count mismatch");
  std::vector<Eigen::Index> idx;
  for (const std::string& n : names) {
    const auto i = fit.index_of(n);
    if (!i) throw ValidationError("joint_wald: '" + n + "' absent from fit");
    idx.push_back(static_cast<Eigen::Index>(*i));
  }
  const Eigen::Index k = static_cast<Eigen::Index>(idx.size());
  Eigen::VectorXd diff(k);
  Eigen::MatrixXd v(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    diff[a] = fit.beta[idx[static_cast<std::size_t>(a)]] - hypothesized[static_cast<std::size_t>(a)];
    for (Eigen::Index b = 0; b < k; ++b)
      v(a, b) = fit.vcov(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
  }
  WaldResult w;
  w.stat = diff.dot(v.ldlt().solve(diff));
  w.df = static_cast<std::size_t>(k);
  w.p = chi2_sf(w.stat, static_cast<double>(w.df));
  return w;
}

// ---------------------------------------------------------------------------
// Population-scale extrapolation from a probability response curve:
// (coef[to] - coef[from]) * population.
// ---------------------------------------------------------------------------

inline double scale_extrapolation(const ResponseCurve& curve, std::size_t from_bin,
                                  std::size_t to_bin, double population) {
  if (from_bin >= curve.points.size() || to_bin >= curve.points.size())
    throw ValidationError("scale_extrapolation: bin index out of range");
  if (curve.outcome_units != "probability" && !curve.outcome_units.empty())
    throw ValidationError("scale_extrapolation needs a probability curve");
  const auto& a = curve.points[from_bin];
  const auto& b = curve.points[to_bin];
  if (!a.coef || !b.coef)
    throw ValidationError("scale_extrapolation: bin without an estimated coefficient");
  return (*b.coef - *a.coef) * population;
}

}  // namespace thermosleep
