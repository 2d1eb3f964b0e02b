#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "thermosleep/projection.hpp"
#include "thermosleep/response_models.hpp"
#include "thermosleep/svg.hpp"
#include "thermosleep/synth.hpp"

namespace thermosleep {

using nlohmann::json;

inline constexpr const char* kToolVersion = "thermosleep 1.0.0";

// ---------------------------------------------------------------------------
// Config plumbing. Configs are JSON documents; re-running from a manifest is
// supported by unwrapping its embedded "config" object.
// ---------------------------------------------------------------------------

inline json load_config_file(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file_bytes(path));
  } catch (const json::exception& e) {
    throw ValidationError(path + ": invalid JSON: " + e.what());
  }
  if (j.contains("subcommand") && j.contains("config")) return j["config"];  // manifest round-trip
  return j;
}

inline std::string resolve_path(const std::string& base_dir, const std::string& p) {
  std::filesystem::path fp(p);
  if (fp.is_absolute()) return p;
  return (std::filesystem::path(base_dir) / fp).lexically_normal().string();
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config key '" + key + "' has the wrong type");
  }
}

inline const json& require_section(const json& j, const std::string& key) {
  if (!j.contains(key))
    throw ValidationError("config is missing the required '" + key + "' section");
  return j.at(key);
}

// "HH:MM" -> minute of day.
inline int parse_clock(const std::string& s, const std::string& context) {
  if (s.size() != 5 || s[2] != ':')
    throw ValidationError("bad clock time '" + s + "' (" + context + ")");
  const int h = static_cast<int>(parse_int(s.substr(0, 2), context));
  const int m = static_cast<int>(parse_int(s.substr(3, 2), context));
  if (h > 23 || m > 59) throw ValidationError("bad clock time '" + s + "' (" + context + ")");
  return h * 60 + m;
}

inline InclusionConfig inclusion_from_json(const json& j) {
  InclusionConfig c;
  c.min_duration_h = get_or(j, "min_duration_h", c.min_duration_h);
  c.max_duration_h = get_or(j, "max_duration_h", c.max_duration_h);
  c.min_nights = get_or(j, "min_nights", c.min_nights);
  c.min_coverage = get_or(j, "min_coverage", c.min_coverage);
  if (j.contains("onset_window")) {
    const auto w = j["onset_window"].get<std::vector<std::string>>();
    if (w.size() != 2) throw ValidationError("onset_window needs two clock times");
    c.onset_window = {parse_clock(w[0], "onset_window"), parse_clock(w[1], "onset_window")};
  }
  if (j.contains("offset_window")) {
    const auto w = j["offset_window"].get<std::vector<std::string>>();
    if (w.size() != 2) throw ValidationError("offset_window needs two clock times");
    c.offset_window = {parse_clock(w[0], "offset_window"), parse_clock(w[1], "offset_window")};
  }
  return c;
}

inline Outcome outcome_from_string(const std::string& s) {
  if (s == "duration") return Outcome::Duration;
  if (s == "duration_24h") return Outcome::Duration24h;
  if (s == "onset") return Outcome::Onset;
  if (s == "midsleep") return Outcome::Midsleep;
  if (s == "offset") return Outcome::Offset;
  if (s == "short7") return Outcome::Short7;
  if (s == "short6") return Outcome::Short6;
  if (s == "short5") return Outcome::Short5;
  throw ValidationError("unknown outcome '" + s + "'");
}

inline Treatment treatment_from_string(const std::string& s) {
  if (s == "tmin_linear") return Treatment::TminLinear;
  if (s == "tmin_binned") return Treatment::TminBinned;
  if (s == "tmin_binned_extended") return Treatment::TminBinnedExtended;
  if (s == "anomaly_linear") return Treatment::AnomalyLinear;
  if (s == "anomaly_binned") return Treatment::AnomalyBinned;
  if (s == "heat_index_binned") return Treatment::HeatIndexBinned;
  if (s == "tmin_spline") return Treatment::TminSpline;
  throw ValidationError("unknown treatment '" + s + "'");
}

inline ModelSpec modelspec_from_json(const json& j) {
  ModelSpec spec;
  spec.outcome = outcome_from_string(get_or<std::string>(j, "outcome", "duration"));
  spec.treatment = treatment_from_string(get_or<std::string>(j, "treatment", "tmin_linear"));
  const std::string controls = get_or<std::string>(j, "controls", "linear");
  if (controls == "none")
    spec.controls = ControlsForm::None;
  else if (controls == "linear")
    spec.controls = ControlsForm::Linear;
  else if (controls == "binned")
    spec.controls = ControlsForm::Binned;
  else
    throw ValidationError("unknown controls form '" + controls + "'");
  spec.include_tmin_normal = get_or(j, "include_tmin_normal", true);
  if (j.contains("interaction") && !j["interaction"].is_null()) {
    const json& it = j["interaction"];
    if (it.is_string()) {
      const std::string s = it.get<std::string>();
      if (s == "none")
        spec.interaction = InteractionKind::None;
      else if (s == "season")
        spec.interaction = InteractionKind::Season;
      else if (s == "summer_month")
        spec.interaction = InteractionKind::SummerMonth;
      else
        throw ValidationError("unknown interaction '" + s + "'");
    } else {
      spec.interaction = InteractionKind::Category;
      spec.interaction_column = get_or<std::string>(it, "category", "");
      spec.category_labels = get_or(it, "labels", std::vector<std::string>{});
    }
  }
  if (j.contains("fe")) spec.fe_dims = j["fe"].get<std::vector<std::string>>();
  const std::string plan = get_or<std::string>(j, "fe_plan", "adm1month");
  if (plan == "adm1month")
    spec.fe_plan = FePlan::Adm1Month;
  else if (plan == "adm1week")
    spec.fe_plan = FePlan::Adm1Week;
  else
    throw ValidationError("unknown fe_plan '" + plan + "'");
  spec.cluster_dim = get_or<std::string>(j, "cluster", "admin1");
  spec.spline_knots = get_or(j, "spline_knots", std::vector<double>{-20.0, 10.0});
  spec.validate();
  return spec;
}

inline SynthConfig synth_from_json(const json& j) {
  SynthConfig c;
  c.seed = get_or<std::uint64_t>(j, "seed", 1);
  c.n_users = get_or(j, "n_users", c.n_users);
  c.n_nights = get_or(j, "n_nights", c.n_nights);
  c.n_admin1 = get_or(j, "n_admin1", c.n_admin1);
  c.stations_per_admin = get_or(j, "stations_per_admin", c.stations_per_admin);
  if (j.contains("start_date"))
    c.start_date = parse_date(j["start_date"].get<std::string>(), "start_date");
  c.emit_epochs = get_or(j, "emit_epochs", c.emit_epochs);
  c.user_jitter_deg = get_or(j, "user_jitter_deg", c.user_jitter_deg);
  const std::string tm = get_or<std::string>(j, "temp_model", "seasonal");
  if (tm == "seasonal")
    c.temp_model = SynthConfig::TempModel::Seasonal;
  else if (tm == "uniform")
    c.temp_model = SynthConfig::TempModel::Uniform;
  else
    throw ValidationError("unknown temp_model '" + tm + "'");
  if (j.contains("uniform_range")) {
    const auto r = j["uniform_range"].get<std::vector<double>>();
    if (r.size() != 2 || !(r[0] < r[1])) throw ValidationError("uniform_range needs [lo, hi]");
    c.uniform_lo = r[0];
    c.uniform_hi = r[1];
  }
  c.lat_lo = get_or(j, "lat_lo", c.lat_lo);
  c.lat_hi = get_or(j, "lat_hi", c.lat_hi);
  c.admin_day_shock_sd = get_or(j, "admin_day_shock_sd", c.admin_day_shock_sd);
  c.missing_tmin_rate = get_or(j, "missing_tmin_rate", c.missing_tmin_rate);
  c.base_duration_min = get_or(j, "base_duration_min", c.base_duration_min);
  c.user_effect_sd = get_or(j, "user_effect_sd", c.user_effect_sd);
  c.date_effect_sd = get_or(j, "date_effect_sd", c.date_effect_sd);
  c.noise_sd = get_or(j, "noise_sd", c.noise_sd);
  c.base_onset_min = get_or(j, "base_onset_min", c.base_onset_min);
  c.onset_tmin_slope = get_or(j, "onset_tmin_slope", c.onset_tmin_slope);
  c.p_wake_gap = get_or(j, "p_wake_gap", c.p_wake_gap);
  c.p_nap = get_or(j, "p_nap", c.p_nap);
  c.history_years = get_or(j, "history_years", c.history_years);
  c.emit_grid = get_or(j, "emit_grid", c.emit_grid);
  c.grid_carries_temperature = get_or(j, "grid_carries_temperature", c.grid_carries_temperature);
  c.category_column = get_or<std::string>(j, "category_column", "");
  c.category_labels = get_or(j, "category_labels", std::vector<std::string>{});
  if (j.contains("truth")) {
    const json& t = j["truth"];
    const std::string kind = get_or<std::string>(t, "kind", "linear");
    if (kind == "linear") {
      c.truth.kind = SynthTruth::Kind::Linear;
      c.truth.slope = get_or(t, "slope", c.truth.slope);
    } else if (kind == "kinked") {
      c.truth.kind = SynthTruth::Kind::Kinked;
      c.truth.slope_below = get_or(t, "slope_below", c.truth.slope_below);
      c.truth.slope_above = get_or(t, "slope_above", c.truth.slope_above);
      c.truth.knot = get_or(t, "knot", c.truth.knot);
    } else if (kind == "binned") {
      c.truth.kind = SynthTruth::Kind::Binned;
      c.truth.bin_edges = get_or(t, "edges", std::vector<double>{});
      c.truth.bin_values = get_or(t, "values", std::vector<double>{});
    } else if (kind == "by_category") {
      c.truth.kind = SynthTruth::Kind::ByCategory;
      c.truth.category_slopes = get_or(t, "category_slopes", std::vector<double>{});
    } else if (kind == "by_season") {
      c.truth.kind = SynthTruth::Kind::BySeason;
      if (t.contains("season_slopes")) {
        const json& s = t["season_slopes"];
        c.truth.season_slopes = {get_or(s, "winter", -0.20), get_or(s, "spring", -0.25),
                                 get_or(s, "summer", -0.55), get_or(s, "fall", -0.35)};
      }
    } else {
      throw ValidationError("unknown truth kind '" + kind + "'");
    }
  }
  if (j.contains("scenario")) {
    const json& s = j["scenario"];
    c.scenario.n_models = get_or(s, "n_models", 0);
    c.scenario.n_lat = get_or(s, "n_lat", c.scenario.n_lat);
    c.scenario.n_lon = get_or(s, "n_lon", c.scenario.n_lon);
    c.scenario.baseline_year = get_or(s, "baseline_year", 2010);
    c.scenario.years = get_or(s, "years", std::vector<int>{2050, 2099});
    c.scenario.warming_2050 = get_or(s, "warming_2050", c.scenario.warming_2050);
    c.scenario.warming_2099 = get_or(s, "warming_2099", c.scenario.warming_2099);
    c.scenario.model_spread = get_or(s, "model_spread", c.scenario.model_spread);
    c.scenario.polar_amp = get_or(s, "polar_amp", c.scenario.polar_amp);
    c.scenario.with_country_mask = get_or(s, "with_country_mask", true);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Run manifest: config echo, input/output hashes. Deterministic content.
// ---------------------------------------------------------------------------

class ManifestBuilder {
 public:
  ManifestBuilder(std::string subcommand, json config, std::uint64_t seed)
      : subcommand_(std::move(subcommand)), config_(std::move(config)), seed_(seed) {}

  void note_input(const std::string& path) { inputs_[path] = file_hash_hex(path); }
  void note_output(const std::string& path) { outputs_[path] = file_hash_hex(path); }

  void write(const std::string& path) const {
    json m;
    m["tool"] = kToolVersion;
    m["subcommand"] = subcommand_;
    m["seed"] = seed_;
    m["config"] = config_;
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    write_file_atomic(path, m.dump(2) + "\n");
  }

 private:
  std::string subcommand_;
  json config_;
  std::uint64_t seed_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
};

inline std::string out_path(const std::string& out_dir, const std::string& name) {
  std::filesystem::create_directories(out_dir);
  return (std::filesystem::path(out_dir) / name).string();
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

inline json truth_to_json(const SynthConfig& cfg) {
  json t;
  switch (cfg.truth.kind) {
    case SynthTruth::Kind::Linear:
      t["kind"] = "linear";
      t["slope"] = cfg.truth.slope;
      break;
    case SynthTruth::Kind::Kinked:
      t["kind"] = "kinked";
      t["slope_below"] = cfg.truth.slope_below;
      t["slope_above"] = cfg.truth.slope_above;
      t["knot"] = cfg.truth.knot;
      break;
    case SynthTruth::Kind::Binned:
      t["kind"] = "binned";
      t["edges"] = cfg.truth.bin_edges;
      t["values"] = cfg.truth.bin_values;
      break;
    case SynthTruth::Kind::ByCategory:
      t["kind"] = "by_category";
      t["category_labels"] = cfg.category_labels;
      t["category_slopes"] = cfg.truth.category_slopes;
      break;
    case SynthTruth::Kind::BySeason:
      t["kind"] = "by_season";
      t["season_slopes"] = {{"winter", cfg.truth.season_slopes[0]},
                            {"spring", cfg.truth.season_slopes[1]},
                            {"summer", cfg.truth.season_slopes[2]},
                            {"fall", cfg.truth.season_slopes[3]}};
      break;
  }
  return t;
}

inline std::vector<std::string> run_synth(const json& config, std::uint64_t seed,
                                          const std::string& out_dir) {
  SynthConfig cfg = synth_from_json(require_section(config, "synth"));
  cfg.seed = seed;
  const SynthData data = generate_synth(cfg);

  std::vector<std::string> written;
  auto emit = [&](const std::string& name, auto&& writer) {
    const std::string p = out_path(out_dir, name);
    writer(p);
    written.push_back(p);
  };

  std::vector<std::string> cat_cols;
  if (!cfg.category_labels.empty())
    cat_cols.push_back(cfg.category_column.empty() ? "age_group" : cfg.category_column);
  emit("users.csv", [&](const std::string& p) { write_users_csv(p, data.users, cat_cols); });
  emit("stations.csv", [&](const std::string& p) { write_stations_csv(p, data.station_rows); });
  if (!data.history_rows.empty())
    emit("stations_history.csv",
         [&](const std::string& p) { write_stations_csv(p, data.history_rows); });
  if (cfg.emit_grid)
    emit("grid.csv", [&](const std::string& p) {
      write_grid_csv(p, data.grid_rows, cfg.grid_carries_temperature);
    });
  emit("normals.csv", [&](const std::string& p) { write_normals_csv(p, data.normals_rows); });
  if (cfg.emit_epochs)
    emit("epochs.csv", [&](const std::string& p) { write_epochs_csv(p, data.epochs); });
  else
    emit("sleep_records.csv",
         [&](const std::string& p) { write_sleep_records_csv(p, data.records); });
  for (const auto& f : data.scenario_files) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "scenario_%s_%d.csv", f.model.c_str(), f.year);
    emit(buf, [&](const std::string& p) { write_scenario_grid_csv(p, f); });
  }
  if (!data.country_mask_rows.empty())
    emit("country_mask.csv",
         [&](const std::string& p) { write_country_mask_csv(p, data.country_mask_rows); });

  json truth;
  truth["seed"] = cfg.seed;
  truth["n_users"] = cfg.n_users;
  truth["n_nights"] = cfg.n_nights;
  truth["n_admin1"] = cfg.n_admin1;
  truth["base_duration_min"] = cfg.base_duration_min;
  truth["noise_sd"] = cfg.noise_sd;
  truth["user_effect_sd"] = cfg.user_effect_sd;
  truth["date_effect_sd"] = cfg.date_effect_sd;
  truth["temp_model"] =
      cfg.temp_model == SynthConfig::TempModel::Uniform ? "uniform" : "seasonal";
  truth["truth"] = truth_to_json(cfg);
  const std::string tp = out_path(out_dir, "truth.json");
  write_file_atomic(tp, truth.dump(2) + "\n");
  written.push_back(tp);

  ManifestBuilder manifest("synth", config, seed);
  for (const std::string& p : written) manifest.note_output(p);
  const std::string mp = out_path(out_dir, "synth_manifest.json");
  manifest.write(mp);
  return written;
}

// ---------------------------------------------------------------------------
// Shared input loading for fit/margins.
// ---------------------------------------------------------------------------

struct LoadedInputs {
  std::vector<SleepRecord> records;
  std::map<std::string, UserInfo> users;
  StationTable stations;
  std::optional<GridTable> grid;
  std::unique_ptr<NormalsProvider> normals;
  StationTable history;  // owned storage backing ArchiveNormals
  std::optional<GridTable> history_grid;
  ExclusionReport exclusion;
  std::vector<std::string> consumed;  // for the manifest
  std::vector<std::string> produced;
};

class NullNormals final : public NormalsProvider {
 public:
  std::optional<double> normal(double, double, int, int, std::size_t) const override {
    return std::nullopt;
  }
};

inline LoadedInputs load_fit_inputs(const json& config, const std::string& config_dir,
                                    const std::string& out_dir) {
  const json& io = require_section(config, "inputs");
  LoadedInputs in;
  auto path_of = [&](const char* key) -> std::optional<std::string> {
    const std::string p = get_or<std::string>(io, key, "");
    if (p.empty()) return std::nullopt;
    return resolve_path(config_dir, p);
  };

  const auto users_p = path_of("users");
  if (!users_p) throw ValidationError("inputs.users is required");
  in.users = read_users_csv(*users_p);
  in.consumed.push_back(*users_p);

  if (const auto p = path_of("records")) {
    in.records = read_sleep_records_csv(*p);
    in.consumed.push_back(*p);
  } else if (const auto ep = path_of("epochs")) {
    const auto streams = read_epochs_csv(*ep);
    in.consumed.push_back(*ep);
    const int bridge = get_or(config, "bridge_gap_min", 60);
    std::vector<SleepRecord> records;
    std::vector<NapRecord> naps;
    for (const EpochStream& s : streams) {
      AggregationResult agg = aggregate_epochs(s, {19 * 60, 8 * 60}, bridge);
      records.insert(records.end(), agg.records.begin(), agg.records.end());
      naps.insert(naps.end(), agg.naps.begin(), agg.naps.end());
    }
    daily_total_24h(records, naps);
    in.records = std::move(records);
    const std::string rp = out_path(out_dir, "sleep_records.csv");
    write_sleep_records_csv(rp, in.records);
    in.produced.push_back(rp);
  } else {
    throw ValidationError("inputs needs either 'records' or 'epochs'");
  }

  if (get_or(config.contains("inclusion") ? config["inclusion"] : json::object(), "apply", true)) {
    const InclusionConfig inc =
        inclusion_from_json(config.contains("inclusion") ? config["inclusion"] : json::object());
    FilterOutcome fo = apply_filters(in.records, inc);
    in.exclusion = fo.report;
    in.records = std::move(fo.kept);
  }

  const auto stations_p = path_of("stations");
  if (!stations_p) throw ValidationError("inputs.stations is required");
  in.stations = read_stations_csv(*stations_p);
  in.consumed.push_back(*stations_p);

  if (const auto p = path_of("grid")) {
    in.grid = read_grid_csv(*p);
    in.consumed.push_back(*p);
  }

  if (const auto p = path_of("normals")) {
    auto table = std::make_unique<NormalsTable>(read_normals_csv(*p));
    in.consumed.push_back(*p);
    in.normals = std::move(table);
  } else if (const auto hp = path_of("stations_history")) {
    in.history = read_stations_csv(*hp);
    in.consumed.push_back(*hp);
    NormalConfig nc;
    nc.year_lo = get_or(config, "normal_year_lo", 1981);
    nc.year_hi = get_or(config, "normal_year_hi", 2010);
    in.normals = std::make_unique<ArchiveNormals>(&in.history,
                                                  in.grid ? &in.grid.value() : nullptr, nc);
  } else {
    in.normals = std::make_unique<NullNormals>();
  }
  return in;
}

// ---------------------------------------------------------------------------
// fit / margins
// ---------------------------------------------------------------------------

inline json fit_to_json(const FitResult& fit) {
  json coeffs = json::array();
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    const double b = fit.beta[static_cast<Eigen::Index>(i)];
    const double se = fit.se(i);
    json c;
    c["name"] = fit.names[i];
    c["estimate"] = b;
    c["se"] = se;
    c["ci_lo"] = b - 1.96 * se;
    c["ci_hi"] = b + 1.96 * se;
    const double z = se > 0 ? b / se : 0.0;
    c["z"] = z;
    c["p"] = se > 0 ? normal_two_sided_p(z) : 1.0;
    coeffs.push_back(c);
  }
  json vc = json::array();
  for (Eigen::Index i = 0; i < fit.vcov.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < fit.vcov.cols(); ++j) row.push_back(fit.vcov(i, j));
    vc.push_back(row);
  }
  json out;
  out["coefficients"] = coeffs;
  out["vcov"] = vc;
  out["dropped_columns"] = fit.dropped_columns;
  out["n_obs"] = fit.n_obs;
  out["n_clusters"] = fit.n_clusters;
  out["dropped_singletons"] = fit.dropped_singletons;
  out["k_absorbed"] = fit.k_absorbed;
  out["converged"] = fit.converged;
  out["iterations"] = fit.iterations;
  out["demean_delta"] = fit.demean_delta;
  return out;
}

struct FitArtifacts {
  FitResult fit;
  DesignResult design;
  std::vector<std::string> written;
};

inline FitArtifacts run_fit_core(const json& config, std::uint64_t seed,
                                 const std::string& config_dir, const std::string& out_dir,
                                 ManifestBuilder& manifest) {
  (void)seed;  // estimation is deterministic; the seed is manifest metadata
  FitArtifacts art;
  const ModelSpec spec = modelspec_from_json(require_section(config, "model"));

  // Direct panel path bypasses linkage entirely.
  const json& io = require_section(config, "inputs");
  if (const std::string pp = get_or<std::string>(io, "panel", ""); !pp.empty()) {
    const std::string panel_path = resolve_path(config_dir, pp);
    const Panel panel = read_panel_csv(panel_path);
    manifest.note_input(panel_path);
    art.fit = fit(panel);
    json fj = fit_to_json(art.fit);
    fj["model"] = config["model"];
    const std::string fp = out_path(out_dir, "fit.json");
    write_file_atomic(fp, fj.dump(2) + "\n");
    art.written.push_back(fp);
    return art;
  }

  LoadedInputs in = load_fit_inputs(config, config_dir, out_dir);
  for (const std::string& p : in.consumed) manifest.note_input(p);

  const json weather_cfg = config.contains("weather") ? config["weather"] : json::object();
  ExposureOptions eo;
  const std::string source = get_or<std::string>(weather_cfg, "source", "station");
  if (source == "station")
    eo.source = WeatherSource::Station;
  else if (source == "grid")
    eo.source = WeatherSource::Grid;
  else
    throw ValidationError("unknown weather source '" + source + "'");
  eo.radius_km = get_or(weather_cfg, "radius_km", 100.0);

  const std::vector<Exposure> exposures = assemble_exposures(
      in.records, in.users, in.stations, in.grid ? &in.grid.value() : nullptr, *in.normals, eo);
  const std::string xp = out_path(out_dir, "exposures.csv");
  write_exposures_csv(xp, exposures);
  art.written.push_back(xp);

  art.design = build_design(spec, in.records, exposures, in.users);
  art.fit = fit(art.design.panel);

  json fj = fit_to_json(art.fit);
  fj["model"] = config["model"];
  json build;
  build["n_input"] = art.design.report.n_input;
  build["n_missing_dropped"] = art.design.report.n_missing_dropped;
  build["n_interaction_excluded"] = art.design.report.n_interaction_excluded;
  build["n_rows"] = art.design.report.n_rows;
  fj["design"] = build;
  json excl;
  excl["n_input"] = in.exclusion.n_input;
  excl["n_excluded_duration"] = in.exclusion.n_excluded_duration;
  excl["n_excluded_onset"] = in.exclusion.n_excluded_onset;
  excl["n_excluded_offset"] = in.exclusion.n_excluded_offset;
  excl["n_users"] = in.exclusion.n_users;
  excl["n_users_kept"] = in.exclusion.n_users_kept;
  excl["n_kept"] = in.exclusion.n_kept;
  fj["inclusion"] = excl;
  if (spec.treatment == Treatment::TminSpline) {
    const SplineModel sm = spline_from_fit(art.fit, art.design.spline_columns, spec.spline_knots);
    json sp;
    sp["knots"] = sm.knots;
    sp["base_slope"] = sm.base_slope;
    sp["hinge_slopes"] = sm.hinge_slopes;
    sp["segment_slopes"] = sm.segment_slopes();
    fj["spline"] = sp;
  }
  const std::string fp = out_path(out_dir, "fit.json");
  write_file_atomic(fp, fj.dump(2) + "\n");
  art.written.push_back(fp);

  if (art.design.treatment_scheme) {
    const ResponseCurve curve =
        response_curve(art.fit, *art.design.treatment_scheme, art.design.treatment_histogram,
                       outcome_units(spec.outcome));
    const std::string cp = out_path(out_dir, "curve.csv");
    write_curve_csv(cp, curve);
    art.written.push_back(cp);
  }
  return art;
}

inline std::vector<std::string> run_fit(const json& config, std::uint64_t seed,
                                        const std::string& config_dir, const std::string& out_dir) {
  ManifestBuilder manifest("fit", config, seed);
  FitArtifacts art = run_fit_core(config, seed, config_dir, out_dir, manifest);
  for (const std::string& p : art.written) manifest.note_output(p);
  const std::string mp = out_path(out_dir, "fit_manifest.json");
  manifest.write(mp);
  art.written.push_back(mp);
  return art.written;
}

inline std::vector<std::string> run_margins(const json& config, std::uint64_t seed,
                                            const std::string& config_dir,
                                            const std::string& out_dir) {
  ManifestBuilder manifest("margins", config, seed);
  FitArtifacts art = run_fit_core(config, seed, config_dir, out_dir, manifest);
  if (art.design.interaction_columns.empty())
    throw ValidationError("margins requires an interacted model (set model.interaction)");
  const MarginsResult mr =
      marginal_effects(art.fit, art.design.interaction_columns, art.design.interaction_labels,
                       art.design.interaction_counts);
  json out;
  json effects = json::array();
  for (const MarginalEffect& e : mr.effects) {
    json m;
    m["category"] = e.category;
    m["slope"] = e.slope;
    m["se"] = e.se;
    m["ci_lo"] = e.ci_lo;
    m["ci_hi"] = e.ci_hi;
    m["n_obs"] = e.n_obs;
    effects.push_back(m);
  }
  json pairs = json::array();
  for (const PairwiseTest& t : mr.pairs) {
    json p;
    p["a"] = t.a;
    p["b"] = t.b;
    p["diff"] = t.diff;
    p["se"] = t.se;
    p["z"] = t.z;
    p["p"] = t.p;
    pairs.push_back(p);
  }
  out["effects"] = effects;
  out["pairwise"] = pairs;
  const std::string mp2 = out_path(out_dir, "margins.json");
  write_file_atomic(mp2, out.dump(2) + "\n");
  art.written.push_back(mp2);
  for (const std::string& p : art.written) manifest.note_output(p);
  const std::string mp = out_path(out_dir, "margins_manifest.json");
  manifest.write(mp);
  art.written.push_back(mp);
  return art.written;
}

// ---------------------------------------------------------------------------
// project
// ---------------------------------------------------------------------------

inline SplineModel spline_from_config(const json& proj, const std::string& config_dir,
                                      ManifestBuilder& manifest) {
  if (proj.contains("spline")) {
    const json& s = proj["spline"];
    SplineModel m;
    m.knots = get_or(s, "knots", std::vector<double>{-20.0, 10.0});
    m.base_slope = get_or(s, "base_slope", 0.0);
    m.hinge_slopes = get_or(s, "hinge_slopes", std::vector<double>{});
    m.validate();
    return m;
  }
  const std::string fp = get_or<std::string>(proj, "fit", "");
  if (fp.empty())
    throw ValidationError("projection needs either 'spline' slopes or a 'fit' fit.json path");
  const std::string path = resolve_path(config_dir, fp);
  manifest.note_input(path);
  json fj;
  try {
    fj = json::parse(read_file_bytes(path));
  } catch (const json::exception& e) {
    throw ValidationError(path + ": invalid JSON: " + e.what());
  }
  if (!fj.contains("spline"))
    throw ValidationError(path + " carries no spline block (fit with treatment tmin_spline)");
  SplineModel m;
  m.knots = fj["spline"]["knots"].get<std::vector<double>>();
  m.base_slope = fj["spline"]["base_slope"].get<double>();
  m.hinge_slopes = fj["spline"]["hinge_slopes"].get<std::vector<double>>();
  m.validate();
  return m;
}

inline std::vector<std::string> run_project(const json& config, std::uint64_t seed,
                                            const std::string& config_dir,
                                            const std::string& out_dir) {
  ManifestBuilder manifest("project", config, seed);
  const json& proj = require_section(config, "projection");
  const SplineModel model = spline_from_config(proj, config_dir, manifest);

  if (!proj.contains("models") || !proj["models"].is_array() || proj["models"].empty())
    throw ValidationError("projection.models must list at least one climate model");

  struct ModelInput {
    std::string name;
    ScenarioGrid baseline;
    std::map<int, ScenarioGrid> by_year;
  };
  std::vector<ModelInput> inputs;
  for (const json& mj : proj["models"]) {
    ModelInput mi;
    mi.name = get_or<std::string>(mj, "name", "model");
    const std::string bp = resolve_path(config_dir, mj.at("baseline").get<std::string>());
    manifest.note_input(bp);
    mi.baseline = read_scenario_grid_csv(bp);
    for (const auto& [year_str, path_j] : mj.at("years").items()) {
      const int year = static_cast<int>(parse_int(year_str, "projection year"));
      const std::string yp = resolve_path(config_dir, path_j.get<std::string>());
      manifest.note_input(yp);
      mi.by_year.emplace(year, read_scenario_grid_csv(yp));
    }
    inputs.push_back(std::move(mi));
  }

  std::optional<CountryMask> mask;
  if (const std::string mp = get_or<std::string>(proj, "country_mask", ""); !mp.empty()) {
    const std::string path = resolve_path(config_dir, mp);
    manifest.note_input(path);
    mask = read_country_mask_csv(path);
  }
  const double avg_night_hours = get_or(proj, "avg_night_hours", 0.0);

  std::vector<std::string> written;
  const std::string pp = out_path(out_dir, "projection.csv");
  CsvWriter per_model(pp, {"lat", "lon", "model", "year", "loss_hours"});
  const std::string ep = out_path(out_dir, "projection_ensemble.csv");
  CsvWriter ensemble_csv(ep, {"lat", "lon", "year", "loss_hours"});
  const std::string gp = out_path(out_dir, "projection_global.csv");
  std::vector<std::string> global_header = {"model", "year", "loss_hours"};
  if (avg_night_hours > 0) global_header.push_back("nights_equivalent");
  CsvWriter global_csv(gp, global_header);

  std::map<int, std::vector<ModelLossGrid>> grids_by_year;
  std::set<int> years;
  for (const ModelInput& mi : inputs)
    for (const auto& [year, grid] : mi.by_year) years.insert(year);
  for (const int year : years) {
    std::vector<ModelLossGrid> grids;
    for (const ModelInput& mi : inputs) {
      const auto it = mi.by_year.find(year);
      if (it == mi.by_year.end())
        throw ValidationError("model '" + mi.name + "' lacks a grid for year " +
                              std::to_string(year));
      grids.push_back(project_annual_loss(mi.name, it->second, mi.baseline, model));
    }
    const EnsembleResult ens = ensemble_aggregate(grids);
    for (const ModelLossGrid& g : grids)
      for (const LossCell& cell : g.cells)
        per_model.write_row({fmt_double(cell.lat), fmt_double(cell.lon), g.model,
                             fmt_int(year), fmt_double(cell.loss_hours)});
    for (const LossCell& cell : ens.mean_cells)
      ensemble_csv.write_row(
          {fmt_double(cell.lat), fmt_double(cell.lon), fmt_int(year), fmt_double(cell.loss_hours)});
    for (const auto& [name, global] : ens.model_global) {
      std::vector<std::string> row = {name, fmt_int(year), fmt_double(global)};
      if (avg_night_hours > 0) row.push_back(fmt_double(global / avg_night_hours));
      global_csv.write_row(row);
    }
    grids_by_year.emplace(year, std::move(grids));
  }
  per_model.commit();
  ensemble_csv.commit();
  global_csv.commit();
  written.push_back(pp);
  written.push_back(ep);
  written.push_back(gp);

  if (mask) {
    const std::string cp = out_path(out_dir, "country_loss.csv");
    CsvWriter country_csv(cp, {"iso3", "year", "loss_hours"});
    for (const auto& [year, grids] : grids_by_year) {
      const CountryAggregate agg = country_aggregate(grids, *mask);
      for (const std::string& iso : agg.empty_countries)
        std::fprintf(stderr, "warning: country %s matches no grid cells; omitted\n", iso.c_str());
      for (const CountryLoss& cl : agg.losses)
        country_csv.write_row({cl.iso3, fmt_int(year), fmt_double(cl.loss_hours)});
    }
    country_csv.commit();
    written.push_back(cp);
  }

  for (const std::string& p : written) manifest.note_output(p);
  const std::string mp = out_path(out_dir, "project_manifest.json");
  manifest.write(mp);
  written.push_back(mp);
  return written;
}

// ---------------------------------------------------------------------------
// plot
// ---------------------------------------------------------------------------

inline std::vector<std::string> run_plot(const std::string& input_path, const std::string& out_dir,
                                         const std::string& output_name, const std::string& title,
                                         std::optional<int> year_filter) {
  CsvReader probe(input_path);
  const bool is_curve = probe.optional_col("bin_lo").has_value();
  const bool is_map = probe.optional_col("loss_hours").has_value();
  std::string svg;
  if (is_curve) {
    const ResponseCurve curve = read_curve_csv(input_path);
    svg = render_curve_svg(curve, title);
  } else if (is_map) {
    CsvReader in(input_path);
    const std::size_t c_lat = in.col("lat"), c_lon = in.col("lon");
    const std::size_t c_loss = in.col("loss_hours");
    const auto c_year = in.optional_col("year");
    if (in.optional_col("model"))
      throw ValidationError(
          "plot expects the ensemble grid (projection_ensemble.csv), not per-model rows");
    std::set<long long> years_seen;
    std::vector<MapCell> cells;
    while (in.next()) {
      long long year = 0;
      if (c_year) {
        year = parse_int(in.field(*c_year), in.context("year"));
        years_seen.insert(year);
        if (year_filter && year != *year_filter) continue;
      }
      cells.push_back(MapCell{in.num_field(c_lat, "lat"), in.num_field(c_lon, "lon"),
                              in.num_field(c_loss, "loss_hours")});
    }
    if (!year_filter && years_seen.size() > 1) {
      std::string ys;
      for (const long long y : years_seen) ys += (ys.empty() ? "" : ", ") + std::to_string(y);
      throw ValidationError("grid holds several years (" + ys + "); pass --year");
    }
    if (cells.empty()) throw ValidationError("no grid cells to plot");
    svg = render_loss_map_svg(cells, title);
  } else {
    throw ValidationError(input_path + ": neither a curve.csv nor a projection grid");
  }
  const std::string sp = out_path(out_dir, output_name);
  write_file_atomic(sp, svg);

  ManifestBuilder manifest("plot", json{{"input", input_path}, {"title", title}}, 0);
  manifest.note_input(input_path);
  manifest.note_output(sp);
  const std::string mp = out_path(out_dir, "plot_manifest.json");
  manifest.write(mp);
  return {sp, mp};
}

}  // namespace thermosleep
