#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "thermosleep/response_models.hpp"
#include "thermosleep/sleep_ingest.hpp"
#include "thermosleep/weather_link.hpp"

namespace thermosleep {

// ---------------------------------------------------------------------------
// Seeded synthetic worlds: admin geography, station weather with a known
// seasonal structure, and sleep records whose durations follow a configurable
// ground-truth dose response. Every draw comes from streams derived from one
// seed, so outputs are byte-identical across runs and thread counts.
// ---------------------------------------------------------------------------

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed ^ (stream * 0x9E3779B97F4A7C15ull + 0xD1B54A32D192ED03ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

struct SynthTruth {
  enum class Kind { Linear, Kinked, Binned, ByCategory, BySeason };
  Kind kind = Kind::Linear;
  double slope = -0.30;  // linear, min/deg C
  double slope_below = -0.05;
  double slope_above = -0.45;
  double knot = 10.0;
  std::vector<double> bin_edges;   // binned step truth
  std::vector<double> bin_values;  // edges.size() + 1 entries
  std::vector<double> category_slopes;             // parallel to category labels
  std::array<double, 4> season_slopes{-0.20, -0.25, -0.55, -0.35};  // winter,spring,summer,fall

  double eval(double tmin, int category, Season season) const {
    switch (kind) {
      case Kind::Linear: return slope * tmin;
      case Kind::Kinked:
        return slope_below * std::min(tmin, knot) + slope_above * std::max(0.0, tmin - knot);
      case Kind::Binned: {
        std::size_t b = 0;
        while (b < bin_edges.size() && tmin >= bin_edges[b]) ++b;
        return bin_values.at(b);
      }
      case Kind::ByCategory:
        return category_slopes.at(static_cast<std::size_t>(category)) * tmin;
      case Kind::BySeason:
        return season_slopes[static_cast<std::size_t>(season)] * tmin;
    }
    return 0.0;
  }
};

struct ScenarioConfig {
  int n_models = 0;  // 0 => no scenario grids
  int n_lat = 4;
  int n_lon = 6;
  double lat_lo = -50.0, lat_hi = 60.0;
  double lon_lo = -150.0, lon_hi = 160.0;
  int baseline_year = 2010;
  std::vector<int> years = {2050, 2099};
  double warming_2050 = 1.2;
  double warming_2099 = 3.2;
  double model_spread = 0.4;    // relative spread across the model ensemble
  double polar_amp = 0.3;       // relative extra warming toward the poles
  bool with_country_mask = true;
};

struct SynthConfig {
  std::uint64_t seed = 1;
  int n_users = 20;
  int n_nights = 60;
  int n_admin1 = 6;
  int stations_per_admin = 1;
  int admin2_per_admin1 = 3;
  CivilDate start_date{2016, 1, 1};
  bool emit_epochs = true;  // false: records at panel scale, no minute epochs
  double user_jitter_deg = 0.0;

  enum class TempModel { Seasonal, Uniform };
  TempModel temp_model = TempModel::Seasonal;
  double uniform_lo = -5.0;
  double uniform_hi = 30.0;
  double lat_lo = -45.0;
  double lat_hi = 55.0;
  double admin_day_shock_sd = 2.0;
  double missing_tmin_rate = 0.0;

  double base_duration_min = 440.0;
  double user_effect_sd = 25.0;
  double date_effect_sd = 6.0;
  double noise_sd = 5.0;
  double base_onset_min = 660.0;  // 23:00 as minutes from noon
  double onset_user_sd = 20.0;
  double onset_noise_sd = 10.0;
  double onset_tmin_slope = 0.0;

  SynthTruth truth;
  std::string category_column;              // e.g. "age_group"; empty => none
  std::vector<std::string> category_labels; // users assigned round-robin

  // epoch-mode texture
  double p_wake_gap = 0.2;
  int wake_gap_min = 25;
  double p_nap = 0.1;
  int nap_len_min = 45;

  int history_years = 0;  // stations_history depth, mapped into 1981..
  bool emit_grid = true;
  bool grid_carries_temperature = false;

  ScenarioConfig scenario;

  void validate() const {
    if (n_users < 1 || n_nights < 1 || n_admin1 < 1 || stations_per_admin < 1)
      throw ValidationError("synth: counts must be positive");
    if (!category_labels.empty() && truth.kind == SynthTruth::Kind::ByCategory &&
        truth.category_slopes.size() != category_labels.size())
      throw ValidationError("synth: one category slope per label required");
    if (truth.kind == SynthTruth::Kind::ByCategory && category_labels.empty())
      throw ValidationError("synth: by-category truth needs category labels");
    if (truth.kind == SynthTruth::Kind::Binned &&
        truth.bin_values.size() != truth.bin_edges.size() + 1)
      throw ValidationError("synth: binned truth needs edges+1 values");
    if (history_years < 0 || history_years > 30)
      throw ValidationError("synth: history_years must lie in [0, 30]");
  }
};

struct SynthData {
  std::map<std::string, UserInfo> users;
  std::vector<SleepRecord> records;    // record mode (or derived expectation)
  std::vector<EpochStream> epochs;     // epoch mode
  StationTable stations;
  StationTable station_history;
  GridTable grid;
  NormalsTable normals;
  // raw rows for byte-stable CSV emission
  std::vector<StationDay> station_rows;
  std::vector<StationDay> history_rows;
  std::vector<GridDay> grid_rows;
  struct NormalsRow {
    double lat, lon;
    int doy;
    std::array<std::optional<double>, kNumWeatherVars> v;
  };
  std::vector<NormalsRow> normals_rows;
  struct ScenarioFile {
    std::string model;
    int year;  // baseline year included
    std::vector<std::tuple<double, double, int, double>> rows;  // lat, lon, doy, tmin
  };
  std::vector<ScenarioFile> scenario_files;
  std::vector<std::tuple<double, double, std::string>> country_mask_rows;
};

namespace detail {

struct AdminGeo {
  std::string name;
  double lat = 0.0;
  double lon = 0.0;
  int utc_offset_min = 0;
};

inline double seasonal_mean_tmin(double lat, int doy) {
  // Warmer toward the equator; seasonal cycle peaks mid-July north of the
  // equator and mid-January south of it.
  const double base = 26.0 - 0.38 * std::abs(lat);
  const double amp = 2.0 + 0.14 * std::abs(lat);
  const double peak_doy = lat >= 0.0 ? 196.0 : 15.0;
  return base + amp * std::cos(2.0 * 3.14159265358979323846 * (doy - peak_doy) / 365.0);
}

}  // namespace detail

inline SynthData generate_synth(const SynthConfig& cfg) {
  cfg.validate();
  SynthData out;

  // --- geography -----------------------------------------------------------
  std::vector<detail::AdminGeo> admins;
  for (int k = 0; k < cfg.n_admin1; ++k) {
    detail::AdminGeo g;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "ADM1_%03d", k);
    g.name = buf;
    const double f = cfg.n_admin1 == 1 ? 0.5 : static_cast<double>(k) / (cfg.n_admin1 - 1);
    g.lat = cfg.lat_lo + f * (cfg.lat_hi - cfg.lat_lo);
    g.lon = -150.0 + f * 300.0;
    g.utc_offset_min = static_cast<int>(std::lround(g.lon / 15.0)) * 60;
    admins.push_back(g);
  }

  struct StationGeo {
    std::string id;
    int admin = 0;
    double lat = 0.0, lon = 0.0;
  };
  std::vector<StationGeo> stations;
  for (int k = 0; k < cfg.n_admin1; ++k) {
    for (int s = 0; s < cfg.stations_per_admin; ++s) {
      StationGeo st;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "ST_%03d_%02d", k, s);
      st.id = buf;
      st.admin = k;
      st.lat = admins[static_cast<std::size_t>(k)].lat + 0.08 * s;
      st.lon = admins[static_cast<std::size_t>(k)].lon + 0.05 * s;
      stations.push_back(st);
    }
  }

  Rng user_geo_rng(mix_seed(cfg.seed, 11));
  for (int u = 0; u < cfg.n_users; ++u) {
    UserInfo info;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "U%05d", u);
    info.user_id = buf;
    const int k = u % cfg.n_admin1;
    info.admin1 = admins[static_cast<std::size_t>(k)].name;
    info.admin2 = info.admin1 + "_" + std::to_string(u % cfg.admin2_per_admin1);
    info.lat = admins[static_cast<std::size_t>(k)].lat +
               cfg.user_jitter_deg * (user_geo_rng.uniform() - 0.5);
    info.lon = admins[static_cast<std::size_t>(k)].lon +
               cfg.user_jitter_deg * (user_geo_rng.uniform() - 0.5);
    if (!cfg.category_labels.empty())
      info.categories[cfg.category_column.empty() ? "age_group" : cfg.category_column] =
          cfg.category_labels[static_cast<std::size_t>(u) % cfg.category_labels.size()];
    out.users.emplace(info.user_id, info);
  }

  // --- daily weather ---------------------------------------------------------
  const std::int64_t start_day = days_from_civil(cfg.start_date);
  std::map<std::pair<int, int>, std::array<std::optional<double>, kNumWeatherVars>> weather;
  for (int k = 0; k < cfg.n_admin1; ++k) {
    Rng rng(mix_seed(cfg.seed, 100 + static_cast<std::uint64_t>(k)));
    for (int d = 0; d < cfg.n_nights; ++d) {
      const CivilDate date = civil_from_days(start_day + d);
      std::array<std::optional<double>, kNumWeatherVars> v;
      double tmin;
      if (cfg.temp_model == SynthConfig::TempModel::Uniform) {
        tmin = rng.uniform(cfg.uniform_lo, cfg.uniform_hi);
      } else {
        tmin = detail::seasonal_mean_tmin(admins[static_cast<std::size_t>(k)].lat, day_of_year(date)) +
               rng.normal(0.0, cfg.admin_day_shock_sd);
      }
      v[0] = tmin;
      v[1] = tmin + 8.0 + std::abs(rng.normal(0.0, 1.5));        // tmax
      v[2] = std::max(0.0, rng.exponential(0.4) - 0.2);          // prcp, mostly dry
      v[3] = std::min(15.0, std::abs(rng.normal(3.0, 2.0)));     // wind
      v[4] = std::clamp(rng.uniform(0.0, 100.0), 0.0, 100.0);    // cloud
      v[5] = std::clamp(rng.normal(65.0, 12.0), 0.0, 100.0);     // rh
      if (cfg.missing_tmin_rate > 0.0 && rng.uniform() < cfg.missing_tmin_rate) v[0].reset();
      weather[{k, d}] = v;
    }
  }

  for (const StationGeo& st : stations) {
    for (int d = 0; d < cfg.n_nights; ++d) {
      const auto& v = weather.at({st.admin, d});
      StationDay row;
      row.station_id = st.id;
      row.lat = st.lat;
      row.lon = st.lon;
      row.date = civil_from_days(start_day + d);
      row.tmin_c = v[0];
      row.tmax_c = v[1];
      row.prcp_cm = v[2];
      out.station_rows.push_back(row);
      out.stations.add(row);
    }
  }

  if (cfg.emit_grid) {
    for (int k = 0; k < cfg.n_admin1; ++k) {
      for (int d = 0; d < cfg.n_nights; ++d) {
        const auto& v = weather.at({k, d});
        GridDay row;
        row.lat = admins[static_cast<std::size_t>(k)].lat;
        row.lon = admins[static_cast<std::size_t>(k)].lon;
        row.date = civil_from_days(start_day + d);
        row.value[3] = v[3];
        row.value[4] = v[4];
        row.value[5] = v[5];
        if (cfg.grid_carries_temperature) {
          row.value[0] = v[0];
          row.value[1] = v[1];
          row.value[2] = v[2];
        }
        out.grid_rows.push_back(row);
        out.grid.add(row);
      }
    }
  }

  // --- normals (the generator's own long-run means) -------------------------
  for (int k = 0; k < cfg.n_admin1; ++k) {
    for (int doy = 1; doy <= 365; ++doy) {
      SynthData::NormalsRow row;
      row.lat = admins[static_cast<std::size_t>(k)].lat;
      row.lon = admins[static_cast<std::size_t>(k)].lon;
      row.doy = doy;
      row.v[0] = cfg.temp_model == SynthConfig::TempModel::Uniform
                     ? (cfg.uniform_lo + cfg.uniform_hi) / 2.0
                     : detail::seasonal_mean_tmin(admins[static_cast<std::size_t>(k)].lat, doy);
      row.v[1] = 8.0 + 1.5 * 0.7978845608028654;  // mean of tmax - tmin
      row.v[2] = 0.281;                           // long-run precipitation mean
      row.v[3] = 3.33;
      row.v[4] = 50.0;
      row.v[5] = 65.0;
      out.normals_rows.push_back(row);
      out.normals.add(row.lat, row.lon, doy, row.v);
    }
  }

  // --- station history for archive-based normals ----------------------------
  if (cfg.history_years > 0) {
    for (const StationGeo& st : stations) {
      Rng rng(mix_seed(cfg.seed, 5000 + static_cast<std::uint64_t>(st.admin)));
      for (int y = 0; y < cfg.history_years; ++y) {
        const int year = 1981 + y;
        const std::int64_t first = days_from_civil(CivilDate{year, 1, 1});
        const int n_days = is_leap_year(year) ? 366 : 365;
        for (int d = 0; d < n_days; ++d) {
          const CivilDate date = civil_from_days(first + d);
          StationDay row;
          row.station_id = st.id;
          row.lat = st.lat;
          row.lon = st.lon;
          row.date = date;
          const double mean =
              cfg.temp_model == SynthConfig::TempModel::Uniform
                  ? (cfg.uniform_lo + cfg.uniform_hi) / 2.0
                  : detail::seasonal_mean_tmin(st.lat, day_of_year(date));
          row.tmin_c = mean + rng.normal(0.0, cfg.admin_day_shock_sd);
          row.tmax_c = *row.tmin_c + 8.0 + std::abs(rng.normal(0.0, 1.5));
          row.prcp_cm = std::max(0.0, rng.exponential(0.4) - 0.2);
          out.history_rows.push_back(row);
          out.station_history.add(row);
        }
      }
    }
  }

  // --- sleep outcomes --------------------------------------------------------
  Rng date_rng(mix_seed(cfg.seed, 21));
  std::vector<double> date_effect(static_cast<std::size_t>(cfg.n_nights));
  for (double& e : date_effect) e = date_rng.normal(0.0, cfg.date_effect_sd);

  const std::string cat_col = cfg.category_column.empty() ? "age_group" : cfg.category_column;
  for (int u = 0; u < cfg.n_users; ++u) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "U%05d", u);
    const UserInfo& info = out.users.at(buf);
    const int admin = u % cfg.n_admin1;
    Rng rng(mix_seed(cfg.seed, 1000000 + static_cast<std::uint64_t>(u)));
    const double user_eff = rng.normal(0.0, cfg.user_effect_sd);
    const double onset_eff = rng.normal(0.0, cfg.onset_user_sd);
    int category = -1;
    if (!cfg.category_labels.empty()) {
      const std::string& label = info.categories.at(cat_col);
      for (std::size_t c = 0; c < cfg.category_labels.size(); ++c)
        if (cfg.category_labels[c] == label) category = static_cast<int>(c);
    }

    EpochStream stream;
    stream.user_id = info.user_id;
    for (int d = 0; d < cfg.n_nights; ++d) {
      const CivilDate night = civil_from_days(start_day + d);
      const auto tmin_opt = match_stations(out.stations, info.lat, info.lon, night, WeatherVar::Tmin);
      if (!tmin_opt) {
        (void)rng.normal(0.0, 1.0);  // keep the stream aligned across nights
        (void)rng.normal(0.0, 1.0);
        continue;
      }
      const double tmin = *tmin_opt;
      const Season season = season_of(night, info.lat);
      const double g = cfg.truth.eval(tmin, category, season);
      const double duration =
          cfg.base_duration_min + user_eff + date_effect[static_cast<std::size_t>(d)] + g +
          rng.normal(0.0, cfg.noise_sd);
      const double onset = cfg.base_onset_min + onset_eff + cfg.onset_tmin_slope * tmin +
                           rng.normal(0.0, cfg.onset_noise_sd);
      const int onset_min = static_cast<int>(std::lround(onset));
      const int duration_min = std::max(1, static_cast<int>(std::lround(duration)));

      if (!cfg.emit_epochs) {
        SleepRecord r;
        r.user_id = info.user_id;
        r.night_date = night;
        r.onset_min = onset_min;
        r.offset_min = onset_min + duration_min;
        r.midsleep_min = (r.onset_min + r.offset_min) / 2.0;
        r.duration_min = duration_min;
        r.total_24h_min = duration_min;
        out.records.push_back(r);
        continue;
      }

      // Minute epochs around the night, with optional bridged wake gap and
      // an afternoon nap.
      const std::int64_t noon = civil_minutes(night, 720);
      const bool gap = rng.uniform() < cfg.p_wake_gap && duration_min > cfg.wake_gap_min + 20;
      const bool nap = rng.uniform() < cfg.p_nap;
      const int off = admins[static_cast<std::size_t>(admin)].utc_offset_min;
      auto push = [&](std::int64_t minute, bool asleep) {
        stream.epochs.push_back(Epoch{LocalTimestamp{minute, off}, asleep});
      };
      if (nap) {
        const std::int64_t nap_start = noon + 120;  // 14:00
        for (int m = -10; m < 0; ++m) push(nap_start + m, false);
        for (int m = 0; m < cfg.nap_len_min; ++m) push(nap_start + m, true);
        for (int m = 0; m < 10; ++m) push(nap_start + cfg.nap_len_min + m, false);
      }
      const std::int64_t sleep_start = noon + onset_min;
      for (int m = -30; m < 0; ++m) push(sleep_start + m, false);
      if (gap) {
        const int first_part = duration_min / 3;
        for (int m = 0; m < first_part; ++m) push(sleep_start + m, true);
        for (int m = 0; m < cfg.wake_gap_min; ++m) push(sleep_start + first_part + m, false);
        for (int m = 0; m < duration_min - first_part; ++m)
          push(sleep_start + first_part + cfg.wake_gap_min + m, true);
        for (int m = 0; m < 30; ++m)
          push(sleep_start + duration_min + cfg.wake_gap_min + m, false);
      } else {
        for (int m = 0; m < duration_min; ++m) push(sleep_start + m, true);
        for (int m = 0; m < 30; ++m) push(sleep_start + duration_min + m, false);
      }
    }
    if (cfg.emit_epochs && !stream.epochs.empty()) out.epochs.push_back(std::move(stream));
  }

  // --- scenario grids --------------------------------------------------------
  if (cfg.scenario.n_models > 0) {
    const ScenarioConfig& sc = cfg.scenario;
    std::vector<std::pair<double, double>> cells;
    for (int i = 0; i < sc.n_lat; ++i) {
      for (int j = 0; j < sc.n_lon; ++j) {
        const double flat = sc.n_lat == 1 ? 0.5 : static_cast<double>(i) / (sc.n_lat - 1);
        const double flon = sc.n_lon == 1 ? 0.5 : static_cast<double>(j) / (sc.n_lon - 1);
        cells.emplace_back(sc.lat_lo + flat * (sc.lat_hi - sc.lat_lo),
                           sc.lon_lo + flon * (sc.lon_hi - sc.lon_lo));
      }
    }
    auto warming = [&](int model, int year, double lat) {
      const double w = year == 2050 ? sc.warming_2050 : year == 2099 ? sc.warming_2099 : 0.0;
      const double u =
          sc.n_models == 1 ? 0.0
                           : 2.0 * static_cast<double>(model) / (sc.n_models - 1) - 1.0;
      return w * (1.0 + sc.model_spread * u) * (1.0 + sc.polar_amp * std::abs(lat) / 90.0);
    };
    for (int m = 0; m < sc.n_models; ++m) {
      char buf[24];
      std::snprintf(buf, sizeof(buf), "model_%02d", m);
      for (const bool is_baseline : {true, false}) {
        const std::vector<int> years = is_baseline ? std::vector<int>{sc.baseline_year} : sc.years;
        for (const int year : years) {
          SynthData::ScenarioFile file;
          file.model = buf;
          file.year = year;
          for (const auto& [lat, lon] : cells) {
            for (int doy = 1; doy <= 365; ++doy) {
              const double base = detail::seasonal_mean_tmin(lat, doy);
              const double t = is_baseline ? base : base + warming(m, year, lat);
              file.rows.emplace_back(lat, lon, doy, t);
            }
          }
          out.scenario_files.push_back(std::move(file));
        }
      }
    }
    if (sc.with_country_mask) {
      for (const auto& [lat, lon] : cells)
        out.country_mask_rows.emplace_back(lat, lon, lon < 0.0 ? "AAA" : "BBB");
    }
  }

  return out;
}

// ---------------------------------------------------------------------------
// CSV emission (deterministic row order).
// ---------------------------------------------------------------------------

inline void write_users_csv(const std::string& path, const std::map<std::string, UserInfo>& users,
                            const std::vector<std::string>& category_columns) {
  std::vector<std::string> header = {"user_id", "lat", "lon", "admin1", "admin2"};
  header.insert(header.end(), category_columns.begin(), category_columns.end());
  CsvWriter out(path, header);
  for (const auto& [id, u] : users) {
    std::vector<std::string> row = {id, fmt_double(u.lat), fmt_double(u.lon), u.admin1, u.admin2};
    for (const std::string& c : category_columns) {
      const auto it = u.categories.find(c);
      row.push_back(it == u.categories.end() ? std::string() : it->second);
    }
    out.write_row(row);
  }
  out.commit();
}

inline void write_stations_csv(const std::string& path, const std::vector<StationDay>& rows) {
  CsvWriter out(path, {"station_id", "lat", "lon", "date", "tmin_c", "tmax_c", "prcp_cm"});
  for (const StationDay& r : rows)
    out.write_row({r.station_id, fmt_double(r.lat), fmt_double(r.lon), date_to_string(r.date),
                   missing_or(r.tmin_c), missing_or(r.tmax_c), missing_or(r.prcp_cm)});
  out.commit();
}

inline void write_grid_csv(const std::string& path, const std::vector<GridDay>& rows,
                           bool with_temperature) {
  std::vector<std::string> header = {"lat", "lon", "date", "tmin_c"};
  if (with_temperature) {
    header.push_back("tmax_c");
    header.push_back("prcp_cm");
  }
  header.insert(header.end(), {"wind_ms", "cloud_pct", "rh_pct"});
  CsvWriter out(path, header);
  for (const GridDay& r : rows) {
    std::vector<std::string> row = {fmt_double(r.lat), fmt_double(r.lon), date_to_string(r.date),
                                    missing_or(r.value[0])};
    if (with_temperature) {
      row.push_back(missing_or(r.value[1]));
      row.push_back(missing_or(r.value[2]));
    }
    row.push_back(missing_or(r.value[3]));
    row.push_back(missing_or(r.value[4]));
    row.push_back(missing_or(r.value[5]));
    out.write_row(row);
  }
  out.commit();
}

inline void write_normals_csv(const std::string& path,
                              const std::vector<SynthData::NormalsRow>& rows) {
  std::vector<std::string> header = {"lat", "lon", "doy"};
  for (std::size_t s = 0; s < kNumWeatherVars; ++s) header.push_back(normal_slot_name(s));
  CsvWriter out(path, header);
  for (const auto& r : rows) {
    std::vector<std::string> row = {fmt_double(r.lat), fmt_double(r.lon), fmt_int(r.doy)};
    for (std::size_t s = 0; s < kNumWeatherVars; ++s) row.push_back(missing_or(r.v[s]));
    out.write_row(row);
  }
  out.commit();
}

inline void write_epochs_csv(const std::string& path, const std::vector<EpochStream>& streams) {
  CsvWriter out(path, {"user_id", "timestamp", "state"});
  for (const EpochStream& s : streams)
    for (const Epoch& e : s.epochs)
      out.write_row({s.user_id, timestamp_to_string(e.ts), e.asleep ? "1" : "0"});
  out.commit();
}

inline void write_scenario_grid_csv(const std::string& path,
                                    const SynthData::ScenarioFile& file) {
  CsvWriter out(path, {"lat", "lon", "doy", "tmin_c"});
  for (const auto& [lat, lon, doy, tmin] : file.rows)
    out.write_row({fmt_double(lat), fmt_double(lon), fmt_int(doy), fmt_double(tmin)});
  out.commit();
}

inline void write_country_mask_csv(
    const std::string& path, const std::vector<std::tuple<double, double, std::string>>& rows) {
  CsvWriter out(path, {"lat", "lon", "iso3"});
  for (const auto& [lat, lon, iso] : rows)
    out.write_row({fmt_double(lat), fmt_double(lon), iso});
  out.commit();
}

}  // namespace thermosleep
