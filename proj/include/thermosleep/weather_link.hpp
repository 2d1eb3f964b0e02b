#pragma once

#include <array>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "thermosleep/csv.hpp"
#include "thermosleep/dates.hpp"
#include "thermosleep/sleep_ingest.hpp"

namespace thermosleep {

constexpr double kEarthRadiusKm = 6371.0;
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

inline double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  const double phi1 = lat1 * kDegToRad;
  const double phi2 = lat2 * kDegToRad;
  const double dphi = (lat2 - lat1) * kDegToRad;
  const double dlam = (lon2 - lon1) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlam / 2.0);
  const double a = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

enum class WeatherVar { Tmin = 0, Tmax = 1, Prcp = 2, Wind = 3, Cloud = 4, Rh = 5 };
constexpr std::size_t kNumWeatherVars = 6;

inline const char* weather_var_name(WeatherVar v) {
  switch (v) {
    case WeatherVar::Tmin: return "tmin";
    case WeatherVar::Tmax: return "tmax";
    case WeatherVar::Prcp: return "prcp";
    case WeatherVar::Wind: return "wind";
    case WeatherVar::Cloud: return "cloud";
    case WeatherVar::Rh: return "rh";
  }
  return "?";
}

struct StationDay {
  std::string station_id;
  double lat = 0.0;
  double lon = 0.0;
  CivilDate date;
  std::optional<double> tmin_c;
  std::optional<double> tmax_c;
  std::optional<double> prcp_cm;
};

// ---------------------------------------------------------------------------
// Station observations indexed by day, with a per-station bounding-box
// prefilter. Built once, then read-only; lookups are safe in parallel.
// ---------------------------------------------------------------------------

class StationTable {
 public:
  struct Station {
    std::string id;
    double lat = 0.0;
    double lon = 0.0;
  };

  void add(const StationDay& row) {
    if (row.lat < -90.0 || row.lat > 90.0 || row.lon < -180.0 || row.lon > 180.0)
      throw ValidationError("station '" + row.station_id + "': coordinates out of range");
    if (row.tmin_c && row.tmax_c && *row.tmin_c > *row.tmax_c)
      throw ValidationError("station '" + row.station_id + "' " + date_to_string(row.date) +
                            ": tmin exceeds tmax");
    auto [it, inserted] = station_index_.try_emplace(row.station_id, stations_.size());
    if (inserted) stations_.push_back(Station{row.station_id, row.lat, row.lon});
    Obs obs;
    obs.station = static_cast<int>(it->second);
    obs.value[0] = row.tmin_c;
    obs.value[1] = row.tmax_c;
    obs.value[2] = row.prcp_cm;
    auto& day = obs_by_day_[days_from_civil(row.date)];
    // Day rows stay sorted by station id, so lookups accumulate in an order
    // independent of insertion order.
    const auto pos = std::lower_bound(day.begin(), day.end(), row.station_id,
                                      [this](const Obs& o, const std::string& id) {
                                        return stations_[static_cast<std::size_t>(o.station)].id < id;
                                      });
    if (pos != day.end() && stations_[static_cast<std::size_t>(pos->station)].id == row.station_id)
      throw ValidationError("duplicate observation for station '" + row.station_id + "' on " +
                            date_to_string(row.date));
    day.insert(pos, obs);
  }

  const std::vector<Station>& stations() const { return stations_; }
  bool empty() const { return obs_by_day_.empty(); }

  // Inverse-distance weighted average of non-missing values within
  // radius_km; the weight is capped at its 1 km value so co-located points
  // cannot dominate unboundedly. Returns nullopt when no station qualifies.
  std::optional<double> proximity_weighted(double lat, double lon, const CivilDate& date,
                                           WeatherVar var, double radius_km) const {
    if (radius_km <= 0.0) throw ValidationError("radius_km must be positive");
    const std::size_t vi = static_cast<std::size_t>(var);
    if (vi > 2) throw ValidationError("station data has no variable '" +
                                      std::string(weather_var_name(var)) + "'");
    const auto it = obs_by_day_.find(days_from_civil(date));
    if (it == obs_by_day_.end()) return std::nullopt;
    const double max_dlat = radius_km / 111.0 + 1e-9;
    KahanSum num, den;
    std::size_t n_used = 0;
    double sole_value = 0.0;
    for (const Obs& o : it->second) {
      if (!o.value[vi]) continue;
      const Station& s = stations_[static_cast<std::size_t>(o.station)];
      if (std::abs(s.lat - lat) > max_dlat) continue;
      const double d = haversine_km(lat, lon, s.lat, s.lon);
      if (d > radius_km) continue;
      const double w = 1.0 / std::max(d, 1.0);
      num.add(w * *o.value[vi]);
      den.add(w);
      sole_value = *o.value[vi];
      ++n_used;
    }
    if (n_used == 0) return std::nullopt;
    if (n_used == 1) return sole_value;  // exact identity for a lone station
    return num.value() / den.value();
  }

 private:
  struct Obs {
    int station = 0;
    std::array<std::optional<double>, 3> value;  // tmin, tmax, prcp
  };
  std::vector<Station> stations_;
  std::unordered_map<std::string, std::size_t> station_index_;
  std::unordered_map<std::int64_t, std::vector<Obs>> obs_by_day_;
};

// Spec-facing name for the station lookup.
inline std::optional<double> match_stations(const StationTable& stations, double lat, double lon,
                                            const CivilDate& date, WeatherVar var,
                                            double radius_km = 100.0) {
  return stations.proximity_weighted(lat, lon, date, var, radius_km);
}

// ---------------------------------------------------------------------------
// Regular gridded values (reanalysis-style); nearest-cell lookup.
// ---------------------------------------------------------------------------

struct GridDay {
  double lat = 0.0;
  double lon = 0.0;
  CivilDate date;
  std::array<std::optional<double>, kNumWeatherVars> value;  // by WeatherVar
};

class GridTable {
 public:
  void add(const GridDay& row) {
    auto [it, inserted] = cell_index_.try_emplace(cell_key(row.lat, row.lon), cells_.size());
    if (inserted) cells_.push_back({row.lat, row.lon});
    Obs obs{static_cast<int>(it->second), row.value};
    auto& day = obs_by_day_[days_from_civil(row.date)];
    const auto pos = std::lower_bound(day.begin(), day.end(), obs.cell,
                                      [](const Obs& o, int c) { return o.cell < c; });
    if (pos != day.end() && pos->cell == obs.cell)
      throw ValidationError("duplicate grid cell (" + fmt_double(row.lat) + "," +
                            fmt_double(row.lon) + ") on " + date_to_string(row.date));
    day.insert(pos, obs);
  }

  bool empty() const { return obs_by_day_.empty(); }

  // Value at the nearest cell carrying a non-missing value for var that day.
  std::optional<double> nearest_value(double lat, double lon, const CivilDate& date,
                                      WeatherVar var) const {
    const auto it = obs_by_day_.find(days_from_civil(date));
    if (it == obs_by_day_.end()) return std::nullopt;
    const std::size_t vi = static_cast<std::size_t>(var);
    double best_d = std::numeric_limits<double>::infinity();
    std::optional<double> best;
    for (const Obs& o : it->second) {
      if (!o.value[vi]) continue;
      const auto& c = cells_[static_cast<std::size_t>(o.cell)];
      const double d = haversine_km(lat, lon, c.first, c.second);
      if (d < best_d) {
        best_d = d;
        best = o.value[vi];
      }
    }
    return best;
  }

 private:
  static std::int64_t cell_key(double lat, double lon) {
    return std::llround(lat * 1e6) * 4000000000LL + std::llround(lon * 1e6);
  }
  struct Obs {
    int cell = 0;
    std::array<std::optional<double>, kNumWeatherVars> value;
  };
  std::vector<std::pair<double, double>> cells_;
  std::unordered_map<std::int64_t, std::size_t> cell_index_;
  std::unordered_map<std::int64_t, std::vector<Obs>> obs_by_day_;
};

// ---------------------------------------------------------------------------
// 1981-2010 climate normals.
// ---------------------------------------------------------------------------

struct NormalConfig {
  int year_lo = 1981;
  int year_hi = 2010;
  int window_days = 7;  // +-7 day smoothing window
  double radius_km = 100.0;
};

// Day-of-year on the fixed 365-day calendar; Feb 29 folds into Feb 28.
inline int doy365(int month, int day) {
  static constexpr int kCum[] = {0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334};
  if (month == 2 && day == 29) day = 28;
  return kCum[month - 1] + day;
}

// Mean over years of value_for_date across the smoothing window around the
// target calendar day; Feb 29 targets fold into Feb 28 in non-leap years.
template <typename ValueFn>
std::optional<double> climate_normal(ValueFn&& value_for_date, int month, int day,
                                     const NormalConfig& cfg = {}) {
  KahanSum sum;
  std::size_t n = 0;
  for (int y = cfg.year_lo; y <= cfg.year_hi; ++y) {
    int d = day;
    if (month == 2 && day == 29 && !is_leap_year(y)) d = 28;
    const CivilDate target{y, month, d};
    for (int off = -cfg.window_days; off <= cfg.window_days; ++off) {
      if (const std::optional<double> v = value_for_date(add_days(target, off))) {
        sum.add(*v);
        ++n;
      }
    }
  }
  if (n == 0) return std::nullopt;
  return sum.value() / static_cast<double>(n);
}

inline std::optional<double> climate_normal_station(const StationTable& archive, double lat,
                                                    double lon, int month, int day, WeatherVar var,
                                                    const NormalConfig& cfg = {}) {
  if (var == WeatherVar::Tmax)
    throw ValidationError("use the trange normal (tmax - tmin), not a tmax normal");
  return climate_normal(
      [&](const CivilDate& d) { return match_stations(archive, lat, lon, d, var, cfg.radius_km); },
      month, day, cfg);
}

class NormalsProvider {
 public:
  virtual ~NormalsProvider() = default;
  // var is one of tmin, trange (as Tmax slot is repurposed), prcp, wind,
  // cloud, rh; see normal_slot().
  virtual std::optional<double> normal(double lat, double lon, int month, int day,
                                       std::size_t slot) const = 0;
};

// Normal slots: 0=tmin, 1=trange, 2=prcp, 3=wind, 4=cloud, 5=rh.
inline const char* normal_slot_name(std::size_t slot) {
  static constexpr const char* kNames[] = {"tmin_normal",  "trange_normal", "prcp_normal",
                                           "wind_normal",  "cloud_normal",  "rh_normal"};
  return kNames[slot];
}

// Normals computed on demand from a historical station archive (and grid
// archive for wind/cloud/rh), memoized per location/day/slot.
class ArchiveNormals final : public NormalsProvider {
 public:
  ArchiveNormals(const StationTable* station_archive, const GridTable* grid_archive,
                 NormalConfig cfg = {})
      : stations_(station_archive), grid_(grid_archive), cfg_(cfg) {}

  std::optional<double> normal(double lat, double lon, int month, int day,
                               std::size_t slot) const override {
    const std::uint64_t key = cache_key(lat, lon, month, day, slot);
    {
      std::lock_guard<std::mutex> g(mu_);
      const auto it = cache_.find(key);
      if (it != cache_.end()) return it->second;
    }
    const std::optional<double> v = compute(lat, lon, month, day, slot);
    std::lock_guard<std::mutex> g(mu_);
    cache_.emplace(key, v);
    return v;
  }

 private:
  std::optional<double> compute(double lat, double lon, int month, int day,
                                std::size_t slot) const {
    auto station_var = [&](WeatherVar var) {
      return [this, lat, lon, var](const CivilDate& d) {
        return stations_ ? match_stations(*stations_, lat, lon, d, var, cfg_.radius_km)
                         : std::optional<double>();
      };
    };
    auto grid_var = [&](WeatherVar var) {
      return [this, lat, lon, var](const CivilDate& d) {
        return grid_ ? grid_->nearest_value(lat, lon, d, var) : std::optional<double>();
      };
    };
    switch (slot) {
      case 0: return climate_normal(station_var(WeatherVar::Tmin), month, day, cfg_);
      case 1:
        // Diurnal-range normal averages per-date (tmax - tmin) pairs.
        return climate_normal(
            [&](const CivilDate& d) -> std::optional<double> {
              if (!stations_) return std::nullopt;
              const auto tmax = match_stations(*stations_, lat, lon, d, WeatherVar::Tmax, cfg_.radius_km);
              const auto tmin = match_stations(*stations_, lat, lon, d, WeatherVar::Tmin, cfg_.radius_km);
              if (!tmax || !tmin) return std::nullopt;
              return *tmax - *tmin;
            },
            month, day, cfg_);
      case 2: return climate_normal(station_var(WeatherVar::Prcp), month, day, cfg_);
      case 3: return climate_normal(grid_var(WeatherVar::Wind), month, day, cfg_);
      case 4: return climate_normal(grid_var(WeatherVar::Cloud), month, day, cfg_);
      case 5: return climate_normal(grid_var(WeatherVar::Rh), month, day, cfg_);
      default: throw ValidationError("bad normal slot");
    }
  }

  static std::uint64_t cache_key(double lat, double lon, int month, int day, std::size_t slot) {
    const std::uint64_t a = static_cast<std::uint64_t>(std::llround((lat + 90.0) * 1e4));
    const std::uint64_t b = static_cast<std::uint64_t>(std::llround((lon + 180.0) * 1e4));
    return (((a * 3600001ull + b) * 366ull + static_cast<std::uint64_t>(doy365(month, day))) * 8ull) +
           slot;
  }

  const StationTable* stations_;
  const GridTable* grid_;
  NormalConfig cfg_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::uint64_t, std::optional<double>> cache_;
};

// Precomputed normals keyed by location and fixed-365 day of year; lookup
// picks the nearest tabulated point.
class NormalsTable final : public NormalsProvider {
 public:
  void add(double lat, double lon, int doy, std::array<std::optional<double>, kNumWeatherVars> values) {
    auto [it, inserted] = point_index_.try_emplace(point_key(lat, lon), points_.size());
    if (inserted) {
      points_.push_back({lat, lon});
      table_.emplace_back();
    }
    auto& rows = table_[it->second];
    if (!rows.emplace(doy, values).second)
      throw ValidationError("duplicate normals row for point (" + fmt_double(lat) + "," +
                            fmt_double(lon) + ") doy " + std::to_string(doy));
  }

  std::optional<double> normal(double lat, double lon, int month, int day,
                               std::size_t slot) const override {
    if (points_.empty()) return std::nullopt;
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const double d = haversine_km(lat, lon, points_[i].first, points_[i].second);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    const auto it = table_[best].find(doy365(month, day));
    if (it == table_[best].end()) return std::nullopt;
    return it->second[slot];
  }

 private:
  static std::int64_t point_key(double lat, double lon) {
    return std::llround(lat * 1e6) * 4000000000LL + std::llround(lon * 1e6);
  }
  std::vector<std::pair<double, double>> points_;
  std::unordered_map<std::int64_t, std::size_t> point_index_;
  std::vector<std::map<int, std::array<std::optional<double>, kNumWeatherVars>>> table_;
};

// ---------------------------------------------------------------------------
// NWS heat index: Rothfusz regression in Fahrenheit with the low/high-RH
// adjustments; below the 80 F activation threshold the simple averaged
// formula is returned unchanged. Input and output in Celsius.
// ---------------------------------------------------------------------------

inline double heat_index(double temp_c, double rh_percent) {
  if (!(rh_percent >= 0.0 && rh_percent <= 100.0))
    throw ValidationError("relative humidity must lie in [0, 100]");
  const double t = temp_c * 9.0 / 5.0 + 32.0;
  const double rh = rh_percent;
  double hi = 0.5 * (t + 61.0 + (t - 68.0) * 1.2 + rh * 0.094);
  if (hi >= 80.0) {
    hi = -42.379 + 2.04901523 * t + 10.14333127 * rh - 0.22475541 * t * rh -
         6.83783e-3 * t * t - 5.481717e-2 * rh * rh + 1.22874e-3 * t * t * rh +
         8.5282e-4 * t * rh * rh - 1.99e-6 * t * t * rh * rh;
    if (rh < 13.0 && t >= 80.0 && t <= 112.0)
      hi -= ((13.0 - rh) / 4.0) * std::sqrt((17.0 - std::abs(t - 95.0)) / 17.0);
    else if (rh > 85.0 && t >= 80.0 && t <= 87.0)
      hi += ((rh - 85.0) / 10.0) * ((87.0 - t) / 2.0);
  }
  return (hi - 32.0) * 5.0 / 9.0;
}

// ---------------------------------------------------------------------------
// Person-night exposures.
// ---------------------------------------------------------------------------

struct UserInfo {
  std::string user_id;
  double lat = 0.0;
  double lon = 0.0;
  std::string admin1;
  std::string admin2;
  std::map<std::string, std::string> categories;  // age_group, sex, ... as data columns
};

struct Exposure {
  std::string user_id;
  CivilDate night_date;
  std::optional<double> tmin, trange, prcp, wind, cloud, rh;
  std::optional<double> tmin_normal, trange_normal, prcp_normal, wind_normal, cloud_normal,
      rh_normal;
  std::optional<double> tmin_anomaly;  // tmin - tmin_normal; triple closed bitwise
  std::optional<double> heat_index_c;  // from tmin and rh when both present
};

// Nudges the stored normal by at most 1 ulp so that normal + anomaly == tmin
// holds bitwise (raw rounding does not guarantee it for arbitrary magnitudes).
inline std::pair<double, double> close_normal_anomaly(double tmin, double normal) {
  double a = tmin - normal;
  double n = normal;
  for (int i = 0; i < 8 && n + a != tmin; ++i) {
    n = tmin - a;
    if (n + a == tmin) break;
    a = tmin - n;
  }
  return {n, a};
}

enum class WeatherSource { Station, Grid };

struct ExposureOptions {
  WeatherSource source = WeatherSource::Station;
  double radius_km = 100.0;
  unsigned threads = 0;
};

// A night's exposure uses the weather observations dated night_date (the
// evening's date). Station source feeds tmin/tmax/prcp; the grid always feeds
// wind/cloud/rh; with source=Grid, grid tmin (and tmax/prcp when the grid
// carries them) replaces the station values.
inline std::vector<Exposure> assemble_exposures(const std::vector<SleepRecord>& records,
                                                const std::map<std::string, UserInfo>& users,
                                                const StationTable& stations,
                                                const GridTable* grid,
                                                const NormalsProvider& normals,
                                                const ExposureOptions& opts = {}) {
  std::vector<Exposure> out(records.size());
  parallel_for(
      records.size(),
      [&](std::size_t i) {
        const SleepRecord& r = records[i];
        const auto uit = users.find(r.user_id);
        if (uit == users.end())
          throw ValidationError("no location on file for user '" + r.user_id + "'");
        const UserInfo& u = uit->second;
        Exposure e;
        e.user_id = r.user_id;
        e.night_date = r.night_date;
        const CivilDate d = r.night_date;

        auto from_station = [&](WeatherVar v) {
          return match_stations(stations, u.lat, u.lon, d, v, opts.radius_km);
        };
        auto from_grid = [&](WeatherVar v) {
          return grid ? grid->nearest_value(u.lat, u.lon, d, v) : std::optional<double>();
        };

        std::optional<double> tmax;
        if (opts.source == WeatherSource::Grid) {
          e.tmin = from_grid(WeatherVar::Tmin);
          tmax = from_grid(WeatherVar::Tmax);
          e.prcp = from_grid(WeatherVar::Prcp);
          if (!tmax) tmax = from_station(WeatherVar::Tmax);
          if (!e.prcp) e.prcp = from_station(WeatherVar::Prcp);
        } else {
          e.tmin = from_station(WeatherVar::Tmin);
          tmax = from_station(WeatherVar::Tmax);
          e.prcp = from_station(WeatherVar::Prcp);
        }
        if (e.tmin && tmax) e.trange = *tmax - *e.tmin;
        e.wind = from_grid(WeatherVar::Wind);
        e.cloud = from_grid(WeatherVar::Cloud);
        e.rh = from_grid(WeatherVar::Rh);

        e.tmin_normal = normals.normal(u.lat, u.lon, d.month, d.day, 0);
        e.trange_normal = normals.normal(u.lat, u.lon, d.month, d.day, 1);
        e.prcp_normal = normals.normal(u.lat, u.lon, d.month, d.day, 2);
        e.wind_normal = normals.normal(u.lat, u.lon, d.month, d.day, 3);
        e.cloud_normal = normals.normal(u.lat, u.lon, d.month, d.day, 4);
        e.rh_normal = normals.normal(u.lat, u.lon, d.month, d.day, 5);

        if (e.tmin && e.tmin_normal) {
          const auto [n, a] = close_normal_anomaly(*e.tmin, *e.tmin_normal);
          e.tmin_normal = n;
          e.tmin_anomaly = a;
        }
        if (e.tmin && e.rh) e.heat_index_c = heat_index(*e.tmin, *e.rh);
        out[i] = e;
      },
      opts.threads);
  return out;
}

// ---------------------------------------------------------------------------
// CSV interfaces (docs/formats.md).
// ---------------------------------------------------------------------------

inline StationTable read_stations_csv(const std::string& path) {
  CsvReader in(path);
  const std::size_t c_id = in.col("station_id");
  const std::size_t c_lat = in.col("lat");
  const std::size_t c_lon = in.col("lon");
  const std::size_t c_date = in.col("date");
  const std::size_t c_tmin = in.col("tmin_c");
  const std::size_t c_tmax = in.col("tmax_c");
  const std::size_t c_prcp = in.col("prcp_cm");
  StationTable table;
  while (in.next()) {
    StationDay row;
    row.station_id = std::string(in.field(c_id));
    row.lat = in.num_field(c_lat, "lat");
    row.lon = in.num_field(c_lon, "lon");
    row.date = parse_date(in.field(c_date), in.context("date"));
    row.tmin_c = in.opt_num_field(c_tmin, "tmin_c");
    row.tmax_c = in.opt_num_field(c_tmax, "tmax_c");
    row.prcp_cm = in.opt_num_field(c_prcp, "prcp_cm");
    table.add(row);
  }
  return table;
}

// Required: lat, lon, date, tmin_c. Optional: tmax_c, prcp_cm, wind_ms,
// cloud_pct, rh_pct.
inline GridTable read_grid_csv(const std::string& path) {
  CsvReader in(path);
  const std::size_t c_lat = in.col("lat");
  const std::size_t c_lon = in.col("lon");
  const std::size_t c_date = in.col("date");
  const std::size_t c_tmin = in.col("tmin_c");
  const auto c_tmax = in.optional_col("tmax_c");
  const auto c_prcp = in.optional_col("prcp_cm");
  const auto c_wind = in.optional_col("wind_ms");
  const auto c_cloud = in.optional_col("cloud_pct");
  const auto c_rh = in.optional_col("rh_pct");
  GridTable table;
  while (in.next()) {
    GridDay row;
    row.lat = in.num_field(c_lat, "lat");
    row.lon = in.num_field(c_lon, "lon");
    row.date = parse_date(in.field(c_date), in.context("date"));
    row.value[0] = in.opt_num_field(c_tmin, "tmin_c");
    if (c_tmax) row.value[1] = in.opt_num_field(*c_tmax, "tmax_c");
    if (c_prcp) row.value[2] = in.opt_num_field(*c_prcp, "prcp_cm");
    if (c_wind) row.value[3] = in.opt_num_field(*c_wind, "wind_ms");
    if (c_cloud) row.value[4] = in.opt_num_field(*c_cloud, "cloud_pct");
    if (c_rh) row.value[5] = in.opt_num_field(*c_rh, "rh_pct");
    for (const std::size_t slot : {4u, 5u})
      if (row.value[slot] && (*row.value[slot] < 0.0 || *row.value[slot] > 100.0))
        throw ValidationError(in.context(slot == 4 ? "cloud_pct" : "rh_pct") +
                              ": percentage outside [0, 100]");
    table.add(row);
  }
  return table;
}

inline std::map<std::string, UserInfo> read_users_csv(const std::string& path) {
  CsvReader in(path);
  const std::size_t c_user = in.col("user_id");
  const std::size_t c_lat = in.col("lat");
  const std::size_t c_lon = in.col("lon");
  const std::size_t c_a1 = in.col("admin1");
  const std::size_t c_a2 = in.col("admin2");
  std::vector<std::pair<std::string, std::size_t>> extra;
  for (const std::string& name :
       {std::string("age_group"), std::string("sex"), std::string("gni_class"),
        std::string("bmi_class")})
    if (const auto c = in.optional_col(name)) extra.emplace_back(name, *c);
  std::map<std::string, UserInfo> users;
  while (in.next()) {
    UserInfo u;
    u.user_id = std::string(in.field(c_user));
    u.lat = in.num_field(c_lat, "lat");
    u.lon = in.num_field(c_lon, "lon");
    u.admin1 = std::string(in.field(c_a1));
    u.admin2 = std::string(in.field(c_a2));
    for (const auto& [name, ci] : extra)
      if (!in.field(ci).empty()) u.categories[name] = std::string(in.field(ci));
    if (!users.emplace(u.user_id, u).second)
      throw ValidationError(in.context("user_id") + ": duplicate user");
  }
  return users;
}

inline NormalsTable read_normals_csv(const std::string& path) {
  CsvReader in(path);
  const std::size_t c_lat = in.col("lat");
  const std::size_t c_lon = in.col("lon");
  const std::size_t c_doy = in.col("doy");
  std::array<std::size_t, kNumWeatherVars> cols{};
  for (std::size_t s = 0; s < kNumWeatherVars; ++s) cols[s] = in.col(normal_slot_name(s));
  NormalsTable table;
  while (in.next()) {
    std::array<std::optional<double>, kNumWeatherVars> vals;
    for (std::size_t s = 0; s < kNumWeatherVars; ++s)
      vals[s] = in.opt_num_field(cols[s], normal_slot_name(s));
    table.add(in.num_field(c_lat, "lat"), in.num_field(c_lon, "lon"),
              static_cast<int>(parse_int(in.field(c_doy), in.context("doy"))), vals);
  }
  return table;
}

inline const std::vector<std::string>& exposure_csv_header() {
  static const std::vector<std::string> kHeader = {
      "user_id",     "night_date",    "tmin",        "trange",      "prcp",        "wind",
      "cloud",       "rh",            "tmin_normal", "trange_normal", "prcp_normal",
      "wind_normal", "cloud_normal",  "rh_normal",   "tmin_anomaly", "heat_index"};
  return kHeader;
}

inline void write_exposures_csv(const std::string& path, const std::vector<Exposure>& exposures) {
  CsvWriter out(path, exposure_csv_header());
  for (const Exposure& e : exposures) {
    out.write_row({e.user_id, date_to_string(e.night_date), missing_or(e.tmin),
                   missing_or(e.trange), missing_or(e.prcp), missing_or(e.wind),
                   missing_or(e.cloud), missing_or(e.rh), missing_or(e.tmin_normal),
                   missing_or(e.trange_normal), missing_or(e.prcp_normal),
                   missing_or(e.wind_normal), missing_or(e.cloud_normal), missing_or(e.rh_normal),
                   missing_or(e.tmin_anomaly), missing_or(e.heat_index_c)});
  }
  out.commit();
}

inline std::vector<Exposure> read_exposures_csv(const std::string& path) {
  CsvReader in(path);
  auto c = [&](const char* n) { return in.col(n); };
  const std::size_t c_user = c("user_id"), c_date = c("night_date");
  const std::size_t c_tmin = c("tmin"), c_trange = c("trange"), c_prcp = c("prcp");
  const std::size_t c_wind = c("wind"), c_cloud = c("cloud"), c_rh = c("rh");
  const std::size_t c_tn = c("tmin_normal"), c_rn = c("trange_normal"), c_pn = c("prcp_normal");
  const std::size_t c_wn = c("wind_normal"), c_cn = c("cloud_normal"), c_hn = c("rh_normal");
  const std::size_t c_an = c("tmin_anomaly"), c_hi = c("heat_index");
  std::vector<Exposure> out;
  while (in.next()) {
    Exposure e;
    e.user_id = std::string(in.field(c_user));
    e.night_date = parse_date(in.field(c_date), in.context("night_date"));
    e.tmin = in.opt_num_field(c_tmin, "tmin");
    e.trange = in.opt_num_field(c_trange, "trange");
    e.prcp = in.opt_num_field(c_prcp, "prcp");
    e.wind = in.opt_num_field(c_wind, "wind");
    e.cloud = in.opt_num_field(c_cloud, "cloud");
    e.rh = in.opt_num_field(c_rh, "rh");
    e.tmin_normal = in.opt_num_field(c_tn, "tmin_normal");
    e.trange_normal = in.opt_num_field(c_rn, "trange_normal");
    e.prcp_normal = in.opt_num_field(c_pn, "prcp_normal");
    e.wind_normal = in.opt_num_field(c_wn, "wind_normal");
    e.cloud_normal = in.opt_num_field(c_cn, "cloud_normal");
    e.rh_normal = in.opt_num_field(c_hn, "rh_normal");
    e.tmin_anomaly = in.opt_num_field(c_an, "tmin_anomaly");
    e.heat_index_c = in.opt_num_field(c_hi, "heat_index");
    out.push_back(e);
  }
  return out;
}

}  // namespace thermosleep
