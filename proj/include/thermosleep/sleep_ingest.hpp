#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "thermosleep/csv.hpp"
#include "thermosleep/dates.hpp"

namespace thermosleep {

// ---------------------------------------------------------------------------
// Minute-epoch sleep/wake streams -> nightly sleep records.
//
// All intra-night times are stored as minutes after the noon that precedes
// sleep onset; onset/offset/midsleep arithmetic is then monotone across
// midnight and the night's calendar attribution is the date of that noon.
// ---------------------------------------------------------------------------

struct Epoch {
  LocalTimestamp ts;
  bool asleep = false;
};

struct EpochStream {
  std::string user_id;
  std::vector<Epoch> epochs;  // strictly increasing timestamps
};

struct SleepRecord {
  std::string user_id;
  CivilDate night_date;
  int onset_min = 0;           // minutes after noon of night_date
  int offset_min = 0;          // last sleep minute + 1
  double midsleep_min = 0.0;   // (onset + offset) / 2, exact in halves
  int duration_min = 0;        // SLEEP-state minutes within [onset, offset)
  std::optional<int> total_24h_min;  // nightly duration + qualifying daytime naps
};

struct NapRecord {
  std::string user_id;
  CivilDate night_date;  // same noon-attribution rule as nights
  int minutes = 0;
};

struct AggregationResult {
  std::vector<SleepRecord> records;  // one per night, sorted by night_date
  std::vector<NapRecord> naps;       // non-principal sleep periods
};

// Window bounds are clock times; see minutes_from_noon mapping below.
struct ClockWindow {
  int start_minute_of_day = 0;
  int end_minute_of_day = 0;
};

struct InclusionConfig {
  double min_duration_h = 4.0;
  double max_duration_h = 12.0;
  ClockWindow onset_window{19 * 60, 8 * 60};   // 19:00 .. 08:00
  ClockWindow offset_window{0, 15 * 60};       // 00:00 .. 15:00 (next day)
  int min_nights = 28;
  double min_coverage = 0.25;
};

namespace detail {

// Onset clock times map into [0, 1440) minutes-from-noon: evening times fall
// before midnight, morning times after.
inline int onset_rel(int minute_of_day) {
  return minute_of_day >= 720 ? minute_of_day - 720 : minute_of_day + 720;
}

// Offset clock times are read as times on the day after the night's noon
// (offsets before midnight are not meaningful sleep ends here).
inline int offset_rel(int minute_of_day) { return minute_of_day + 720; }

inline bool in_open_interval(int v, int lo, int hi) { return v > lo && v < hi; }

struct SleepPeriod {
  std::int64_t start_min = 0;  // civil minutes, first sleep epoch
  std::int64_t end_min = 0;    // last sleep epoch + 1
  int sleep_minutes = 0;       // SLEEP epochs only (wake gaps excluded)
  int utc_offset_min = 0;
};

// Maximal runs of consecutive SLEEP minutes, then runs separated by gaps of
// at most bridge_gap_min merged into one period. Gaps count whether they hold
// WAKE epochs or no data at all.
inline std::vector<SleepPeriod> merged_sleep_periods(const EpochStream& stream,
                                                     int bridge_gap_min) {
  std::vector<SleepPeriod> bouts;
  for (std::size_t i = 0; i < stream.epochs.size(); ++i) {
    const Epoch& e = stream.epochs[i];
    if (i > 0 && e.ts.civil_min <= stream.epochs[i - 1].ts.civil_min)
      throw ValidationError("non-monotone timestamps in stream for user '" + stream.user_id +
                            "' at epoch index " + std::to_string(i));
    if (!e.asleep) continue;
    if (!bouts.empty() && bouts.back().end_min == e.ts.civil_min) {
      bouts.back().end_min += 1;
      bouts.back().sleep_minutes += 1;
    } else {
      bouts.push_back(SleepPeriod{e.ts.civil_min, e.ts.civil_min + 1, 1, e.ts.utc_offset_min});
    }
  }
  std::vector<SleepPeriod> merged;
  for (const SleepPeriod& b : bouts) {
    if (!merged.empty() && b.start_min - merged.back().end_min <= bridge_gap_min) {
      merged.back().end_min = b.end_min;
      merged.back().sleep_minutes += b.sleep_minutes;
    } else {
      merged.push_back(b);
    }
  }
  return merged;
}

// Calendar date of the noon immediately preceding the given civil minute.
inline CivilDate noon_date(std::int64_t civil_min) {
  return civil_from_days((civil_min - 720) >= 0 ? (civil_min - 720) / 1440
                                                : ((civil_min - 720) - 1439) / 1440);
}

}  // namespace detail

// Collapses a user's epoch stream into one record per night. The principal
// sleep period of a night is the merged period with the most sleep minutes
// whose onset lies strictly inside the nocturnal window; everything else
// becomes a nap candidate.
inline AggregationResult aggregate_epochs(const EpochStream& stream,
                                          ClockWindow nocturnal_window = {19 * 60, 8 * 60},
                                          int bridge_gap_min = 60) {
  if (stream.epochs.empty()) throw ValidationError("empty epoch stream for user '" + stream.user_id + "'");
  if (bridge_gap_min < 0) throw ValidationError("bridge_gap_min must be >= 0");

  const int win_lo = detail::onset_rel(nocturnal_window.start_minute_of_day);
  const int win_hi = detail::onset_rel(nocturnal_window.end_minute_of_day);
  if (win_lo >= win_hi) throw ValidationError("nocturnal window must be a forward interval");

  struct Candidate {
    detail::SleepPeriod period;
    CivilDate night;
    int onset_rel;
  };
  std::map<CivilDate, std::vector<Candidate>> nights;
  std::vector<Candidate> all;
  for (const detail::SleepPeriod& p : detail::merged_sleep_periods(stream, bridge_gap_min)) {
    const CivilDate night = detail::noon_date(p.start_min);
    const int rel = static_cast<int>(p.start_min - civil_minutes(night, 720));
    all.push_back(Candidate{p, night, rel});
    if (detail::in_open_interval(rel, win_lo, win_hi)) nights[night].push_back(all.back());
  }

  AggregationResult out;
  std::map<std::pair<std::int64_t, std::int64_t>, bool> principal;  // (start,end) -> chosen
  for (auto& [night, cands] : nights) {
    const Candidate* best = nullptr;
    for (const Candidate& c : cands) {
      if (!best || c.period.sleep_minutes > best->period.sleep_minutes ||
          (c.period.sleep_minutes == best->period.sleep_minutes &&
           c.period.start_min < best->period.start_min))
        best = &c;
    }
    principal[{best->period.start_min, best->period.end_min}] = true;
    SleepRecord rec;
    rec.user_id = stream.user_id;
    rec.night_date = night;
    rec.onset_min = best->onset_rel;
    rec.offset_min = best->onset_rel + static_cast<int>(best->period.end_min - best->period.start_min);
    rec.midsleep_min = (rec.onset_min + rec.offset_min) / 2.0;
    rec.duration_min = best->period.sleep_minutes;
    out.records.push_back(rec);
  }
  for (const Candidate& c : all) {
    if (principal.count({c.period.start_min, c.period.end_min})) continue;
    out.naps.push_back(NapRecord{stream.user_id, c.night, c.period.sleep_minutes});
  }
  return out;
}

// Three standard insufficient-sleep flags, strict-less convention: a night of
// exactly 420 minutes is not "< 7 h".
struct ShortSleepFlags {
  bool lt7 = false;
  bool lt6 = false;
  bool lt5 = false;
};

inline ShortSleepFlags short_sleep_flags(int duration_min) {
  if (duration_min <= 0) throw ValidationError("duration_min must be positive");
  return ShortSleepFlags{duration_min < 7 * 60, duration_min < 6 * 60, duration_min < 5 * 60};
}

// 24-hour attainment: nightly duration plus same-night naps shorter than
// four hours. Fills total_24h_min in place.
inline void daily_total_24h(std::vector<SleepRecord>& records, const std::vector<NapRecord>& naps) {
  std::map<std::pair<std::string, CivilDate>, int> nap_minutes;
  for (const NapRecord& n : naps)
    if (n.minutes < 4 * 60) nap_minutes[{n.user_id, n.night_date}] += n.minutes;
  for (SleepRecord& r : records) {
    const auto it = nap_minutes.find({r.user_id, r.night_date});
    r.total_24h_min = r.duration_min + (it == nap_minutes.end() ? 0 : it->second);
  }
}

// ---------------------------------------------------------------------------
// Inclusion filters.
// ---------------------------------------------------------------------------

struct UserInclusion {
  int kept_nights = 0;
  std::int64_t span_days = 0;  // first to last kept record, inclusive
  double coverage = 0.0;
  bool included = false;
};

struct ExclusionReport {
  std::size_t n_input = 0;
  std::size_t n_excluded_duration = 0;
  std::size_t n_excluded_onset = 0;
  std::size_t n_excluded_offset = 0;
  std::size_t n_record_pass = 0;
  std::size_t n_users = 0;
  std::size_t n_users_kept = 0;
  std::size_t n_kept = 0;  // rows surviving both record and user filters
};

struct FilterOutcome {
  std::vector<SleepRecord> kept;
  std::map<std::string, UserInclusion> users;
  ExclusionReport report;
};

// Record filters use strict inequalities throughout (duration strictly inside
// (4h, 12h), onset strictly inside the window, likewise offset); users must
// reach min_nights kept records and min_coverage of their kept-record span.
inline FilterOutcome apply_filters(const std::vector<SleepRecord>& records,
                                   const InclusionConfig& config = {}) {
  if (!(config.min_duration_h > 0 && config.min_duration_h < config.max_duration_h))
    throw ValidationError("inclusion config: need 0 < min_duration_h < max_duration_h");
  if (!(config.min_coverage > 0 && config.min_coverage <= 1))
    throw ValidationError("inclusion config: need 0 < min_coverage <= 1");
  const int on_lo = detail::onset_rel(config.onset_window.start_minute_of_day);
  const int on_hi = detail::onset_rel(config.onset_window.end_minute_of_day);
  const int off_lo = detail::offset_rel(config.offset_window.start_minute_of_day);
  const int off_hi = detail::offset_rel(config.offset_window.end_minute_of_day);
  if (on_lo >= on_hi || off_lo >= off_hi)
    throw ValidationError("inclusion config: windows must be forward intervals");

  FilterOutcome out;
  out.report.n_input = records.size();
  std::map<std::string, std::vector<const SleepRecord*>> per_user;
  for (const SleepRecord& r : records) {
    const double dur_h = r.duration_min / 60.0;
    if (!(dur_h > config.min_duration_h && dur_h < config.max_duration_h)) {
      ++out.report.n_excluded_duration;
      continue;
    }
    if (!detail::in_open_interval(r.onset_min, on_lo, on_hi)) {
      ++out.report.n_excluded_onset;
      continue;
    }
    if (!detail::in_open_interval(r.offset_min, off_lo, off_hi)) {
      ++out.report.n_excluded_offset;
      continue;
    }
    ++out.report.n_record_pass;
    per_user[r.user_id].push_back(&r);
  }
  for (const SleepRecord& r : records) per_user.try_emplace(r.user_id);  // users with zero passing rows

  for (auto& [user, recs] : per_user) {
    UserInclusion u;
    u.kept_nights = static_cast<int>(recs.size());
    if (!recs.empty()) {
      CivilDate first = recs.front()->night_date, last = recs.front()->night_date;
      for (const SleepRecord* r : recs) {
        first = std::min(first, r->night_date);
        last = std::max(last, r->night_date);
      }
      u.span_days = day_difference(last, first) + 1;
      u.coverage = static_cast<double>(u.kept_nights) / static_cast<double>(u.span_days);
    }
    u.included = u.kept_nights >= config.min_nights && u.coverage >= config.min_coverage;
    out.users[user] = u;
  }
  out.report.n_users = per_user.size();
  for (const SleepRecord& r : records) {
    const double dur_h = r.duration_min / 60.0;
    if (!(dur_h > config.min_duration_h && dur_h < config.max_duration_h)) continue;
    if (!detail::in_open_interval(r.onset_min, on_lo, on_hi)) continue;
    if (!detail::in_open_interval(r.offset_min, off_lo, off_hi)) continue;
    if (out.users.at(r.user_id).included) out.kept.push_back(r);
  }
  for (const auto& [user, u] : out.users)
    if (u.included) ++out.report.n_users_kept;
  out.report.n_kept = out.kept.size();
  return out;
}

// ---------------------------------------------------------------------------
// CSV interfaces (docs/formats.md).
// ---------------------------------------------------------------------------

// epochs.csv: user_id, timestamp, state (0=WAKE, 1=SLEEP). Streams are
// returned in first-appearance order; per-user monotonicity is validated with
// file line numbers.
inline std::vector<EpochStream> read_epochs_csv(const std::string& path) {
  CsvReader in(path);
  const std::size_t c_user = in.col("user_id");
  const std::size_t c_ts = in.col("timestamp");
  const std::size_t c_state = in.col("state");
  std::vector<EpochStream> streams;
  std::unordered_map<std::string, std::size_t> index;
  while (in.next()) {
    const std::string user(in.field(c_user));
    const LocalTimestamp ts = parse_timestamp(in.field(c_ts), in.context("timestamp"));
    const long long state = parse_int(in.field(c_state), in.context("state"));
    if (state != 0 && state != 1)
      throw ValidationError(in.context("state") + ": state must be 0 or 1");
    auto [it, inserted] = index.try_emplace(user, streams.size());
    if (inserted) streams.push_back(EpochStream{user, {}});
    EpochStream& s = streams[it->second];
    if (!s.epochs.empty() && ts.civil_min <= s.epochs.back().ts.civil_min)
      throw ValidationError(in.context("timestamp") + ": timestamps not strictly increasing");
    s.epochs.push_back(Epoch{ts, state == 1});
  }
  return streams;
}

inline void write_sleep_records_csv(const std::string& path,
                                    const std::vector<SleepRecord>& records) {
  CsvWriter out(path, {"user_id", "night_date", "onset_min", "offset_min", "midsleep_min",
                       "duration_min", "total24h_min", "flag_lt7", "flag_lt6", "flag_lt5"});
  for (const SleepRecord& r : records) {
    const ShortSleepFlags f = short_sleep_flags(r.duration_min);
    out.write_row({r.user_id, date_to_string(r.night_date), fmt_int(r.onset_min),
                   fmt_int(r.offset_min), fmt_double(r.midsleep_min), fmt_int(r.duration_min),
                   r.total_24h_min ? fmt_int(*r.total_24h_min) : std::string(),
                   f.lt7 ? "1" : "0", f.lt6 ? "1" : "0", f.lt5 ? "1" : "0"});
  }
  out.commit();
}

inline std::vector<SleepRecord> read_sleep_records_csv(const std::string& path) {
  CsvReader in(path);
  const std::size_t c_user = in.col("user_id");
  const std::size_t c_date = in.col("night_date");
  const std::size_t c_on = in.col("onset_min");
  const std::size_t c_off = in.col("offset_min");
  const std::size_t c_mid = in.col("midsleep_min");
  const std::size_t c_dur = in.col("duration_min");
  const auto c_tot = in.optional_col("total24h_min");
  std::vector<SleepRecord> records;
  while (in.next()) {
    SleepRecord r;
    r.user_id = std::string(in.field(c_user));
    r.night_date = parse_date(in.field(c_date), in.context("night_date"));
    r.onset_min = static_cast<int>(parse_int(in.field(c_on), in.context("onset_min")));
    r.offset_min = static_cast<int>(parse_int(in.field(c_off), in.context("offset_min")));
    r.midsleep_min = in.num_field(c_mid, "midsleep_min");
    r.duration_min = static_cast<int>(parse_int(in.field(c_dur), in.context("duration_min")));
    if (c_tot && !in.field(*c_tot).empty())
      r.total_24h_min = static_cast<int>(parse_int(in.field(*c_tot), in.context("total24h_min")));
    if (!(r.onset_min < r.offset_min))
      throw ValidationError(in.context("onset_min") + ": onset must precede offset");
    if (!(r.duration_min > 0 && r.duration_min <= r.offset_min - r.onset_min))
      throw ValidationError(in.context("duration_min") + ": duration outside (0, offset-onset]");
    records.push_back(r);
  }
  return records;
}

}  // namespace thermosleep
