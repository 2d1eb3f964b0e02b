#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

#include "thermosleep/common.hpp"

namespace thermosleep {

// Proleptic Gregorian calendar date. Day arithmetic uses the classic
// days-from-civil bijection so dates order and subtract like integers.
struct CivilDate {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31

  auto operator<=>(const CivilDate&) const = default;
};

inline bool is_leap_year(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

inline int days_in_month(int y, int m) {
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap_year(y)) return 29;
  return kDays[m - 1];
}

inline bool valid_date(const CivilDate& d) {
  return d.month >= 1 && d.month <= 12 && d.day >= 1 && d.day <= days_in_month(d.year, d.month);
}

// Days since 1970-01-01.
inline std::int64_t days_from_civil(const CivilDate& c) {
  const int y = c.year - (c.month <= 2);
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (c.month + (c.month > 2 ? -3 : 9)) + 2u) / 5u + c.day - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return CivilDate{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

inline CivilDate add_days(const CivilDate& d, std::int64_t n) {
  return civil_from_days(days_from_civil(d) + n);
}

inline std::int64_t day_difference(const CivilDate& a, const CivilDate& b) {
  return days_from_civil(a) - days_from_civil(b);
}

// 1-based day of year.
inline int day_of_year(const CivilDate& d) {
  return static_cast<int>(days_from_civil(d) - days_from_civil(CivilDate{d.year, 1, 1})) + 1;
}

inline std::string date_to_string(const CivilDate& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return std::string(buf);
}

inline CivilDate parse_date(std::string_view s, const std::string& context) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-')
    throw ValidationError("bad date '" + std::string(s) + "' (" + context + ")");
  CivilDate d;
  d.year = static_cast<int>(parse_int(s.substr(0, 4), context));
  d.month = static_cast<int>(parse_int(s.substr(5, 2), context));
  d.day = static_cast<int>(parse_int(s.substr(8, 2), context));
  if (!valid_date(d)) throw ValidationError("invalid date '" + std::string(s) + "' (" + context + ")");
  return d;
}

inline std::string month_key(const CivilDate& d) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%04d-%02d", d.year, d.month);
  return std::string(buf);
}

// ISO-8601 week key, e.g. "2016-W53".
inline std::string iso_week_key(const CivilDate& d) {
  const std::int64_t z = days_from_civil(d);
  // 1970-01-01 was a Thursday; ISO weekday Mon=1..Sun=7.
  const int weekday = static_cast<int>(((z % 7) + 7 + 3) % 7) + 1;
  // The Thursday of this date's week decides the ISO year.
  const CivilDate thursday = civil_from_days(z - weekday + 4);
  const int iso_year = thursday.year;
  const std::int64_t jan1 = days_from_civil(CivilDate{iso_year, 1, 1});
  const int week = static_cast<int>((days_from_civil(thursday) - jan1) / 7) + 1;
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%04d-W%02d", iso_year, week);
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// Minute-resolution local timestamps with a fixed UTC offset.
// ---------------------------------------------------------------------------

struct LocalTimestamp {
  std::int64_t civil_min = 0;  // minutes since 1970-01-01T00:00 local civil time
  int utc_offset_min = 0;

  std::int64_t utc_min() const { return civil_min - utc_offset_min; }
  CivilDate date() const {
    const std::int64_t m = civil_min >= 0 ? civil_min : civil_min - 1439;
    return civil_from_days(m / 1440);
  }
  int minute_of_day() const {
    const std::int64_t r = civil_min % 1440;
    return static_cast<int>(r < 0 ? r + 1440 : r);
  }
};

inline std::int64_t civil_minutes(const CivilDate& d, int minute_of_day) {
  return days_from_civil(d) * 1440 + minute_of_day;
}

// "YYYY-MM-DDTHH:MM[:SS][Z|+HH:MM|-HH:MM]". Seconds must be zero; epoch
// streams are minute-resolution.
inline LocalTimestamp parse_timestamp(std::string_view s, const std::string& context) {
  auto fail = [&]() -> LocalTimestamp {
    throw ValidationError("bad timestamp '" + std::string(s) + "' (" + context + ")");
  };
  if (s.size() < 16 || (s[10] != 'T' && s[10] != ' ')) return fail();
  const CivilDate d = parse_date(s.substr(0, 10), context);
  const int hh = static_cast<int>(parse_int(s.substr(11, 2), context));
  if (s[13] != ':') return fail();
  const int mm = static_cast<int>(parse_int(s.substr(14, 2), context));
  if (hh > 23 || mm > 59) return fail();
  std::size_t pos = 16;
  if (pos < s.size() && s[pos] == ':') {
    if (s.size() < pos + 3 || s.substr(pos + 1, 2) != "00")
      throw ValidationError("sub-minute timestamp '" + std::string(s) + "' (" + context + ")");
    pos += 3;
  }
  int offset = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z' && pos + 1 == s.size()) {
      offset = 0;
    } else if ((s[pos] == '+' || s[pos] == '-') && s.size() == pos + 6 && s[pos + 3] == ':') {
      const int oh = static_cast<int>(parse_int(s.substr(pos + 1, 2), context));
      const int om = static_cast<int>(parse_int(s.substr(pos + 4, 2), context));
      offset = oh * 60 + om;
      if (s[pos] == '-') offset = -offset;
    } else {
      return fail();
    }
  }
  return LocalTimestamp{civil_minutes(d, hh * 60 + mm), offset};
}

inline std::string timestamp_to_string(const LocalTimestamp& t) {
  const CivilDate d = t.date();
  const int mod = t.minute_of_day();
  const int off = t.utc_offset_min;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d%c%02d:%02d", d.year, d.month, d.day,
                mod / 60, mod % 60, off < 0 ? '-' : '+', std::abs(off) / 60, std::abs(off) % 60);
  return std::string(buf);
}

}  // namespace thermosleep
