#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

#include "dispatch/errors.hpp"

// Civil time helpers.  All timestamps in the system are seconds since the
// Unix epoch, interpreted as UTC.  No time zones, no DST.

namespace dispatch {

constexpr double kSecondsPerMinute = 60.0;
constexpr double kSecondsPerHour = 3600.0;
constexpr double kSecondsPerDay = 86400.0;
constexpr double kSecondsPerWeek = 604800.0;
constexpr int kMinutesPerWeek = 10080;

struct CivilDateTime {
  int year, month, day;  // month 1..12, day 1..31
  int hour, minute, second;
};

// Days-from-civil / civil-from-days, Gregorian calendar (standard algorithm).
inline int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

inline void civil_from_days(int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const int64_t yr = static_cast<int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yr + (m <= 2));
}

inline CivilDateTime civil_from_epoch(double epoch_s) {
  const int64_t s = static_cast<int64_t>(epoch_s >= 0 ? epoch_s : epoch_s - 0.999999);
  int64_t days = s / 86400;
  int64_t rem = s % 86400;
  if (rem < 0) { rem += 86400; days -= 1; }
  CivilDateTime c{};
  civil_from_days(days, c.year, c.month, c.day);
  c.hour = static_cast<int>(rem / 3600);
  c.minute = static_cast<int>((rem % 3600) / 60);
  c.second = static_cast<int>(rem % 60);
  return c;
}

inline double epoch_from_civil(const CivilDateTime& c) {
  return static_cast<double>(days_from_civil(c.year, c.month, c.day)) * 86400.0 +
         c.hour * 3600.0 + c.minute * 60.0 + c.second;
}

// 0 = Monday ... 6 = Sunday.  1970-01-01 was a Thursday (= 3).
inline int weekday(double epoch_s) {
  const CivilDateTime c = civil_from_epoch(epoch_s);
  const int64_t d = days_from_civil(c.year, c.month, c.day);
  return static_cast<int>(((d % 7) + 7 + 3) % 7);
}

inline bool is_weekend(double epoch_s) { return weekday(epoch_s) >= 5; }

// Four-hour time-of-day bins anchored at midnight: 00-04 -> 0 ... 20-24 -> 5.
inline int time_of_day_bin(double epoch_s) {
  return civil_from_epoch(epoch_s).hour / 4;
}

// 0 winter (Dec-Feb), 1 spring (Mar-May), 2 summer (Jun-Aug), 3 fall (Sep-Nov).
inline int season_of(double epoch_s) {
  const int m = civil_from_epoch(epoch_s).month;
  if (m == 12 || m <= 2) return 0;
  if (m <= 5) return 1;
  if (m <= 8) return 2;
  return 3;
}

// Minute within the week, week anchored at Monday 00:00 UTC.
// Epoch (Thursday 00:00) sits at minute 3*1440 = 4320.
inline int weekly_minute(double epoch_s) {
  const int64_t minute = static_cast<int64_t>(epoch_s / 60.0);
  return static_cast<int>(((minute + 4320) % kMinutesPerWeek + kMinutesPerWeek) %
                          kMinutesPerWeek);
}

// Half-open weekly bins [start, end); a boundary instant belongs to the later bin.
inline int weekly_bin(double epoch_s, int bin_width_min) {
  return weekly_minute(epoch_s) / bin_width_min;
}

// Strict "YYYY-MM-DDTHH:MM:SS" with optional trailing 'Z'.
inline double parse_iso8601(const std::string& s) {
  CivilDateTime c{};
  char tz = '\0';
  const int n = std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d%c", &c.year, &c.month,
                            &c.day, &c.hour, &c.minute, &c.second, &tz);
  if (n < 6 || (n == 7 && tz != 'Z'))
    throw FormatError("bad ISO-8601 timestamp: '" + s + "'");
  if (c.month < 1 || c.month > 12 || c.day < 1 || c.day > 31 || c.hour < 0 ||
      c.hour > 23 || c.minute < 0 || c.minute > 59 || c.second < 0 || c.second > 60)
    throw FormatError("out-of-range ISO-8601 timestamp: '" + s + "'");
  return epoch_from_civil(c);
}

inline std::string format_iso8601(double epoch_s) {
  const CivilDateTime c = civil_from_epoch(epoch_s);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", c.year,
                c.month, c.day, c.hour, c.minute, c.second);
  return std::string(buf);
}

}  // namespace dispatch
