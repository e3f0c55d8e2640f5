#include "adlgen/time_util.hpp"

#include <charconv>
#include <cstdio>

namespace adlgen {
namespace {

// Days between 1970-01-01 and y-m-d in the proleptic Gregorian calendar.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp < 10 ? mp + 3 : mp - 9);
  y = static_cast<int>(yy + (m <= 2));
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b) != 0 && ((a < 0) != (b < 0))) --q;
  return q;
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

Micros to_micros(const CivilTime& c) {
  const std::int64_t days = days_from_civil(c.year, c.month, c.day);
  return days * kMicrosPerDay + c.hour * kMicrosPerHour + c.minute * kMicrosPerMinute +
         c.second * kMicrosPerSecond + c.microsecond;
}

CivilTime to_civil(Micros t) {
  const std::int64_t days = floor_div(t, kMicrosPerDay);
  std::int64_t rem = t - days * kMicrosPerDay;
  CivilTime c;
  civil_from_days(days, c.year, c.month, c.day);
  c.hour = static_cast<int>(rem / kMicrosPerHour);
  rem %= kMicrosPerHour;
  c.minute = static_cast<int>(rem / kMicrosPerMinute);
  rem %= kMicrosPerMinute;
  c.second = static_cast<int>(rem / kMicrosPerSecond);
  c.microsecond = static_cast<int>(rem % kMicrosPerSecond);
  return c;
}

std::optional<Micros> parse_timestamp(std::string_view date, std::string_view time) {
  // date: YYYY-MM-DD
  if (date.size() != 10 || date[4] != '-' || date[7] != '-') return std::nullopt;
  CivilTime c;
  if (!parse_int(date.substr(0, 4), c.year) || !parse_int(date.substr(5, 2), c.month) ||
      !parse_int(date.substr(8, 2), c.day)) {
    return std::nullopt;
  }
  if (c.month < 1 || c.month > 12 || c.day < 1 || c.day > 31) return std::nullopt;

  // time: HH:MM:SS or HH:MM:SS.ffffff
  if (time.size() < 8 || time[2] != ':' || time[5] != ':') return std::nullopt;
  if (!parse_int(time.substr(0, 2), c.hour) || !parse_int(time.substr(3, 2), c.minute) ||
      !parse_int(time.substr(6, 2), c.second)) {
    return std::nullopt;
  }
  if (c.hour > 23 || c.minute > 59 || c.second > 60) return std::nullopt;
  if (c.second == 60) c.second = 59;  // leap-second lines occur in the wild; clamp
  if (time.size() > 8) {
    if (time[8] != '.' || time.size() == 9 || time.size() > 15) return std::nullopt;
    std::string frac(time.substr(9));
    if (frac.find_first_not_of("0123456789") != std::string::npos) return std::nullopt;
    frac.resize(6, '0');
    if (!parse_int(frac, c.microsecond)) return std::nullopt;
  }
  return to_micros(c);
}

std::optional<Micros> parse_timestamp(std::string_view datetime) {
  const auto sp = datetime.find(' ');
  if (sp == std::string_view::npos) return std::nullopt;
  return parse_timestamp(datetime.substr(0, sp), datetime.substr(sp + 1));
}

std::string format_timestamp(Micros t) {
  const CivilTime c = to_civil(t);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:%02d.%06d", c.year, c.month,
                c.day, c.hour, c.minute, c.second, c.microsecond);
  return buf;
}

int hour_of_day(Micros t) { return to_civil(t).hour; }

int day_of_week(Micros t) {
  // 1970-01-01 was a Thursday; Monday = 0.
  const std::int64_t days = floor_div(t, kMicrosPerDay);
  return static_cast<int>(((days % 7) + 7 + 3) % 7);
}

}  // namespace adlgen
