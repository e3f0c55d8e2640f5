#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace adlgen {

// Naive wall-clock instant: microseconds since 1970-01-01 00:00:00.
// Logs carry no timezone, so none is applied.
using Micros = std::int64_t;

constexpr Micros kMicrosPerSecond = 1'000'000;
constexpr Micros kMicrosPerMinute = 60 * kMicrosPerSecond;
constexpr Micros kMicrosPerHour = 60 * kMicrosPerMinute;
constexpr Micros kMicrosPerDay = 24 * kMicrosPerHour;

struct CivilTime {
  int year = 1970;
  int month = 1;  // [1,12]
  int day = 1;    // [1,31]
  int hour = 0;
  int minute = 0;
  int second = 0;
  int microsecond = 0;
};

Micros to_micros(const CivilTime& c);
CivilTime to_civil(Micros t);

// Grammar: "YYYY-MM-DD HH:MM:SS[.ffffff]". A missing fractional part is
// read as .000000; fractions shorter than six digits are right-padded.
std::optional<Micros> parse_timestamp(std::string_view date, std::string_view time);
std::optional<Micros> parse_timestamp(std::string_view datetime);

// Always emits six fractional digits.
std::string format_timestamp(Micros t);

int hour_of_day(Micros t);  // [0,23]
int day_of_week(Micros t);  // [0,6], Monday = 0

}  // namespace adlgen
