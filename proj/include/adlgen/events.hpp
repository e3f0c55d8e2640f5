#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adlgen/time_util.hpp"

namespace adlgen {

enum class SensorState { ON, OFF, OPEN, CLOSE };

const char* to_string(SensorState s);
std::optional<SensorState> parse_state(std::string_view s);
inline bool is_activating(SensorState s) {
  return s == SensorState::ON || s == SensorState::OPEN;
}

enum class Boundary { Begin, End };

struct ActivityMarker {
  std::string label;
  Boundary boundary = Boundary::Begin;
};

// One timestamped sensor state change, optionally carrying an activity
// begin/end annotation.
struct SensorEvent {
  Micros timestamp = 0;
  std::string sensor_id;
  SensorState state = SensorState::ON;
  std::optional<ActivityMarker> marker;
};

struct ParseIssue {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct RawLog {
  std::vector<SensorEvent> events;
  std::string source_name;
  std::size_t dropped_temperature = 0;   // lines referencing "T..." sensors
  std::size_t timestamp_inversions = 0;  // out-of-order timestamps, kept in file order
  std::vector<ParseIssue> issues;        // malformed lines, skipped
};

}  // namespace adlgen
