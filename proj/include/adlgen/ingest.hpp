#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adlgen/encoding.hpp"
#include "adlgen/events.hpp"
#include "adlgen/sequence.hpp"

namespace adlgen {

// Whitespace-separated event lines: date time sensor state [activity begin|end].
// '#'-prefixed comment lines and blank lines are ignored. Temperature-sensor
// lines ("T...") are dropped and counted. Malformed lines are skipped and
// reported in RawLog::issues with their 1-based line number.
RawLog parse_event_log(const std::string& raw_text, const std::string& source_name = "");

// Canonical line rendering; parse_event_log(render_event_log(log)) preserves
// the event list exactly.
std::string render_event_log(const RawLog& log);

struct ExtractionReport {
  std::size_t dropped_unterminated = 0;    // begin without matching end
  std::size_t dropped_stray_end = 0;       // end without open begin
  std::size_t dropped_other_activity = 0;  // "Other Activity" intervals
  std::size_t dropped_short = 0;           // fewer than 2 events
  std::size_t truncated = 0;               // intervals cut to max_events
  std::size_t overlapping = 0;             // intervals sharing events
};

// One sequence per (begin, end) interval, events taken in file order between
// the marker events inclusive. Intervals labeled "Other Activity" and those
// with fewer than 2 events are discarded; longer than max_events are
// truncated to the earliest max_events.
std::vector<ActivitySequence> extract_activity_sequences(const RawLog& log,
                                                         const SensorVocabulary& vocab,
                                                         ExtractionReport* report = nullptr,
                                                         std::size_t max_events = 100);

struct FoldAssignment {
  int k = 5;
  std::map<std::string, int> assignments;  // sample_id -> fold in [0, k)
  std::vector<std::string> warnings;       // classes smaller than k
};

// Whole-sequence stratified assignment; per-class fold counts differ by at
// most 1. Pure function of (sequences, k, seed).
FoldAssignment stratified_kfold(const std::vector<ActivitySequence>& sequences, int k,
                                std::uint64_t seed);

}  // namespace adlgen
