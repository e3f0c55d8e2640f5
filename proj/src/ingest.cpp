#include "adlgen/ingest.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "adlgen/rng.hpp"

namespace adlgen {

const char* to_string(SensorState s) {
  switch (s) {
    case SensorState::ON: return "ON";
    case SensorState::OFF: return "OFF";
    case SensorState::OPEN: return "OPEN";
    case SensorState::CLOSE: return "CLOSE";
  }
  return "?";
}

std::optional<SensorState> parse_state(std::string_view s) {
  if (s == "ON") return SensorState::ON;
  if (s == "OFF") return SensorState::OFF;
  if (s == "OPEN") return SensorState::OPEN;
  if (s == "CLOSE" || s == "CLOSED") return SensorState::CLOSE;
  return std::nullopt;
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

}  // namespace

RawLog parse_event_log(const std::string& raw_text, const std::string& source_name) {
  RawLog log;
  log.source_name = source_name;

  std::istringstream in(raw_text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;

    const auto fields = split_ws(line);
    if (fields.size() < 4) {
      log.issues.push_back({lineno, "expected at least 4 fields, got " +
                                        std::to_string(fields.size())});
      continue;
    }
    const auto ts = parse_timestamp(fields[0], fields[1]);
    if (!ts) {
      log.issues.push_back({lineno, "malformed timestamp: " + fields[0] + " " + fields[1]});
      continue;
    }
    const std::string& sensor = fields[2];
    if (!sensor.empty() && sensor[0] == 'T') {
      ++log.dropped_temperature;  // temperature lines carry readings, not states
      continue;
    }
    const auto state = parse_state(fields[3]);
    if (!state) {
      log.issues.push_back({lineno, "unknown state token: " + fields[3]});
      continue;
    }

    SensorEvent ev;
    ev.timestamp = *ts;
    ev.sensor_id = sensor;
    ev.state = *state;
    if (fields.size() > 4) {
      const std::string& last = fields.back();
      if (fields.size() < 6 || (last != "begin" && last != "end")) {
        log.issues.push_back({lineno, "malformed activity marker"});
        continue;
      }
      std::string label = fields[4];
      for (std::size_t i = 5; i + 1 < fields.size(); ++i) label += " " + fields[i];
      ev.marker = ActivityMarker{label, last == "begin" ? Boundary::Begin : Boundary::End};
    }
    if (!log.events.empty() && ev.timestamp < log.events.back().timestamp)
      ++log.timestamp_inversions;
    log.events.push_back(std::move(ev));
  }
  return log;
}

std::string render_event_log(const RawLog& log) {
  std::string out;
  for (const auto& e : log.events) {
    out += format_timestamp(e.timestamp);
    out += ' ';
    out += e.sensor_id;
    out += ' ';
    out += to_string(e.state);
    if (e.marker) {
      out += ' ';
      out += e.marker->label;
      out += e.marker->boundary == Boundary::Begin ? " begin" : " end";
    }
    out += '\n';
  }
  return out;
}

namespace {

bool is_other_activity(const std::string& label) {
  return label == "Other Activity" || label == "Other_Activity";
}

}  // namespace

std::vector<ActivitySequence> extract_activity_sequences(const RawLog& log,
                                                         const SensorVocabulary& vocab,
                                                         ExtractionReport* report,
                                                         std::size_t max_events) {
  ExtractionReport local;
  ExtractionReport& rep = report ? *report : local;

  struct Interval {
    std::string label;
    std::size_t begin, end;  // inclusive event indices
  };
  std::vector<Interval> intervals;
  std::map<std::string, std::size_t> open;  // label -> begin index

  for (std::size_t i = 0; i < log.events.size(); ++i) {
    const auto& marker = log.events[i].marker;
    if (!marker) continue;
    if (marker->boundary == Boundary::Begin) {
      auto [it, inserted] = open.emplace(marker->label, i);
      if (!inserted) {
        ++rep.dropped_unterminated;  // earlier begin never closed; restart
        it->second = i;
      }
    } else {
      auto it = open.find(marker->label);
      if (it == open.end()) {
        ++rep.dropped_stray_end;
        continue;
      }
      intervals.push_back({marker->label, it->second, i});
      open.erase(it);
    }
  }
  rep.dropped_unterminated += open.size();

  // Count interval pairs that share events (different activities may overlap).
  std::sort(intervals.begin(), intervals.end(),
            [](const Interval& a, const Interval& b) { return a.begin < b.begin; });
  for (std::size_t i = 0; i + 1 < intervals.size(); ++i) {
    if (intervals[i + 1].begin <= intervals[i].end) ++rep.overlapping;
  }

  std::vector<ActivitySequence> out;
  std::size_t ordinal = 0;
  for (const auto& iv : intervals) {
    if (is_other_activity(iv.label)) {
      ++rep.dropped_other_activity;
      continue;
    }
    ActivitySequence seq;
    seq.label = iv.label;
    for (std::size_t i = iv.begin; i <= iv.end; ++i) {
      const auto& e = log.events[i];
      if (!e.sensor_id.empty() && e.sensor_id[0] == 'T') continue;
      if (seq.tokens.size() == max_events) {
        ++rep.truncated;
        break;
      }
      seq.tokens.push_back(encode_token(e.sensor_id, e.state, vocab));
      seq.timestamps.push_back(e.timestamp);
    }
    if (seq.tokens.size() < 2) {
      ++rep.dropped_short;
      continue;
    }
    recompute_temporal(seq);
    char id[32];
    std::snprintf(id, sizeof(id), "S%05zu", ++ordinal);
    seq.sample_id = id;
    out.push_back(std::move(seq));
  }
  return out;
}

FoldAssignment stratified_kfold(const std::vector<ActivitySequence>& sequences, int k,
                                std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_kfold: k must be >= 2");
  if (sequences.empty()) throw std::invalid_argument("stratified_kfold: empty corpus");

  std::map<std::string, std::vector<std::string>> by_class;  // ordered for determinism
  for (const auto& s : sequences) by_class[s.label].push_back(s.sample_id);

  FoldAssignment fa;
  fa.k = k;
  for (auto& [label, ids] : by_class) {
    std::sort(ids.begin(), ids.end());
    Rng rng(mix_seed(seed, fnv1a64(label)));
    rng.shuffle(ids);
    if (static_cast<int>(ids.size()) < k) {
      fa.warnings.push_back("class '" + label + "' has " + std::to_string(ids.size()) +
                            " samples for k=" + std::to_string(k));
    }
    for (std::size_t j = 0; j < ids.size(); ++j)
      fa.assignments[ids[j]] = static_cast<int>(j % static_cast<std::size_t>(k));
  }
  return fa;
}

}  // namespace adlgen
