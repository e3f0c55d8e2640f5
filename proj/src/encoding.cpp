#include "adlgen/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace adlgen {

SensorVocabulary::SensorVocabulary(std::vector<std::string> ids) : ids_(std::move(ids)) {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (ids_[i].empty()) throw std::invalid_argument("vocabulary: empty sensor id");
    if (ids_[i][0] == 'T')
      throw std::invalid_argument("vocabulary: temperature sensor excluded: " + ids_[i]);
    auto [it, inserted] = index_of_.emplace(ids_[i], static_cast<int>(i) + 1);
    if (!inserted) throw std::invalid_argument("vocabulary: duplicate sensor id: " + ids_[i]);
  }
}

int SensorVocabulary::index(const std::string& sensor_id) const {
  auto it = index_of_.find(sensor_id);
  if (it == index_of_.end())
    throw std::out_of_range("vocabulary: unknown sensor id: " + sensor_id);
  return it->second;
}

bool SensorVocabulary::contains(const std::string& sensor_id) const {
  return index_of_.count(sensor_id) != 0;
}

const std::string& SensorVocabulary::id(int index) const {
  if (index < 1 || index > static_cast<int>(ids_.size()))
    throw std::out_of_range("vocabulary: index out of range: " + std::to_string(index));
  return ids_[static_cast<std::size_t>(index) - 1];
}

SensorVocabulary make_vocabulary(const RawLog& log) {
  std::set<std::string> uniq;
  for (const auto& e : log.events) {
    if (!e.sensor_id.empty() && e.sensor_id[0] != 'T') uniq.insert(e.sensor_id);
  }
  return SensorVocabulary(std::vector<std::string>(uniq.begin(), uniq.end()));
}

namespace {

bool state_matches_sensor(const std::string& sensor_id, SensorState state) {
  const bool door_state = state == SensorState::OPEN || state == SensorState::CLOSE;
  if (!sensor_id.empty() && sensor_id[0] == 'D') return door_state;
  return !door_state;  // motion-like sensors use ON/OFF
}

}  // namespace

SignedToken encode_token(const std::string& sensor_id, SensorState state,
                         const SensorVocabulary& vocab) {
  const int idx = vocab.index(sensor_id);
  if (!state_matches_sensor(sensor_id, state)) {
    throw std::invalid_argument("encode_token: state " + std::string(to_string(state)) +
                                " not valid for sensor " + sensor_id);
  }
  return SignedToken{is_activating(state) ? idx : -idx};
}

std::pair<std::string, SensorState> decode_token(SignedToken t, const SensorVocabulary& vocab) {
  if (t.value == 0) throw std::out_of_range("decode_token: reserved index 0");
  const std::string& id = vocab.id(t.index());
  const bool door = !id.empty() && id[0] == 'D';
  SensorState state;
  if (t.activating()) {
    state = door ? SensorState::OPEN : SensorState::ON;
  } else {
    state = door ? SensorState::CLOSE : SensorState::OFF;
  }
  return {id, state};
}

std::string token_text(SignedToken t, const SensorVocabulary& vocab) {
  return (t.activating() ? "+" : "-") + vocab.id(t.index());
}

int log_bin_duration(double delta_seconds) {
  if (std::isnan(delta_seconds) || delta_seconds < 0.0)
    throw std::invalid_argument("log_bin_duration: negative duration");
  static constexpr double edges[] = {1, 2, 4, 8, 16, 64, 256};
  int bin = 0;
  for (double edge : edges) {
    if (delta_seconds < edge) break;
    ++bin;
  }
  return bin;
}

double representative_duration(int bin) {
  if (bin < 0 || bin > 7) throw std::invalid_argument("representative_duration: bad bin");
  static constexpr double lo[] = {0, 1, 2, 4, 8, 16, 64, 256};
  static constexpr double hi[] = {1, 2, 4, 8, 16, 64, 256, 1024};
  return std::sqrt(lo[bin] * hi[bin]);  // top bin: sqrt(256*1024) = 512 s
}

std::pair<double, double> cyclic_pair(int value, int period) {
  if (period <= 0) throw std::invalid_argument("cyclic_pair: period must be positive");
  if (value < 0 || value >= period)
    throw std::invalid_argument("cyclic_pair: value outside [0, period)");
  const double angle = 2.0 * M_PI * static_cast<double>(value) / static_cast<double>(period);
  return {std::sin(angle), std::cos(angle)};
}

std::vector<TrainingWindow> make_training_windows(const ActivitySequence& seq,
                                                  std::size_t window) {
  const std::size_t m = seq.size();
  if (m < 2) throw std::invalid_argument("make_training_windows: sequence shorter than 2");
  if (window == 0) throw std::invalid_argument("make_training_windows: zero window");

  std::vector<TrainingWindow> out;
  out.reserve(m);
  auto context_for = [&](std::size_t end_exclusive) {
    const std::size_t begin = end_exclusive > window ? end_exclusive - window : 0;
    TrainingWindow w;
    w.context_tokens.assign(seq.tokens.begin() + begin, seq.tokens.begin() + end_exclusive);
    w.context_temporal.assign(seq.temporal.begin() + begin,
                              seq.temporal.begin() + end_exclusive);
    w.activity = seq.label;
    return w;
  };

  for (std::size_t t = 1; t < m; ++t) {
    TrainingWindow w = context_for(t);
    w.target_is_end = false;
    w.target_token = seq.tokens[t];
    w.target_duration_bin = seq.temporal[t].duration_bin;
    out.push_back(std::move(w));
  }
  TrainingWindow end = context_for(m);
  end.target_is_end = true;
  out.push_back(std::move(end));
  return out;
}

void recompute_temporal(ActivitySequence& seq) {
  const std::size_t m = seq.size();
  seq.temporal.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    seq.temporal[i].hour = hour_of_day(seq.timestamps[i]);
    seq.temporal[i].day = day_of_week(seq.timestamps[i]);
    if (i + 1 < m) {
      const double gap =
          static_cast<double>(seq.timestamps[i + 1] - seq.timestamps[i]) / kMicrosPerSecond;
      seq.temporal[i].duration_bin = log_bin_duration(std::max(gap, 0.0));
    } else {
      seq.temporal[i].duration_bin = 0;
    }
  }
}

}  // namespace adlgen
