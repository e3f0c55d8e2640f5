#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "adlgen/events.hpp"
#include "adlgen/sequence.hpp"

namespace adlgen {

// Sensor-id vocabulary with a 1-based index (0 is reserved). Only sensor IDs
// form the vocabulary; activation state lives in the token sign.
class SensorVocabulary {
 public:
  SensorVocabulary() = default;
  explicit SensorVocabulary(std::vector<std::string> ids);

  int index(const std::string& sensor_id) const;  // throws on unknown id
  bool contains(const std::string& sensor_id) const;
  const std::string& id(int index) const;  // throws on out-of-range index
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> index_of_;
};

// Sorted unique non-temperature sensor ids observed in the log.
SensorVocabulary make_vocabulary(const RawLog& log);

SignedToken encode_token(const std::string& sensor_id, SensorState state,
                         const SensorVocabulary& vocab);
std::pair<std::string, SensorState> decode_token(SignedToken t, const SensorVocabulary& vocab);

// Human-readable form, e.g. "+M001".
std::string token_text(SignedToken t, const SensorVocabulary& vocab);

// Inter-event gap discretized into 8 logarithmic bins:
// [0,1) [1,2) [2,4) [4,8) [8,16) [16,64) [64,256) [256,inf).
int log_bin_duration(double delta_seconds);
double representative_duration(int bin);  // geometric bin midpoint; top bin 512 s

// (sin, cos) of 2*pi*value/period.
std::pair<double, double> cyclic_pair(int value, int period);

// One next-event prediction instance: a context of at most `window` preceding
// events and either the next event's (token, duration_bin) or END.
struct TrainingWindow {
  std::vector<SignedToken> context_tokens;
  std::vector<TemporalFeature> context_temporal;
  std::string activity;
  bool target_is_end = false;
  SignedToken target_token;      // valid when !target_is_end
  int target_duration_bin = 0;   // valid when !target_is_end
};

// For a sequence of length M (M >= 2): M-1 windows targeting events 2..M plus
// one END window, M windows total.
std::vector<TrainingWindow> make_training_windows(const ActivitySequence& seq,
                                                  std::size_t window = 10);

}  // namespace adlgen
