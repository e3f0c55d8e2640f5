#pragma once

#include <string>
#include <vector>

#include "adlgen/time_util.hpp"

namespace adlgen {

// Signed sensor token: |value| is the 1-based vocabulary index, the sign
// carries the activation state (+ for ON/OPEN, - for OFF/CLOSE). Index 0 is
// reserved and never a valid token.
struct SignedToken {
  int value = 0;

  int index() const { return value < 0 ? -value : value; }
  bool activating() const { return value > 0; }
  friend bool operator==(const SignedToken&, const SignedToken&) = default;
};

struct TemporalFeature {
  int hour = 0;          // [0,23]
  int day = 0;           // [0,6], Monday = 0
  int duration_bin = 0;  // [0,7]; 0 for the final event of a sequence
  friend bool operator==(const TemporalFeature&, const TemporalFeature&) = default;
};

// An activity-labeled run of signed tokens with aligned temporal features and
// the underlying event timestamps. tokens, temporal and timestamps always
// have the same length.
struct ActivitySequence {
  std::string label;
  std::string sample_id;
  std::vector<SignedToken> tokens;
  std::vector<TemporalFeature> temporal;
  std::vector<Micros> timestamps;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  Micros first_timestamp() const { return timestamps.empty() ? 0 : timestamps.front(); }
};

// Rebuilds hour/day/duration_bin from the stored timestamps (final event gets
// duration_bin 0).
void recompute_temporal(ActivitySequence& seq);

}  // namespace adlgen
