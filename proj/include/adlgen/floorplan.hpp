#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "adlgen/encoding.hpp"
#include "adlgen/sequence.hpp"

namespace adlgen {

// Sensor adjacency derived from rooms and declared room adjacency:
// a_map(i,j) = 1 iff same room or directly adjacent rooms; diagonal is 1.
// Immutable after load; safe for concurrent reads.
class FloorplanGraph {
 public:
  FloorplanGraph() = default;
  FloorplanGraph(const SensorVocabulary& vocab, std::map<std::string, std::string> room_of,
                 std::set<std::pair<std::string, std::string>> room_adjacency,
                 std::map<std::string, std::string> label_of = {});

  bool adjacent(int i, int j) const;  // 1-based vocabulary indices
  bool has_sensor(const std::string& sensor_id) const;
  const std::string& room_of(const std::string& sensor_id) const;
  // Human-readable location phrase: label attribute, else the room name.
  const std::string& location_phrase(const std::string& sensor_id) const;
  std::size_t sensor_count() const { return n_; }
  const std::vector<std::string>& sensors() const { return sensors_; }

 private:
  std::size_t n_ = 0;
  std::vector<std::string> sensors_;
  std::vector<std::uint8_t> a_map_;  // (n+1)^2, row/col 0 unused
  std::map<std::string, std::string> room_of_;
  std::map<std::string, std::string> label_of_;
};

// Spec lines (order-insensitive, '#' comments):
//   sensor <ID> room <Room> [label "<location phrase>"]
//   adjacent <RoomA> <RoomB>
// Every vocabulary sensor must appear exactly once; adjacency may only name
// rooms introduced by sensor lines.
FloorplanGraph load_floorplan(const std::string& spec_text, const SensorVocabulary& vocab);

// Spatial feasibility of cand following prev; signs are ignored.
bool validate_transition(SignedToken prev, SignedToken cand, const FloorplanGraph& g);

struct ValidityRate {
  double sequence_level = 0.0;   // sequences with every transition valid
  double transition_level = 0.0;  // valid transitions / total transitions
};

// A length-1 sequence counts as valid and contributes no transitions.
ValidityRate validity_rate(const std::vector<ActivitySequence>& corpus,
                           const FloorplanGraph& g);

}  // namespace adlgen
