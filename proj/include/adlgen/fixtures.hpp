#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "adlgen/encoding.hpp"
#include "adlgen/floorplan.hpp"
#include "adlgen/semantic.hpp"
#include "adlgen/sequence.hpp"

namespace adlgen {

// First-order sensor chain with the activation sign forced to alternate per
// sensor, so sampled traces are Tier-A-clean by construction. Transition
// support must stay inside the floorplan adjacency.
struct ActivityChain {
  std::string label;
  std::array<double, 24> hour_weights{};
  std::array<double, 8> duration_weights{};
  int min_len = 2;
  int max_len = 20;
  std::vector<double> start_weights;               // per sensor index 1..S at [i-1]
  std::vector<std::vector<double>> transition;     // S x S, row-stochastic after load
};

struct MarkovWorld {
  std::string name;
  int version = 1;
  std::uint64_t seed = 0;
  SensorVocabulary vocab;
  std::string floorplan_text;  // the embedded sensor/adjacent lines
  FloorplanGraph graph;
  std::vector<ActivityChain> activities;

  const ActivityChain& chain(const std::string& label) const;
};

// World file grammar (shares the floorplan directives):
//   world <name>
//   version <n>
//   seed <n>
//   sensor <ID> room <Room> [label "<phrase>"]
//   adjacent <RoomA> <RoomB>
//   activity <label>
//     hours <h>:<w> ...
//     durations <bin>:<w> ...
//     lengths <min> <max>
//     start <ID>:<w> ...
//     trans <ID> <ID>:<w> ...
//   end
MarkovWorld load_world(const std::string& text);
MarkovWorld load_world_file(const std::string& path);

// i.i.d. traces from the per-activity chains; deterministic for a seed.
// Throws if a sampled trace fails the fundamental checks (a world authoring
// error such as a flooding self-loop).
std::vector<ActivitySequence> sample_world_corpus(const MarkovWorld& world,
                                                  const std::map<std::string, int>& per_activity,
                                                  std::uint64_t seed);

struct CorruptionMix {
  double alternation = 0.0;  // fraction of sequences given a repeated-state defect
  double jump = 0.0;         // fraction given an adjacency-violating insertion
};

struct InjectedDefect {
  std::string sample_id;
  ViolationKind kind;
  int position = 0;  // 1-based, as check_fundamental reports it
};

struct CorruptionResult {
  std::vector<ActivitySequence> corpus;
  std::vector<InjectedDefect> defects;    // includes analytically derived secondaries
  std::size_t failed_injections = 0;      // e.g. no non-adjacent sensor exists
};

// Injects defects at known positions; the defect list is exactly what
// check_fundamental must report on the corrupted corpus.
CorruptionResult corrupt_corpus(const std::vector<ActivitySequence>& corpus,
                                const CorruptionMix& mix, const FloorplanGraph& graph,
                                const SensorVocabulary& vocab, std::uint64_t seed);

}  // namespace adlgen
