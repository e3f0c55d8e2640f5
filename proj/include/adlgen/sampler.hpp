#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "adlgen/floorplan.hpp"
#include "adlgen/model.hpp"
#include "adlgen/rng.hpp"
#include "adlgen/sequence.hpp"

namespace adlgen {

struct SamplerConfig {
  double tau_base = 0.7;
  double tau_min = 0.5;
  double tau_max = 1.0;
  int l_min = 3;
  int l_max = 100;
  double nucleus_p = 0.95;
  double r_p = 1.1;
  double beta_low = 1.2;
  double diversity_threshold = 0.5;
  int max_resample = 3;
  int max_len = 100;
  int context_window = 10;
  // The length/diversity temperature law raises tau when sensor-id diversity
  // is low; beta_literal = true instead divides by beta_low, the formula's
  // literal placement.
  bool beta_literal = false;
  bool enforce_adjacency = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct StepState {
  int length = 1;            // events generated so far
  double unique_ratio = 1.0;  // distinct sensor ids / length
  int n_current = 1;          // occurrences of the current sensor id in history
};

double compute_temperature(const StepState& s, const SamplerConfig& cfg);

// Keeps the smallest probability-sorted prefix with cumulative mass >= p and
// renormalizes; ties broken toward the lower index. Input must sum to 1.
Eigen::VectorXd nucleus_filter(const Eigen::VectorXd& probs, double p);

struct StepProvenance {
  int step = 0;
  double tau = 0.0;
  int resamples = 0;
  bool fallback = false;
};

struct GeneratedSequence {
  ActivitySequence seq;
  std::vector<StepProvenance> provenance;
};

struct StepResult {
  bool is_end = false;
  SignedToken token;
  int duration_bin = 0;
  StepProvenance provenance;
};

// One constrained decoding step: temperature-scaled, nucleus-filtered sensor
// sampling with up to max_resample adjacency rejections, then a masked-argmax
// fallback over adjacency-valid sensors.
StepResult constrained_step(const ModelWeights& model, const ActivitySequence& history,
                            const FloorplanGraph& graph, const SamplerConfig& cfg, Rng& rng,
                            int step_index = 0);

// Generates `count` sequences for the activity. Each sequence draws from an
// independent RNG stream mixed from (seed, ordinal), so results do not depend
// on scheduling. Without an exemplar prefix the first event is drawn from the
// checkpoint's class-conditional start distribution.
std::vector<GeneratedSequence> generate(const ModelWeights& model, const std::string& activity,
                                        int count,
                                        const std::optional<ActivitySequence>& exemplar_prefix,
                                        Micros start_clock, const FloorplanGraph& graph,
                                        const SamplerConfig& cfg, int jobs = 1);

std::string provenance_csv(const std::vector<GeneratedSequence>& out);

struct GateThresholds {
  double min_semantic = 3.5;
  double min_diversity = 0.4;
};

// Keeps candidates whose semantic score, sequence-level floorplan validity and
// single-sequence diversity all clear the thresholds.
std::vector<GeneratedSequence> quality_gate(const std::vector<GeneratedSequence>& candidates,
                                            const std::vector<double>& semantic_scores,
                                            const FloorplanGraph& graph,
                                            const GateThresholds& thresholds = {});

}  // namespace adlgen
