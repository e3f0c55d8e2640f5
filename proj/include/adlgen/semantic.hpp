#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adlgen/encoding.hpp"
#include "adlgen/floorplan.hpp"
#include "adlgen/sequence.hpp"

namespace adlgen {

// ---------------------------------------------------------------------------
// Canonical sequence interchange line, shared by every module that reads or
// writes corpora:
//   Activity,SampleID,[SensorID1,Status1,Time1];[SensorID2,Status2,Time2];...
// Time uses the log timestamp grammar; rendering always emits six fractional
// digits, making render(parse(x)) a fixed point on canonical input.
// ---------------------------------------------------------------------------

std::string render_interchange(const ActivitySequence& seq, const SensorVocabulary& vocab);
std::string render_interchange_corpus(const std::vector<ActivitySequence>& corpus,
                                      const SensorVocabulary& vocab);

// Throws std::invalid_argument with a byte offset on malformed input.
ActivitySequence parse_interchange_line(const std::string& line,
                                        const SensorVocabulary& vocab);

struct SampleError {
  std::string sample_id;  // empty when unknown
  std::size_t line = 0;   // 1-based, 0 when not line-oriented
  std::size_t offset = 0;  // byte offset within the line or block
  std::string message;
};

struct InterchangeParseResult {
  std::vector<ActivitySequence> sequences;
  std::vector<SampleError> errors;  // malformed lines, parse continues
};

InterchangeParseResult parse_interchange(const std::string& text,
                                         const SensorVocabulary& vocab);

// ---------------------------------------------------------------------------
// Activity profiles and the two-tier assessment.
// ---------------------------------------------------------------------------

struct ActivityProfile {
  std::string activity;
  std::set<std::string> core_sensors;        // activation frequency >= threshold
  std::array<double, 24> hour_distribution;  // L1-normalized over training events
  double typical_length = 0.0;               // median M
};

// Built only from training-fold data. A sensor is core when it fires in at
// least core_threshold of the activity's sequences.
std::map<std::string, ActivityProfile> build_profiles(
    const std::vector<ActivitySequence>& training_corpus, const SensorVocabulary& vocab,
    double core_threshold = 0.2);

enum class ViolationKind {
  NON_ALTERNATING_STATE,
  SPATIAL_JUMP,
  EMPTY_OR_DEGENERATE,
  EXCESS_REPETITION,
};

const char* to_string(ViolationKind k);

struct Violation {
  ViolationKind kind;
  std::vector<int> positions;  // 1-based event positions
  std::string detail;
};

struct QualityAssessment {
  bool tier_a_pass = false;
  std::vector<Violation> violations;
  double phi_f = 0.0, phi_b = 0.0, phi_t = 0.0;
  int score = 1;  // 1-2 when tier A fails, 3-5 otherwise
  bool unknown_activity = false;
};

// Tier A: per-sensor state alternation, adjacency-valid transitions, and
// degenerate shapes (M < 2, or one sensor >90% of events when M >= 10).
// On failure the score is 1 (two or more violation kinds) or 2 (one kind).
QualityAssessment check_fundamental(const ActivitySequence& seq, const FloorplanGraph& graph);

struct TierBResult {
  double phi_b = 0.0, phi_t = 0.0;
  int score = 3;
};

// Tier B: phi_B is the fraction of events on the profile's core sensors,
// phi_T is 1 - total-variation distance between the hour histograms.
// Score 5 needs phi_B >= 0.8 and phi_T >= 0.7; score 4 needs 0.5 / 0.4.
TierBResult check_behavior_temporal(const ActivitySequence& seq, const std::string& activity,
                                    const ActivityProfile& profile,
                                    const SensorVocabulary& vocab);

QualityAssessment assess(const ActivitySequence& seq, const std::string& activity,
                         const std::map<std::string, ActivityProfile>& profiles,
                         const FloorplanGraph& graph, const SensorVocabulary& vocab);

// Weighted composite of the three components (the integer score keeps the
// tier rule; this is the configurable continuous form).
struct QualityWeights {
  double alpha_f = 1.0, alpha_b = 1.0, alpha_t = 1.0;
};
double quality_score(const QualityAssessment& a, const QualityWeights& w = {});

// ---------------------------------------------------------------------------
// Text rendering for external LLM scoring.
// ---------------------------------------------------------------------------

// One line per event: "<DayPeriod>: <kind> sensor <location phrase> fired
// (<STATE>)". Periods: Night 0-5, Morning 6-11, Afternoon 12-17, Evening
// 18-23. A sensor the floorplan cannot locate falls back to its id and bumps
// missing_location_warnings.
std::vector<std::string> sequence_to_text(const ActivitySequence& seq,
                                          const FloorplanGraph& graph,
                                          const SensorVocabulary& vocab,
                                          std::size_t* missing_location_warnings = nullptr);

const char* day_period(int hour);

// ---------------------------------------------------------------------------
// Refinement rules.
// ---------------------------------------------------------------------------

enum class RuleKind { Insert, Delete, Reorder };
const char* to_string(RuleKind k);

struct RefinementRule {
  RuleKind kind = RuleKind::Insert;
  std::string activity;
  std::string sample_id;
  SignedToken token;  // INSERT: token to insert; DELETE: token expected at position
  int position = 0;   // 1-based at application time; unused for REORDER
  std::string explanation;
};

// Deterministic synthesizer: drives the sequence to a Tier-A-clean fixed
// point. Alternation repeats insert the missing opposite state; spatial jumps
// insert a bridging sensor adjacent to both endpoints or delete the later
// event; timestamp misorder emits a REORDER.
std::vector<RefinementRule> generate_refinement_rules(
    const ActivitySequence& seq, const QualityAssessment& assessment,
    const FloorplanGraph& graph, const SensorVocabulary& vocab);

// Applies rules in order; positions refer to the sequence state at application
// time. Inserted events take the timestamp midpoint of their neighbors and all
// temporal features are recomputed. A stale position throws and the input is
// left untouched.
ActivitySequence apply_rules(const ActivitySequence& seq,
                             const std::vector<RefinementRule>& rules,
                             const SensorVocabulary& vocab);

// ---------------------------------------------------------------------------
// Wire formats for the external LLM loop.
// ---------------------------------------------------------------------------

std::string render_rule(const RefinementRule& rule, const SensorVocabulary& vocab);

// Two-block format per sample: rule lines, one blank line, then the refined
// sequence as an interchange line; samples separated by one blank line.
struct RefinementSample {
  std::vector<RefinementRule> rules;
  ActivitySequence refined;
};

std::string render_refinement(const std::vector<RefinementSample>& samples,
                              const SensorVocabulary& vocab);

struct RefinementParseResult {
  std::vector<RefinementSample> samples;
  std::vector<SampleError> errors;  // malformed blocks, parse continues
};

RefinementParseResult parse_llm_refinement(const std::string& response_text,
                                           const SensorVocabulary& vocab);

// Scoring response rows: Activity,SampleID,Score. A stray header line is
// skipped; malformed rows or out-of-range scores become per-sample errors.
struct ScoredSample {
  std::string activity;
  std::string sample_id;
  int score = 0;
};

struct ScoreBatchResult {
  std::vector<ScoredSample> scores;
  std::vector<SampleError> errors;
};

struct ScoreRequestSample {
  std::string activity;
  std::string sample_id;
  std::vector<std::string> text_lines;
};

ScoreBatchResult parse_score_csv(const std::string& response,
                                 const std::vector<ScoreRequestSample>& expected);

// Prompt template + rendered samples, the body POSTed to the scoring endpoint.
std::string build_score_request(const std::string& prompt_template,
                                const std::vector<ScoreRequestSample>& samples);

class LlmClient;  // transport, see llm_client.hpp
ScoreBatchResult llm_score_batch(const LlmClient& client, const std::string& prompt_template,
                                 const std::vector<ScoreRequestSample>& samples);

}  // namespace adlgen
