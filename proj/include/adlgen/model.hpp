#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "adlgen/encoding.hpp"
#include "adlgen/sequence.hpp"

namespace adlgen {

struct ModelConfig {
  int d_model = 384;
  int n_heads = 6;
  int n_layers = 6;
  int max_len = 100;
  int vocab_size = 0;    // |S|
  int n_activities = 0;  // |A|
  double dropout = 0.0;
  std::uint64_t seed = 0;
  int ffn_mult = 4;

  int d_half() const { return d_model / 2; }
  int d_ffn() const { return d_model * ffn_mult; }
  void validate() const;
};

struct TrainConfig {
  double base_lr = 5e-4;
  double weight_decay = 0.01;
  int batch_size = 64;
  int max_epochs = 100;
  int early_stop_patience = 10;
  double val_fraction = 0.1;
  // One-cycle policy: linear warmup over warmup_fraction of all steps from
  // base_lr/final_div up to base_lr, cosine decay back down to base_lr/final_div.
  double warmup_fraction = 0.3;
  double final_div = 25.0;
  std::uint64_t seed = 0;
};

// Offsets of every named tensor inside the flat parameter buffer.
struct ParamLayout {
  struct Entry {
    std::size_t offset = 0;
    int rows = 0, cols = 0;
    std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
  };
  Entry sensor_table, sign_table, proj, pos_table, temporal_codebook, activity_table, omega;
  struct Layer {
    Entry ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo;
    Entry ln2_g, ln2_b, w1, b1, w2, b2;
  };
  std::vector<Layer> layers;
  Entry lnf_g, lnf_b;
  Entry head_sensor_w, head_sensor_b, head_sign_w, head_sign_b;
  Entry head_dur_w, head_dur_b, head_special_w, head_special_b;
  std::size_t total = 0;

  static ParamLayout build(const ModelConfig& cfg);
};

// Rows of the shared temporal codebook: hours 0-23, days 24-30, bins 31-38.
constexpr int kHourRow = 0;
constexpr int kDayRow = 24;
constexpr int kDurRow = 31;
constexpr int kTemporalRows = 39;
constexpr int kDurationBins = 8;

class ModelWeights {
 public:
  ModelConfig config;
  std::vector<std::string> sensor_ids;  // vocabulary snapshot, index i+1 -> ids[i]
  std::vector<std::string> activities;  // sorted labels
  std::vector<double> params;
  // Empirical first-event counts per activity: [activity][token_slot][bin],
  // token_slot in [0, 2|S|): +i at i-1, -i at |S|+i-1. This realizes the
  // p(e_1 | a) factor that sliding windows never supervise.
  std::vector<double> start_counts;

  const ParamLayout& layout() const { return layout_; }
  void init(const ModelConfig& cfg, std::vector<std::string> sensor_ids,
            std::vector<std::string> activities);

  int activity_index(const std::string& label) const;  // throws on unknown

  double omega_p() const;
  double omega_t() const;

 private:
  ParamLayout layout_;
};

struct HeadOutputs {
  Eigen::VectorXd sensor_logits;    // |S|, entry i-1 for sensor index i
  double sign_logit = 0.0;          // P(+) = sigmoid
  Eigen::VectorXd duration_logits;  // 8
  double special_logit = 0.0;       // P(END) = sigmoid
};

// Per-position multi-component embedding: projected (sensor, sign) tables plus
// weighted positional and temporal terms; the activity embedding is added at
// position 0 of the context.
Eigen::MatrixXd embed(std::span<const SignedToken> tokens,
                      std::span<const TemporalFeature> temporal, const std::string& activity,
                      const ModelWeights& w);

// Next-event logits at the last context position under causal masking.
HeadOutputs forward(const TrainingWindow& window, const ModelWeights& w);
// Logits at every context position (used to check causality).
std::vector<HeadOutputs> forward_positions(const TrainingWindow& window, const ModelWeights& w);

struct LossBreakdown {
  double total = 0, sensor_id = 0, sensor_sign = 0, temp = 0, special = 0;
};

// Mean cross-entropy over sensor indices / duration bins and mean BCE on the
// sign, all masked out for END targets; BCE on the END indicator over every
// window; total is the unweighted sum.
LossBreakdown loss(std::span<const TrainingWindow> batch, const ModelWeights& w);
LossBreakdown loss_and_grad(std::span<const TrainingWindow> batch, const ModelWeights& w,
                            std::vector<double>& grad);
// Train-mode variant: applies inverted dropout on the residual branches when
// config.dropout > 0, drawing masks from dropout_rng.
class Rng;
LossBreakdown loss_and_grad_train(std::span<const TrainingWindow> batch, const ModelWeights& w,
                                  std::vector<double>& grad, Rng& dropout_rng);

struct EpochStats {
  int epoch = 0;
  double total = 0, sensor_id = 0, sensor_sign = 0, temp = 0, special = 0;
  double val_total = 0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int stopping_epoch = 0;
  int best_epoch = 0;
  double best_val = 0.0;
};

std::string train_report_csv(const TrainReport& report);

// Deterministic AdamW training with a one-cycle schedule and early stopping on
// validation loss; returns best-validation weights. The vocabulary variant
// stamps real sensor ids into the weights; the plain variant uses placeholder
// ids sized from mcfg.vocab_size.
std::pair<ModelWeights, TrainReport> train(const std::vector<ActivitySequence>& dataset,
                                           const ModelConfig& mcfg, const TrainConfig& tcfg);
std::pair<ModelWeights, TrainReport> train(const std::vector<ActivitySequence>& dataset,
                                           const SensorVocabulary& vocab,
                                           const ModelConfig& mcfg, const TrainConfig& tcfg);

// Versioned self-describing container; round-trips weights and both configs
// exactly.
void save_checkpoint(const ModelWeights& w, const TrainConfig& tcfg, std::ostream& out);
std::pair<ModelWeights, TrainConfig> load_checkpoint(std::istream& in);
void save_checkpoint_file(const ModelWeights& w, const TrainConfig& tcfg,
                          const std::string& path);
std::pair<ModelWeights, TrainConfig> load_checkpoint_file(const std::string& path);

}  // namespace adlgen
