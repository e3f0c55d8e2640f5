#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "adlgen/encoding.hpp"
#include "adlgen/metrics.hpp"
#include "adlgen/sequence.hpp"

namespace adlgen {

// Multinomial softmax regression over featurize() vectors extended with
// cyclic hour/day pairs of the first event. Stands in for a recurrent
// recognizer; the interface stays pluggable.
struct Classifier {
  std::vector<std::string> classes;  // sorted
  Eigen::MatrixXd weights;           // n_classes x dim
  Eigen::VectorXd bias;              // n_classes
  std::uint64_t seed = 0;
  int epochs = 0;
};

Eigen::VectorXd classifier_features(const ActivitySequence& seq,
                                    const SensorVocabulary& vocab);

// Full-batch gradient descent with a fixed step schedule; deterministic given
// the seed. Throws when fewer than 2 classes are present.
Classifier train_classifier(const std::vector<ActivitySequence>& train,
                            const SensorVocabulary& vocab, std::uint64_t seed);

std::string predict(const Classifier& clf, const ActivitySequence& seq,
                    const SensorVocabulary& vocab);

struct RecognitionResult {
  std::string setting;  // TSTR, TRTR, TRTS, TSTS or a scenario label
  double macro_accuracy = 0.0;  // unweighted mean recall over test-present classes
  double macro_f1 = 0.0;
  std::vector<std::string> classes;  // sorted union of train/test labels
  std::vector<double> accuracy, precision, recall, f1;  // per class
  std::vector<bool> in_test;
  Eigen::MatrixXi confusion;  // rows: true class, cols: predicted
};

RecognitionResult evaluate_setting(const std::vector<ActivitySequence>& trainset,
                                   const std::vector<ActivitySequence>& testset,
                                   const std::string& setting, const SensorVocabulary& vocab,
                                   std::uint64_t seed);

// `training_data,test_data,macro_acc,macro_f1` row.
std::string recognition_csv_row(const std::string& training_data, const std::string& test_data,
                                const RecognitionResult& r);
std::string per_class_csv(const RecognitionResult& r);

// Synthetic-sequence source for augmentation: (activity, count) -> sequences
// that already passed the quality gate.
using SynthGenerator =
    std::function<std::vector<ActivitySequence>(const std::string& activity, int count)>;

struct FewShotSpec {
  std::vector<ActivitySequence> train;  // few-shot (imbalanced) training corpus
  std::vector<ActivitySequence> test;   // held-out real fold
  std::vector<std::string> rare_classes;
  std::vector<double> ratios;  // synthetic-to-real ratios, e.g. {0, 1, 2, 4}
  int shots_per_rare = 15;
};

struct FewShotOutcome {
  double ratio = 0.0;
  RecognitionResult result;
};

// For each ratio, augments every rare class with ratio * shots_per_rare
// generated sequences, retrains and evaluates on the held-out fold.
std::vector<FewShotOutcome> few_shot_augment(const FewShotSpec& spec,
                                             const SynthGenerator& generator,
                                             const SensorVocabulary& vocab,
                                             std::uint64_t seed);

}  // namespace adlgen
