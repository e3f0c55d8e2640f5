#include "adlgen/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace adlgen {

Eigen::VectorXd classifier_features(const ActivitySequence& seq,
                                    const SensorVocabulary& vocab) {
  const FeatureVector base = featurize(seq, vocab);
  Eigen::VectorXd out(base.size() + 4);
  out.head(base.size()) = base;
  const auto [hs, hc] = cyclic_pair(seq.temporal.front().hour, 24);
  const auto [ds, dc] = cyclic_pair(seq.temporal.front().day, 7);
  out[base.size()] = hs;
  out[base.size() + 1] = hc;
  out[base.size() + 2] = ds;
  out[base.size() + 3] = dc;
  return out;
}

Classifier train_classifier(const std::vector<ActivitySequence>& train,
                            const SensorVocabulary& vocab, std::uint64_t seed) {
  if (train.empty()) throw std::invalid_argument("train_classifier: empty corpus");
  std::set<std::string> labels;
  for (const auto& s : train) labels.insert(s.label);
  if (labels.size() < 2)
    throw std::invalid_argument("train_classifier: need at least 2 classes");

  Classifier clf;
  clf.classes.assign(labels.begin(), labels.end());
  clf.seed = seed;
  std::map<std::string, int> class_index;
  for (std::size_t i = 0; i < clf.classes.size(); ++i)
    class_index[clf.classes[i]] = static_cast<int>(i);

  const Eigen::Index n = static_cast<Eigen::Index>(train.size());
  const Eigen::Index dim = classifier_features(train.front(), vocab).size();
  const Eigen::Index k = static_cast<Eigen::Index>(clf.classes.size());
  Eigen::MatrixXd x(n, dim);
  std::vector<int> y(train.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    x.row(i) = classifier_features(train[static_cast<std::size_t>(i)], vocab).transpose();
    y[static_cast<std::size_t>(i)] = class_index.at(train[static_cast<std::size_t>(i)].label);
  }

  clf.weights = Eigen::MatrixXd::Zero(k, dim);
  clf.bias = Eigen::VectorXd::Zero(k);

  // Full-batch softmax regression; fixed schedule, mild L2.
  constexpr int kEpochs = 400;
  constexpr double kL2 = 1e-4;
  const double n_inv = 1.0 / static_cast<double>(n);
  for (int epoch = 0; epoch < kEpochs; ++epoch) {
    const double lr = 2.0 / (1.0 + 0.01 * epoch);
    Eigen::MatrixXd logits = x * clf.weights.transpose();
    logits.rowwise() += clf.bias.transpose();
    Eigen::MatrixXd probs(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mx = logits.row(i).maxCoeff();
      const Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp();
      probs.row(i) = e / e.sum();
    }
    for (Eigen::Index i = 0; i < n; ++i) probs(i, y[static_cast<std::size_t>(i)]) -= 1.0;
    const Eigen::MatrixXd gw = probs.transpose() * x * n_inv + kL2 * clf.weights;
    const Eigen::VectorXd gb = probs.colwise().sum().transpose() * n_inv;
    clf.weights -= lr * gw;
    clf.bias -= lr * gb;
  }
  clf.epochs = kEpochs;
  return clf;
}

std::string predict(const Classifier& clf, const ActivitySequence& seq,
                    const SensorVocabulary& vocab) {
  const Eigen::VectorXd f = classifier_features(seq, vocab);
  const Eigen::VectorXd scores = clf.weights * f + clf.bias;
  Eigen::Index best = 0;
  scores.maxCoeff(&best);
  return clf.classes[static_cast<std::size_t>(best)];
}

RecognitionResult evaluate_setting(const std::vector<ActivitySequence>& trainset,
                                   const std::vector<ActivitySequence>& testset,
                                   const std::string& setting, const SensorVocabulary& vocab,
                                   std::uint64_t seed) {
  if (testset.empty()) throw std::invalid_argument("evaluate_setting: empty test set");
  const Classifier clf = train_classifier(trainset, vocab, seed);

  std::set<std::string> all(clf.classes.begin(), clf.classes.end());
  std::set<std::string> test_present;
  for (const auto& s : testset) {
    all.insert(s.label);
    test_present.insert(s.label);
  }

  RecognitionResult r;
  r.setting = setting;
  r.classes.assign(all.begin(), all.end());
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < r.classes.size(); ++i)
    index[r.classes[i]] = static_cast<int>(i);
  const auto k = static_cast<Eigen::Index>(r.classes.size());
  r.confusion = Eigen::MatrixXi::Zero(k, k);

  for (const auto& s : testset) {
    const int truth = index.at(s.label);
    const int pred = index.at(predict(clf, s, vocab));
    r.confusion(truth, pred) += 1;
  }

  const double total = static_cast<double>(testset.size());
  r.accuracy.resize(r.classes.size());
  r.precision.resize(r.classes.size());
  r.recall.resize(r.classes.size());
  r.f1.resize(r.classes.size());
  r.in_test.resize(r.classes.size());
  double acc_sum = 0.0, f1_sum = 0.0;
  std::size_t present = 0;
  for (Eigen::Index c = 0; c < k; ++c) {
    const double tp = r.confusion(c, c);
    const double fn = r.confusion.row(c).sum() - tp;
    const double fp = r.confusion.col(c).sum() - tp;
    const double tn = total - tp - fn - fp;
    const auto ci = static_cast<std::size_t>(c);
    r.accuracy[ci] = (tp + tn) / total;
    r.precision[ci] = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    r.recall[ci] = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    r.f1[ci] = r.precision[ci] + r.recall[ci] > 0
                   ? 2.0 * r.precision[ci] * r.recall[ci] / (r.precision[ci] + r.recall[ci])
                   : 0.0;
    r.in_test[ci] = test_present.count(r.classes[ci]) != 0;
    if (r.in_test[ci]) {
      acc_sum += r.recall[ci];
      f1_sum += r.f1[ci];
      ++present;
    }
  }
  r.macro_accuracy = present ? acc_sum / static_cast<double>(present) : 0.0;
  r.macro_f1 = present ? f1_sum / static_cast<double>(present) : 0.0;
  return r;
}

std::string recognition_csv_row(const std::string& training_data, const std::string& test_data,
                                const RecognitionResult& r) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << training_data << ',' << test_data << ',' << r.macro_accuracy << ','
     << r.macro_f1 << '\n';
  return os.str();
}

std::string per_class_csv(const RecognitionResult& r) {
  std::ostringstream os;
  os << "class,acc,prec,rec,f1,in_test\n";
  os.precision(6);
  os << std::fixed;
  for (std::size_t i = 0; i < r.classes.size(); ++i) {
    os << r.classes[i] << ',' << r.accuracy[i] << ',' << r.precision[i] << ',' << r.recall[i]
       << ',' << r.f1[i] << ',' << (r.in_test[i] ? 1 : 0) << '\n';
  }
  return os.str();
}

std::vector<FewShotOutcome> few_shot_augment(const FewShotSpec& spec,
                                             const SynthGenerator& generator,
                                             const SensorVocabulary& vocab,
                                             std::uint64_t seed) {
  if (!generator) throw std::invalid_argument("few_shot_augment: missing generator");
  std::vector<FewShotOutcome> out;
  for (double ratio : spec.ratios) {
    std::vector<ActivitySequence> train = spec.train;
    const int extra = static_cast<int>(std::llround(ratio * spec.shots_per_rare));
    if (extra > 0) {
      for (const auto& rare : spec.rare_classes) {
        auto synth = generator(rare, extra);
        for (auto& s : synth) s.label = rare;
        train.insert(train.end(), std::make_move_iterator(synth.begin()),
                     std::make_move_iterator(synth.end()));
      }
    }
    std::ostringstream name;
    name << "FEWSHOT+" << ratio;
    out.push_back({ratio, evaluate_setting(train, spec.test, name.str(), vocab, seed)});
  }
  return out;
}

}  // namespace adlgen
