#include <algorithm>
#include <map>
#include <cmath>

#include "adlgen/downstream.hpp"
#include "adlgen/rng.hpp"
#include "doctest.h"

using namespace adlgen;

namespace {

SensorVocabulary vocab4() { return SensorVocabulary({"M001", "M002", "M003", "M004"}); }

ActivitySequence seq_of(const std::vector<int>& tokens, const std::string& label, int hour,
                        const std::string& id = "S") {
  ActivitySequence s;
  s.label = label;
  s.sample_id = id;
  Micros t = Micros(hour) * kMicrosPerHour;
  for (int v : tokens) {
    s.tokens.push_back({v});
    s.timestamps.push_back(t);
    t += 2 * kMicrosPerSecond;
  }
  recompute_temporal(s);
  return s;
}

// Class "a" lives on sensors 1/2 in the morning, class "b" on 3/4 at night.
std::vector<ActivitySequence> separable_corpus(int n_per_class, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ActivitySequence> out;
  for (int i = 0; i < n_per_class; ++i) {
    const int x = rng.uniform_int(1, 2);
    out.push_back(seq_of({x, -x, x == 1 ? 2 : 1}, "a", rng.uniform_int(8, 11),
                         "a" + std::to_string(i)));
    const int y = rng.uniform_int(3, 4);
    out.push_back(seq_of({y, -y, y == 3 ? 4 : 3}, "b", rng.uniform_int(20, 23),
                         "b" + std::to_string(i)));
  }
  return out;
}

}  // namespace

TEST_CASE("classifier features extend featurize with cyclic time") {
  const auto v = vocab4();
  const auto f = classifier_features(seq_of({1}, "a", 6), v);
  CHECK(f.size() == 8 + 24 + 8 + 4);
  const auto [hs, hc] = cyclic_pair(6, 24);
  CHECK(f[f.size() - 4] == doctest::Approx(hs));
  CHECK(f[f.size() - 3] == doctest::Approx(hc));
}

TEST_CASE("train_classifier separates a linearly separable corpus") {
  const auto v = vocab4();
  const auto corpus = separable_corpus(12, 3);
  const auto clf = train_classifier(corpus, v, 7);
  std::size_t correct = 0;
  for (const auto& s : corpus)
    if (predict(clf, s, v) == s.label) ++correct;
  CHECK(correct == corpus.size());
}

TEST_CASE("train_classifier is deterministic and rejects single-class input") {
  const auto v = vocab4();
  const auto corpus = separable_corpus(6, 11);
  const auto c1 = train_classifier(corpus, v, 5);
  const auto c2 = train_classifier(corpus, v, 5);
  CHECK(c1.weights == c2.weights);
  CHECK(c1.bias == c2.bias);

  std::vector<ActivitySequence> mono = {seq_of({1, -1}, "only", 9)};
  CHECK_THROWS(train_classifier(mono, v, 5));
  CHECK_THROWS(train_classifier({}, v, 5));
}

TEST_CASE("duplicating a sample keeps held-out decisions when classes stay balanced") {
  const auto v = vocab4();
  auto corpus = separable_corpus(10, 21);
  const auto holdout = separable_corpus(5, 77);

  const auto base = train_classifier(corpus, v, 1);
  // Duplicate one sample of each class.
  corpus.push_back(corpus[0]);
  corpus.push_back(corpus[1]);
  const auto dup = train_classifier(corpus, v, 1);
  for (const auto& s : holdout) CHECK(predict(base, s, v) == predict(dup, s, v));
}

TEST_CASE("evaluate_setting computes macro metrics over test-present classes") {
  const auto v = vocab4();
  const auto train = separable_corpus(10, 5);
  const auto test = separable_corpus(6, 99);
  const auto r = evaluate_setting(train, test, "TRTR", v, 0);
  CHECK(r.setting == "TRTR");
  CHECK(r.macro_accuracy == doctest::Approx(1.0));
  CHECK(r.macro_f1 == doctest::Approx(1.0));

  // Permuting the test order leaves metrics unchanged.
  auto shuffled = test;
  std::reverse(shuffled.begin(), shuffled.end());
  const auto r2 = evaluate_setting(train, shuffled, "TRTR", v, 0);
  CHECK(r2.macro_f1 == doctest::Approx(r.macro_f1));
  CHECK(r2.confusion == r.confusion);
}

TEST_CASE("classes absent from training score zero F1") {
  const auto v = vocab4();
  const auto train = separable_corpus(8, 5);
  auto test = separable_corpus(3, 9);
  test.push_back(seq_of({1, -1, 2}, "ghost", 9, "g1"));
  const auto r = evaluate_setting(train, test, "TRTR", v, 0);
  const auto it = std::find(r.classes.begin(), r.classes.end(), "ghost");
  REQUIRE(it != r.classes.end());
  const auto gi = static_cast<std::size_t>(it - r.classes.begin());
  CHECK(r.f1[gi] == doctest::Approx(0.0));
  CHECK(r.recall[gi] == doctest::Approx(0.0));
  // Macro mean over 3 test-present classes: two perfect plus one zero.
  CHECK(r.macro_f1 < 1.0);
}

TEST_CASE("confusion matrix row sums equal per-class test counts") {
  const auto v = vocab4();
  const auto train = separable_corpus(8, 50);
  const auto test = separable_corpus(4, 51);
  const auto r = evaluate_setting(train, test, "TSTS", v, 0);
  std::map<std::string, int> counts;
  for (const auto& s : test) ++counts[s.label];
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    CHECK(r.confusion.row(static_cast<Eigen::Index>(c)).sum() == counts[r.classes[c]]);
  }
  // Macro F1 equals the mean of per-class F1 over test-present classes.
  double f1 = 0.0;
  int present = 0;
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    if (r.in_test[c]) {
      f1 += r.f1[c];
      ++present;
    }
  }
  CHECK(r.macro_f1 == doctest::Approx(f1 / present));
}

TEST_CASE("hand-built two-class confusion matches manual metrics") {
  // Train on clean data, test on a set constructed to produce one error.
  const auto v = vocab4();
  std::vector<ActivitySequence> train;
  for (int i = 0; i < 10; ++i) {
    train.push_back(seq_of({1, -1}, "a", 9, "a" + std::to_string(i)));
    train.push_back(seq_of({3, -3}, "b", 22, "b" + std::to_string(i)));
  }
  std::vector<ActivitySequence> test;
  test.push_back(seq_of({1, -1}, "a", 9, "t1"));
  test.push_back(seq_of({1, -1}, "b", 9, "t2"));  // labeled b, looks like a
  test.push_back(seq_of({3, -3}, "b", 22, "t3"));
  const auto r = evaluate_setting(train, test, "HAND", v, 0);
  // Confusion: a: 1 correct; b: one misread as a, one correct.
  // precision(a) = 1/2, recall(a) = 1, f1(a) = 2/3
  // precision(b) = 1, recall(b) = 1/2, f1(b) = 2/3
  const auto ai = static_cast<std::size_t>(
      std::find(r.classes.begin(), r.classes.end(), "a") - r.classes.begin());
  const auto bi = static_cast<std::size_t>(
      std::find(r.classes.begin(), r.classes.end(), "b") - r.classes.begin());
  CHECK(r.precision[ai] == doctest::Approx(0.5));
  CHECK(r.recall[ai] == doctest::Approx(1.0));
  CHECK(r.f1[ai] == doctest::Approx(2.0 / 3.0));
  CHECK(r.precision[bi] == doctest::Approx(1.0));
  CHECK(r.recall[bi] == doctest::Approx(0.5));
  CHECK(r.f1[bi] == doctest::Approx(2.0 / 3.0));
  CHECK(r.macro_f1 == doctest::Approx(2.0 / 3.0));
  CHECK(r.macro_accuracy == doctest::Approx(0.75));
}

TEST_CASE("few_shot_augment reports a baseline row at ratio zero") {
  const auto v = vocab4();
  FewShotSpec spec;
  // Imbalanced: many "a", few "b".
  Rng rng(33);
  for (int i = 0; i < 40; ++i)
    spec.train.push_back(seq_of({rng.uniform_int(1, 2), -1}, "a", rng.uniform_int(8, 11),
                                "a" + std::to_string(i)));
  for (int i = 0; i < 3; ++i)
    spec.train.push_back(seq_of({3, -3, 4}, "b", 21, "b" + std::to_string(i)));
  spec.test = separable_corpus(8, 1234);
  spec.rare_classes = {"b"};
  spec.ratios = {0.0, 2.0};
  spec.shots_per_rare = 3;

  int calls = 0;
  SynthGenerator gen = [&](const std::string& activity, int count) {
    ++calls;
    CHECK(activity == "b");
    std::vector<ActivitySequence> out;
    Rng r2(99);
    for (int i = 0; i < count; ++i)
      out.push_back(seq_of({r2.uniform_int(3, 4), -3}, "b", r2.uniform_int(20, 23),
                           "s" + std::to_string(i)));
    return out;
  };
  const auto series = few_shot_augment(spec, gen, v, 0);
  REQUIRE(series.size() == 2);
  CHECK(series[0].ratio == 0.0);
  CHECK(calls == 1);  // ratio 0 never asks the generator
  CHECK(series[1].result.macro_f1 >= series[0].result.macro_f1);
}
