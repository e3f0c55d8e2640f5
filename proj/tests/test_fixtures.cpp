#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <set>

#include "adlgen/fixtures.hpp"
#include "doctest.h"

using namespace adlgen;

namespace {

const char* kMiniWorld =
    "world mini\n"
    "version 1\n"
    "seed 99\n"
    "sensor M001 room A\n"
    "sensor M002 room A\n"
    "sensor M003 room B\n"
    "sensor M004 room C\n"
    "adjacent A B\n"
    "adjacent B C\n"
    "activity walk\n"
    "  hours 9:1 10:1\n"
    "  durations 0:1 1:2 2:1\n"
    "  lengths 4 12\n"
    "  start M001:1\n"
    "  trans M001 M001:0.2 M002:0.4 M003:0.4\n"
    "  trans M002 M001:0.4 M002:0.2 M003:0.4\n"
    "  trans M003 M001:0.4 M002:0.4 M003:0.2\n"
    "end\n";

}  // namespace

TEST_CASE("load_world parses floorplan and chains") {
  const auto w = load_world(kMiniWorld);
  CHECK(w.name == "mini");
  CHECK(w.seed == 99);
  CHECK(w.vocab.size() == 4);
  CHECK(w.activities.size() == 1);
  const auto& chain = w.chain("walk");
  CHECK(chain.min_len == 4);
  CHECK(chain.max_len == 12);
  // Rows are normalized.
  for (const auto& row : chain.transition) {
    double total = 0.0;
    for (double v : row) total += v;
    CHECK((total == doctest::Approx(1.0) || total == doctest::Approx(0.0)));
  }
  CHECK_THROWS(w.chain("nope"));
}

TEST_CASE("load_world rejects transitions outside the adjacency") {
  std::string bad =
      "world bad\nversion 1\nseed 1\n"
      "sensor M001 room A\nsensor M002 room B\n"  // A and B not adjacent
      "activity x\n  hours 1:1\n  durations 0:1\n  lengths 2 5\n"
      "  start M001:1\n  trans M001 M002:1.0\n  trans M002 M001:1.0\nend\n";
  CHECK_THROWS(load_world(bad));
}

TEST_CASE("load_world requires reachable transition rows") {
  std::string missing =
      "world m\nversion 1\nseed 1\n"
      "sensor M001 room A\nsensor M002 room A\n"
      "activity x\n  hours 1:1\n  durations 0:1\n  lengths 2 5\n"
      "  start M001:1\n  trans M001 M002:1.0\nend\n";  // M002 has no row
  CHECK_THROWS(load_world(missing));
}

TEST_CASE("sample_world_corpus is deterministic and Tier-A clean") {
  const auto w = load_world(kMiniWorld);
  const std::map<std::string, int> counts = {{"walk", 25}};
  const auto a = sample_world_corpus(w, counts, 7);
  const auto b = sample_world_corpus(w, counts, 7);
  const auto c = sample_world_corpus(w, counts, 8);
  REQUIRE(a.size() == 25);
  bool all_equal = true;
  for (std::size_t i = 0; i < a.size(); ++i) all_equal &= a[i].tokens == b[i].tokens;
  CHECK(all_equal);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) any_diff |= !(a[i].tokens == c[i].tokens);
  CHECK(any_diff);
  for (const auto& s : a) {
    CHECK(s.size() >= 4);
    CHECK(s.size() <= 12);
    CHECK(check_fundamental(s, w.graph).tier_a_pass);
  }
  CHECK_THROWS(sample_world_corpus(w, {{"walk", 0}}, 7));
}

TEST_CASE("diagonal-only chain produces constant-sensor traces") {
  const std::string solo =
      "world solo\nversion 1\nseed 5\n"
      "sensor M001 room A\nsensor M002 room B\n"
      "activity hum\n  hours 3:1\n  durations 1:1\n  lengths 3 6\n"
      "  start M001:1\n  trans M001 M001:1.0\n  trans M002 M002:1.0\nend\n";
  const auto w = load_world(solo);
  const auto corpus = sample_world_corpus(w, {{"hum", 10}}, 3);
  for (const auto& s : corpus)
    for (const auto& t : s.tokens) CHECK(t.index() == 1);
}

TEST_CASE("empirical transition frequencies approach the chain") {
  const auto w = load_world(kMiniWorld);
  // Enough traces for ~10k transitions.
  const auto corpus = sample_world_corpus(w, {{"walk", 1500}}, 12);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(3, 3);
  std::size_t events = 0;
  for (const auto& s : corpus) {
    events += s.size();
    for (std::size_t i = 1; i < s.size(); ++i)
      counts(s.tokens[i - 1].index() - 1, s.tokens[i].index() - 1) += 1.0;
  }
  CHECK(events >= 10000);
  const auto& chain = w.chain("walk");
  for (int i = 0; i < 3; ++i) {
    const double row_total = counts.row(i).sum();
    REQUIRE(row_total > 0);
    for (int j = 0; j < 3; ++j) {
      const double expected = chain.transition[static_cast<std::size_t>(i)]
                                              [static_cast<std::size_t>(j)];
      CHECK(std::abs(counts(i, j) / row_total - expected) < 0.02);
    }
  }
}

TEST_CASE("corrupt_corpus injects exactly the bookkept defects") {
  const auto w = load_world(kMiniWorld);
  const auto corpus = sample_world_corpus(w, {{"walk", 60}}, 21);

  CorruptionMix mix;
  mix.alternation = 0.2;
  mix.jump = 0.1;
  const auto res = corrupt_corpus(corpus, mix, w.graph, w.vocab, 5);
  CHECK(res.failed_injections == 0);
  CHECK(res.corpus.size() == corpus.size());

  // Expected defects per sample id.
  std::map<std::string, std::vector<std::pair<ViolationKind, int>>> expected;
  for (const auto& d : res.defects) expected[d.sample_id].push_back({d.kind, d.position});
  CHECK(!expected.empty());

  std::size_t detected_total = 0;
  for (const auto& s : res.corpus) {
    const auto a = check_fundamental(s, w.graph);
    std::vector<std::pair<ViolationKind, int>> found;
    for (const auto& viol : a.violations)
      found.push_back({viol.kind, viol.positions.empty() ? 0 : viol.positions.front()});
    detected_total += found.size();
    auto want = expected.count(s.sample_id) ? expected[s.sample_id]
                                            : std::vector<std::pair<ViolationKind, int>>{};
    std::sort(want.begin(), want.end());
    std::sort(found.begin(), found.end());
    CHECK(found == want);
  }
  CHECK(detected_total == res.defects.size());
}

TEST_CASE("zero corruption mix is the identity") {
  const auto w = load_world(kMiniWorld);
  const auto corpus = sample_world_corpus(w, {{"walk", 10}}, 2);
  const auto res = corrupt_corpus(corpus, {}, w.graph, w.vocab, 9);
  CHECK(res.defects.empty());
  REQUIRE(res.corpus.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(res.corpus[i].tokens == corpus[i].tokens);
    CHECK(res.corpus[i].timestamps == corpus[i].timestamps);
  }
}

TEST_CASE("full jump mix on a two-component world zeroes validity") {
  const std::string split =
      "world split\nversion 1\nseed 4\n"
      "sensor M001 room A\nsensor M002 room A\nsensor M003 room B\nsensor M004 room B\n"
      "activity left\n  hours 9:1\n  durations 1:1\n  lengths 4 8\n"
      "  start M001:1\n  trans M001 M001:0.3 M002:0.7\n  trans M002 M001:0.7 M002:0.3\nend\n";
  const auto w = load_world(split);
  const auto corpus = sample_world_corpus(w, {{"left", 40}}, 6);
  CorruptionMix mix;
  mix.jump = 1.0;
  const auto res = corrupt_corpus(corpus, mix, w.graph, w.vocab, 10);
  CHECK(res.failed_injections == 0);
  const auto vr = validity_rate(res.corpus, w.graph);
  CHECK(vr.sequence_level == doctest::Approx(0.0));
  CHECK(vr.transition_level < 1.0);
}
