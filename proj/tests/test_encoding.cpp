#include <cmath>

#include "adlgen/encoding.hpp"
#include "adlgen/time_util.hpp"
#include "doctest.h"

using namespace adlgen;

namespace {

SensorVocabulary two_sensor_vocab() { return SensorVocabulary({"M001", "D001"}); }

ActivitySequence make_seq(const std::vector<int>& tokens, Micros start = 0,
                          Micros gap = 5 * kMicrosPerSecond) {
  ActivitySequence s;
  s.label = "test";
  s.sample_id = "S00001";
  Micros t = start;
  for (int v : tokens) {
    s.tokens.push_back({v});
    s.timestamps.push_back(t);
    t += gap;
  }
  recompute_temporal(s);
  return s;
}

}  // namespace

TEST_CASE("encode_token maps state to sign") {
  const auto vocab = two_sensor_vocab();
  CHECK(encode_token("M001", SensorState::ON, vocab).value == 1);
  CHECK(encode_token("D001", SensorState::CLOSE, vocab).value == -2);
  CHECK(token_text({1}, vocab) == "+M001");
  CHECK(token_text({-2}, vocab) == "-D001");
}

TEST_CASE("encode_token rejects bad inputs") {
  const auto vocab = two_sensor_vocab();
  CHECK_THROWS(encode_token("M999", SensorState::ON, vocab));
  CHECK_THROWS(encode_token("M001", SensorState::OPEN, vocab));
  CHECK_THROWS(encode_token("D001", SensorState::ON, vocab));
}

TEST_CASE("decode_token inverts encode_token over the full product") {
  std::vector<std::string> ids;
  for (int i = 1; i <= 27; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "M%03d", i);
    ids.push_back(buf);
  }
  for (int i = 1; i <= 4; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "D%03d", i);
    ids.push_back(buf);
  }
  const SensorVocabulary vocab(ids);
  for (const auto& id : ids) {
    const bool door = id[0] == 'D';
    for (SensorState st : {door ? SensorState::OPEN : SensorState::ON,
                           door ? SensorState::CLOSE : SensorState::OFF}) {
      const auto tok = encode_token(id, st, vocab);
      const auto [rid, rst] = decode_token(tok, vocab);
      CHECK(rid == id);
      CHECK(rst == st);
    }
  }
  CHECK_THROWS(decode_token({0}, vocab));
  CHECK_THROWS(decode_token({99}, vocab));
}

TEST_CASE("log_bin_duration uses the stated edges") {
  CHECK(log_bin_duration(0.0) == 0);
  CHECK(log_bin_duration(0.5) == 0);
  CHECK(log_bin_duration(1.0) == 1);
  CHECK(log_bin_duration(3.0) == 2);
  CHECK(log_bin_duration(7.9) == 3);
  CHECK(log_bin_duration(8.0) == 4);
  CHECK(log_bin_duration(16.0) == 5);
  CHECK(log_bin_duration(63.9) == 5);
  CHECK(log_bin_duration(64.0) == 6);
  CHECK(log_bin_duration(256.0) == 7);
  CHECK(log_bin_duration(1e6) == 7);
  CHECK_THROWS(log_bin_duration(-1.0));
}

TEST_CASE("log_bin_duration is monotone") {
  int prev = 0;
  for (double d = 0.0; d < 2000.0; d += 0.37) {
    const int b = log_bin_duration(d);
    CHECK(b >= prev);
    prev = b;
  }
}

TEST_CASE("cyclic_pair basic angles and continuity") {
  auto [s0, c0] = cyclic_pair(0, 24);
  CHECK(s0 == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(c0 == doctest::Approx(1.0).epsilon(1e-12));
  auto [s12, c12] = cyclic_pair(12, 24);
  CHECK(s12 == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(c12 == doctest::Approx(-1.0).epsilon(1e-12));

  auto dist = [](std::pair<double, double> a, std::pair<double, double> b) {
    return std::hypot(a.first - b.first, a.second - b.second);
  };
  CHECK(dist(cyclic_pair(23, 24), cyclic_pair(0, 24)) <
        dist(cyclic_pair(12, 24), cyclic_pair(0, 24)));
  CHECK_THROWS(cyclic_pair(0, 0));
  CHECK_THROWS(cyclic_pair(24, 24));
}

TEST_CASE("make_training_windows yields M windows") {
  const auto s5 = make_seq({1, -1, 2, -2, 1});
  const auto w5 = make_training_windows(s5);
  REQUIRE(w5.size() == 5);
  CHECK(w5[0].context_tokens.size() == 1);
  CHECK(w5[0].target_token.value == -1);
  CHECK_FALSE(w5[0].target_is_end);
  CHECK(w5[3].target_token.value == 1);
  CHECK(w5[4].target_is_end);
  CHECK(w5[4].context_tokens.size() == 5);

  const auto w2 = make_training_windows(make_seq({1, -1}));
  CHECK(w2.size() == 2);

  CHECK_THROWS(make_training_windows(make_seq({1})));
}

TEST_CASE("make_training_windows truncates context to the window") {
  std::vector<int> toks;
  for (int i = 0; i < 30; ++i) toks.push_back(i % 2 == 0 ? 1 : -1);
  const auto w = make_training_windows(make_seq(toks));
  CHECK(w.size() == 30);
  for (const auto& win : w) CHECK(win.context_tokens.size() <= 10);
  CHECK(w.back().context_tokens.size() == 10);
}

TEST_CASE("window targets duration bin of the target event") {
  auto s = make_seq({1, -1, 1});
  const auto w = make_training_windows(s);
  CHECK(w[0].target_duration_bin == s.temporal[1].duration_bin);
  CHECK(w[1].target_duration_bin == s.temporal[2].duration_bin);
}

TEST_CASE("recompute_temporal marks the final event with bin 0") {
  auto s = make_seq({1, -1, 1}, parse_timestamp("2010-11-04 09:34:16").value(),
                    10 * kMicrosPerSecond);
  CHECK(s.temporal[0].duration_bin == 4);  // 10 s
  CHECK(s.temporal[2].duration_bin == 0);
  CHECK(s.temporal[0].hour == 9);
  CHECK(s.temporal[0].day == 3);  // 2010-11-04 was a Thursday
}

TEST_CASE("timestamp parse and format round-trip") {
  const auto t = parse_timestamp("2010-11-04 09:34:16.000123");
  REQUIRE(t.has_value());
  CHECK(format_timestamp(*t) == "2010-11-04 09:34:16.000123");
  const auto t2 = parse_timestamp("2010-11-04 09:34:16");
  REQUIRE(t2.has_value());
  CHECK(format_timestamp(*t2) == "2010-11-04 09:34:16.000000");
  CHECK(!parse_timestamp("2010-13-04 09:34:16").has_value());
  CHECK(!parse_timestamp("2010-11-04 09:74:16").has_value());
  CHECK(!parse_timestamp("garbage").has_value());
}

TEST_CASE("representative_duration is inside its bin") {
  for (int b = 1; b <= 7; ++b) {
    const double r = representative_duration(b);
    CHECK(log_bin_duration(r) == b);
  }
  CHECK(representative_duration(7) == doctest::Approx(512.0));
  CHECK(representative_duration(0) == doctest::Approx(0.0));
}
