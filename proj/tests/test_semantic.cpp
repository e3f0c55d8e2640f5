#include <atomic>
#include <thread>

#include "adlgen/llm_client.hpp"
#include "adlgen/semantic.hpp"
#include "doctest.h"
#include "httplib.h"

using namespace adlgen;

namespace {

SensorVocabulary kitchen_vocab() {
  return SensorVocabulary({"D001", "M001", "M002", "M003"});
}

// Kitchen-Living adjacent; the porch door is reachable from nowhere else.
FloorplanGraph kitchen_graph(const SensorVocabulary& v) {
  return load_floorplan(
      "sensor M001 room Kitchen label \"in the kitchen\"\n"
      "sensor M002 room Kitchen\n"
      "sensor M003 room Living label \"in the center of the living room\"\n"
      "sensor D001 room Porch label \"at the back door\"\n"
      "adjacent Kitchen Living\n",
      v);
}

ActivitySequence seq_of(const std::vector<int>& tokens, const std::string& label = "eating",
                        const std::string& id = "Sample1", int start_hour = 9) {
  ActivitySequence s;
  s.label = label;
  s.sample_id = id;
  Micros t = parse_timestamp("2010-11-04 00:00:00").value() + start_hour * kMicrosPerHour;
  for (int v : tokens) {
    s.tokens.push_back({v});
    s.timestamps.push_back(t);
    t += 3 * kMicrosPerSecond;
  }
  recompute_temporal(s);
  return s;
}

}  // namespace

TEST_CASE("interchange line renders and parses to a fixed point") {
  const auto v = kitchen_vocab();
  const auto seq = seq_of({2, -2, 3});
  const std::string line = render_interchange(seq, v);
  CHECK(line.rfind("eating,Sample1,[M001,ON,", 0) == 0);
  const auto parsed = parse_interchange_line(line, v);
  CHECK(parsed.label == seq.label);
  CHECK(parsed.sample_id == seq.sample_id);
  CHECK(parsed.tokens == seq.tokens);
  CHECK(parsed.timestamps == seq.timestamps);
  CHECK(render_interchange(parsed, v) == line);
}

TEST_CASE("interchange corpus parse collects per-line errors") {
  const auto v = kitchen_vocab();
  const std::string text =
      "eating,S1,[M001,ON,2010-11-04 09:00:00.000000];[M001,OFF,2010-11-04 09:00:05.000000]\n"
      "# comment\n"
      "eating,S2,[M009,ON,2010-11-04 09:00:00.000000]\n"
      "eating,S3,[M001,BAD,2010-11-04 09:00:00.000000]\n"
      "eating,S4,[M001,ON,2010-99-04 09:00:00.000000]\n"
      "bad line\n"
      "relax,S5,[M003,ON,2010-11-04 20:00:00.000000]\n";
  const auto res = parse_interchange(text, v);
  REQUIRE(res.sequences.size() == 2);
  CHECK(res.sequences[0].sample_id == "S1");
  CHECK(res.sequences[1].sample_id == "S5");
  REQUIRE(res.errors.size() == 4);
  CHECK(res.errors[0].sample_id == "S2");
  CHECK(res.errors[1].sample_id == "S3");
  CHECK(res.errors[2].sample_id == "S4");
  CHECK(res.errors[3].line == 6);
}

TEST_CASE("build_profiles extracts core sensors, hours and lengths") {
  const auto v = kitchen_vocab();
  std::vector<ActivitySequence> corpus;
  for (int i = 0; i < 10; ++i) corpus.push_back(seq_of({2, -2, 3, -3}, "eating", "E", 12));
  corpus.push_back(seq_of({1, -1}, "eating", "E2", 12));  // D001 appears once in 11 seqs
  corpus.push_back(seq_of({4, -4, 4}, "sleep", "S", 23));

  const auto profiles = build_profiles(corpus, v, 0.2);
  REQUIRE(profiles.count("eating"));
  REQUIRE(profiles.count("sleep"));
  const auto& eat = profiles.at("eating");
  CHECK(eat.core_sensors.count("M001"));
  CHECK(eat.core_sensors.count("M002"));
  CHECK_FALSE(eat.core_sensors.count("D001"));  // 1/11 < 0.2
  CHECK(eat.hour_distribution[12] == doctest::Approx(1.0));
  CHECK(eat.typical_length == doctest::Approx(4.0));
  CHECK(profiles.at("sleep").typical_length == doctest::Approx(3.0));
}

TEST_CASE("check_fundamental flags alternation violations") {
  const auto v = kitchen_vocab();
  const auto g = kitchen_graph(v);

  const auto bad = check_fundamental(seq_of({2, 2}), g);
  CHECK_FALSE(bad.tier_a_pass);
  REQUIRE(bad.violations.size() == 1);
  CHECK(bad.violations[0].kind == ViolationKind::NON_ALTERNATING_STATE);
  CHECK(bad.violations[0].positions == std::vector<int>{2});
  CHECK(bad.score == 2);

  const auto good = check_fundamental(seq_of({2, -2}), g);
  CHECK(good.tier_a_pass);
  CHECK(good.phi_f == doctest::Approx(1.0));
}

TEST_CASE("check_fundamental flags spatial jumps and combines kinds") {
  const auto v = kitchen_vocab();
  const auto g = kitchen_graph(v);

  // Kitchen -> Porch is not adjacent.
  const auto jump = check_fundamental(seq_of({2, 1}), g);
  CHECK_FALSE(jump.tier_a_pass);
  REQUIRE(jump.violations.size() == 1);
  CHECK(jump.violations[0].kind == ViolationKind::SPATIAL_JUMP);
  CHECK(jump.violations[0].positions == std::vector<int>{2});
  CHECK(jump.score == 2);

  // Jump plus repeated state: two kinds, score 1.
  const auto both = check_fundamental(seq_of({2, 2, 1}), g);
  CHECK(both.score == 1);
  CHECK(both.phi_f == doctest::Approx(0.0));
}

TEST_CASE("check_fundamental flags degenerate shapes") {
  const auto v = kitchen_vocab();
  const auto g = kitchen_graph(v);

  const auto tiny = check_fundamental(seq_of({2}), g);
  CHECK_FALSE(tiny.tier_a_pass);
  CHECK(tiny.violations[0].kind == ViolationKind::EMPTY_OR_DEGENERATE);

  // 10+ events, one sensor >90%.
  std::vector<int> flood;
  for (int i = 0; i < 11; ++i) flood.push_back(i % 2 ? -2 : 2);
  flood.push_back(3);
  const auto fl = check_fundamental(seq_of(flood), g);
  CHECK_FALSE(fl.tier_a_pass);
  bool has_flood = false;
  for (const auto& viol : fl.violations)
    has_flood |= viol.kind == ViolationKind::EMPTY_OR_DEGENERATE;
  CHECK(has_flood);
}

TEST_CASE("tier B scores behavioral and temporal alignment") {
  const auto v = kitchen_vocab();
  ActivityProfile p;
  p.activity = "eating";
  p.core_sensors = {"M001", "M002"};
  p.hour_distribution.fill(0.0);
  p.hour_distribution[9] = 1.0;

  // All core sensors at the modal hour.
  const auto top = check_behavior_temporal(seq_of({2, -2, 3, -3}), "eating", p, v);
  CHECK(top.phi_b == doctest::Approx(1.0));
  CHECK(top.phi_t == doctest::Approx(1.0));
  CHECK(top.score == 5);

  // Zero overlap with core sensors.
  const auto off = check_behavior_temporal(seq_of({1, -1}), "eating", p, v);
  CHECK(off.phi_b == doctest::Approx(0.0));
  CHECK(off.score == 3);

  // Exactly half the events on core sensors.
  const auto half = check_behavior_temporal(seq_of({2, -2, 1, -1}), "eating", p, v);
  CHECK(half.phi_b == doctest::Approx(0.5));
}

TEST_CASE("assess composes the tiers and gates scores") {
  const auto v = kitchen_vocab();
  const auto g = kitchen_graph(v);
  std::vector<ActivitySequence> train;
  for (int i = 0; i < 5; ++i) train.push_back(seq_of({2, -2, 3, -3}, "eating", "T", 9));
  const auto profiles = build_profiles(train, v);

  const auto good = assess(seq_of({2, -2, 3}), "eating", profiles, g, v);
  CHECK(good.tier_a_pass);
  CHECK(good.score >= 3);

  const auto bad = assess(seq_of({2, 2}), "eating", profiles, g, v);
  CHECK_FALSE(bad.tier_a_pass);
  CHECK(bad.score <= 2);
  CHECK(bad.phi_b == doctest::Approx(0.0));

  const auto unknown = assess(seq_of({2, -2}), "juggling", profiles, g, v);
  CHECK(unknown.unknown_activity);
  CHECK(unknown.score == 3);

  // Tier gating property over assorted inputs.
  for (const auto& s : {seq_of({2, -2, 3, -3}), seq_of({2, 2}), seq_of({2, 1}), seq_of({3})}) {
    const auto a = assess(s, "eating", profiles, g, v);
    CHECK((a.score <= 2) == !a.tier_a_pass);
  }

  const QualityAssessment qa = good;
  CHECK(quality_score(qa) == doctest::Approx(qa.phi_f + qa.phi_b + qa.phi_t));
  CHECK(quality_score(qa, {2.0, 0.0, 0.0}) == doctest::Approx(2.0 * qa.phi_f));
}

TEST_CASE("sequence_to_text follows the template") {
  const auto v = kitchen_vocab();
  const auto g = kitchen_graph(v);

  auto evening_door = seq_of({1}, "enter", "S1", 19);
  auto text = sequence_to_text(evening_door, g, v);
  REQUIRE(text.size() == 1);
  CHECK(text[0] == "Evening: door sensor at the back door fired (OPEN)");

  auto afternoon_kitchen = seq_of({2}, "cook", "S2", 14);
  text = sequence_to_text(afternoon_kitchen, g, v);
  CHECK(text[0] == "Afternoon: motion sensor in the kitchen fired (ON)");

  auto night_living = seq_of({-4}, "relax", "S3", 2);
  text = sequence_to_text(night_living, g, v);
  CHECK(text[0] == "Night: motion sensor in the center of the living room fired (OFF)");

  // M002 has no label attribute: falls back to the room name.
  auto plain = seq_of({3}, "cook", "S4", 10);
  text = sequence_to_text(plain, g, v);
  CHECK(text[0] == "Morning: motion sensor Kitchen fired (ON)");

  CHECK(sequence_to_text(ActivitySequence{}, g, v).empty());
}

TEST_CASE("sequence_to_text falls back to the sensor id with a warning") {
  const auto v = kitchen_vocab();
  // A graph that only knows three of the four sensors.
  const SensorVocabulary v3({"M001", "M002", "M003"});
  const auto g3 = load_floorplan(
      "sensor M001 room Kitchen\nsensor M002 room Kitchen\nsensor M003 room Kitchen\n", v3);
  std::size_t warnings = 0;
  const auto text = sequence_to_text(seq_of({1}, "x", "S", 9), g3, v, &warnings);
  CHECK(text[0] == "Morning: door sensor D001 fired (OPEN)");
  CHECK(warnings == 1);
}

TEST_CASE("refinement rules repair an alternation violation") {
  const auto v = kitchen_vocab();
  const auto g = kitchen_graph(v);
  const auto seq = seq_of({2, 2});
  const auto a = check_fundamental(seq, g);
  const auto rules = generate_refinement_rules(seq, a, g, v);
  REQUIRE(rules.size() == 1);
  CHECK(rules[0].kind == RuleKind::Insert);
  CHECK(rules[0].token.value == -2);
  CHECK(rules[0].position == 2);

  const auto fixed = apply_rules(seq, rules, v);
  CHECK(fixed.size() == 3);
  CHECK(check_fundamental(fixed, g).tier_a_pass);
  // Fixed point: a second pass produces no rules.
  CHECK(generate_refinement_rules(fixed, check_fundamental(fixed, g), g, v).empty());
}

TEST_CASE("refinement rules bridge a jump when a bridge exists") {
  const SensorVocabulary v({"M001", "M002", "M003"});
  const auto g = load_floorplan(
      "sensor M001 room A\nsensor M002 room B\nsensor M003 room C\n"
      "adjacent A B\nadjacent B C\n",
      v);
  const auto seq = seq_of({1, 3}, "walk", "S1");  // A -> C jumps over B
  const auto rules = generate_refinement_rules(seq, check_fundamental(seq, g), g, v);
  REQUIRE(rules.size() == 1);
  CHECK(rules[0].kind == RuleKind::Insert);
  CHECK(rules[0].token.index() == 2);
  const auto fixed = apply_rules(seq, rules, v);
  CHECK(check_fundamental(fixed, g).tier_a_pass);
  CHECK(fixed.size() == 3);
  CHECK(fixed.tokens[1].index() == 2);
}

TEST_CASE("refinement rules delete an unbridgeable jump") {
  const auto v = kitchen_vocab();
  const auto g = kitchen_graph(v);
  const auto seq = seq_of({2, -2, 1}, "cook", "S1");  // Kitchen -> Porch, no bridge
  const auto rules = generate_refinement_rules(seq, check_fundamental(seq, g), g, v);
  REQUIRE(!rules.empty());
  CHECK(rules.back().kind == RuleKind::Delete);
  const auto fixed = apply_rules(seq, rules, v);
  CHECK(check_fundamental(fixed, g).tier_a_pass);
}

TEST_CASE("reorder rule restores chronology") {
  const auto v = kitchen_vocab();
  const auto g = kitchen_graph(v);
  auto seq = seq_of({2, -2, 3}, "eat", "S1");
  std::swap(seq.timestamps[0], seq.timestamps[2]);
  recompute_temporal(seq);
  const auto rules = generate_refinement_rules(seq, check_fundamental(seq, g), g, v);
  REQUIRE(!rules.empty());
  CHECK(rules[0].kind == RuleKind::Reorder);
  const auto fixed = apply_rules(seq, rules, v);
  for (std::size_t i = 1; i < fixed.size(); ++i)
    CHECK(fixed.timestamps[i] >= fixed.timestamps[i - 1]);
}

TEST_CASE("apply_rules deletes and rejects stale positions") {
  const auto v = kitchen_vocab();
  const auto seq = seq_of({2, -2, 3, -3, 2}, "eat", "S1");

  RefinementRule del;
  del.kind = RuleKind::Delete;
  del.token = SignedToken{3};
  del.position = 3;
  const auto out = apply_rules(seq, {del}, v);
  REQUIRE(out.size() == 4);
  CHECK(out.tokens[0].value == 2);
  CHECK(out.tokens[1].value == -2);
  CHECK(out.tokens[2].value == -3);
  CHECK(out.tokens[3].value == 2);
  CHECK(out.temporal.back().duration_bin == 0);

  RefinementRule stale = del;
  stale.position = 9;
  CHECK_THROWS(apply_rules(seq, {stale}, v));
  RefinementRule mismatch = del;
  mismatch.token = SignedToken{1};
  CHECK_THROWS(apply_rules(seq, {mismatch}, v));
}

TEST_CASE("inserted events take the midpoint timestamp") {
  const auto v = kitchen_vocab();
  const auto seq = seq_of({2, -2}, "eat", "S1");
  RefinementRule ins;
  ins.kind = RuleKind::Insert;
  ins.token = SignedToken{3};
  ins.position = 2;
  const auto out = apply_rules(seq, {ins}, v);
  REQUIRE(out.size() == 3);
  CHECK(out.timestamps[1] == (seq.timestamps[0] + seq.timestamps[1]) / 2);
}

TEST_CASE("refinement wire format round-trips byte-identically") {
  const auto v = kitchen_vocab();
  RefinementSample sample1;
  RefinementRule r1;
  r1.kind = RuleKind::Insert;
  r1.activity = "eating";
  r1.sample_id = "Sample1";
  r1.token = SignedToken{-2};
  r1.position = 2;
  r1.explanation = "insert missing OFF";
  RefinementRule r2;
  r2.kind = RuleKind::Delete;
  r2.activity = "eating";
  r2.sample_id = "Sample1";
  r2.token = SignedToken{3};
  r2.position = 4;
  r2.explanation = "drop stray event";
  sample1.rules = {r1, r2};
  sample1.refined = seq_of({2, -2, 3}, "eating", "Sample1");

  RefinementSample sample2;
  RefinementRule r3;
  r3.kind = RuleKind::Reorder;
  r3.activity = "relax";
  r3.sample_id = "Sample2";
  r3.explanation = "sort events by time";
  sample2.rules = {r3};
  sample2.refined = seq_of({3, -3}, "relax", "Sample2", 20);

  const std::string text = render_refinement({sample1, sample2}, v);
  const auto parsed = parse_llm_refinement(text, v);
  CHECK(parsed.errors.empty());
  REQUIRE(parsed.samples.size() == 2);
  CHECK(parsed.samples[0].rules.size() == 2);
  CHECK(parsed.samples[0].rules[0].token.value == -2);
  CHECK(parsed.samples[1].rules[0].kind == RuleKind::Reorder);
  CHECK(render_refinement(parsed.samples, v) == text);
}

TEST_CASE("refinement parse reports malformed blocks without aborting") {
  const auto v = kitchen_vocab();
  const std::string text =
      "eating,S1,SWAP,+M001@2,bogus rule type\n"
      "\n"
      "eating,S1,[M001,ON,2010-11-04 09:00:00.000000]\n"
      "\n"
      "relax,S2,INSERT,+M003@1,ok\n"
      "\n"
      "relax,S2,[M003,ON,2010-11-04 20:00:00.000000]\n";
  const auto res = parse_llm_refinement(text, v);
  REQUIRE(res.samples.size() == 1);
  CHECK(res.samples[0].rules[0].sample_id == "S2");
  REQUIRE(res.errors.size() >= 1);
  CHECK(res.errors[0].message.find("SWAP") != std::string::npos);
  CHECK(res.errors[0].sample_id == "S1");
}

TEST_CASE("missing blank separator is a per-sample error") {
  const auto v = kitchen_vocab();
  const std::string text =
      "eating,S1,DELETE,M001@2,drop\n"
      "eating,S1,[M001,ON,2010-11-04 09:00:00.000000]\n";
  const auto res = parse_llm_refinement(text, v);
  CHECK(res.samples.empty());
  REQUIRE(res.errors.size() == 1);
  CHECK(res.errors[0].message.find("blank separator") != std::string::npos);
  CHECK(res.errors[0].sample_id == "S1");
}

TEST_CASE("score csv parsing follows the response contract") {
  const std::vector<ScoreRequestSample> expected = {{"eating", "Sample1", {}},
                                                    {"relax", "Sample2", {}}};

  auto res = parse_score_csv("eating,Sample1,5\nrelax,Sample2,4\n", expected);
  CHECK(res.errors.empty());
  REQUIRE(res.scores.size() == 2);
  CHECK(res.scores[0].sample_id == "Sample1");
  CHECK(res.scores[0].score == 5);

  // Stray header is skipped.
  res = parse_score_csv("Activity,SampleID,Score\neating,Sample1,5\nrelax,Sample2,4\n",
                        expected);
  CHECK(res.errors.empty());
  CHECK(res.scores.size() == 2);

  // Out-of-range and malformed rows become per-sample errors.
  res = parse_score_csv("eating,Sample1,9\nrelax,Sample2,fine\n", expected);
  CHECK(res.scores.empty());
  CHECK(res.errors.size() == 4);  // two bad rows + two missing samples

  // Empty response: every sample errored.
  res = parse_score_csv("", expected);
  CHECK(res.scores.empty());
  REQUIRE(res.errors.size() == 2);
  CHECK(res.errors[0].message == "missing from response");
}

TEST_CASE("llm client posts and parses against a local server") {
  httplib::Server server;
  std::string captured_body;
  std::string captured_auth;
  server.Post("/score", [&](const httplib::Request& req, httplib::Response& resp) {
    captured_body = req.body;
    if (req.has_header("Authorization")) captured_auth = req.get_header_value("Authorization");
    resp.set_content("eating,Sample1,5\n", "text/plain");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  setenv("ADLGEN_LLM_KEY", "test-key", 1);
  LlmClientConfig cfg;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/score";
  const LlmClient client(cfg);

  const std::vector<ScoreRequestSample> samples = {
      {"eating", "Sample1", {"Morning: motion sensor in the kitchen fired (ON)"}}};
  const auto res = llm_score_batch(client, "score these", samples);
  REQUIRE(res.scores.size() == 1);
  CHECK(res.scores[0].score == 5);
  CHECK(res.errors.empty());
  CHECK(captured_body.rfind("score these", 0) == 0);
  CHECK(captured_body.find("Sample ID: Sample1 [eating]") != std::string::npos);
  CHECK(captured_auth == "Bearer test-key");

  server.stop();
  thread.join();
  unsetenv("ADLGEN_LLM_KEY");
}

TEST_CASE("llm client surfaces transport failure after retries") {
  LlmClientConfig cfg;
  cfg.endpoint = "http://127.0.0.1:9/none";  // closed port
  cfg.max_attempts = 2;
  cfg.backoff_initial_ms = 1;
  cfg.timeout_seconds = 1;
  const LlmClient client(cfg);
  CHECK_THROWS_AS(client.post("x"), std::runtime_error);
}
