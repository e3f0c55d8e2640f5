#include "adlgen/semantic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "adlgen/llm_client.hpp"

namespace adlgen {

namespace {

void require_field_clean(const std::string& s, const char* what) {
  if (s.empty() || s.find_first_of(",;[]\n") != std::string::npos)
    throw std::invalid_argument(std::string("interchange: bad ") + what + ": '" + s + "'");
}

bool try_parse_interchange(const std::string& line, const SensorVocabulary& vocab,
                           ActivitySequence& out, SampleError& err) {
  const auto c1 = line.find(',');
  if (c1 == std::string::npos) {
    err = {"", 0, 0, "missing activity separator"};
    return false;
  }
  const auto c2 = line.find(',', c1 + 1);
  if (c2 == std::string::npos) {
    err = {"", 0, c1 + 1, "missing sample-id separator"};
    return false;
  }
  ActivitySequence seq;
  seq.label = line.substr(0, c1);
  seq.sample_id = line.substr(c1 + 1, c2 - c1 - 1);
  err.sample_id = seq.sample_id;

  std::size_t pos = c2 + 1;
  if (pos >= line.size()) {
    err = {seq.sample_id, 0, pos, "no event blocks"};
    return false;
  }
  while (pos < line.size()) {
    if (line[pos] != '[') {
      err = {seq.sample_id, 0, pos, "expected '['"};
      return false;
    }
    const auto close = line.find(']', pos);
    if (close == std::string::npos) {
      err = {seq.sample_id, 0, pos, "unterminated event block"};
      return false;
    }
    const std::string body = line.substr(pos + 1, close - pos - 1);
    const auto b1 = body.find(',');
    const auto b2 = b1 == std::string::npos ? std::string::npos : body.find(',', b1 + 1);
    if (b1 == std::string::npos || b2 == std::string::npos) {
      err = {seq.sample_id, 0, pos, "event block needs SensorID,Status,Time"};
      return false;
    }
    const std::string id = body.substr(0, b1);
    const std::string status = body.substr(b1 + 1, b2 - b1 - 1);
    const std::string time = body.substr(b2 + 1);
    const auto state = parse_state(status);
    if (!state) {
      err = {seq.sample_id, 0, pos + 1 + b1 + 1, "unknown status: " + status};
      return false;
    }
    const auto ts = parse_timestamp(time);
    if (!ts) {
      err = {seq.sample_id, 0, pos + 1 + b2 + 1, "malformed time: " + time};
      return false;
    }
    try {
      seq.tokens.push_back(encode_token(id, *state, vocab));
    } catch (const std::exception& e) {
      err = {seq.sample_id, 0, pos + 1, e.what()};
      return false;
    }
    seq.timestamps.push_back(*ts);

    pos = close + 1;
    if (pos < line.size()) {
      if (line[pos] != ';') {
        err = {seq.sample_id, 0, pos, "expected ';' between event blocks"};
        return false;
      }
      ++pos;
      if (pos >= line.size()) {
        err = {seq.sample_id, 0, pos, "trailing ';'"};
        return false;
      }
    }
  }
  recompute_temporal(seq);
  out = std::move(seq);
  return true;
}

}  // namespace

std::string render_interchange(const ActivitySequence& seq, const SensorVocabulary& vocab) {
  require_field_clean(seq.label, "activity");
  require_field_clean(seq.sample_id, "sample id");
  if (seq.empty()) throw std::invalid_argument("interchange: empty sequence");
  std::string out = seq.label + "," + seq.sample_id + ",";
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) out += ';';
    const auto [id, state] = decode_token(seq.tokens[i], vocab);
    out += '[';
    out += id;
    out += ',';
    out += to_string(state);
    out += ',';
    out += format_timestamp(seq.timestamps[i]);
    out += ']';
  }
  return out;
}

std::string render_interchange_corpus(const std::vector<ActivitySequence>& corpus,
                                      const SensorVocabulary& vocab) {
  std::string out;
  for (const auto& s : corpus) {
    out += render_interchange(s, vocab);
    out += '\n';
  }
  return out;
}

ActivitySequence parse_interchange_line(const std::string& line,
                                        const SensorVocabulary& vocab) {
  ActivitySequence seq;
  SampleError err;
  if (!try_parse_interchange(line, vocab, seq, err)) {
    throw std::invalid_argument("interchange: " + err.message + " at byte " +
                                std::to_string(err.offset));
  }
  return seq;
}

InterchangeParseResult parse_interchange(const std::string& text,
                                         const SensorVocabulary& vocab) {
  InterchangeParseResult res;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    ActivitySequence seq;
    SampleError err;
    if (try_parse_interchange(line, vocab, seq, err)) {
      res.sequences.push_back(std::move(seq));
    } else {
      err.line = lineno;
      res.errors.push_back(std::move(err));
    }
  }
  return res;
}

std::map<std::string, ActivityProfile> build_profiles(
    const std::vector<ActivitySequence>& training_corpus, const SensorVocabulary& vocab,
    double core_threshold) {
  struct Acc {
    std::map<std::string, std::size_t> seq_with_sensor;
    std::array<double, 24> hours{};
    std::vector<std::size_t> lengths;
    std::size_t n_seqs = 0;
  };
  std::map<std::string, Acc> accs;
  for (const auto& seq : training_corpus) {
    Acc& a = accs[seq.label];
    ++a.n_seqs;
    a.lengths.push_back(seq.size());
    std::set<std::string> seen;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      seen.insert(vocab.id(seq.tokens[i].index()));
      a.hours[static_cast<std::size_t>(seq.temporal[i].hour)] += 1.0;
    }
    for (const auto& id : seen) ++a.seq_with_sensor[id];
  }

  std::map<std::string, ActivityProfile> out;
  for (auto& [label, a] : accs) {
    ActivityProfile p;
    p.activity = label;
    for (const auto& [id, n] : a.seq_with_sensor) {
      if (static_cast<double>(n) >= core_threshold * static_cast<double>(a.n_seqs))
        p.core_sensors.insert(id);
    }
    double total = 0.0;
    for (double h : a.hours) total += h;
    for (std::size_t i = 0; i < 24; ++i)
      p.hour_distribution[i] = total > 0.0 ? a.hours[i] / total : 0.0;
    std::sort(a.lengths.begin(), a.lengths.end());
    const std::size_t n = a.lengths.size();
    p.typical_length = n % 2 ? static_cast<double>(a.lengths[n / 2])
                             : 0.5 * static_cast<double>(a.lengths[n / 2 - 1] +
                                                         a.lengths[n / 2]);
    out.emplace(label, std::move(p));
  }
  return out;
}

const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::NON_ALTERNATING_STATE: return "NON_ALTERNATING_STATE";
    case ViolationKind::SPATIAL_JUMP: return "SPATIAL_JUMP";
    case ViolationKind::EMPTY_OR_DEGENERATE: return "EMPTY_OR_DEGENERATE";
    case ViolationKind::EXCESS_REPETITION: return "EXCESS_REPETITION";
  }
  return "?";
}

QualityAssessment check_fundamental(const ActivitySequence& seq, const FloorplanGraph& graph) {
  QualityAssessment a;
  const std::size_t m = seq.size();

  if (m < 2) {
    a.violations.push_back(
        {ViolationKind::EMPTY_OR_DEGENERATE, {}, "fewer than 2 events"});
  } else if (m >= 10) {
    std::map<int, std::size_t> counts;
    for (const auto& t : seq.tokens) ++counts[t.index()];
    for (const auto& [idx, n] : counts) {
      if (static_cast<double>(n) > 0.9 * static_cast<double>(m)) {
        a.violations.push_back({ViolationKind::EMPTY_OR_DEGENERATE,
                                {},
                                "single-sensor flood: index " + std::to_string(idx) + " fires " +
                                    std::to_string(n) + " of " + std::to_string(m)});
      }
    }
  }

  std::map<int, bool> last_state;  // sensor index -> activating?
  for (std::size_t i = 0; i < m; ++i) {
    const SignedToken t = seq.tokens[i];
    const auto it = last_state.find(t.index());
    if (it != last_state.end() && it->second == t.activating()) {
      a.violations.push_back({ViolationKind::NON_ALTERNATING_STATE,
                              {static_cast<int>(i) + 1},
                              "sensor index " + std::to_string(t.index()) + " repeats " +
                                  (t.activating() ? "activation" : "deactivation")});
    }
    last_state[t.index()] = t.activating();
  }

  for (std::size_t i = 1; i < m; ++i) {
    if (!validate_transition(seq.tokens[i - 1], seq.tokens[i], graph)) {
      a.violations.push_back({ViolationKind::SPATIAL_JUMP,
                              {static_cast<int>(i) + 1},
                              "indices " + std::to_string(seq.tokens[i - 1].index()) + " -> " +
                                  std::to_string(seq.tokens[i].index())});
    }
  }

  a.tier_a_pass = a.violations.empty();
  if (a.tier_a_pass) {
    a.phi_f = 1.0;
    a.score = 3;  // floor of the tier-B range; assess() refines it
  } else {
    std::set<ViolationKind> kinds;
    for (const auto& v : a.violations) kinds.insert(v.kind);
    a.score = kinds.size() >= 2 ? 1 : 2;
    a.phi_f = kinds.size() >= 2 ? 0.0 : 0.5;
  }
  return a;
}

TierBResult check_behavior_temporal(const ActivitySequence& seq, const std::string& activity,
                                    const ActivityProfile& profile,
                                    const SensorVocabulary& vocab) {
  (void)activity;
  TierBResult r;
  if (seq.empty()) return r;

  std::size_t on_core = 0;
  std::array<double, 24> hours{};
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (profile.core_sensors.count(vocab.id(seq.tokens[i].index()))) ++on_core;
    hours[static_cast<std::size_t>(seq.temporal[i].hour)] += 1.0;
  }
  r.phi_b = static_cast<double>(on_core) / static_cast<double>(seq.size());

  double tv = 0.0;
  const double total = static_cast<double>(seq.size());
  for (std::size_t h = 0; h < 24; ++h)
    tv += std::abs(hours[h] / total - profile.hour_distribution[h]);
  r.phi_t = 1.0 - 0.5 * tv;

  if (r.phi_b >= 0.8 && r.phi_t >= 0.7) {
    r.score = 5;
  } else if (r.phi_b >= 0.5 && r.phi_t >= 0.4) {
    r.score = 4;
  } else {
    r.score = 3;
  }
  return r;
}

QualityAssessment assess(const ActivitySequence& seq, const std::string& activity,
                         const std::map<std::string, ActivityProfile>& profiles,
                         const FloorplanGraph& graph, const SensorVocabulary& vocab) {
  QualityAssessment a = check_fundamental(seq, graph);
  if (!a.tier_a_pass) return a;

  const auto it = profiles.find(activity);
  if (it == profiles.end()) {
    a.unknown_activity = true;
    a.phi_b = 0.0;
    a.phi_t = 0.0;
    a.score = 3;
    return a;
  }
  const TierBResult b = check_behavior_temporal(seq, activity, it->second, vocab);
  a.phi_b = b.phi_b;
  a.phi_t = b.phi_t;
  a.score = b.score;
  return a;
}

double quality_score(const QualityAssessment& a, const QualityWeights& w) {
  return w.alpha_f * a.phi_f + w.alpha_b * a.phi_b + w.alpha_t * a.phi_t;
}

const char* day_period(int hour) {
  if (hour < 0 || hour > 23) throw std::out_of_range("day_period: hour outside [0,23]");
  if (hour < 6) return "Night";
  if (hour < 12) return "Morning";
  if (hour < 18) return "Afternoon";
  return "Evening";
}

std::vector<std::string> sequence_to_text(const ActivitySequence& seq,
                                          const FloorplanGraph& graph,
                                          const SensorVocabulary& vocab,
                                          std::size_t* missing_location_warnings) {
  std::vector<std::string> lines;
  lines.reserve(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto [id, state] = decode_token(seq.tokens[i], vocab);
    const char* kind = id[0] == 'M' ? "motion" : id[0] == 'D' ? "door" : "ambient";
    std::string phrase;
    if (graph.has_sensor(id)) {
      phrase = graph.location_phrase(id);
    } else {
      phrase = id;
      if (missing_location_warnings) ++*missing_location_warnings;
    }
    std::string line = day_period(seq.temporal[i].hour);
    line += ": ";
    line += kind;
    line += " sensor ";
    line += phrase;
    line += " fired (";
    line += to_string(state);
    line += ")";
    lines.push_back(std::move(line));
  }
  return lines;
}

const char* to_string(RuleKind k) {
  switch (k) {
    case RuleKind::Insert: return "INSERT";
    case RuleKind::Delete: return "DELETE";
    case RuleKind::Reorder: return "REORDER";
  }
  return "?";
}

namespace {

bool timestamps_sorted(const ActivitySequence& seq) {
  for (std::size_t i = 1; i < seq.size(); ++i)
    if (seq.timestamps[i] < seq.timestamps[i - 1]) return false;
  return true;
}

// Sign for a bridging insertion of sensor `index` before 1-based position
// `pos`: alternate against the nearest occurrence.
int bridge_sign(const ActivitySequence& seq, int index, int pos) {
  for (int i = pos - 2; i >= 0; --i) {
    if (seq.tokens[static_cast<std::size_t>(i)].index() == index)
      return seq.tokens[static_cast<std::size_t>(i)].activating() ? -1 : 1;
  }
  for (std::size_t i = static_cast<std::size_t>(pos) - 1; i < seq.size(); ++i) {
    if (seq.tokens[i].index() == index) return seq.tokens[i].activating() ? -1 : 1;
  }
  return 1;
}

ActivitySequence apply_one(const ActivitySequence& seq, const RefinementRule& rule,
                           const SensorVocabulary& vocab);

}  // namespace

std::vector<RefinementRule> generate_refinement_rules(const ActivitySequence& seq,
                                                      const QualityAssessment& assessment,
                                                      const FloorplanGraph& graph,
                                                      const SensorVocabulary& vocab) {
  std::vector<RefinementRule> rules;
  if (assessment.score >= 5) return rules;

  ActivitySequence work = seq;
  auto emit = [&](RefinementRule r) {
    r.activity = seq.label;
    r.sample_id = seq.sample_id;
    work = apply_one(work, r, vocab);
    rules.push_back(std::move(r));
  };

  if (!timestamps_sorted(work)) {
    RefinementRule r;
    r.kind = RuleKind::Reorder;
    r.explanation = "restore chronological event order";
    emit(std::move(r));
  }

  const int s = static_cast<int>(vocab.size());
  std::size_t guard = 10 * (seq.size() + 2);
  while (guard-- > 0) {
    const QualityAssessment a = check_fundamental(work, graph);
    if (a.tier_a_pass) break;

    // Deterministic pick: smallest position first, positionless kinds last.
    const Violation* pick = nullptr;
    for (const auto& v : a.violations) {
      if (!pick) {
        pick = &v;
        continue;
      }
      const int pv = v.positions.empty() ? 1 << 30 : v.positions.front();
      const int pp = pick->positions.empty() ? 1 << 30 : pick->positions.front();
      if (pv < pp) pick = &v;
    }
    if (!pick) break;

    if (pick->kind == ViolationKind::NON_ALTERNATING_STATE) {
      const int p = pick->positions.front();
      const SignedToken repeat = work.tokens[static_cast<std::size_t>(p) - 1];
      RefinementRule r;
      r.kind = RuleKind::Insert;
      r.token = SignedToken{repeat.activating() ? -repeat.index() : repeat.index()};
      r.position = p;
      r.explanation = "insert missing opposite state of " + vocab.id(repeat.index());
      emit(std::move(r));
    } else if (pick->kind == ViolationKind::SPATIAL_JUMP) {
      const int p = pick->positions.front();
      const int from = work.tokens[static_cast<std::size_t>(p) - 2].index();
      const int to = work.tokens[static_cast<std::size_t>(p) - 1].index();
      int bridge = 0;
      for (int j = 1; j <= s; ++j) {
        if (graph.adjacent(from, j) && graph.adjacent(j, to)) {
          bridge = j;
          break;
        }
      }
      RefinementRule r;
      if (bridge != 0) {
        r.kind = RuleKind::Insert;
        r.token = SignedToken{bridge_sign(work, bridge, p) * bridge};
        r.position = p;
        r.explanation = "bridge " + vocab.id(from) + " -> " + vocab.id(to) + " via " +
                        vocab.id(bridge);
      } else {
        r.kind = RuleKind::Delete;
        r.token = SignedToken{to};
        r.position = p;
        r.explanation = "delete unreachable event at " + vocab.id(to);
      }
      emit(std::move(r));
    } else {  // EMPTY_OR_DEGENERATE
      if (work.size() == 1) {
        const SignedToken only = work.tokens[0];
        RefinementRule r;
        r.kind = RuleKind::Insert;
        r.token = SignedToken{only.activating() ? -only.index() : only.index()};
        r.position = 2;
        r.explanation = "complete the activation pair of " + vocab.id(only.index());
        emit(std::move(r));
      } else if (work.size() >= 10 && pick->detail.rfind("single-sensor", 0) == 0) {
        // Delete the dominant sensor's last event; alternation of the prefix
        // is preserved.
        std::map<int, std::size_t> counts;
        for (const auto& t : work.tokens) ++counts[t.index()];
        int dominant = 0;
        std::size_t best = 0;
        for (const auto& [idx, n] : counts) {
          if (n > best) {
            best = n;
            dominant = idx;
          }
        }
        int pos = 0;
        for (std::size_t i = work.size(); i > 0; --i) {
          if (work.tokens[i - 1].index() == dominant) {
            pos = static_cast<int>(i);
            break;
          }
        }
        RefinementRule r;
        r.kind = RuleKind::Delete;
        r.token = SignedToken{dominant};
        r.position = pos;
        r.explanation = "thin single-sensor flood of " + vocab.id(dominant);
        emit(std::move(r));
      } else {
        break;  // empty sequence: nothing executable
      }
    }
  }
  return rules;
}

namespace {

ActivitySequence apply_one(const ActivitySequence& seq, const RefinementRule& rule,
                           const SensorVocabulary& vocab) {
  (void)vocab;
  ActivitySequence out = seq;
  const int m = static_cast<int>(seq.size());
  switch (rule.kind) {
    case RuleKind::Reorder: {
      std::vector<std::size_t> order(seq.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return seq.timestamps[a] < seq.timestamps[b];
      });
      for (std::size_t i = 0; i < order.size(); ++i) {
        out.tokens[i] = seq.tokens[order[i]];
        out.timestamps[i] = seq.timestamps[order[i]];
      }
      break;
    }
    case RuleKind::Insert: {
      if (rule.position < 1 || rule.position > m + 1)
        throw std::invalid_argument("apply_rules: stale INSERT position " +
                                    std::to_string(rule.position));
      if (rule.token.value == 0)
        throw std::invalid_argument("apply_rules: INSERT without token");
      const auto at = static_cast<std::size_t>(rule.position) - 1;
      Micros ts;
      if (m == 0) {
        ts = 0;
      } else if (at == 0) {
        ts = seq.timestamps.front();
      } else if (at >= seq.size()) {
        ts = seq.timestamps.back();
      } else {
        ts = seq.timestamps[at - 1] + (seq.timestamps[at] - seq.timestamps[at - 1]) / 2;
      }
      out.tokens.insert(out.tokens.begin() + static_cast<long>(at), rule.token);
      out.timestamps.insert(out.timestamps.begin() + static_cast<long>(at), ts);
      break;
    }
    case RuleKind::Delete: {
      if (rule.position < 1 || rule.position > m)
        throw std::invalid_argument("apply_rules: stale DELETE position " +
                                    std::to_string(rule.position));
      const auto at = static_cast<std::size_t>(rule.position) - 1;
      if (rule.token.value != 0 && seq.tokens[at].index() != rule.token.index())
        throw std::invalid_argument("apply_rules: stale DELETE, sensor mismatch at position " +
                                    std::to_string(rule.position));
      out.tokens.erase(out.tokens.begin() + static_cast<long>(at));
      out.timestamps.erase(out.timestamps.begin() + static_cast<long>(at));
      break;
    }
  }
  recompute_temporal(out);
  return out;
}

}  // namespace

ActivitySequence apply_rules(const ActivitySequence& seq,
                             const std::vector<RefinementRule>& rules,
                             const SensorVocabulary& vocab) {
  ActivitySequence out = seq;
  for (const auto& rule : rules) out = apply_one(out, rule, vocab);
  return out;
}

std::string render_rule(const RefinementRule& rule, const SensorVocabulary& vocab) {
  std::string target;
  switch (rule.kind) {
    case RuleKind::Reorder: target = "*"; break;
    case RuleKind::Insert:
      target = (rule.token.activating() ? "+" : "-") + vocab.id(rule.token.index()) + "@" +
               std::to_string(rule.position);
      break;
    case RuleKind::Delete:
      target = vocab.id(rule.token.index()) + "@" + std::to_string(rule.position);
      break;
  }
  return rule.activity + "," + rule.sample_id + "," + to_string(rule.kind) + "," + target +
         "," + rule.explanation;
}

std::string render_refinement(const std::vector<RefinementSample>& samples,
                              const SensorVocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i) out += '\n';
    for (const auto& r : samples[i].rules) {
      out += render_rule(r, vocab);
      out += '\n';
    }
    out += '\n';
    out += render_interchange(samples[i].refined, vocab);
    out += '\n';
  }
  return out;
}

namespace {

bool looks_like_refined_line(const std::string& line) {
  return line.find(",[") != std::string::npos && !line.empty() && line.back() == ']';
}

// Splits a rule line into at most `parts` comma fields; the final field keeps
// any remaining commas (explanations are free text).
std::vector<std::string> split_csv(const std::string& line, std::size_t parts) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (out.size() + 1 < parts) {
    const auto c = line.find(',', pos);
    if (c == std::string::npos) break;
    out.push_back(line.substr(pos, c - pos));
    pos = c + 1;
  }
  out.push_back(line.substr(pos));
  return out;
}

bool parse_rule_line(const std::string& line, const SensorVocabulary& vocab,
                     RefinementRule& rule, std::string& message, std::size_t& offset) {
  const auto fields = split_csv(line, 5);
  if (fields.size() < 5) {
    message = "rule line needs Activity,SampleID,RuleType,Target,Explanation";
    offset = line.size();
    return false;
  }
  rule.activity = fields[0];
  rule.sample_id = fields[1];
  const std::string& type = fields[2];
  const std::string& target = fields[3];
  rule.explanation = fields[4];
  offset = fields[0].size() + fields[1].size() + 2;

  if (type == "REORDER") {
    rule.kind = RuleKind::Reorder;
    if (target != "*") {
      message = "REORDER target must be '*'";
      offset += type.size() + 1;
      return false;
    }
    return true;
  }
  if (type != "INSERT" && type != "DELETE") {
    message = "unknown RuleType \"" + type + "\"";
    return false;
  }
  rule.kind = type == "INSERT" ? RuleKind::Insert : RuleKind::Delete;

  offset += type.size() + 1;
  const auto at = target.find('@');
  if (at == std::string::npos) {
    message = "target needs <sensor>@<position>";
    return false;
  }
  std::string id = target.substr(0, at);
  int sign = 1;
  if (rule.kind == RuleKind::Insert) {
    if (id.empty() || (id[0] != '+' && id[0] != '-')) {
      message = "INSERT target needs a signed token, e.g. +M001@3";
      return false;
    }
    sign = id[0] == '+' ? 1 : -1;
    id = id.substr(1);
  }
  int pos = 0;
  const std::string pos_text = target.substr(at + 1);
  const auto [p, ec] = std::from_chars(pos_text.data(), pos_text.data() + pos_text.size(), pos);
  if (ec != std::errc{} || p != pos_text.data() + pos_text.size() || pos < 1) {
    message = "bad position '" + pos_text + "'";
    return false;
  }
  if (!vocab.contains(id)) {
    message = "unknown sensor '" + id + "'";
    return false;
  }
  rule.token = SignedToken{sign * vocab.index(id)};
  rule.position = pos;
  return true;
}

}  // namespace

RefinementParseResult parse_llm_refinement(const std::string& response_text,
                                           const SensorVocabulary& vocab) {
  RefinementParseResult res;

  // Blocks of consecutive non-blank lines with their byte offsets.
  struct Line {
    std::string text;
    std::size_t offset;
  };
  std::vector<std::vector<Line>> blocks;
  std::vector<Line> current;
  std::size_t offset = 0;
  std::istringstream in(response_text);
  std::string raw;
  while (std::getline(in, raw)) {
    const std::size_t line_offset = offset;
    offset += raw.size() + 1;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) {
      if (!current.empty()) blocks.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back({raw, line_offset});
    }
  }
  if (!current.empty()) blocks.push_back(std::move(current));

  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& rules_block = blocks[b];
    const bool is_refined_only =
        rules_block.size() == 1 && looks_like_refined_line(rules_block[0].text);
    if (is_refined_only) {
      res.errors.push_back({"", 0, rules_block[0].offset,
                            "refined sequence without a preceding rule block"});
      continue;
    }

    // A refined line inside the rules block means the blank separator is
    // missing; the whole sample is rejected.
    std::string sample_id;
    {
      const auto probe = split_csv(rules_block[0].text, 5);
      if (probe.size() >= 2) sample_id = probe[1];
    }
    bool malformed = false;
    for (const auto& ln : rules_block) {
      if (looks_like_refined_line(ln.text)) {
        res.errors.push_back(
            {sample_id, 0, ln.offset, "missing blank separator before refined sequence"});
        malformed = true;
        break;
      }
    }
    if (malformed) continue;

    RefinementSample sample;
    for (const auto& ln : rules_block) {
      RefinementRule rule;
      std::string message;
      std::size_t field_offset = 0;
      if (!parse_rule_line(ln.text, vocab, rule, message, field_offset)) {
        res.errors.push_back({sample_id, 0, ln.offset + field_offset, message});
        malformed = true;
        break;
      }
      sample.rules.push_back(std::move(rule));
    }
    if (malformed) continue;

    if (b + 1 >= blocks.size() || blocks[b + 1].size() != 1 ||
        !looks_like_refined_line(blocks[b + 1][0].text)) {
      res.errors.push_back({sample_id, 0, rules_block.back().offset,
                            "missing refined-sequence block after rules"});
      continue;
    }
    const auto& refined_line = blocks[b + 1][0];
    ++b;  // consume the refined block

    ActivitySequence refined;
    SampleError err;
    if (!try_parse_interchange(refined_line.text, vocab, refined, err)) {
      err.offset += refined_line.offset;
      if (err.sample_id.empty()) err.sample_id = sample_id;
      res.errors.push_back(std::move(err));
      continue;
    }
    sample.refined = std::move(refined);
    res.samples.push_back(std::move(sample));
  }
  return res;
}

std::string build_score_request(const std::string& prompt_template,
                                const std::vector<ScoreRequestSample>& samples) {
  std::string body = prompt_template;
  body += "\n\n";
  for (const auto& s : samples) {
    body += "Sample ID: " + s.sample_id + " [" + s.activity + "] sensor sequence\n";
    for (const auto& line : s.text_lines) {
      body += line;
      body += '\n';
    }
    body += '\n';
  }
  return body;
}

ScoreBatchResult parse_score_csv(const std::string& response,
                                 const std::vector<ScoreRequestSample>& expected) {
  ScoreBatchResult res;
  std::map<std::string, const ScoreRequestSample*> by_id;
  for (const auto& s : expected) by_id[s.sample_id] = &s;
  std::set<std::string> seen;

  std::istringstream in(response);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv(line, 3);
    if (fields.size() < 3) {
      res.errors.push_back({"", lineno, 0, "row needs Activity,SampleID,Score"});
      continue;
    }
    if (fields[2] == "Score") continue;  // stray header row
    int score = 0;
    const auto [p, ec] =
        std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), score);
    if (ec != std::errc{} || p != fields[2].data() + fields[2].size()) {
      res.errors.push_back({fields[1], lineno, 0, "non-integer score '" + fields[2] + "'"});
      continue;
    }
    if (score < 1 || score > 5) {
      res.errors.push_back({fields[1], lineno, 0, "score outside 1-5"});
      continue;
    }
    if (!by_id.count(fields[1])) {
      res.errors.push_back({fields[1], lineno, 0, "unexpected sample id"});
      continue;
    }
    if (!seen.insert(fields[1]).second) {
      res.errors.push_back({fields[1], lineno, 0, "duplicate sample id"});
      continue;
    }
    res.scores.push_back({fields[0], fields[1], score});
  }

  for (const auto& s : expected) {
    if (!seen.count(s.sample_id))
      res.errors.push_back({s.sample_id, 0, 0, "missing from response"});
  }
  return res;
}

ScoreBatchResult llm_score_batch(const LlmClient& client, const std::string& prompt_template,
                                 const std::vector<ScoreRequestSample>& samples) {
  const std::string body = build_score_request(prompt_template, samples);
  const std::string response = client.post(body);
  return parse_score_csv(response, samples);
}

}  // namespace adlgen
