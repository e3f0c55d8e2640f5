#include "adlgen/fixtures.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "adlgen/rng.hpp"

namespace adlgen {

const ActivityChain& MarkovWorld::chain(const std::string& label) const {
  for (const auto& a : activities)
    if (a.label == label) return a;
  throw std::out_of_range("world: unknown activity: " + label);
}

namespace {

std::pair<std::string, double> parse_weight_pair(const std::string& tok) {
  const auto colon = tok.rfind(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("world: expected <key>:<weight>, got '" + tok + "'");
  return {tok.substr(0, colon), std::stod(tok.substr(colon + 1))};
}

void normalize(std::vector<double>& w, const std::string& what) {
  double total = 0.0;
  for (double v : w) {
    if (v < 0.0) throw std::invalid_argument("world: negative weight in " + what);
    total += v;
  }
  if (total <= 0.0) throw std::invalid_argument("world: empty distribution in " + what);
  for (double& v : w) v /= total;
}

template <std::size_t N>
void normalize(std::array<double, N>& w, const std::string& what) {
  double total = 0.0;
  for (double v : w) {
    if (v < 0.0) throw std::invalid_argument("world: negative weight in " + what);
    total += v;
  }
  if (total <= 0.0) throw std::invalid_argument("world: empty distribution in " + what);
  for (double& v : w) v /= total;
}

}  // namespace

MarkovWorld load_world(const std::string& text) {
  MarkovWorld world;
  std::vector<std::string> floorplan_lines;
  std::vector<std::string> sensor_ids;

  struct RawActivity {
    std::string label;
    std::map<int, double> hours;
    std::map<int, double> durations;
    int min_len = 0, max_len = 0;
    std::map<std::string, double> start;
    std::map<std::string, std::map<std::string, double>> trans;
  };
  std::vector<RawActivity> raw;
  RawActivity* current = nullptr;

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream is(line);
    std::string kw;
    if (!(is >> kw) || kw[0] == '#') continue;

    if (kw == "world") {
      is >> world.name;
    } else if (kw == "version") {
      is >> world.version;
    } else if (kw == "seed") {
      is >> world.seed;
    } else if (kw == "sensor" || kw == "adjacent") {
      if (kw == "sensor") {
        std::string id;
        std::istringstream probe(line);
        std::string tmp;
        probe >> tmp >> id;
        sensor_ids.push_back(id);
      }
      floorplan_lines.push_back(line);
    } else if (kw == "activity") {
      raw.emplace_back();
      current = &raw.back();
      if (!(is >> current->label))
        throw std::invalid_argument("world: activity needs a label");
    } else if (kw == "end") {
      current = nullptr;
    } else if (current != nullptr) {
      std::string tok;
      if (kw == "hours") {
        while (is >> tok) {
          const auto [key, wgt] = parse_weight_pair(tok);
          const int h = std::stoi(key);
          if (h < 0 || h > 23) throw std::invalid_argument("world: hour outside [0,23]");
          current->hours[h] = wgt;
        }
      } else if (kw == "durations") {
        while (is >> tok) {
          const auto [key, wgt] = parse_weight_pair(tok);
          const int b = std::stoi(key);
          if (b < 0 || b > 7) throw std::invalid_argument("world: duration bin outside [0,7]");
          current->durations[b] = wgt;
        }
      } else if (kw == "lengths") {
        if (!(is >> current->min_len >> current->max_len) || current->min_len < 2 ||
            current->max_len < current->min_len || current->max_len > 100)
          throw std::invalid_argument("world: lengths need 2 <= min <= max <= 100");
      } else if (kw == "start") {
        while (is >> tok) {
          const auto [id, wgt] = parse_weight_pair(tok);
          current->start[id] = wgt;
        }
      } else if (kw == "trans") {
        std::string from;
        if (!(is >> from)) throw std::invalid_argument("world: trans needs a source sensor");
        auto& row = current->trans[from];
        while (is >> tok) {
          const auto [id, wgt] = parse_weight_pair(tok);
          row[id] = wgt;
        }
      } else {
        throw std::invalid_argument("world: unknown directive in activity block: " + kw);
      }
    } else {
      throw std::invalid_argument("world: unknown directive: " + kw);
    }
  }

  std::sort(sensor_ids.begin(), sensor_ids.end());
  world.vocab = SensorVocabulary(sensor_ids);
  for (const auto& fl : floorplan_lines) {
    world.floorplan_text += fl;
    world.floorplan_text += '\n';
  }
  world.graph = load_floorplan(world.floorplan_text, world.vocab);

  const auto s = world.vocab.size();
  for (const auto& ra : raw) {
    ActivityChain chain;
    chain.label = ra.label;
    chain.min_len = ra.min_len;
    chain.max_len = ra.max_len;
    if (ra.min_len == 0)
      throw std::invalid_argument("world: activity " + ra.label + " missing lengths");

    chain.hour_weights.fill(0.0);
    for (const auto& [h, wgt] : ra.hours) chain.hour_weights[static_cast<std::size_t>(h)] = wgt;
    normalize(chain.hour_weights, ra.label + " hours");
    chain.duration_weights.fill(0.0);
    for (const auto& [b, wgt] : ra.durations)
      chain.duration_weights[static_cast<std::size_t>(b)] = wgt;
    normalize(chain.duration_weights, ra.label + " durations");

    chain.start_weights.assign(s, 0.0);
    for (const auto& [id, wgt] : ra.start)
      chain.start_weights[static_cast<std::size_t>(world.vocab.index(id)) - 1] = wgt;
    normalize(chain.start_weights, ra.label + " start");

    chain.transition.assign(s, std::vector<double>(s, 0.0));
    for (const auto& [from, row] : ra.trans) {
      const int fi = world.vocab.index(from);
      auto& out_row = chain.transition[static_cast<std::size_t>(fi) - 1];
      for (const auto& [to, wgt] : row) {
        const int ti = world.vocab.index(to);
        if (wgt > 0.0 && !world.graph.adjacent(fi, ti))
          throw std::invalid_argument("world: transition " + from + " -> " + to +
                                      " violates the floorplan adjacency");
        out_row[static_cast<std::size_t>(ti) - 1] = wgt;
      }
      normalize(out_row, ra.label + " trans " + from);
    }

    // Every sensor reachable from the start support needs a transition row.
    std::set<int> frontier;
    for (std::size_t i = 0; i < s; ++i)
      if (chain.start_weights[i] > 0.0) frontier.insert(static_cast<int>(i) + 1);
    std::set<int> seen;
    while (!frontier.empty()) {
      const int at = *frontier.begin();
      frontier.erase(frontier.begin());
      if (!seen.insert(at).second) continue;
      const auto& row = chain.transition[static_cast<std::size_t>(at) - 1];
      double total = 0.0;
      for (double v : row) total += v;
      if (total <= 0.0)
        throw std::invalid_argument("world: activity " + ra.label + " reaches sensor " +
                                    world.vocab.id(at) + " which has no trans row");
      for (std::size_t i = 0; i < s; ++i)
        if (row[i] > 0.0) frontier.insert(static_cast<int>(i) + 1);
    }

    world.activities.push_back(std::move(chain));
  }
  if (world.activities.empty())
    throw std::invalid_argument("world: no activities defined");
  return world;
}

MarkovWorld load_world_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("world: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return load_world(buf.str());
}

namespace {

ActivitySequence sample_trace(const MarkovWorld& world, const ActivityChain& chain,
                              std::uint64_t stream_seed, const std::string& sample_id) {
  Rng rng(stream_seed);
  ActivitySequence seq;
  seq.label = chain.label;
  seq.sample_id = sample_id;

  const int len = rng.uniform_int(chain.min_len, chain.max_len);
  const int hour = static_cast<int>(rng.categorical(chain.hour_weights));
  // Base date 2011-03-07 is a Monday; spread traces across the week.
  CivilTime start;
  start.year = 2011;
  start.month = 3;
  start.day = 7 + rng.uniform_int(0, 6);
  start.hour = hour;
  start.minute = rng.uniform_int(0, 59);
  start.second = rng.uniform_int(0, 59);
  Micros clock = to_micros(start);

  std::map<int, bool> last_active;  // sensor -> was activating
  int sensor = static_cast<int>(rng.categorical(chain.start_weights)) + 1;
  for (int k = 0; k < len; ++k) {
    if (k > 0) {
      const auto& row = chain.transition[static_cast<std::size_t>(sensor) - 1];
      sensor = static_cast<int>(rng.categorical(row)) + 1;
      const int bin = static_cast<int>(rng.categorical(chain.duration_weights));
      clock += static_cast<Micros>(representative_duration(bin) * kMicrosPerSecond);
    }
    const auto it = last_active.find(sensor);
    const bool active = it == last_active.end() ? true : !it->second;
    last_active[sensor] = active;
    seq.tokens.push_back({active ? sensor : -sensor});
    seq.timestamps.push_back(clock);
  }
  recompute_temporal(seq);
  return seq;
}

}  // namespace

std::vector<ActivitySequence> sample_world_corpus(const MarkovWorld& world,
                                                  const std::map<std::string, int>& per_activity,
                                                  std::uint64_t seed) {
  std::vector<ActivitySequence> out;
  for (const auto& [label, count] : per_activity) {
    if (count < 1) throw std::invalid_argument("sample_world_corpus: counts must be >= 1");
    const ActivityChain& chain = world.chain(label);
    const std::uint64_t activity_seed = mix_seed(mix_seed(seed, fnv1a64(label)), world.seed);
    for (int i = 0; i < count; ++i) {
      char id[64];
      std::snprintf(id, sizeof(id), "%s-w%05d", label.c_str(), i + 1);
      auto seq =
          sample_trace(world, chain, mix_seed(activity_seed, static_cast<std::uint64_t>(i)), id);
      const auto check = check_fundamental(seq, world.graph);
      if (!check.tier_a_pass)
        throw std::runtime_error("sample_world_corpus: world '" + world.name +
                                 "' produced a non-clean trace for " + label +
                                 " (authoring error)");
      out.push_back(std::move(seq));
    }
  }
  return out;
}

namespace {

bool would_flood(const ActivitySequence& seq, int sensor_index, int added) {
  const std::size_t m = seq.size() + static_cast<std::size_t>(added);
  if (m < 10) return false;
  std::size_t count = static_cast<std::size_t>(added);
  for (const auto& t : seq.tokens)
    if (t.index() == sensor_index) ++count;
  return static_cast<double>(count) > 0.9 * static_cast<double>(m);
}

void insert_event(ActivitySequence& seq, std::size_t at, SignedToken token) {
  Micros ts;
  if (at == 0) {
    ts = seq.timestamps.front();
  } else if (at >= seq.size()) {
    ts = seq.timestamps.back();
  } else {
    ts = seq.timestamps[at - 1] + (seq.timestamps[at] - seq.timestamps[at - 1]) / 2;
  }
  seq.tokens.insert(seq.tokens.begin() + static_cast<long>(at), token);
  seq.timestamps.insert(seq.timestamps.begin() + static_cast<long>(at), ts);
  recompute_temporal(seq);
}

}  // namespace

CorruptionResult corrupt_corpus(const std::vector<ActivitySequence>& corpus,
                                const CorruptionMix& mix, const FloorplanGraph& graph,
                                const SensorVocabulary& vocab, std::uint64_t seed) {
  if (mix.alternation < 0 || mix.jump < 0 || mix.alternation + mix.jump > 1.0)
    throw std::invalid_argument("corrupt_corpus: mix fractions must be in [0,1]");
  CorruptionResult res;
  res.corpus = corpus;

  Rng rng(mix_seed(seed, 0xc0deULL));
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  const auto n_alt =
      static_cast<std::size_t>(std::llround(mix.alternation * static_cast<double>(corpus.size())));
  const auto n_jump =
      static_cast<std::size_t>(std::llround(mix.jump * static_cast<double>(corpus.size())));
  const int s = static_cast<int>(vocab.size());

  for (std::size_t t = 0; t < n_alt + n_jump && t < order.size(); ++t) {
    ActivitySequence& seq = res.corpus[order[t]];
    const int m = static_cast<int>(seq.size());
    if (m < 2) {
      ++res.failed_injections;
      continue;
    }

    if (t < n_alt) {
      // Duplicate one event right after itself: a repeated state with no
      // spatial side effects.
      bool done = false;
      const int start = rng.uniform_int(1, m);
      for (int probe = 0; probe < m && !done; ++probe) {
        const int p = (start - 1 + probe) % m + 1;
        const SignedToken tok = seq.tokens[static_cast<std::size_t>(p) - 1];
        if (would_flood(seq, tok.index(), 1)) continue;
        insert_event(seq, static_cast<std::size_t>(p), tok);
        res.defects.push_back(
            {seq.sample_id, ViolationKind::NON_ALTERNATING_STATE, p + 1});
        done = true;
      }
      if (!done) ++res.failed_injections;
    } else {
      // Insert a sensor not adjacent to its predecessor. Prefer a sensor that
      // is adjacent to the follower and absent from the sequence so the
      // primary jump is the only defect; otherwise report the secondary too.
      std::set<int> present;
      for (const auto& tok : seq.tokens) present.insert(tok.index());

      bool done = false;
      for (int strict = 1; strict >= 0 && !done; --strict) {
        const int p_start = rng.uniform_int(2, m);
        for (int pp = 0; pp < m - 1 && !done; ++pp) {
          const int p = (p_start - 2 + pp) % (m - 1) + 2;
          const int prev = seq.tokens[static_cast<std::size_t>(p) - 2].index();
          const int next = seq.tokens[static_cast<std::size_t>(p) - 1].index();
          const int z_start = rng.uniform_int(1, s);
          for (int zz = 0; zz < s && !done; ++zz) {
            const int z = (z_start - 1 + zz) % s + 1;
            if (present.count(z) || graph.adjacent(prev, z)) continue;
            const bool clean_exit = graph.adjacent(z, next);
            if (strict && !clean_exit) continue;
            insert_event(seq, static_cast<std::size_t>(p) - 1, SignedToken{z});
            res.defects.push_back({seq.sample_id, ViolationKind::SPATIAL_JUMP, p});
            if (!clean_exit)
              res.defects.push_back({seq.sample_id, ViolationKind::SPATIAL_JUMP, p + 1});
            done = true;
          }
        }
      }
      if (!done) ++res.failed_injections;
    }
  }
  return res;
}

}  // namespace adlgen
