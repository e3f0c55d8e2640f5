#include "adlgen/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "adlgen/metrics.hpp"

namespace adlgen {

void SamplerConfig::validate() const {
  if (!(tau_base > 0.0) || !(tau_min > 0.0) || tau_min > tau_max)
    throw std::invalid_argument("sampler config: need 0 < tau_min <= tau_max, tau_base > 0");
  if (nucleus_p <= 0.0 || nucleus_p > 1.0)
    throw std::invalid_argument("sampler config: nucleus_p outside (0,1]");
  if (l_min <= 0 || l_max <= l_min || max_len <= 0 || max_resample < 0 || context_window <= 0)
    throw std::invalid_argument("sampler config: bad bounds");
  if (!(r_p > 0.0) || !(beta_low > 0.0) || diversity_threshold <= 0.0 ||
      diversity_threshold >= 1.0)
    throw std::invalid_argument("sampler config: bad factors");
}

double compute_temperature(const StepState& s, const SamplerConfig& cfg) {
  const double span = static_cast<double>(cfg.l_max - cfg.l_min);
  const double frac = std::clamp(static_cast<double>(s.length - cfg.l_min) / span, 0.0, 1.0);
  const double alpha = cfg.tau_min + frac * (cfg.tau_max - cfg.tau_min);
  const double repetition = cfg.r_p * (1.0 + 0.1 * static_cast<double>(s.n_current - 1));
  double tau = cfg.tau_base * repetition / alpha;
  if (s.unique_ratio < cfg.diversity_threshold) {
    // Low diversity calls for a hotter distribution; the literal form puts
    // beta in the denominator instead.
    tau = cfg.beta_literal ? tau / cfg.beta_low : tau * cfg.beta_low;
  }
  return tau;
}

Eigen::VectorXd nucleus_filter(const Eigen::VectorXd& probs, double p) {
  if (p <= 0.0 || p > 1.0) throw std::invalid_argument("nucleus_filter: p outside (0,1]");
  const double total = probs.sum();
  if (std::abs(total - 1.0) > 1e-6)
    throw std::invalid_argument("nucleus_filter: input does not sum to 1");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(probs.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return probs[a] > probs[b]; });

  Eigen::VectorXd out = Eigen::VectorXd::Zero(probs.size());
  double cum = 0.0;
  for (Eigen::Index idx : order) {
    out[idx] = probs[idx];
    cum += probs[idx];
    if (cum >= p - 1e-12) break;
  }
  out /= cum;
  return out;
}

namespace {

Eigen::VectorXd softmax_scaled(const Eigen::VectorXd& logits, double tau) {
  const Eigen::VectorXd z = logits / tau;
  const double mx = z.maxCoeff();
  Eigen::VectorXd p = (z.array() - mx).exp();
  p /= p.sum();
  return p;
}

TrainingWindow window_from_history(const ActivitySequence& history, int window) {
  TrainingWindow w;
  const std::size_t n = history.size();
  const std::size_t begin = n > static_cast<std::size_t>(window) ? n - window : 0;
  w.context_tokens.assign(history.tokens.begin() + static_cast<long>(begin),
                          history.tokens.end());
  w.context_temporal.assign(history.temporal.begin() + static_cast<long>(begin),
                            history.temporal.end());
  w.activity = history.label;
  return w;
}

std::size_t sample_from(const Eigen::VectorXd& probs, Rng& rng) {
  double r = rng.uniform01();
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    r -= probs[i];
    if (r < 0.0) return static_cast<std::size_t>(i);
  }
  return static_cast<std::size_t>(probs.size() - 1);
}

}  // namespace

StepResult constrained_step(const ModelWeights& model, const ActivitySequence& history,
                            const FloorplanGraph& graph, const SamplerConfig& cfg, Rng& rng,
                            int step_index) {
  if (history.empty()) throw std::invalid_argument("constrained_step: empty history");

  const TrainingWindow win = window_from_history(history, cfg.context_window);
  const HeadOutputs heads = forward(win, model);

  StepResult res;
  res.provenance.step = step_index;

  const double p_end = 1.0 / (1.0 + std::exp(-heads.special_logit));
  if (rng.uniform01() < p_end) {
    res.is_end = true;
    return res;
  }

  std::set<int> distinct;
  for (const auto& t : history.tokens) distinct.insert(t.index());
  const int prev_index = history.tokens.back().index();
  int n_current = 0;
  for (const auto& t : history.tokens)
    if (t.index() == prev_index) ++n_current;

  StepState state;
  state.length = static_cast<int>(history.size());
  state.unique_ratio =
      static_cast<double>(distinct.size()) / static_cast<double>(history.size());
  state.n_current = n_current;
  const double tau = compute_temperature(state, cfg);
  res.provenance.tau = tau;

  const Eigen::VectorXd scaled = softmax_scaled(heads.sensor_logits, tau);
  const Eigen::VectorXd filtered = nucleus_filter(scaled, cfg.nucleus_p);

  int chosen = -1;
  for (int attempt = 0; attempt <= cfg.max_resample; ++attempt) {
    const int cand = static_cast<int>(sample_from(filtered, rng)) + 1;
    if (!cfg.enforce_adjacency || graph.adjacent(cand, prev_index)) {
      chosen = cand;
      res.provenance.resamples = attempt;
      break;
    }
  }
  if (chosen < 0) {
    // Masked argmax over adjacency-valid sensors; guarantees termination and
    // the validity invariant.
    res.provenance.resamples = cfg.max_resample + 1;
    res.provenance.fallback = true;
    double best = -1.0;
    for (Eigen::Index i = 0; i < scaled.size(); ++i) {
      const int cand = static_cast<int>(i) + 1;
      if (graph.adjacent(cand, prev_index) && scaled[i] > best) {
        best = scaled[i];
        chosen = cand;
      }
    }
    if (chosen < 0)
      throw std::runtime_error("constrained_step: no adjacency-valid candidate for sensor " +
                               model.sensor_ids[static_cast<std::size_t>(prev_index) - 1]);
  }

  const double p_plus = 1.0 / (1.0 + std::exp(-heads.sign_logit));
  const bool plus = rng.uniform01() < p_plus;
  res.token = SignedToken{plus ? chosen : -chosen};

  const Eigen::VectorXd dur = softmax_scaled(heads.duration_logits, 1.0);
  res.duration_bin = static_cast<int>(sample_from(dur, rng));
  return res;
}

namespace {

// First event (token, duration_bin) from the class-conditional start
// distribution stored with the weights.
std::pair<SignedToken, int> sample_start(const ModelWeights& model, int activity_row,
                                         Rng& rng) {
  const auto s = static_cast<std::size_t>(model.config.vocab_size);
  const std::size_t slots = 2 * s;
  const std::size_t base = static_cast<std::size_t>(activity_row) * slots * kDurationBins;
  std::vector<double> weights(slots * kDurationBins);
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] = model.start_counts[base + i];
    total += weights[i];
  }
  if (total <= 0.0) std::fill(weights.begin(), weights.end(), 1.0);
  const std::size_t pick = rng.categorical(weights);
  const std::size_t slot = pick / kDurationBins;
  const int bin = static_cast<int>(pick % kDurationBins);
  const int value = slot < s ? static_cast<int>(slot) + 1 : -(static_cast<int>(slot - s) + 1);
  return {SignedToken{value}, bin};
}

GeneratedSequence generate_one(const ModelWeights& model, const std::string& activity,
                               int activity_row,
                               const std::optional<ActivitySequence>& exemplar_prefix,
                               Micros start_clock, const FloorplanGraph& graph,
                               const SamplerConfig& cfg, std::uint64_t ordinal) {
  Rng rng(mix_seed(cfg.seed, ordinal));
  GeneratedSequence g;
  g.seq.label = activity;
  char id[32];
  std::snprintf(id, sizeof(id), "G%05llu", static_cast<unsigned long long>(ordinal + 1));
  g.seq.sample_id = id;

  Micros clock = start_clock;
  int next_bin = 0;
  if (exemplar_prefix && !exemplar_prefix->empty()) {
    g.seq.tokens = exemplar_prefix->tokens;
    g.seq.temporal = exemplar_prefix->temporal;
    g.seq.timestamps = exemplar_prefix->timestamps;
    clock = g.seq.timestamps.back();
    next_bin = g.seq.temporal.back().duration_bin;
  } else {
    const auto [tok, bin] = sample_start(model, activity_row, rng);
    g.seq.tokens.push_back(tok);
    g.seq.timestamps.push_back(clock);
    g.seq.temporal.push_back({hour_of_day(clock), day_of_week(clock), bin});
    next_bin = bin;
  }

  int step_index = static_cast<int>(g.seq.size());
  while (static_cast<int>(g.seq.size()) < cfg.max_len) {
    const StepResult step = constrained_step(model, g.seq, graph, cfg, rng, step_index);
    if (step.is_end) break;
    clock +=
        static_cast<Micros>(std::llround(representative_duration(next_bin) * kMicrosPerSecond));
    g.seq.tokens.push_back(step.token);
    g.seq.timestamps.push_back(clock);
    g.seq.temporal.push_back({hour_of_day(clock), day_of_week(clock), step.duration_bin});
    g.provenance.push_back(step.provenance);
    next_bin = step.duration_bin;
    ++step_index;
  }
  // Data convention: the final event of a sequence carries bin 0.
  g.seq.temporal.back().duration_bin = 0;
  return g;
}

}  // namespace

std::vector<GeneratedSequence> generate(const ModelWeights& model, const std::string& activity,
                                        int count,
                                        const std::optional<ActivitySequence>& exemplar_prefix,
                                        Micros start_clock, const FloorplanGraph& graph,
                                        const SamplerConfig& cfg, int jobs) {
  cfg.validate();
  if (count < 0) throw std::invalid_argument("generate: negative count");
  if (graph.sensor_count() != static_cast<std::size_t>(model.config.vocab_size))
    throw std::invalid_argument("generate: floorplan/vocabulary size mismatch");
  const int activity_row = model.activity_index(activity);

  std::vector<GeneratedSequence> out(static_cast<std::size_t>(count));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = generate_one(model, activity, activity_row, exemplar_prefix, start_clock, graph,
                            cfg, static_cast<std::uint64_t>(i));
    }
  };

  const std::size_t n = out.size();
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)),
                                             std::max<std::size_t>(n, 1));
  if (workers <= 1 || n == 0) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t wi = 0; wi < workers; ++wi) {
      const std::size_t b = wi * chunk;
      const std::size_t e = std::min(n, b + chunk);
      if (b >= e) break;
      pool.emplace_back(work, b, e);
    }
    for (auto& t : pool) t.join();
  }
  return out;
}

std::string provenance_csv(const std::vector<GeneratedSequence>& out) {
  std::ostringstream os;
  os << "sample_id,step,tau,resamples,fallback\n";
  os.precision(10);
  for (const auto& g : out) {
    for (const auto& p : g.provenance) {
      os << g.seq.sample_id << ',' << p.step << ',' << p.tau << ',' << p.resamples << ','
         << (p.fallback ? 1 : 0) << '\n';
    }
  }
  return os.str();
}

std::vector<GeneratedSequence> quality_gate(const std::vector<GeneratedSequence>& candidates,
                                            const std::vector<double>& semantic_scores,
                                            const FloorplanGraph& graph,
                                            const GateThresholds& thresholds) {
  if (candidates.size() != semantic_scores.size())
    throw std::invalid_argument("quality_gate: score/candidate count mismatch");
  std::vector<GeneratedSequence> kept;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (semantic_scores[i] < thresholds.min_semantic) continue;
    bool valid = true;
    const auto& toks = candidates[i].seq.tokens;
    for (std::size_t j = 1; j < toks.size() && valid; ++j)
      valid = validate_transition(toks[j - 1], toks[j], graph);
    if (!valid) continue;
    if (diversity_score({candidates[i].seq}) < thresholds.min_diversity) continue;
    kept.push_back(candidates[i]);
  }
  return kept;
}

}  // namespace adlgen
