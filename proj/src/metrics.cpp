#include "adlgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace adlgen {

FeatureVector featurize(const ActivitySequence& seq, const SensorVocabulary& vocab) {
  if (seq.empty()) throw std::invalid_argument("featurize: empty sequence");
  const std::size_t s = vocab.size();
  FeatureVector v = FeatureVector::Zero(static_cast<Eigen::Index>(2 * s + 24 + 8));

  for (std::size_t i = 0; i < seq.size(); ++i) {
    const SignedToken t = seq.tokens[i];
    const std::size_t slot = t.activating() ? static_cast<std::size_t>(t.index()) - 1
                                            : s + static_cast<std::size_t>(t.index()) - 1;
    v[static_cast<Eigen::Index>(slot)] += 1.0;
    v[static_cast<Eigen::Index>(2 * s + static_cast<std::size_t>(seq.temporal[i].hour))] += 1.0;
    v[static_cast<Eigen::Index>(2 * s + 24 +
                                static_cast<std::size_t>(seq.temporal[i].duration_bin))] += 1.0;
  }
  const double m = static_cast<double>(seq.size());
  v.head(static_cast<Eigen::Index>(2 * s)) /= m;
  v.segment(static_cast<Eigen::Index>(2 * s), 24) /= m;
  v.tail(8) /= m;
  return v;
}

std::vector<FeatureVector> featurize_corpus(const std::vector<ActivitySequence>& corpus,
                                            const SensorVocabulary& vocab) {
  std::vector<FeatureVector> out;
  out.reserve(corpus.size());
  for (const auto& s : corpus) out.push_back(featurize(s, vocab));
  return out;
}

double gaussian_kernel(const FeatureVector& x, const FeatureVector& y, double sigma) {
  const double d2 = (x - y).squaredNorm();
  return std::exp(-d2 / (2.0 * sigma * sigma));
}

double median_heuristic_bandwidth(std::span<const FeatureVector> x,
                                  std::span<const FeatureVector> y) {
  std::vector<const FeatureVector*> all;
  all.reserve(x.size() + y.size());
  for (const auto& v : x) all.push_back(&v);
  for (const auto& v : y) all.push_back(&v);
  std::vector<double> dists;
  dists.reserve(all.size() * (all.size() - 1) / 2);
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j)
      dists.push_back((*all[i] - *all[j]).norm());
  if (dists.empty()) return 1.0;
  std::sort(dists.begin(), dists.end());
  const std::size_t n = dists.size();
  const double med = n % 2 ? dists[n / 2] : 0.5 * (dists[n / 2 - 1] + dists[n / 2]);
  return med > 0.0 ? med : 1.0;
}

namespace {

double resolve_bandwidth(std::span<const FeatureVector> x, std::span<const FeatureVector> y,
                         const KernelConfig& k) {
  return k.bandwidth > 0.0 ? k.bandwidth : median_heuristic_bandwidth(x, y);
}

}  // namespace

double mmd2_unbiased(std::span<const FeatureVector> x, std::span<const FeatureVector> y,
                     const KernelConfig& k) {
  const std::size_t m = x.size(), n = y.size();
  if (m < 2 || n < 2) throw std::invalid_argument("mmd2_unbiased: need at least 2 per set");
  const double sigma = resolve_bandwidth(x, y, k);

  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j) xx += gaussian_kernel(x[i], x[j], sigma);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) yy += gaussian_kernel(y[i], y[j], sigma);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) xy += gaussian_kernel(x[i], y[j], sigma);

  const double dm = static_cast<double>(m), dn = static_cast<double>(n);
  return xx / (dm * (dm - 1.0)) + yy / (dn * (dn - 1.0)) - 2.0 * xy / (dm * dn);
}

double mmd2_biased(std::span<const FeatureVector> x, std::span<const FeatureVector> y,
                   const KernelConfig& k) {
  const std::size_t m = x.size(), n = y.size();
  if (m < 1 || n < 1) throw std::invalid_argument("mmd2_biased: empty set");
  const double sigma = resolve_bandwidth(x, y, k);

  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) xx += gaussian_kernel(x[i], x[j], sigma);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) yy += gaussian_kernel(y[i], y[j], sigma);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) xy += gaussian_kernel(x[i], y[j], sigma);

  const double dm = static_cast<double>(m), dn = static_cast<double>(n);
  return xx / (dm * dm) + yy / (dn * dn) - 2.0 * xy / (dm * dn);
}

namespace {

double normalized_entropy(const std::map<std::string, std::size_t>& counts) {
  if (counts.size() < 2) return 0.0;
  double total = 0.0;
  for (const auto& [_, c] : counts) total += static_cast<double>(c);
  double h = 0.0;
  for (const auto& [_, c] : counts) {
    const double p = static_cast<double>(c) / total;
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h / std::log2(static_cast<double>(counts.size()));
}

}  // namespace

double diversity_score(const std::vector<ActivitySequence>& corpus) {
  if (corpus.empty()) throw std::invalid_argument("diversity_score: empty corpus");

  std::map<std::string, std::size_t> sensor_counts;    // which sensors fire
  std::map<std::string, std::size_t> transition_counts;  // per-sensor state patterns
  std::map<std::string, std::size_t> hour_counts;      // when events occur
  std::map<std::string, std::size_t> bigram_counts;    // token order

  for (const auto& seq : corpus) {
    std::map<int, SignedToken> last_of_sensor;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const SignedToken t = seq.tokens[i];
      ++sensor_counts[std::to_string(t.index())];
      ++hour_counts[std::to_string(seq.temporal[i].hour)];
      if (i > 0) {
        ++bigram_counts[std::to_string(seq.tokens[i - 1].value) + "," +
                        std::to_string(t.value)];
      }
      auto it = last_of_sensor.find(t.index());
      if (it != last_of_sensor.end()) {
        ++transition_counts[std::to_string(t.index()) + ":" +
                            (it->second.activating() ? "+" : "-") +
                            (t.activating() ? "+" : "-")];
      }
      last_of_sensor[t.index()] = t;
    }
  }

  const double components[4] = {
      normalized_entropy(sensor_counts), normalized_entropy(transition_counts),
      normalized_entropy(hour_counts), normalized_entropy(bigram_counts)};
  double log_sum = 0.0;
  int positive = 0;
  for (double h : components) {
    if (h > 0.0) {
      log_sum += std::log(h);
      ++positive;
    }
  }
  if (positive == 0) return 0.0;
  return std::exp(log_sum / static_cast<double>(positive));
}

namespace {

double percentile_linear(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

}  // namespace

IntraSetStats intra_set_similarity(const std::vector<ActivitySequence>& corpus,
                                   const SensorVocabulary& vocab) {
  if (corpus.size() < 2) throw std::invalid_argument("intra_set_similarity: need >= 2");
  const auto feats = featurize_corpus(corpus, vocab);

  std::vector<double> sims;
  sims.reserve(corpus.size() * (corpus.size() - 1));
  for (std::size_t i = 0; i < feats.size(); ++i) {
    for (std::size_t j = 0; j < feats.size(); ++j) {
      if (i == j) continue;
      const double denom = feats[i].norm() * feats[j].norm();
      sims.push_back(denom > 0.0 ? feats[i].dot(feats[j]) / denom : 0.0);
    }
  }

  IntraSetStats st;
  double sum = 0.0;
  for (double s : sims) sum += s;
  st.mean = sum / static_cast<double>(sims.size());
  double var = 0.0;
  for (double s : sims) var += (s - st.mean) * (s - st.mean);
  st.std = std::sqrt(var / static_cast<double>(sims.size()));

  std::sort(sims.begin(), sims.end());
  st.min = sims.front();
  st.max = sims.back();
  st.median = percentile_linear(sims, 0.5);
  st.p25 = percentile_linear(sims, 0.25);
  st.p75 = percentile_linear(sims, 0.75);
  return st;
}

}  // namespace adlgen
