#include "oracles.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>

namespace adlgen::oracle {

namespace {

double kern(const Vec& a, const Vec& b, double sigma) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
  return std::exp(-d2 / (2.0 * sigma * sigma));
}

}  // namespace

double mmd2_unbiased_bruteforce(const std::vector<Vec>& x, const std::vector<Vec>& y,
                                double sigma) {
  const double m = static_cast<double>(x.size());
  const double n = static_cast<double>(y.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j)
      if (i != j) acc += kern(x[i], x[j], sigma) / (m * (m - 1.0));
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j)
      if (i != j) acc += kern(y[i], y[j], sigma) / (n * (n - 1.0));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) acc -= 2.0 * kern(x[i], y[j], sigma) / (m * n);
  return acc;
}

double mmd2_biased_bruteforce(const std::vector<Vec>& x, const std::vector<Vec>& y,
                              double sigma) {
  const double m = static_cast<double>(x.size());
  const double n = static_cast<double>(y.size());
  double acc = 0.0;
  for (const auto& a : x)
    for (const auto& b : x) acc += kern(a, b, sigma) / (m * m);
  for (const auto& a : y)
    for (const auto& b : y) acc += kern(a, b, sigma) / (n * n);
  for (const auto& a : x)
    for (const auto& b : y) acc -= 2.0 * kern(a, b, sigma) / (m * n);
  return acc;
}

double diversity_bruteforce(const std::vector<ActivitySequence>& corpus) {
  std::map<int, double> sensors;
  std::map<std::string, double> transitions;
  std::map<int, double> hours;
  std::map<std::pair<int, int>, double> bigrams;

  for (const auto& seq : corpus) {
    std::map<int, int> prev_state;  // sensor -> +1/-1
    for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
      const int v = seq.tokens[i].value;
      const int idx = v < 0 ? -v : v;
      sensors[idx] += 1.0;
      hours[seq.temporal[i].hour] += 1.0;
      if (i > 0) bigrams[{seq.tokens[i - 1].value, v}] += 1.0;
      auto it = prev_state.find(idx);
      if (it != prev_state.end()) {
        transitions[std::to_string(idx) + (it->second > 0 ? "+" : "-") +
                    (v > 0 ? "+" : "-")] += 1.0;
      }
      prev_state[idx] = v > 0 ? 1 : -1;
    }
  }

  // Entropy via natural log converted to bits, unlike the library path.
  auto entropy_norm = [](auto& counts) {
    if (counts.size() < 2) return 0.0;
    double total = 0.0;
    for (auto& [k, c] : counts) total += c;
    double h = 0.0;
    for (auto& [k, c] : counts) {
      const double p = c / total;
      h -= p * std::log(p);
    }
    return h / std::log(static_cast<double>(counts.size()));
  };

  const double hs[4] = {entropy_norm(sensors), entropy_norm(transitions), entropy_norm(hours),
                        entropy_norm(bigrams)};
  double prod = 1.0;
  int k = 0;
  for (double h : hs) {
    if (h > 0.0) {
      prod *= h;
      ++k;
    }
  }
  return k == 0 ? 0.0 : std::pow(prod, 1.0 / static_cast<double>(k));
}

}  // namespace adlgen::oracle
