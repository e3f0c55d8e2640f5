#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "adlgen/encoding.hpp"
#include "adlgen/sequence.hpp"

namespace adlgen {

// Fixed-length sample representation: signed-token histogram over 2|S| slots
// (+i at i-1, -i at |S|+i-1), hour-of-day histogram (24), duration-bin
// histogram (8); each block L1-normalized. This construction is the artifact's
// normative feature map for MMD and cosine similarity.
using FeatureVector = Eigen::VectorXd;

FeatureVector featurize(const ActivitySequence& seq, const SensorVocabulary& vocab);
std::vector<FeatureVector> featurize_corpus(const std::vector<ActivitySequence>& corpus,
                                            const SensorVocabulary& vocab);

struct KernelConfig {
  double bandwidth = 0.0;  // sigma; <= 0 selects the median heuristic over X u Y
};

// Gaussian kernel exp(-||x-y||^2 / (2 sigma^2)).
double gaussian_kernel(const FeatureVector& x, const FeatureVector& y, double sigma);
double median_heuristic_bandwidth(std::span<const FeatureVector> x,
                                  std::span<const FeatureVector> y);

// Within-set sums exclude i=j (weights 1/(m(m-1)), 1/(n(n-1))); may be
// negative. Requires |X| >= 2 and |Y| >= 2.
double mmd2_unbiased(std::span<const FeatureVector> x, std::span<const FeatureVector> y,
                     const KernelConfig& k = {});

// Diagonal terms included (weights 1/m^2, 1/n^2); nonnegative up to rounding.
double mmd2_biased(std::span<const FeatureVector> x, std::span<const FeatureVector> y,
                   const KernelConfig& k = {});

// Geometric mean of the positive normalized Shannon entropies of four corpus
// components: sensor-id distribution, per-sensor state-transition patterns,
// hour-of-day distribution, and token bigrams. Each entropy is normalized by
// log2 of the number of distinct elements observed; returns 0 when every
// component is degenerate.
double diversity_score(const std::vector<ActivitySequence>& corpus);

struct IntraSetStats {
  double mean = 0, median = 0, min = 0, max = 0, std = 0, p25 = 0, p75 = 0;
};

// Pairwise cosine similarity of featurize() vectors, diagonal excluded;
// percentiles by linear interpolation. Requires |corpus| >= 2.
IntraSetStats intra_set_similarity(const std::vector<ActivitySequence>& corpus,
                                   const SensorVocabulary& vocab);

}  // namespace adlgen
