#pragma once

// Independent reference implementations used only by tests. These recompute
// metric values with plain loops and separate data structures so they do not
// share code with the library paths they check.

#include <vector>

#include "adlgen/sequence.hpp"

namespace adlgen::oracle {

using Vec = std::vector<double>;

double mmd2_unbiased_bruteforce(const std::vector<Vec>& x, const std::vector<Vec>& y,
                                double sigma);
double mmd2_biased_bruteforce(const std::vector<Vec>& x, const std::vector<Vec>& y,
                              double sigma);

// Second diversity implementation: separate counting pass over the corpus.
double diversity_bruteforce(const std::vector<ActivitySequence>& corpus);

}  // namespace adlgen::oracle
