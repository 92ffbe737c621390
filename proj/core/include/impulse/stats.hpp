#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace impulse {

// Monte Carlo estimate with enough metadata to reproduce it.
struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;  // sample std / sqrt(n); 0 when n < 2
    long long paths = 0;
    std::uint64_t seed = 0;
};

McEstimate summarize(std::span<const double> values, std::uint64_t seed);

// Upper tail P(chi2_dof > stat).
double chi_square_tail(double stat, int dof);

// Pearson statistic for observed (possibly weighted) frequencies against
// expected probabilities; bins with tiny expectation should be pooled by the
// caller first.  n_effective scales the expected counts.
double chi_square_stat(std::span<const double> observed_counts,
                       std::span<const double> expected_probs, double n_effective);

}  // namespace impulse
