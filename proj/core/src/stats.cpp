#include "impulse/stats.hpp"

#include <gsl/gsl_cdf.h>

#include <cmath>

#include "impulse/rng.hpp"
#include "impulse/types.hpp"

namespace impulse {

McEstimate summarize(std::span<const double> values, std::uint64_t seed) {
    McEstimate est;
    est.paths = static_cast<long long>(values.size());
    est.seed = seed;
    if (values.empty()) return est;
    double sum = 0.0;
    for (double v : values) sum += v;
    est.mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return est;
    double m2 = 0.0;
    for (double v : values) {
        const double d = v - est.mean;
        m2 += d * d;
    }
    const double var = m2 / static_cast<double>(values.size() - 1);
    est.std_error = std::sqrt(var / static_cast<double>(values.size()));
    return est;
}

double chi_square_tail(double stat, int dof) {
    if (dof < 1) throw Error("chi_square_tail: dof must be >= 1");
    if (stat <= 0.0) return 1.0;
    return gsl_cdf_chisq_Q(stat, static_cast<double>(dof));
}

double chi_square_stat(std::span<const double> observed_counts,
                       std::span<const double> expected_probs, double n_effective) {
    if (observed_counts.size() != expected_probs.size())
        throw Error("chi_square_stat: bin count mismatch");
    double stat = 0.0;
    for (std::size_t i = 0; i < observed_counts.size(); ++i) {
        const double expect = n_effective * expected_probs[i];
        if (expect <= 0.0) throw Error("chi_square_stat: nonpositive expected count");
        const double d = observed_counts[i] - expect;
        stat += d * d / expect;
    }
    return stat;
}

}  // namespace impulse

namespace impulse::rng {

double normal(std::uint64_t key) { return gsl_cdf_ugaussian_Pinv(uniform01(key)); }

int poisson(double mean, std::uint64_t key) {
    if (mean < 0.0) throw Error("poisson: negative mean");
    if (mean == 0.0) return 0;
    const double u = uniform01(key);
    // CDF inversion; the loop bound only guards against pathological means.
    double p = std::exp(-mean);
    double cdf = p;
    int k = 0;
    const int cap = static_cast<int>(mean + 40.0 * std::sqrt(mean) + 50.0);
    while (u > cdf && k < cap) {
        ++k;
        p *= mean / k;
        cdf += p;
    }
    return k;
}

}  // namespace impulse::rng
