#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "impulse/discretize.hpp"
#include "impulse/qvi_solver.hpp"
#include "impulse/sde_sim.hpp"
#include "impulse/stats.hpp"
#include "impulse/types.hpp"

namespace impulse {

// Marked Poisson draw on (t, horizon]: count from the total intensity, times
// uniform and sorted (strictly increasing after dedup), marks by cell weight.
struct PoissonSample {
    std::vector<double> times;
    std::vector<int> marks;  // partition indices
};

PoissonSample sample_poisson(const ActionPartition& marks, double total_mass, double t,
                             double horizon, std::uint64_t key);

// Nonnegative intensity-density rule nu(s, pre-jump state, mark, maximizer
// impulses used so far), bounded by `bound`.  nu == 1 recovers the base
// measure; nu == 0 suppresses marks entirely.
struct DensityControl {
    double bound = 1.0;
    std::function<double(double, std::span<const double>, int, int)> rate;

    static DensityControl constant(double value, double bound);
};

// Change-of-measure weight along one path, kept as the exponential of the
// compensator integral times the product over realized marks so a zero
// density gives an exact zero weight.
struct GirsanovWeight {
    double log_compensator = 0.0;  // integral of sum_i w_i (1 - nu(s, x, e_i)) ds
    double mark_product = 1.0;     // product of nu at realized marks
    double value() const { return std::exp(log_compensator) * mark_product; }
};

// Maximizer side of the randomized game: either a fixed impulse list or a
// budgeted rule consulted at time-grid points (argmax through a value table).
struct DualMaxRule {
    int budget = 0;
    // (time index, state, impulses used) -> partition action index
    std::function<std::optional<int>(int, std::span<const double>, int)> decide;
};

struct DualRunDiagnostics {
    double ess = 0.0;             // (sum kappa)^2 / sum kappa^2
    double ess_fraction = 0.0;    // ess / paths
    bool low_ess_warning = false; // fraction below 1e-2
    double mean_weight = 0.0;     // should be 1 in expectation
    double weight_std_error = 0.0;
    double weighted_mark_count = 0.0;  // E^nu[marks], estimated
    double weighted_mark_count_std_error = 0.0;
};

struct DualRun {
    McEstimate estimate;  // importance-sampled payoff mean
    DualRunDiagnostics diag;
};

// Importance-sampling estimate of the randomized-game payoff: simulate under
// the base mark intensity, weight each path by its change-of-measure factor.
// Marks enter the dynamics as minimizer jumps; their costs are credited at
// the pre-jump state.  The density is integrated along the simulation mesh
// by the left-endpoint rule.
DualRun evaluate_JR(const ProblemSpec& spec, const Discretization& disc, double t,
                    std::span<const double> x, const ImpulseControl& u,
                    const DensityControl& nu, long long paths, int mesh_steps,
                    std::uint64_t master_seed);

// `sampling_factor` sets the mark intensity the paths are drawn under, as a
// multiple of the base mass; the weight is the likelihood ratio of nu against
// that sampling measure, so the estimate is unchanged in expectation but the
// variance is controlled by the caller.  Factor 1 is the base measure.  The
// ratio is exact provided nu vanishes wherever the sampling intensity does,
// which holds trivially for factor > 0.
DualRun evaluate_JR_rule(const ProblemSpec& spec, const Discretization& disc, double t,
                         std::span<const double> x, const DualMaxRule& u,
                         const DensityControl& nu, long long paths, int mesh_steps,
                         std::uint64_t master_seed, double sampling_factor = 1.0);

// Bang-bang density built from a penalized family: full intensity `n` exactly
// where an immediate minimizer intervention strictly lowers the
// budget-appropriate table, zero elsewhere.  The family, problem and
// discretization must outlive the returned rule.
DensityControl nu_star(const PenalizedFamily& fam, int k, int level_index,
                       const ProblemSpec& spec, const Discretization& disc);

// Grid-time hitting rule: spend the j-th impulse where the (k-j+1)-budget
// table meets its intervention branch through the (k-j)-table, acting with
// the attaining representative.
DualMaxRule u_star(const PenalizedFamily& fam, int k, int level_index,
                   const ProblemSpec& spec, const Discretization& disc);

struct SaddleEntry {
    std::string label;
    double value = 0.0;
    double std_error = 0.0;
    double margin = 0.0;  // signed slack of the inequality it belongs to
    bool pass = true;
};

struct SaddleReport {
    double table_value = 0.0;
    DualRun center;  // both constructed controls
    std::vector<SaddleEntry> max_deviations;  // perturbed maximizer, nu_star response
    std::vector<SaddleEntry> min_deviations;  // u_star, perturbed densities
    double slack = 0.0;
    bool value_match = true;
    bool passed() const;
};

// Saddle-point test with common random numbers: the constructed pair should
// reproduce the table value, maximizer deviations should not gain, density
// deviations should not lose, all within `slack` plus Monte Carlo error.
SaddleReport saddle_check(const ProblemSpec& spec, const Discretization& disc,
                          const PenalizedFamily& fam, int k, int level_index, double t,
                          std::span<const double> x, int deviations, long long paths,
                          int mesh_steps, double slack, std::uint64_t master_seed);

// Thinning simulator for a mark process at `factor` times the base intensity.
// Used only as an independent check of the reweighted law.
PoissonSample sample_poisson_direct(const ActionPartition& marks, double total_mass,
                                    double factor, double t, double horizon,
                                    std::uint64_t key);

}  // namespace impulse
