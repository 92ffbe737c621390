#pragma once

#include <span>
#include <string>
#include <vector>

#include "impulse/discretize.hpp"
#include "impulse/dp_solver.hpp"
#include "impulse/model.hpp"
#include "impulse/types.hpp"

namespace impulse {

// Explicit finite differences: upwind first derivatives, central second
// derivatives, constant extrapolation at the box boundary.  Only diagonal
// diffusion matrices are supported; the stencil set has no monotone
// cross-derivative member, so anything else is rejected up front.
struct SchemeConfig {
    SpatialGrid grid;
    int time_steps = 0;        // 0 = pick the largest stable step
    double cfl_safety = 0.9;   // fraction of the monotonicity bound to use
    double fp_tol = 1e-10;     // obstacle fixed-point stop, sup norm
    int fp_max_iter = 100;
    Ordering ordering = Ordering::minmax;
};

// Sum over nodes and times of the explicit-step rates (diffusion, drift,
// plus `extra_rate` for penalization); the stable dt is cfl_safety / rate.
double max_scheme_rate(const ProblemSpec& spec, const SpatialGrid& grid, int time_samples,
                       double extra_rate);
int min_stable_steps(const ProblemSpec& spec, const SpatialGrid& grid, double cfl_safety,
                     double extra_rate);

// Intensity-weighted penalty on a slice:
//   K_n v (x) = n * sum_i w_i * max(0, -(v(x + jump_p2(e_i)) + cost_p2(e_i) - v(x)))
// Nonnegative; zero wherever an immediate minimizer intervention cannot
// lower the value by more than its cost.
std::vector<double> apply_penalty(const ProblemSpec& spec, const ActionPartition& marks,
                                  const SpatialGrid& grid, std::span<const double> v,
                                  double t, double level);

// Double-obstacle backward solve.  Each step propagates the previous slice
// through the explicit generator step and then projects onto the obstacle
// band computed from the current slice, iterated to a fixed point because the
// obstacles depend on the slice being produced.  The two variants solve the
// two complementarity orderings; they agree wherever obstacles do not cross.
GridFunction solve_qvi(const ProblemSpec& spec, const Discretization& disc,
                       const SchemeConfig& config);

struct PenaltyConfig {
    std::vector<int> levels;  // penalty intensities n, increasing
    int k_max = 0;            // maximizer budgets 0..k_max
};

// Family of penalized solutions indexed by (maximizer budget k, level n), all
// on one time grid sized for the most restrictive level so members compare
// nodewise.  k = 0 is the pure penalized equation; k >= 1 adds the
// reflection v >= sup-op applied to the (k-1, n) solution at the same time.
struct PenalizedFamily {
    std::vector<int> levels;
    int k_max = 0;
    int time_steps = 0;
    bool dt_was_refined = false;  // requested step violated the penalty CFL
    std::vector<GridFunction> members;  // [k * levels.size() + level_index]

    const GridFunction& at(int k, int level_index) const {
        return members[static_cast<std::size_t>(k) * levels.size() + level_index];
    }
};

PenalizedFamily solve_penalized(const ProblemSpec& spec, const Discretization& disc,
                                const SchemeConfig& config, const PenaltyConfig& pen);

struct CrossCheckEntry {
    std::string label;
    double t;
    Vec x;
    double value_a = 0.0;
    double value_b = 0.0;
    double gap = 0.0;
    double tol = 0.0;
    bool pass = true;
};

struct CrossCheckReport {
    std::vector<CrossCheckEntry> entries;
    bool passed() const;
};

// Pairwise probe comparison of independently computed value functions, with
// the tolerance supplied by the caller (typically a Cauchy self-refinement
// estimate).
CrossCheckReport cross_check(const std::vector<std::pair<std::string,
                                                         const GridFunction*>>& solutions,
                             const std::vector<ProbePoint>& probes, double tol);

// Snapshot of a value family as a GridFunction at fixed budgets.
GridFunction family_slice(const ValueFamily& fam, int k, int l);

}  // namespace impulse
