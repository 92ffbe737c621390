#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "impulse/discretize.hpp"
#include "impulse/model.hpp"
#include "impulse/sde_sim.hpp"
#include "impulse/types.hpp"

namespace impulse {

// One-step Euler transition under the uncontrolled dynamics, integrated by a
// tensor Gauss-Hermite rule: from node g at time i the state moves to
// x + drift*dt + sqrt(dt)*diffusion*xi with xi over the quadrature nodes.
// Weights are shared across nodes and sum to 1; with zero diffusion all
// points coincide, i.e. the kernel degenerates to the deterministic flow.
// run_cost holds the left-endpoint quadrature f(t_i, x_g) * dt.
struct TransitionKernel {
    TimeGrid tgrid;
    SpatialGrid grid;
    int quad_order = 3;
    int points_per_node = 1;          // quad_order^dim
    std::vector<double> weights;      // points_per_node, sum 1
    std::vector<std::vector<double>> points;    // per step: [node][point][coord]
    std::vector<std::vector<double>> run_cost;  // per step: [node]

    // out[g] = run_cost[i][g] + sum_j weights[j] * next(points[i][g][j])
    void propagate(int step, const SpatialGrid& grid_next,
                   std::span<const double> next, std::span<double> out) const;
};

TransitionKernel build_kernel(const ProblemSpec& spec, const TimeGrid& tgrid,
                              const SpatialGrid& grid, int quad_order);

enum class Ordering { minmax, maxmin };

const char* to_string(Ordering o);
Ordering ordering_from_string(const std::string& s);

// Backward-induction value tables over budgets (k, l), time-grid points and
// spatial nodes, terminal slice equal to the terminal payoff bit-for-bit.
// bind/argmax record, per table entry, whether the owner's single
// intervention branch (through the solved neighbour-budget table) is active
// and which representative attains it; extraction reads only these.
struct ValueFamily {
    Ordering ordering = Ordering::minmax;
    int k_max = 0, l_max = 0;
    TimeGrid tgrid;
    SpatialGrid grid;
    ActionPartition acts_p1;
    ActionPartition acts_p2;
    int quad_order = 3;
    long long clipped = 0;

    std::vector<double> values;
    std::vector<std::int32_t> argmax_p1;
    std::vector<std::int32_t> argmin_p2;
    std::vector<std::uint8_t> bind_p1;
    std::vector<std::uint8_t> bind_p2;

    std::size_t index(int k, int l, int i, int g) const {
        return ((static_cast<std::size_t>(k) * (l_max + 1) + l) * tgrid.points() + i) *
                   grid.total() +
               g;
    }
    double value(int k, int l, int i, int g) const { return values[index(k, l, i, g)]; }
    std::span<const double> slice(int k, int l, int i) const {
        return {values.data() + index(k, l, i, 0), static_cast<std::size_t>(grid.total())};
    }
    // Multilinear in space, linear in time between grid slices.
    double eval(int k, int l, double t, std::span<const double> x) const;
};

// Ties between intervening and continuing resolve to continuing within this
// absolute-plus-relative margin.
inline double tie_tolerance(double value) { return 1e-9 * (1.0 + std::abs(value)); }

ValueFamily solve_dp(const ProblemSpec& spec, const Discretization& disc,
                     const SpatialGrid& grid, int k_max, int l_max, Ordering ordering,
                     int quad_order = 3);

// Largest absolute value difference over all shared (k, l, time, node)
// entries of two families on identical grids.
double order_gap(const ValueFamily& a, const ValueFamily& b);

FeedbackStrategy extract(const ValueFamily& fam, Player player);

struct ProbePoint {
    double t = 0.0;
    Vec x;
};

struct ConvergenceReport {
    std::vector<double> eps_list;
    std::vector<int> k_list;
    int l_fixed = 0;
    std::vector<ProbePoint> probes;
    // values[e][p]: probe value at eps_list[e] with the largest budget pair
    std::vector<std::vector<double>> eps_values;
    // increments[j][p]: v^{k_j} - v^{k_{j-1}} at the finest eps, j >= 1
    std::vector<std::vector<double>> k_values;
    std::vector<std::vector<double>> k_increments;
    // least-squares fit log inc ~ log C - q log k over positive increments
    double fit_rate = 0.0;
    double fit_const = 0.0;
    bool fit_degenerate = false;  // too few positive increments to fit
};

ConvergenceReport convergence_study(const ProblemSpec& spec, const SpatialGrid& grid,
                                    const std::vector<double>& eps_list,
                                    const std::vector<int>& k_list, int l_fixed,
                                    const std::vector<ProbePoint>& probes,
                                    Ordering ordering, int quad_order = 3);

}  // namespace impulse
