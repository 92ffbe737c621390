#pragma once

#include <span>
#include <vector>

#include "impulse/model.hpp"
#include "impulse/types.hpp"

namespace impulse {

// Dyadic grid on [0, horizon]: dt = horizon / 2^level, points i*dt for
// i = 0..2^level.  from_resolution picks the smallest level with dt <= eps.
struct TimeGrid {
    double horizon = 1.0;
    int level = 0;

    int steps() const { return 1 << level; }
    int points() const { return steps() + 1; }
    double dt() const { return horizon / steps(); }
    double time(int i) const { return i * dt(); }

    static TimeGrid from_resolution(double horizon, double eps);

    // Smallest grid index i with time(i) >= s (clamped to the grid); exact on
    // grid points despite rounding in s.
    int project_index(double s) const;
    double project(double s) const { return time(project_index(s)); }
};

// Tensor partition of an action box into cells of diameter <= eps with
// midpoint representatives (interior whenever the cell has volume).  Built as
// a mark partition it also carries per-cell weights, uniform in cell volume
// and summing to the measure's total mass, hence strictly positive.
struct ActionPartition {
    ActionSet box;
    std::vector<int> cells_per_axis;
    std::vector<Vec> reps;        // row-major over the axis cells
    std::vector<double> weights;  // empty unless built as a mark partition

    int size() const { return static_cast<int>(reps.size()); }
    int dim() const { return box.dim(); }

    static ActionPartition build(const ActionSet& box, double eps);
    static ActionPartition build_marks(const ActionSet& box, const MarkMeasure& marks,
                                       double eps);
    // Explicit representatives (tests, hand-picked action menus).  Projection
    // maps to the nearest representative.
    static ActionPartition from_points(std::vector<Vec> reps,
                                       std::vector<double> weights = {});

    // Index of the cell containing e; throws if e is outside the box beyond
    // rounding slack.
    int project_index(std::span<const double> e) const;
    const Vec& project(std::span<const double> e) const { return reps[project_index(e)]; }

    double total_weight() const;
};

// One resolution parameter drives the time grid and both action partitions.
struct Discretization {
    double eps = 0.0;
    TimeGrid tgrid;
    ActionPartition acts_p1;
    ActionPartition acts_p2;  // carries the mark weights

    static Discretization build(const ProblemSpec& spec, double eps);
};

struct SpatialGrid {
    Vec lo;
    Vec hi;
    std::vector<int> nodes_per_axis;  // >= 2 per axis

    int dim() const { return static_cast<int>(lo.size()); }
    int total() const;
    double spacing(int axis) const {
        return (hi[axis] - lo[axis]) / (nodes_per_axis[axis] - 1);
    }
    void node(int flat, std::span<double> out) const;
    Vec node(int flat) const;
    int nearest_index(std::span<const double> x) const;

    static SpatialGrid uniform(Vec lo, Vec hi, std::vector<int> nodes_per_axis);
};

// Values on a spatial grid with multilinear interpolation.  Evaluation clamps
// coordinates to the box first (constant extrapolation), and interpolated
// values never leave the min/max of the stencil corners.
struct SpatialField {
    SpatialGrid grid;
    std::vector<double> v;

    double eval(std::span<const double> x) const;
    static double eval_values(const SpatialGrid& grid, std::span<const double> values,
                              std::span<const double> x);
};

// Time-indexed stack of slices on a shared spatial grid, linear interpolation
// in time between slices.
struct GridFunction {
    double t0 = 0.0;
    double dt = 0.0;
    SpatialGrid grid;
    std::vector<std::vector<double>> slices;

    int times() const { return static_cast<int>(slices.size()); }
    double time(int j) const { return t0 + j * dt; }
    double eval(double t, std::span<const double> x) const;
};

// One application of an intervention operator over all grid nodes.
// value[g] = best over the partition of  v(x_g + jump) -/+ cost,
// arg[g] the attaining representative.  Jump images outside the box are
// clamped by evaluation; `clipped` counts them so callers can log.
struct OperatorResult {
    std::vector<double> value;
    std::vector<int> arg;
    long long clipped = 0;
};

OperatorResult apply_sup_op(const ProblemSpec& spec, const ActionPartition& acts,
                            const SpatialGrid& grid, std::span<const double> v, double t);
OperatorResult apply_inf_op(const ProblemSpec& spec, const ActionPartition& acts,
                            const SpatialGrid& grid, std::span<const double> v, double t);

// Budget-recursive intervention operators applied to a family w indexed by
// remaining budgets (k, l), all evaluated at one time over one grid.  The
// recursions are
//   inf^0 w^{k,.} = w^{k,0},
//   inf^l w^{k,.} = w^{k,l} ^ min_e { inf^{l-1} w^{k,.}(x + jump_p2(e)) + cost_p2(e) }
// and the mirror image for sup^k with the maximizer's jump and cost, and the
// compositions chain them in either order.  Budget monotonicity of the input
// family is preserved nodewise.
struct BudgetTables {
    int k_max = 0, l_max = 0;
    // All indexed [k * (l_max+1) + l] -> per-node values.
    std::vector<std::vector<double>> single_sup;  // sup^k applied to the column w^{.,l}
    std::vector<std::vector<double>> single_inf;  // inf^l applied to the row w^{k,.}
    std::vector<std::vector<double>> minmax;      // sup^k of (inf w)^{.,l}
    std::vector<std::vector<double>> maxmin;      // inf^l of (sup w)^{k,.}
    long long clipped = 0;

    int idx(int k, int l) const { return k * (l_max + 1) + l; }
};

BudgetTables budgeted_operators(const ProblemSpec& spec, const ActionPartition& acts_p1,
                                const ActionPartition& acts_p2, const SpatialGrid& grid,
                                const std::vector<std::vector<double>>& w, int k_max,
                                int l_max, double t);

}  // namespace impulse
