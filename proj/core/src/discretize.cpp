#include "impulse/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "impulse/parallel.hpp"

namespace impulse {

TimeGrid TimeGrid::from_resolution(double horizon, double eps) {
    if (horizon <= 0.0) throw Error("TimeGrid: horizon must be positive");
    if (eps <= 0.0) throw Error("TimeGrid: eps must be positive");
    TimeGrid g;
    g.horizon = horizon;
    g.level = 0;
    // Smallest dyadic level whose step fits under eps; the relative slack
    // keeps eps == dt from bumping the level through rounding.
    while (g.dt() > eps * (1.0 + 1e-12)) {
        ++g.level;
        if (g.level > 30) throw Error("TimeGrid: resolution too fine");
    }
    return g;
}

int TimeGrid::project_index(double s) const {
    if (s <= 0.0) return 0;
    const double ratio = s / dt();
    int i = static_cast<int>(std::ceil(ratio - 1e-9));
    if (i < 0) i = 0;
    if (i > steps()) i = steps();
    // Grid points map to themselves even when s carries rounding noise.
    return i;
}

ActionPartition ActionPartition::build(const ActionSet& box, double eps) {
    if (eps <= 0.0) throw Error("ActionPartition: eps must be positive");
    const int m = box.dim();
    if (m == 0) throw Error("ActionPartition: empty action set");
    ActionPartition part;
    part.box = box;
    part.cells_per_axis.resize(m);
    const double per_axis = eps / std::sqrt(static_cast<double>(m));
    int total = 1;
    for (int a = 0; a < m; ++a) {
        const double width = box.hi[a] - box.lo[a];
        if (width < 0.0) throw Error("ActionPartition: box with hi < lo");
        int cells = width > 0.0 ? static_cast<int>(std::ceil(width / per_axis)) : 1;
        cells = std::max(cells, 1);
        part.cells_per_axis[a] = cells;
        if (total > 1'000'000 / cells)
            throw Error("ActionPartition: partition too large");
        total *= cells;
    }
    part.reps.reserve(total);
    for (int i = 0; i < total; ++i) {
        Vec rep(m);
        int rest = i;
        for (int a = 0; a < m; ++a) {
            const int cell = rest % part.cells_per_axis[a];
            rest /= part.cells_per_axis[a];
            const double width = (box.hi[a] - box.lo[a]) / part.cells_per_axis[a];
            rep[a] = box.lo[a] + (cell + 0.5) * width;
        }
        part.reps.push_back(std::move(rep));
    }
    return part;
}

ActionPartition ActionPartition::build_marks(const ActionSet& box,
                                             const MarkMeasure& marks, double eps) {
    if (marks.total_mass <= 0.0)
        throw Error("ActionPartition: mark measure needs positive mass");
    ActionPartition part = build(box, eps);
    // Axis-uniform cells all share the same volume, so a uniform density
    // gives every cell the same, strictly positive, weight.
    part.weights.assign(part.reps.size(),
                        marks.total_mass / static_cast<double>(part.reps.size()));
    return part;
}

ActionPartition ActionPartition::from_points(std::vector<Vec> reps,
                                             std::vector<double> weights) {
    if (reps.empty()) throw Error("ActionPartition: no representatives");
    if (!weights.empty() && weights.size() != reps.size())
        throw Error("ActionPartition: weight count mismatch");
    ActionPartition part;
    const int m = static_cast<int>(reps[0].size());
    part.box.lo = reps[0];
    part.box.hi = reps[0];
    for (const Vec& r : reps) {
        if (static_cast<int>(r.size()) != m)
            throw Error("ActionPartition: inconsistent representative dimension");
        for (int a = 0; a < m; ++a) {
            part.box.lo[a] = std::min(part.box.lo[a], r[a]);
            part.box.hi[a] = std::max(part.box.hi[a], r[a]);
        }
    }
    part.reps = std::move(reps);
    part.weights = std::move(weights);
    return part;
}

int ActionPartition::project_index(std::span<const double> e) const {
    const int m = dim();
    if (static_cast<int>(e.size()) != m)
        throw Error("ActionPartition: projection dimension mismatch");
    if (cells_per_axis.empty()) {
        // Explicit representative list: nearest point, lowest index on ties.
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < size(); ++i) {
            const double d = dist2(reps[i], e);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        return best;
    }
    int flat = 0;
    int stride = 1;
    for (int a = 0; a < m; ++a) {
        const double slack = 1e-9 * (1.0 + std::abs(box.hi[a] - box.lo[a]));
        if (e[a] < box.lo[a] - slack || e[a] > box.hi[a] + slack)
            throw Error("ActionPartition: point outside the action box");
        const double width = (box.hi[a] - box.lo[a]) / cells_per_axis[a];
        int cell = width > 0.0 ? static_cast<int>((e[a] - box.lo[a]) / width) : 0;
        cell = std::clamp(cell, 0, cells_per_axis[a] - 1);
        flat += cell * stride;
        stride *= cells_per_axis[a];
    }
    return flat;
}

double ActionPartition::total_weight() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

Discretization Discretization::build(const ProblemSpec& spec, double eps) {
    Discretization d;
    d.eps = eps;
    d.tgrid = TimeGrid::from_resolution(spec.horizon, eps);
    d.acts_p1 = ActionPartition::build(spec.actions_p1, eps);
    d.acts_p2 = ActionPartition::build_marks(spec.actions_p2, spec.marks, eps);
    return d;
}

int SpatialGrid::total() const {
    int n = 1;
    for (int c : nodes_per_axis) n *= c;
    return n;
}

void SpatialGrid::node(int flat, std::span<double> out) const {
    int rest = flat;
    for (int a = 0; a < dim(); ++a) {
        const int idx = rest % nodes_per_axis[a];
        rest /= nodes_per_axis[a];
        out[a] = lo[a] + idx * spacing(a);
    }
}

Vec SpatialGrid::node(int flat) const {
    Vec x(dim());
    node(flat, x);
    return x;
}

int SpatialGrid::nearest_index(std::span<const double> x) const {
    int flat = 0;
    int stride = 1;
    for (int a = 0; a < dim(); ++a) {
        const double h = spacing(a);
        int idx = static_cast<int>(std::floor((x[a] - lo[a]) / h + 0.5));
        idx = std::clamp(idx, 0, nodes_per_axis[a] - 1);
        flat += idx * stride;
        stride *= nodes_per_axis[a];
    }
    return flat;
}

SpatialGrid SpatialGrid::uniform(Vec lo, Vec hi, std::vector<int> nodes_per_axis) {
    if (lo.size() != hi.size() || lo.size() != nodes_per_axis.size())
        throw Error("SpatialGrid: inconsistent dimensions");
    if (lo.empty() || lo.size() > 3)
        throw Error("SpatialGrid: supported dimensions are 1..3");
    for (std::size_t a = 0; a < lo.size(); ++a) {
        if (!(lo[a] < hi[a])) throw Error("SpatialGrid: box must have volume");
        if (nodes_per_axis[a] < 2) throw Error("SpatialGrid: need >= 2 nodes per axis");
    }
    return SpatialGrid{std::move(lo), std::move(hi), std::move(nodes_per_axis)};
}

double SpatialField::eval_values(const SpatialGrid& grid, std::span<const double> values,
                                 std::span<const double> x) {
    const int d = grid.dim();
    int base[3] = {0, 0, 0};
    double frac[3] = {0.0, 0.0, 0.0};
    for (int a = 0; a < d; ++a) {
        const double h = grid.spacing(a);
        // Clamp first: constant extrapolation outside the box.
        double c = std::clamp(x[a], grid.lo[a], grid.hi[a]);
        double pos = (c - grid.lo[a]) / h;
        int cell = static_cast<int>(pos);
        cell = std::clamp(cell, 0, grid.nodes_per_axis[a] - 2);
        base[a] = cell;
        frac[a] = std::clamp(pos - cell, 0.0, 1.0);
    }
    int stride[3] = {1, 1, 1};
    for (int a = 1; a < d; ++a) stride[a] = stride[a - 1] * grid.nodes_per_axis[a - 1];

    double acc = 0.0;
    const int corners = 1 << d;
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        int flat = 0;
        for (int a = 0; a < d; ++a) {
            const bool high = (c >> a) & 1;
            w *= high ? frac[a] : 1.0 - frac[a];
            flat += (base[a] + (high ? 1 : 0)) * stride[a];
        }
        acc += w * values[flat];
    }
    // Convex combination of stencil corners: stays inside their range.
    return acc;
}

double SpatialField::eval(std::span<const double> x) const {
    return eval_values(grid, v, x);
}

double GridFunction::eval(double t, std::span<const double> x) const {
    if (slices.empty()) throw Error("GridFunction: empty");
    if (times() == 1 || dt <= 0.0)
        return SpatialField::eval_values(grid, slices[0], x);
    double pos = (t - t0) / dt;
    pos = std::clamp(pos, 0.0, static_cast<double>(times() - 1));
    int j = std::min(static_cast<int>(pos), times() - 2);
    const double theta = pos - j;
    const double a = SpatialField::eval_values(grid, slices[j], x);
    if (theta <= 0.0) return a;
    const double b = SpatialField::eval_values(grid, slices[j + 1], x);
    return (1.0 - theta) * a + theta * b;
}

namespace {

bool outside(const SpatialGrid& grid, std::span<const double> y) {
    for (int a = 0; a < grid.dim(); ++a) {
        const double slack = 1e-12 * (1.0 + std::abs(grid.hi[a] - grid.lo[a]));
        if (y[a] < grid.lo[a] - slack || y[a] > grid.hi[a] + slack) return true;
    }
    return false;
}

// One intervention layer: best over representatives of
//   v(x + jump) - cost   (maximizer)  or  v(x + jump) + cost   (minimizer).
OperatorResult intervention_pass(const ProblemSpec& spec, const ActionPartition& acts,
                                 const SpatialGrid& grid, std::span<const double> v,
                                 double t, bool maximize) {
    const int n = grid.total();
    const int d = grid.dim();
    OperatorResult out;
    out.value.resize(n);
    out.arg.assign(n, -1);
    std::vector<int> clipped(n, 0);

    parallel_for(n, [&](long long g) {
        Vec x(d), disp(d), y(d);
        grid.node(static_cast<int>(g), x);
        double best =
            maximize ? -std::numeric_limits<double>::infinity()
                     : std::numeric_limits<double>::infinity();
        int best_arg = -1;
        int clips = 0;
        for (int i = 0; i < acts.size(); ++i) {
            const Vec& act = acts.reps[i];
            if (maximize)
                spec.jump_p1(t, x, act, disp);
            else
                spec.jump_p2(t, x, act, disp);
            for (int a = 0; a < d; ++a) y[a] = x[a] + disp[a];
            if (outside(grid, y)) ++clips;
            const double vy = SpatialField::eval_values(grid, v, y);
            const double cand = maximize ? vy - spec.cost_p1(t, x, act)
                                         : vy + spec.cost_p2(t, x, act);
            if (maximize ? cand > best : cand < best) {
                best = cand;
                best_arg = i;
            }
        }
        out.value[g] = best;
        out.arg[g] = best_arg;
        clipped[g] = clips;
    });
    for (int c : clipped) out.clipped += c;
    return out;
}

}  // namespace

OperatorResult apply_sup_op(const ProblemSpec& spec, const ActionPartition& acts,
                            const SpatialGrid& grid, std::span<const double> v,
                            double t) {
    return intervention_pass(spec, acts, grid, v, t, true);
}

OperatorResult apply_inf_op(const ProblemSpec& spec, const ActionPartition& acts,
                            const SpatialGrid& grid, std::span<const double> v,
                            double t) {
    return intervention_pass(spec, acts, grid, v, t, false);
}

BudgetTables budgeted_operators(const ProblemSpec& spec, const ActionPartition& acts_p1,
                                const ActionPartition& acts_p2, const SpatialGrid& grid,
                                const std::vector<std::vector<double>>& w, int k_max,
                                int l_max, double t) {
    if (static_cast<int>(w.size()) != (k_max + 1) * (l_max + 1))
        throw Error("budgeted_operators: family size mismatch");
    const int n = grid.total();
    for (const auto& slice : w)
        if (static_cast<int>(slice.size()) != n)
            throw Error("budgeted_operators: slice size mismatch");

    BudgetTables tab;
    tab.k_max = k_max;
    tab.l_max = l_max;

    // value ^ (one more minimizer move through `deeper`), nodewise.
    auto inf_level = [&](const std::vector<double>& value,
                         const std::vector<double>& deeper) {
        OperatorResult lower = intervention_pass(spec, acts_p2, grid, deeper, t, false);
        tab.clipped += lower.clipped;
        std::vector<double> out(n);
        for (int g = 0; g < n; ++g) out[g] = std::min(value[g], lower.value[g]);
        return out;
    };
    auto sup_level = [&](const std::vector<double>& value,
                         const std::vector<double>& deeper) {
        OperatorResult upper = intervention_pass(spec, acts_p1, grid, deeper, t, true);
        tab.clipped += upper.clipped;
        std::vector<double> out(n);
        for (int g = 0; g < n; ++g) out[g] = std::max(value[g], upper.value[g]);
        return out;
    };

    // Budget recursion over one player's index with the other held fixed.
    // rows == true recurses in l across each row w^{k,.}; otherwise in k down
    // each column w^{.,l}.
    auto recurse = [&](const std::vector<std::vector<double>>& family, bool rows) {
        std::vector<std::vector<double>> out(family.size());
        if (rows) {
            for (int k = 0; k <= k_max; ++k) {
                out[tab.idx(k, 0)] = family[tab.idx(k, 0)];
                for (int l = 1; l <= l_max; ++l)
                    out[tab.idx(k, l)] =
                        inf_level(family[tab.idx(k, l)], out[tab.idx(k, l - 1)]);
            }
        } else {
            for (int l = 0; l <= l_max; ++l) {
                out[tab.idx(0, l)] = family[tab.idx(0, l)];
                for (int k = 1; k <= k_max; ++k)
                    out[tab.idx(k, l)] =
                        sup_level(family[tab.idx(k, l)], out[tab.idx(k - 1, l)]);
            }
        }
        return out;
    };

    tab.single_inf = recurse(w, true);
    tab.single_sup = recurse(w, false);
    tab.minmax = recurse(tab.single_inf, false);  // maximizer layer on top
    tab.maxmin = recurse(tab.single_sup, true);   // minimizer layer on top
    return tab;
}

}  // namespace impulse
