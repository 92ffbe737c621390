#include "impulse/qvi_solver.hpp"

#include <algorithm>
#include <cmath>

#include "impulse/parallel.hpp"

namespace impulse {

namespace {

void require_diagonal(const double* sigma, int d) {
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
            if (a != b && std::abs(sigma[a * d + b]) > 1e-12)
                throw Error(
                    "finite-difference scheme requires a diagonal diffusion matrix");
}

// Diagonal stencil weight of the explicit step at one (t, x): the step is
// monotone iff dt * rate <= 1.
double node_rate(const ProblemSpec& spec, const SpatialGrid& grid, double t,
                 std::span<const double> x, Vec& drift, Vec& sigma) {
    const int d = spec.dim;
    spec.drift(t, x, drift);
    spec.diffusion(t, x, sigma);
    require_diagonal(sigma.data(), d);
    double rate = 0.0;
    for (int c = 0; c < d; ++c) {
        const double h = grid.spacing(c);
        const double s = sigma[c * d + c];
        rate += s * s / (h * h) + std::abs(drift[c]) / h;
    }
    return rate;
}

}  // namespace

double max_scheme_rate(const ProblemSpec& spec, const SpatialGrid& grid,
                       int time_samples, double extra_rate) {
    if (time_samples < 1) throw Error("max_scheme_rate: need at least one time sample");
    const int d = spec.dim;
    const int total = grid.total();
    double worst = 0.0;
    Vec x(d), drift(d), sigma(static_cast<std::size_t>(d) * d);
    for (int s = 0; s <= time_samples; ++s) {
        const double t = spec.horizon * static_cast<double>(s) / time_samples;
        for (int g = 0; g < total; ++g) {
            grid.node(g, x);
            worst = std::max(worst, node_rate(spec, grid, t, x, drift, sigma));
        }
    }
    return worst + extra_rate;
}

int min_stable_steps(const ProblemSpec& spec, const SpatialGrid& grid, double cfl_safety,
                     double extra_rate) {
    if (cfl_safety <= 0.0 || cfl_safety > 1.0)
        throw Error("min_stable_steps: cfl_safety must lie in (0, 1]");
    const double rate = max_scheme_rate(spec, grid, 32, extra_rate);
    if (rate <= 0.0) return 1;
    return std::max(1, static_cast<int>(std::ceil(spec.horizon * rate / cfl_safety)));
}

namespace {

// One explicit backward step: out = v + dt * (L v + f), coefficients and the
// running cost frozen at the earlier time t.  Upwind first derivatives,
// central second derivatives, index clamping at the box boundary.
void step_explicit(const ProblemSpec& spec, const SpatialGrid& grid,
                   std::span<const double> v, double t, double dt,
                   std::span<double> out) {
    const int d = grid.dim();
    const int total = grid.total();
    int strides[3] = {1, 1, 1};
    for (int c = 1; c < d; ++c)
        strides[c] = strides[c - 1] * grid.nodes_per_axis[c - 1];

    parallel_for(total, [&](long long gl) {
        const int g = static_cast<int>(gl);
        Vec x(d), drift(d), sigma(static_cast<std::size_t>(d) * d);
        grid.node(g, x);
        spec.drift(t, x, drift);
        spec.diffusion(t, x, sigma);
        double gen = 0.0;
        int rem = g;
        for (int c = 0; c < d; ++c) {
            const int n = grid.nodes_per_axis[c];
            const int ic = rem % n;
            rem /= n;
            const int up = ic + 1 < n ? g + strides[c] : g;
            const int dn = ic > 0 ? g - strides[c] : g;
            const double h = grid.spacing(c);
            const double s = sigma[c * d + c];
            gen += 0.5 * s * s * (v[up] - 2.0 * v[g] + v[dn]) / (h * h);
            const double a = drift[c];
            gen += a >= 0.0 ? a * (v[up] - v[g]) / h : a * (v[g] - v[dn]) / h;
        }
        out[g] = v[g] + dt * (gen + spec.running_cost(t, x));
    });
}

void fill_terminal(const ProblemSpec& spec, const SpatialGrid& grid,
                   std::vector<double>& out) {
    const int total = grid.total();
    out.resize(total);
    parallel_for(total, [&](long long g) {
        Vec x(spec.dim);
        grid.node(static_cast<int>(g), x);
        out[g] = spec.terminal_value(x);
    });
}

}  // namespace

std::vector<double> apply_penalty(const ProblemSpec& spec, const ActionPartition& marks,
                                  const SpatialGrid& grid, std::span<const double> v,
                                  double t, double level) {
    if (marks.weights.empty()) throw Error("apply_penalty: partition carries no weights");
    const int d = spec.dim;
    const int total = grid.total();
    std::vector<double> out(total);
    parallel_for(total, [&](long long gl) {
        const int g = static_cast<int>(gl);
        Vec x(d), disp(d), y(d);
        grid.node(g, x);
        double acc = 0.0;
        for (int i = 0; i < marks.size(); ++i) {
            const Vec& e = marks.reps[i];
            spec.jump_p2(t, x, e, disp);
            for (int c = 0; c < d; ++c) y[c] = x[c] + disp[c];
            const double ve = SpatialField::eval_values(grid, v, y);
            const double gain = v[g] - ve - spec.cost_p2(t, x, e);
            if (gain > 0.0) acc += marks.weights[i] * gain;
        }
        out[g] = level * acc;
    });
    return out;
}

GridFunction solve_qvi(const ProblemSpec& spec, const Discretization& disc,
                       const SchemeConfig& config) {
    const SpatialGrid& grid = config.grid;
    if (grid.dim() != spec.dim) throw Error("solve_qvi: grid dimension mismatch");
    const int need = min_stable_steps(spec, grid, config.cfl_safety, 0.0);
    int steps = config.time_steps;
    if (steps == 0) steps = need;
    if (steps < need)
        throw Error("solve_qvi: " + std::to_string(steps) +
                    " steps violate the monotonicity bound (need >= " +
                    std::to_string(need) + ")");

    GridFunction sol;
    sol.t0 = 0.0;
    sol.dt = spec.horizon / steps;
    sol.grid = grid;
    sol.slices.resize(steps + 1);
    fill_terminal(spec, grid, sol.slices[steps]);

    const int total = grid.total();
    std::vector<double> w(total), cur(total), next(total);
    for (int j = steps - 1; j >= 0; --j) {
        const double t = sol.dt * j;
        step_explicit(spec, grid, sol.slices[j + 1], t, sol.dt, w);

        // Obstacles depend on the slice being produced; iterate the
        // projection to a fixed point starting from the previous slice.
        cur = sol.slices[j + 1];
        bool converged = false;
        for (int it = 0; it < config.fp_max_iter; ++it) {
            const OperatorResult lo = apply_sup_op(spec, disc.acts_p1, grid, cur, t);
            const OperatorResult hi = apply_inf_op(spec, disc.acts_p2, grid, cur, t);
            double diff = 0.0;
            for (int g = 0; g < total; ++g) {
                const double v =
                    config.ordering == Ordering::minmax
                        ? std::max(lo.value[g], std::min(hi.value[g], w[g]))
                        : std::min(hi.value[g], std::max(lo.value[g], w[g]));
                next[g] = v;
                diff = std::max(diff, std::abs(v - cur[g]));
            }
            std::swap(cur, next);
            if (diff <= config.fp_tol) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw Error("solve_qvi: obstacle fixed point did not converge");
        sol.slices[j] = cur;
    }
    return sol;
}

PenalizedFamily solve_penalized(const ProblemSpec& spec, const Discretization& disc,
                                const SchemeConfig& config, const PenaltyConfig& pen) {
    const SpatialGrid& grid = config.grid;
    if (grid.dim() != spec.dim) throw Error("solve_penalized: grid dimension mismatch");
    if (pen.levels.empty()) throw Error("solve_penalized: no penalty levels");
    for (std::size_t i = 1; i < pen.levels.size(); ++i)
        if (pen.levels[i] <= pen.levels[i - 1])
            throw Error("solve_penalized: levels must increase");
    if (pen.k_max < 0) throw Error("solve_penalized: negative budget");

    const double mass = disc.acts_p2.total_weight();
    const int top = pen.levels.back();
    // One time grid for the whole family, stable for the stiffest member, so
    // solutions compare nodewise across levels and budgets.
    const int need = min_stable_steps(spec, grid, config.cfl_safety, top * mass);
    int steps = std::max(config.time_steps, need);
    if (steps == 0) steps = need;

    PenalizedFamily fam;
    fam.levels = pen.levels;
    fam.k_max = pen.k_max;
    fam.time_steps = steps;
    fam.dt_was_refined = config.time_steps > 0 && steps > config.time_steps;

    const int total = grid.total();
    const int nlev = static_cast<int>(pen.levels.size());
    fam.members.resize(static_cast<std::size_t>(pen.k_max + 1) * nlev);

    std::vector<double> psi;
    fill_terminal(spec, grid, psi);
    const double dt = spec.horizon / steps;

    std::vector<double> stepped(total);
    for (int k = 0; k <= pen.k_max; ++k) {
        for (int li = 0; li < nlev; ++li) {
            GridFunction& sol = fam.members[static_cast<std::size_t>(k) * nlev + li];
            sol.t0 = 0.0;
            sol.dt = dt;
            sol.grid = grid;
            sol.slices.resize(steps + 1);
            sol.slices[steps] = psi;
            const double level = pen.levels[li];
            for (int j = steps - 1; j >= 0; --j) {
                const double t = dt * j;
                const std::vector<double>& prev = sol.slices[j + 1];
                step_explicit(spec, grid, prev, t, dt, stepped);
                const std::vector<double> penalty =
                    apply_penalty(spec, disc.acts_p2, grid, prev, t, level);
                std::vector<double>& out = sol.slices[j];
                out.resize(total);
                for (int g = 0; g < total; ++g) out[g] = stepped[g] - dt * penalty[g];
                if (k >= 1) {
                    // Reflection against one maximizer intervention through
                    // the (k-1, n) member at the same time.
                    const OperatorResult ref = apply_sup_op(
                        spec, disc.acts_p1, grid, fam.at(k - 1, li).slices[j], t);
                    for (int g = 0; g < total; ++g)
                        out[g] = std::max(out[g], ref.value[g]);
                }
            }
        }
    }
    return fam;
}

bool CrossCheckReport::passed() const {
    for (const CrossCheckEntry& e : entries)
        if (!e.pass) return false;
    return true;
}

CrossCheckReport cross_check(
    const std::vector<std::pair<std::string, const GridFunction*>>& solutions,
    const std::vector<ProbePoint>& probes, double tol) {
    if (solutions.size() < 2) throw Error("cross_check: need at least two solutions");
    CrossCheckReport report;
    for (std::size_t a = 0; a < solutions.size(); ++a)
        for (std::size_t b = a + 1; b < solutions.size(); ++b)
            for (const ProbePoint& pr : probes) {
                CrossCheckEntry entry;
                entry.label = solutions[a].first + " vs " + solutions[b].first;
                entry.t = pr.t;
                entry.x = pr.x;
                entry.value_a = solutions[a].second->eval(pr.t, pr.x);
                entry.value_b = solutions[b].second->eval(pr.t, pr.x);
                entry.gap = std::abs(entry.value_a - entry.value_b);
                entry.tol = tol;
                entry.pass = entry.gap <= tol;
                report.entries.push_back(std::move(entry));
            }
    return report;
}

GridFunction family_slice(const ValueFamily& fam, int k, int l) {
    if (k < 0 || k > fam.k_max || l < 0 || l > fam.l_max)
        throw Error("family_slice: budget out of range");
    GridFunction out;
    out.t0 = 0.0;
    out.dt = fam.tgrid.dt();
    out.grid = fam.grid;
    out.slices.resize(fam.tgrid.points());
    for (int i = 0; i < fam.tgrid.points(); ++i) {
        const auto s = fam.slice(k, l, i);
        out.slices[i].assign(s.begin(), s.end());
    }
    return out;
}

}  // namespace impulse
