#include "impulse/dp_solver.hpp"

#include <algorithm>
#include <cmath>

#include "impulse/parallel.hpp"
#include "impulse/quadrature.hpp"

namespace impulse {

const char* to_string(Ordering o) {
    return o == Ordering::minmax ? "minmax" : "maxmin";
}

Ordering ordering_from_string(const std::string& s) {
    if (s == "minmax") return Ordering::minmax;
    if (s == "maxmin") return Ordering::maxmin;
    throw Error("unknown ordering '" + s + "' (expected minmax or maxmin)");
}

TransitionKernel build_kernel(const ProblemSpec& spec, const TimeGrid& tgrid,
                              const SpatialGrid& grid, int quad_order) {
    if (quad_order < 1) throw Error("build_kernel: quadrature order must be >= 1");
    TransitionKernel kernel;
    kernel.tgrid = tgrid;
    kernel.grid = grid;
    kernel.quad_order = quad_order;

    const int d = spec.dim;
    const GaussHermite gh = gauss_hermite(quad_order);
    int ppn = 1;
    for (int c = 0; c < d; ++c) ppn *= quad_order;
    kernel.points_per_node = ppn;

    kernel.weights.assign(ppn, 1.0);
    for (int j = 0; j < ppn; ++j) {
        int rem = j;
        for (int c = 0; c < d; ++c) {
            kernel.weights[j] *= gh.weights[rem % quad_order];
            rem /= quad_order;
        }
    }

    const int total = grid.total();
    const double dt = tgrid.dt();
    const double sq = std::sqrt(dt);
    kernel.points.resize(tgrid.steps());
    kernel.run_cost.resize(tgrid.steps());
    for (int i = 0; i < tgrid.steps(); ++i) {
        const double t = tgrid.time(i);
        auto& pts = kernel.points[i];
        auto& rc = kernel.run_cost[i];
        pts.resize(static_cast<std::size_t>(total) * ppn * d);
        rc.resize(total);
        parallel_for(total, [&](long long g) {
            Vec x(d), drift(d), sigma(static_cast<std::size_t>(d) * d);
            grid.node(static_cast<int>(g), x);
            spec.drift(t, x, drift);
            spec.diffusion(t, x, sigma);
            rc[g] = spec.running_cost(t, x) * dt;
            double* base = pts.data() + static_cast<std::size_t>(g) * ppn * d;
            for (int j = 0; j < ppn; ++j) {
                int rem = j;
                double* p = base + static_cast<std::size_t>(j) * d;
                for (int c = 0; c < d; ++c) p[c] = x[c] + drift[c] * dt;
                for (int c = 0; c < d; ++c) {
                    const double z = gh.nodes[rem % quad_order];
                    rem /= quad_order;
                    for (int a = 0; a < d; ++a) p[a] += sq * sigma[a * d + c] * z;
                }
            }
        });
    }
    return kernel;
}

void TransitionKernel::propagate(int step, const SpatialGrid& grid_next,
                                 std::span<const double> next,
                                 std::span<double> out) const {
    if (step < 0 || step >= tgrid.steps()) throw Error("propagate: step out of range");
    const int total = grid.total();
    if (static_cast<int>(out.size()) != total)
        throw Error("propagate: output size mismatch");
    const int d = grid.dim();
    const auto& pts = points[step];
    const auto& rc = run_cost[step];
    parallel_for(total, [&](long long g) {
        const double* base = pts.data() + static_cast<std::size_t>(g) * points_per_node * d;
        double acc = 0.0;
        for (int j = 0; j < points_per_node; ++j) {
            const std::span<const double> p(base + static_cast<std::size_t>(j) * d,
                                            static_cast<std::size_t>(d));
            acc += weights[j] * SpatialField::eval_values(grid_next, next, p);
        }
        out[g] = rc[g] + acc;
    });
}

double ValueFamily::eval(int k, int l, double t, std::span<const double> x) const {
    if (k < 0 || k > k_max || l < 0 || l > l_max)
        throw Error("ValueFamily::eval: budget out of range");
    const double dt = tgrid.dt();
    double pos = t / dt;
    pos = std::clamp(pos, 0.0, static_cast<double>(tgrid.steps()));
    int i0 = static_cast<int>(pos);
    if (i0 >= tgrid.steps()) i0 = tgrid.steps() - 1;
    const double frac = pos - i0;
    const double lo = SpatialField::eval_values(grid, slice(k, l, i0), x);
    const double hi = SpatialField::eval_values(grid, slice(k, l, i0 + 1), x);
    return (1.0 - frac) * lo + frac * hi;
}

ValueFamily solve_dp(const ProblemSpec& spec, const Discretization& disc,
                     const SpatialGrid& grid, int k_max, int l_max, Ordering ordering,
                     int quad_order) {
    if (k_max < 0 || l_max < 0) throw Error("solve_dp: budgets must be >= 0");
    if (grid.dim() != spec.dim) throw Error("solve_dp: grid dimension mismatch");

    ValueFamily fam;
    fam.ordering = ordering;
    fam.k_max = k_max;
    fam.l_max = l_max;
    fam.tgrid = disc.tgrid;
    fam.grid = grid;
    fam.acts_p1 = disc.acts_p1;
    fam.acts_p2 = disc.acts_p2;
    fam.quad_order = quad_order;

    const int total = grid.total();
    const int points = fam.tgrid.points();
    const int tables = (k_max + 1) * (l_max + 1);
    const std::size_t size =
        static_cast<std::size_t>(tables) * points * total;
    fam.values.assign(size, 0.0);
    fam.argmax_p1.assign(size, -1);
    fam.argmin_p2.assign(size, -1);
    fam.bind_p1.assign(size, 0);
    fam.bind_p2.assign(size, 0);

    const TransitionKernel kernel = build_kernel(spec, fam.tgrid, grid, quad_order);

    // Terminal slice: the terminal payoff itself, identical across budgets.
    {
        std::vector<double> psi(total);
        parallel_for(total, [&](long long g) {
            Vec x(spec.dim);
            grid.node(static_cast<int>(g), x);
            psi[g] = spec.terminal_value(x);
        });
        const int last = points - 1;
        for (int k = 0; k <= k_max; ++k)
            for (int l = 0; l <= l_max; ++l) {
                double* dst = fam.values.data() + fam.index(k, l, last, 0);
                std::copy(psi.begin(), psi.end(), dst);
            }
    }

    std::vector<std::vector<double>> w(tables, std::vector<double>(total));
    for (int i = fam.tgrid.steps() - 1; i >= 0; --i) {
        const double t = fam.tgrid.time(i);
        for (int k = 0; k <= k_max; ++k)
            for (int l = 0; l <= l_max; ++l)
                kernel.propagate(i, grid, fam.slice(k, l, i + 1),
                                 w[k * (l_max + 1) + l]);

        const BudgetTables tabs = budgeted_operators(spec, fam.acts_p1, fam.acts_p2,
                                                     grid, w, k_max, l_max, t);
        fam.clipped += tabs.clipped;
        const auto& composed =
            ordering == Ordering::minmax ? tabs.minmax : tabs.maxmin;
        for (int k = 0; k <= k_max; ++k)
            for (int l = 0; l <= l_max; ++l) {
                const auto& src = composed[tabs.idx(k, l)];
                std::copy(src.begin(), src.end(),
                          fam.values.data() + fam.index(k, l, i, 0));
            }

        // Binding flags compare each owner's intervention branch against the
        // value of not intervening; ties resolve to continuing.
        for (int k = 0; k <= k_max; ++k)
            for (int l = 0; l <= l_max; ++l) {
                if (k >= 1) {
                    const OperatorResult sup = apply_sup_op(
                        spec, fam.acts_p1, grid, fam.slice(k - 1, l, i), t);
                    const std::vector<double>& rest =
                        ordering == Ordering::minmax ? tabs.single_inf[tabs.idx(k, l)]
                                                     : w[tabs.idx(k, l)];
                    for (int g = 0; g < total; ++g) {
                        const std::size_t at = fam.index(k, l, i, g);
                        fam.argmax_p1[at] = sup.arg[g];
                        fam.bind_p1[at] =
                            sup.value[g] > rest[g] + tie_tolerance(rest[g]) ? 1 : 0;
                    }
                }
                if (l >= 1) {
                    const OperatorResult inf = apply_inf_op(
                        spec, fam.acts_p2, grid,
                        ordering == Ordering::minmax
                            ? std::span<const double>(tabs.single_inf[tabs.idx(k, l - 1)])
                            : std::span<const double>(fam.slice(k, l - 1, i)),
                        t);
                    const std::vector<double>& rest =
                        ordering == Ordering::minmax ? w[tabs.idx(k, l)]
                                                     : tabs.single_sup[tabs.idx(k, l)];
                    for (int g = 0; g < total; ++g) {
                        const std::size_t at = fam.index(k, l, i, g);
                        fam.argmin_p2[at] = inf.arg[g];
                        fam.bind_p2[at] =
                            inf.value[g] < rest[g] - tie_tolerance(rest[g]) ? 1 : 0;
                    }
                }
            }
    }
    return fam;
}

double order_gap(const ValueFamily& a, const ValueFamily& b) {
    if (a.k_max != b.k_max || a.l_max != b.l_max ||
        a.tgrid.level != b.tgrid.level || a.grid.total() != b.grid.total())
        throw Error("order_gap: families are not on matching grids");
    double gap = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        gap = std::max(gap, std::abs(a.values[i] - b.values[i]));
    return gap;
}

FeedbackStrategy extract(const ValueFamily& fam, Player player) {
    FeedbackStrategy strat;
    strat.player = player;
    strat.k_max = fam.k_max;
    strat.l_max = fam.l_max;
    strat.tgrid = fam.tgrid;
    strat.grid = fam.grid;
    strat.actions = player == Player::p1 ? fam.acts_p1 : fam.acts_p2;
    strat.act.assign(fam.values.size(), -1);
    const auto& bind = player == Player::p1 ? fam.bind_p1 : fam.bind_p2;
    const auto& arg = player == Player::p1 ? fam.argmax_p1 : fam.argmin_p2;
    for (std::size_t i = 0; i < fam.values.size(); ++i)
        if (bind[i]) strat.act[i] = arg[i];
    return strat;
}

ConvergenceReport convergence_study(const ProblemSpec& spec, const SpatialGrid& grid,
                                    const std::vector<double>& eps_list,
                                    const std::vector<int>& k_list, int l_fixed,
                                    const std::vector<ProbePoint>& probes,
                                    Ordering ordering, int quad_order) {
    if (eps_list.empty() || k_list.empty() || probes.empty())
        throw Error("convergence_study: empty inputs");
    ConvergenceReport report;
    report.eps_list = eps_list;
    report.k_list = k_list;
    report.l_fixed = l_fixed;
    report.probes = probes;

    const int k_top = *std::max_element(k_list.begin(), k_list.end());
    std::size_t finest = 0;
    for (std::size_t e = 1; e < eps_list.size(); ++e)
        if (eps_list[e] < eps_list[finest]) finest = e;

    for (std::size_t e = 0; e < eps_list.size(); ++e) {
        const Discretization disc = Discretization::build(spec, eps_list[e]);
        const ValueFamily fam =
            solve_dp(spec, disc, grid, k_top, l_fixed, ordering, quad_order);
        std::vector<double> at_top;
        at_top.reserve(probes.size());
        for (const ProbePoint& pr : probes)
            at_top.push_back(fam.eval(k_top, l_fixed, pr.t, pr.x));
        report.eps_values.push_back(std::move(at_top));

        if (e == finest) {
            for (int k : k_list) {
                std::vector<double> row;
                row.reserve(probes.size());
                for (const ProbePoint& pr : probes)
                    row.push_back(fam.eval(k, l_fixed, pr.t, pr.x));
                report.k_values.push_back(std::move(row));
            }
        }
    }

    report.k_increments.resize(report.k_values.size());
    std::vector<double> log_k, log_inc;
    for (std::size_t j = 1; j < report.k_values.size(); ++j) {
        std::vector<double> inc(probes.size());
        double worst = 0.0;
        for (std::size_t p = 0; p < probes.size(); ++p) {
            inc[p] = std::abs(report.k_values[j][p] - report.k_values[j - 1][p]);
            worst = std::max(worst, inc[p]);
        }
        report.k_increments[j] = std::move(inc);
        if (worst > 1e-14) {
            log_k.push_back(std::log(static_cast<double>(k_list[j])));
            log_inc.push_back(std::log(worst));
        }
    }

    if (log_k.size() < 2) {
        report.fit_degenerate = true;
    } else {
        // Least squares for log inc = log C - q log k.
        const std::size_t n = log_k.size();
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sx += log_k[i];
            sy += log_inc[i];
            sxx += log_k[i] * log_k[i];
            sxy += log_k[i] * log_inc[i];
        }
        const double denom = n * sxx - sx * sx;
        if (std::abs(denom) < 1e-12) {
            report.fit_degenerate = true;
        } else {
            const double slope = (n * sxy - sx * sy) / denom;
            report.fit_rate = -slope;
            report.fit_const = std::exp((sy - slope * sx) / n);
        }
    }
    return report;
}

}  // namespace impulse
