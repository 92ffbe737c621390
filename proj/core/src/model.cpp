#include "impulse/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "impulse/rng.hpp"

namespace impulse {

namespace {

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

double frobenius(std::span<const double> m) {
    double s = 0.0;
    for (double v : m) s += v * v;
    return std::sqrt(s);
}

// Midpoint representatives of `res` equal cells per axis; the validators'
// finite stand-in for the continuous action box.
std::vector<Vec> action_grid(const ActionSet& set, int res) {
    const int m = set.dim();
    int total = 1;
    for (int a = 0; a < m; ++a) total *= res;
    std::vector<Vec> out;
    out.reserve(total);
    for (int i = 0; i < total; ++i) {
        Vec b(m);
        int rest = i;
        for (int a = 0; a < m; ++a) {
            const int cell = rest % res;
            rest /= res;
            const double width = (set.hi[a] - set.lo[a]) / res;
            b[a] = set.lo[a] + (cell + 0.5) * width;
        }
        out.push_back(std::move(b));
    }
    return out;
}

struct BoxSampler {
    const SampleBox& box;
    std::uint64_t seed;

    Vec point(std::uint64_t idx, std::uint64_t salt = 0) const {
        Vec x(box.lo.size());
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double u =
                rng::uniform01(rng::key4(seed, rng::validator, idx * 16 + salt, j));
            x[j] = box.lo[j] + u * (box.hi[j] - box.lo[j]);
        }
        return x;
    }
    double time(double horizon, std::uint64_t idx, std::uint64_t salt) const {
        return horizon *
               rng::uniform01(rng::key4(seed, rng::validator, idx * 16 + salt, 97));
    }
    Vec action(const ActionSet& set, std::uint64_t idx, std::uint64_t salt) const {
        Vec b(set.lo.size());
        for (std::size_t j = 0; j < b.size(); ++j) {
            const double u =
                rng::uniform01(rng::key4(seed, rng::validator, idx * 16 + salt, 200 + j));
            b[j] = set.lo[j] + u * (set.hi[j] - set.lo[j]);
        }
        return b;
    }
};

struct WorstCase {
    double residual = -std::numeric_limits<double>::infinity();
    Witness witness;

    void offer(double value, Witness w) {
        if (value > residual) {
            residual = value;
            witness = std::move(w);
        }
    }
};

CheckResult finish(std::string name, const WorstCase& worst, double bound, double tol) {
    CheckResult r;
    r.check = std::move(name);
    r.residual = worst.residual;
    r.witness = worst.witness;
    r.status = worst.residual <= bound + tol ? CheckStatus::pass : CheckStatus::fail;
    return r;
}

}  // namespace

Vec ProblemSpec::drift_at(double t, std::span<const double> x) const {
    Vec out(dim);
    drift(t, x, out);
    return out;
}

Vec ProblemSpec::diffusion_at(double t, std::span<const double> x) const {
    Vec out(static_cast<std::size_t>(dim) * dim);
    diffusion(t, x, out);
    return out;
}

Vec ProblemSpec::post_jump_p1(double t, std::span<const double> x,
                              std::span<const double> b) const {
    Vec out(dim);
    jump_p1(t, x, b, out);
    for (int j = 0; j < dim; ++j) out[j] += x[j];
    return out;
}

Vec ProblemSpec::post_jump_p2(double t, std::span<const double> x,
                              std::span<const double> e) const {
    Vec out(dim);
    jump_p2(t, x, e, out);
    for (int j = 0; j < dim; ++j) out[j] += x[j];
    return out;
}

bool ValidationReport::passed() const {
    return std::none_of(checks.begin(), checks.end(), [](const CheckResult& c) {
        return c.status == CheckStatus::fail;
    });
}

bool ValidationReport::has_warnings() const {
    return std::any_of(checks.begin(), checks.end(), [](const CheckResult& c) {
        return c.status == CheckStatus::warn;
    });
}

SampleBox SampleBox::cube(int dim, double half_width) {
    SampleBox box;
    box.lo.assign(dim, -half_width);
    box.hi.assign(dim, half_width);
    return box;
}

ValidationReport validate_regularity(const ProblemSpec& spec, const SampleBox& box,
                                     int samples, std::uint64_t seed) {
    if (static_cast<int>(box.lo.size()) != spec.dim)
        throw Error("validate_regularity: box dimension mismatch");
    ValidationReport report;
    report.problem = spec.name;
    BoxSampler sampler{box, seed};
    const double tol = 1e-9;

    WorstCase finite, coeff_growth, data_growth, lip_coeffs, lip_jumps, jump_bound,
        cost_floor;
    // cost_floor is a lower bound, so track the *negated* slack.
    for (int s = 0; s < samples; ++s) {
        const double t = sampler.time(spec.horizon, s, 0);
        const Vec x = sampler.point(s, 0);
        const Vec b = sampler.action(spec.actions_p1, s, 1);
        const Vec e = sampler.action(spec.actions_p2, s, 2);

        const Vec a = spec.drift_at(t, x);
        const Vec sig = spec.diffusion_at(t, x);
        const double f = spec.running_cost(t, x);
        const double psi = spec.terminal_value(x);
        const double lp1 = spec.cost_p1(t, x, b);
        const double lp2 = spec.cost_p2(t, x, e);
        const Vec y1 = spec.post_jump_p1(t, x, b);
        const Vec y2 = spec.post_jump_p2(t, x, e);

        bool ok = all_finite(a) && all_finite(sig) && all_finite(y1) && all_finite(y2) &&
                  std::isfinite(f) && std::isfinite(psi) && std::isfinite(lp1) &&
                  std::isfinite(lp2);
        finite.offer(ok ? 0.0 : 1.0, Witness{t, x, {}, b, e, "finiteness"});

        const double nx = norm2(x);
        coeff_growth.offer((norm2(a) + frobenius(sig)) / (1.0 + nx),
                           Witness{t, x, {}, {}, {}, "(|a|+|sigma|)/(1+|x|)"});

        const double growth_scale = 1.0 + std::pow(nx, spec.growth_exp);
        const double data_mag =
            std::max({std::abs(f), std::abs(psi), std::abs(lp1), std::abs(lp2)});
        data_growth.offer(data_mag / growth_scale,
                          Witness{t, x, {}, b, e, "max(|f|,|psi|,|costs|)/(1+|x|^rho)"});

        jump_bound.offer(norm2(y1) - std::max(spec.jump_bound, nx),
                         Witness{t, x, y1, b, {}, "|x+jump_p1| - max(K,|x|)"});
        jump_bound.offer(norm2(y2) - std::max(spec.jump_bound, nx),
                         Witness{t, x, y2, {}, e, "|x+jump_p2| - max(K,|x|)"});

        cost_floor.offer(-lp1, Witness{t, x, {}, b, {}, "cost_p1 floor"});
        cost_floor.offer(-lp2, Witness{t, x, {}, {}, e, "cost_p2 floor"});

        // Difference quotients against a second point at distance >= 1e-6.
        Vec x2 = sampler.point(s, 3);
        for (int retry = 4; dist2(x, x2) < 1e-6 && retry < 12; ++retry)
            x2 = sampler.point(s, retry);
        const double dx = dist2(x, x2);
        if (dx >= 1e-6) {
            const Vec a2 = spec.drift_at(t, x2);
            const Vec sig2 = spec.diffusion_at(t, x2);
            lip_coeffs.offer((dist2(a, a2) + dist2(sig, sig2)) / dx,
                             Witness{t, x, x2, {}, {}, "(|da|+|dsigma|)/|dx|"});
            Vec j1a(spec.dim), j1b(spec.dim), j2a(spec.dim), j2b(spec.dim);
            spec.jump_p1(t, x, b, j1a);
            spec.jump_p1(t, x2, b, j1b);
            spec.jump_p2(t, x, e, j2a);
            spec.jump_p2(t, x2, e, j2b);
            lip_jumps.offer(dist2(j1a, j1b) / dx,
                            Witness{t, x, x2, b, {}, "maximizer jump quotient"});
            lip_jumps.offer(dist2(j2a, j2b) / dx,
                            Witness{t, x, x2, {}, e, "minimizer jump quotient"});
        }
    }

    report.checks.push_back(finish("finite-coefficients", finite, 0.0, 0.0));
    report.checks.push_back(
        finish("growth-drift-diffusion", coeff_growth, spec.growth_const, tol));
    report.checks.push_back(finish("growth-data", data_growth, spec.growth_const, tol));
    report.checks.push_back(
        finish("lipschitz-drift-diffusion", lip_coeffs, spec.lip_coeffs, tol));
    report.checks.push_back(finish("lipschitz-jumps", lip_jumps, spec.lip_jump, tol));
    report.checks.push_back(finish("jump-bound", jump_bound, 0.0, tol));
    // residual is -min cost; passing means min cost >= floor.
    report.checks.push_back(finish("cost-floor", cost_floor, -spec.cost_floor, tol));
    return report;
}

ValidationReport check_commutativity(const ProblemSpec& spec, const SampleBox& box,
                                     int samples, std::uint64_t seed, double tol) {
    ValidationReport report;
    report.problem = spec.name;
    BoxSampler sampler{box, seed};

    WorstCase final_state, displacement, cost1, cost2;
    for (int s = 0; s < samples; ++s) {
        const double t = sampler.time(spec.horizon, s, 5);
        const Vec x = sampler.point(s, 5);
        const Vec b = sampler.action(spec.actions_p1, s, 6);
        const Vec e = sampler.action(spec.actions_p2, s, 7);

        const Vec x_p2 = spec.post_jump_p2(t, x, e);
        const Vec x_p1 = spec.post_jump_p1(t, x, b);
        const Vec both_21 = spec.post_jump_p1(t, x_p2, b);  // minimizer first
        const Vec both_12 = spec.post_jump_p2(t, x_p1, e);  // maximizer first
        final_state.offer(sup_dist(both_21, both_12),
                          Witness{t, x, both_12, b, e, "final states of both orders"});

        Vec g1(spec.dim), g2(spec.dim);
        spec.jump_p1(t, x_p2, b, g1);
        spec.jump_p2(t, x_p1, e, g2);
        displacement.offer(sup_dist(g1, g2),
                           Witness{t, x, {}, b, e, "displacements at shifted states"});

        cost1.offer(std::abs(spec.cost_p1(t, x, b) - spec.cost_p1(t, x_p2, b)),
                    Witness{t, x, x_p2, b, e, "maximizer cost under minimizer shift"});
        cost2.offer(std::abs(spec.cost_p2(t, x, e) - spec.cost_p2(t, x_p1, e)),
                    Witness{t, x, x_p1, b, e, "minimizer cost under maximizer shift"});
    }

    report.checks.push_back(finish("commutativity-final-state", final_state, 0.0, tol));
    // The same-argument displacement identity is stricter than what any of
    // the coupled constructions use; natural multiplicative jumps violate it
    // while their final states agree.  Informational only.
    CheckResult disp = finish("commutativity-displacement", displacement, 0.0, tol);
    if (disp.status == CheckStatus::fail) disp.status = CheckStatus::warn;
    report.checks.push_back(std::move(disp));
    report.checks.push_back(finish("commutativity-cost-p1", cost1, 0.0, tol));
    report.checks.push_back(finish("commutativity-cost-p2", cost2, 0.0, tol));
    return report;
}

ValidationReport check_terminal_consistency(const ProblemSpec& spec, const SampleBox& box,
                                            int samples, std::uint64_t seed, double tol,
                                            int action_resolution) {
    ValidationReport report;
    report.problem = spec.name;
    BoxSampler sampler{box, seed};
    const double T = spec.horizon;
    const auto reps_p1 = action_grid(spec.actions_p1, action_resolution);
    const auto reps_p2 = action_grid(spec.actions_p2, action_resolution);

    WorstCase sup_side, inf_side;
    for (int s = 0; s < samples; ++s) {
        const Vec x = sampler.point(s, 9);
        const double psi = spec.terminal_value(x);

        double best_gain = -std::numeric_limits<double>::infinity();
        Vec best_b;
        for (const Vec& b : reps_p1) {
            const Vec y = spec.post_jump_p1(T, x, b);
            const double gain = spec.terminal_value(y) - spec.cost_p1(T, x, b);
            if (gain > best_gain) {
                best_gain = gain;
                best_b = b;
            }
        }
        sup_side.offer(best_gain - psi,
                       Witness{T, x, {}, best_b, {}, "terminal gain of maximizer"});

        double best_drop = std::numeric_limits<double>::infinity();
        Vec best_e;
        for (const Vec& e : reps_p2) {
            const Vec y = spec.post_jump_p2(T, x, e);
            const double total = spec.terminal_value(y) + spec.cost_p2(T, x, e);
            if (total < best_drop) {
                best_drop = total;
                best_e = e;
            }
        }
        inf_side.offer(psi - best_drop,
                       Witness{T, x, {}, {}, best_e, "terminal gain of minimizer"});
    }

    report.checks.push_back(finish("terminal-no-gain-p1", sup_side, 0.0, tol));
    report.checks.push_back(finish("terminal-no-gain-p2", inf_side, 0.0, tol));
    return report;
}

CheckResult check_no_free_loop(const ProblemSpec& spec, const FreeLoopQuery& query) {
    const auto reps_p1 = action_grid(spec.actions_p1, query.action_resolution);
    const auto reps_p2 = action_grid(spec.actions_p2, query.action_resolution);
    const double h1 = 1e-3 * (1.0 + norm2(query.x0));
    const double t = query.t;

    double best = std::numeric_limits<double>::infinity();
    Witness best_witness;

    // A chain is a sequence of (owner, representative) moves applied at one
    // time.  Returns |signed cost| when the chain comes back within h1.
    auto run_chain = [&](const std::vector<int>& owners, const std::vector<int>& picks,
                         int len) {
        Vec x(query.x0);
        double signed_cost = 0.0;
        Vec actions_flat, owners_flat;
        for (int j = 0; j < len; ++j) {
            const bool p1 = owners[j] == 0;
            const Vec& act = p1 ? reps_p1[picks[j]] : reps_p2[picks[j]];
            const double cost =
                p1 ? spec.cost_p1(t, x, act) : spec.cost_p2(t, x, act);
            signed_cost += p1 ? cost : -cost;
            x = p1 ? spec.post_jump_p1(t, x, act) : spec.post_jump_p2(t, x, act);
            actions_flat.insert(actions_flat.end(), act.begin(), act.end());
            owners_flat.push_back(p1 ? 1.0 : 2.0);
        }
        if (dist2(x, query.x0) <= h1) {
            const double v = std::abs(signed_cost);
            if (v < best) {
                best = v;
                best_witness =
                    Witness{t, query.x0, x, actions_flat, owners_flat, "returning chain"};
            }
        }
    };

    // Exhaustive when the chain space is small enough, sampled otherwise.
    double space = 0.0;
    for (int len = 1; len <= query.max_cycle; ++len)
        space += std::pow(static_cast<double>(reps_p1.size() + reps_p2.size()), len);
    if (space <= static_cast<double>(query.samples)) {
        std::vector<int> owners(query.max_cycle), picks(query.max_cycle);
        for (int len = 1; len <= query.max_cycle; ++len) {
            const long long moves = reps_p1.size() + reps_p2.size();
            long long total = 1;
            for (int j = 0; j < len; ++j) total *= moves;
            for (long long code = 0; code < total; ++code) {
                long long rest = code;
                for (int j = 0; j < len; ++j) {
                    const long long m = rest % moves;
                    rest /= moves;
                    if (m < static_cast<long long>(reps_p1.size())) {
                        owners[j] = 0;
                        picks[j] = static_cast<int>(m);
                    } else {
                        owners[j] = 1;
                        picks[j] = static_cast<int>(m - reps_p1.size());
                    }
                }
                run_chain(owners, picks, len);
            }
        }
    } else {
        std::vector<int> owners(query.max_cycle), picks(query.max_cycle);
        for (int s = 0; s < query.samples; ++s) {
            const int len =
                1 + static_cast<int>(rng::uniform01(rng::key4(query.seed, rng::validator,
                                                              s, 300)) *
                                     query.max_cycle);
            for (int j = 0; j < len; ++j) {
                const double u =
                    rng::uniform01(rng::key4(query.seed, rng::validator, s, 301 + j));
                owners[j] = u < 0.5 ? 0 : 1;
                const double u2 =
                    rng::uniform01(rng::key4(query.seed, rng::validator, s, 350 + j));
                const std::size_t count =
                    owners[j] == 0 ? reps_p1.size() : reps_p2.size();
                picks[j] = std::min<int>(static_cast<int>(u2 * count),
                                         static_cast<int>(count) - 1);
            }
            run_chain(owners, picks, std::min(len, query.max_cycle));
        }
    }

    CheckResult r;
    r.check = "no-free-loop";
    r.residual = best;
    r.witness = best_witness;
    if (!std::isfinite(best)) {
        r.status = CheckStatus::pass;
        r.witness.note = "no returning chain found";
    } else if (query.h2) {
        r.status = best >= *query.h2 ? CheckStatus::pass : CheckStatus::fail;
    } else {
        r.status = CheckStatus::pass;
        r.witness.note += "; empirical minimum reported as candidate floor";
    }
    return r;
}

ProblemSpec builtin_instance(const std::string& name) {
    ProblemSpec spec;
    spec.name = name;
    if (name == "contraction-game") {
        // Two decoupled coordinates: the maximizer rescales the first, the
        // minimizer the second, both inside [-1, 1], so neither jump ever
        // grows the state.  Costs refund the squared shrinkage plus a flat
        // floor, which makes every intervention a strict loss; equilibrium
        // play never intervenes and the instance doubles as a regression
        // anchor with an uncontrolled closed form.
        spec.dim = 2;
        spec.horizon = 1.0;
        spec.drift = [](double, std::span<const double>, std::span<double> out) {
            out[0] = 0.0;
            out[1] = 0.0;
        };
        spec.diffusion = [](double, std::span<const double>, std::span<double> out) {
            out[0] = 0.2;
            out[1] = 0.0;
            out[2] = 0.0;
            out[3] = 0.2;
        };
        spec.running_cost = [](double, std::span<const double> x) {
            return x[0] * x[0] - x[1] * x[1];
        };
        spec.terminal_value = [](std::span<const double> x) {
            return x[0] * x[0] + x[1] * x[1];
        };
        spec.jump_p1 = [](double, std::span<const double> x, std::span<const double> b,
                          std::span<double> out) {
            out[0] = (b[0] - 1.0) * x[0];
            out[1] = 0.0;
        };
        spec.jump_p2 = [](double, std::span<const double> x, std::span<const double> e,
                          std::span<double> out) {
            out[0] = 0.0;
            out[1] = (e[0] - 1.0) * x[1];
        };
        spec.cost_p1 = [](double, std::span<const double> x, std::span<const double> b) {
            return 0.1 + (1.0 - b[0] * b[0]) * x[0] * x[0];
        };
        spec.cost_p2 = [](double, std::span<const double> x, std::span<const double> e) {
            return 0.1 + (1.0 - e[0] * e[0]) * x[1] * x[1];
        };
        spec.actions_p1 = ActionSet{{-1.0}, {1.0}};
        spec.actions_p2 = ActionSet{{-1.0}, {1.0}};
        spec.marks = MarkMeasure{1.0};
        spec.cost_floor = 0.1;
        spec.growth_exp = 2.0;
        spec.jump_bound = 1.0;
        spec.lip_jump = 2.0;
        spec.lip_coeffs = 0.0;
        spec.growth_const = 1.0;
        return spec;
    }
    if (name == "no-op-game") {
        // Jumps are identically zero and every intervention still costs the
        // floor, so all budget levels collapse to the uncontrolled problem
        // with value x^2 + sigma^2 (T-t) + x (T-t).
        spec.dim = 1;
        spec.horizon = 1.0;
        spec.drift = [](double, std::span<const double>, std::span<double> out) {
            out[0] = 0.0;
        };
        spec.diffusion = [](double, std::span<const double>, std::span<double> out) {
            out[0] = 0.25;
        };
        spec.running_cost = [](double, std::span<const double> x) { return x[0]; };
        spec.terminal_value = [](std::span<const double> x) { return x[0] * x[0]; };
        spec.jump_p1 = [](double, std::span<const double>, std::span<const double>,
                          std::span<double> out) { out[0] = 0.0; };
        spec.jump_p2 = [](double, std::span<const double>, std::span<const double>,
                          std::span<double> out) { out[0] = 0.0; };
        spec.cost_p1 = [](double, std::span<const double>, std::span<const double>) {
            return 0.1;
        };
        spec.cost_p2 = [](double, std::span<const double>, std::span<const double>) {
            return 0.1;
        };
        spec.actions_p1 = ActionSet{{-1.0}, {1.0}};
        spec.actions_p2 = ActionSet{{-1.0}, {1.0}};
        spec.marks = MarkMeasure{1.0};
        spec.cost_floor = 0.1;
        spec.growth_exp = 2.0;
        spec.jump_bound = 1.0;
        spec.lip_jump = 0.0;
        spec.lip_coeffs = 0.0;
        spec.growth_const = 1.0;
        return spec;
    }
    if (name == "drift-duel-1d") {
        // Both players rescale the same scalar by a factor in [0, 1].  The
        // running reward flips sign at t = 1/2, so the minimizer wants the
        // state small late and genuinely has to time a contraction; costs
        // are state-free (required for cost commutativity when the other
        // player rescales) with a flat part plus a shrinkage charge.
        spec.dim = 1;
        spec.horizon = 1.0;
        spec.drift = [](double, std::span<const double>, std::span<double> out) {
            out[0] = 0.0;
        };
        spec.diffusion = [](double, std::span<const double>, std::span<double> out) {
            out[0] = 0.3;
        };
        spec.running_cost = [](double t, std::span<const double> x) {
            return (2.0 * t - 1.0) * x[0] * x[0];
        };
        spec.terminal_value = [](std::span<const double>) { return 0.0; };
        spec.jump_p1 = [](double, std::span<const double> x, std::span<const double> b,
                          std::span<double> out) { out[0] = (b[0] - 1.0) * x[0]; };
        spec.jump_p2 = [](double, std::span<const double> x, std::span<const double> e,
                          std::span<double> out) { out[0] = (e[0] - 1.0) * x[0]; };
        spec.cost_p1 = [](double, std::span<const double>, std::span<const double> b) {
            return 0.1 + 0.25 * (1.0 - b[0]);
        };
        spec.cost_p2 = [](double, std::span<const double>, std::span<const double> e) {
            return 0.1 + 0.25 * (1.0 - e[0]);
        };
        spec.actions_p1 = ActionSet{{0.0}, {1.0}};
        spec.actions_p2 = ActionSet{{0.0}, {1.0}};
        spec.marks = MarkMeasure{1.0};
        spec.cost_floor = 0.1;
        spec.growth_exp = 2.0;
        spec.jump_bound = 1.0;
        spec.lip_jump = 1.0;
        spec.lip_coeffs = 0.0;
        spec.growth_const = 1.0;
        return spec;
    }
    throw Error("builtin_instance: unknown name '" + name + "'");
}

}  // namespace impulse
