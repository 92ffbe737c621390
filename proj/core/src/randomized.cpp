#include "impulse/randomized.hpp"

#include <algorithm>
#include <cmath>

#include "impulse/parallel.hpp"
#include "impulse/rng.hpp"

namespace impulse {

namespace {

int draw_mark(const ActionPartition& marks, double u01) {
    const double target = u01 * marks.total_weight();
    double acc = 0.0;
    for (int i = 0; i < marks.size(); ++i) {
        acc += marks.weights[i];
        if (acc >= target) return i;
    }
    return marks.size() - 1;
}

void sort_strict(std::vector<double>& times, double horizon) {
    std::sort(times.begin(), times.end());
    // Exact ties have probability zero; nudging keeps them strictly
    // increasing without touching the law.
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] <= times[i - 1])
            times[i] = std::nextafter(times[i - 1], horizon);
}

}  // namespace

PoissonSample sample_poisson(const ActionPartition& marks, double total_mass, double t,
                             double horizon, std::uint64_t key) {
    if (marks.weights.empty()) throw Error("sample_poisson: partition carries no weights");
    if (total_mass < 0.0) throw Error("sample_poisson: negative intensity");
    PoissonSample out;
    const double span = horizon - t;
    if (span <= 0.0 || total_mass == 0.0) return out;
    const int n = rng::poisson(total_mass * span, rng::key4(key, rng::poisson_count, 0));
    out.times.resize(n);
    out.marks.resize(n);
    for (int i = 0; i < n; ++i)
        out.times[i] = t + span * rng::uniform01(rng::key4(key, rng::poisson_time, i));
    sort_strict(out.times, horizon);
    for (int i = 0; i < n; ++i)
        out.marks[i] = draw_mark(marks, rng::uniform01(rng::key4(key, rng::poisson_mark, i)));
    return out;
}

PoissonSample sample_poisson_direct(const ActionPartition& marks, double total_mass,
                                    double factor, double t, double horizon,
                                    std::uint64_t key) {
    if (marks.weights.empty())
        throw Error("sample_poisson_direct: partition carries no weights");
    if (factor < 0.0) throw Error("sample_poisson_direct: negative factor");
    PoissonSample out;
    const double span = horizon - t;
    const double target_rate = factor * total_mass;
    if (span <= 0.0 || target_rate == 0.0) return out;

    // Candidates at twice the target rate, thinned by half: a mechanism
    // deliberately different from plain inversion sampling.
    const double envelope = 2.0 * target_rate;
    const int candidates =
        rng::poisson(envelope * span, rng::key4(key, rng::poisson_count, 1));
    for (int i = 0; i < candidates; ++i) {
        if (rng::uniform01(rng::key4(key, rng::poisson_time, i, 7)) >= 0.5) continue;
        out.times.push_back(t + span *
                                    rng::uniform01(rng::key4(key, rng::poisson_time, i, 9)));
    }
    sort_strict(out.times, horizon);
    out.marks.resize(out.times.size());
    for (std::size_t i = 0; i < out.times.size(); ++i)
        out.marks[i] =
            draw_mark(marks, rng::uniform01(rng::key4(key, rng::poisson_mark, i, 7)));
    return out;
}

DensityControl DensityControl::constant(double value, double bound) {
    if (value < 0.0) throw Error("DensityControl: negative density");
    DensityControl nu;
    nu.bound = std::max(bound, value);
    nu.rate = [value](double, std::span<const double>, int, int) { return value; };
    return nu;
}

namespace {

struct DualOutcome {
    double payoff = 0.0;
    GirsanovWeight weight;
    int mark_count = 0;
};

// Fixed maximizer control: delegate the dynamics to the shared path engine so
// that a unit density reproduces evaluate_J bit for bit, then accumulate the
// weight from the stored path.
DualOutcome run_fixed(const ProblemSpec& spec, const Discretization& disc, double t,
                      std::span<const double> x, const ImpulseControl& u,
                      const DensityControl& nu, int mesh_steps, std::uint64_t path_key) {
    const ActionPartition& marks = disc.acts_p2;
    const PoissonSample ps =
        sample_poisson(marks, marks.total_weight(), t, spec.horizon, path_key);

    ImpulseControl alpha;
    alpha.owner = Player::p2;
    alpha.entries.reserve(ps.times.size());
    for (std::size_t i = 0; i < ps.times.size(); ++i)
        alpha.entries.push_back(
            ImpulseEntry{ps.times[i], ps.marks[i], marks.reps[ps.marks[i]]});

    const CoupledControl control = couple(u, alpha);
    const PathSample path = simulate_path(spec, t, x, control, mesh_steps, path_key);

    DualOutcome out;
    out.payoff = path.payoff(spec);

    // Entries before the horizon are applied one-for-one and in order, so the
    // coupled list gives each recorded jump its partition index.
    std::vector<int> applied_marks;
    applied_marks.reserve(path.jumps.size());
    for (const CoupledEntry& e : control)
        if (e.time < spec.horizon)
            applied_marks.push_back(e.owner == Player::p2 ? e.action_index : -1);

    const int points = static_cast<int>(path.times.size());
    std::size_t jptr = 0;
    int used = 0;
    for (int i = 0; i < points; ++i) {
        const double s = path.times[i];
        while (jptr < path.jumps.size() && path.jumps[jptr].time <= s) {
            const PathSample::Jump& jump = path.jumps[jptr];
            if (jump.owner == Player::p1) {
                ++used;
            } else {
                out.weight.mark_product *=
                    nu.rate(jump.time, jump.pre_state, applied_marks[jptr], used);
                ++out.mark_count;
            }
            ++jptr;
        }
        if (i + 1 == points) break;
        const double dt = path.times[i + 1] - s;
        const auto state = path.state_at(i);
        double comp = 0.0;
        for (int m = 0; m < marks.size(); ++m)
            comp += marks.weights[m] * (1.0 - nu.rate(s, state, m, used));
        out.weight.log_compensator += dt * comp;
    }
    return out;
}

// Rule-driven maximizer: decisions at time-grid points, so the mesh carries
// the base points, the grid times and the realized mark times.  Marks are
// drawn at `sampling_factor` times the base mass and the weight is the
// likelihood ratio of nu against that sampling intensity; factor 1 keeps the
// base-measure arithmetic bit for bit.
DualOutcome run_rule(const ProblemSpec& spec, const Discretization& disc, double t,
                     std::span<const double> x, const DualMaxRule& u,
                     const DensityControl& nu, int mesh_steps, std::uint64_t path_key,
                     double sampling_factor) {
    const ActionPartition& marks = disc.acts_p2;
    const TimeGrid& tgrid = disc.tgrid;
    const double horizon = spec.horizon;
    const PoissonSample ps = sample_poisson(marks, sampling_factor * marks.total_weight(),
                                            t, horizon, path_key);

    // Merge with tolerance; mark times take precedence over grid times over
    // base points so special times stay exact mesh values.
    struct Cand {
        double s;
        int prio;
    };
    std::vector<Cand> cand;
    const double span = horizon - t;
    for (int i = 0; i <= mesh_steps; ++i)
        cand.push_back({t + span * static_cast<double>(i) / mesh_steps, 0});
    for (int i = 0; i <= tgrid.steps(); ++i) {
        const double s = tgrid.time(i);
        if (s >= t - 1e-12 && s <= horizon + 1e-12) cand.push_back({s, 1});
    }
    for (double s : ps.times) cand.push_back({s, 2});
    std::sort(cand.begin(), cand.end(), [](const Cand& a, const Cand& b) {
        return a.s < b.s || (a.s == b.s && a.prio > b.prio);
    });
    const double tol = 1e-12 * std::max(1.0, span);
    std::vector<double> mesh;
    mesh.reserve(cand.size());
    for (const Cand& c : cand) {
        if (!mesh.empty() && c.s - mesh.back() <= tol) continue;
        mesh.push_back(c.s);
    }
    mesh.back() = horizon;

    const int d = spec.dim;
    Vec cur(x.begin(), x.end());
    Vec drift_buf(d), sigma_buf(static_cast<std::size_t>(d) * d), disp(d), next(d);
    double run_cost = 0.0, cost1 = 0.0, cost2 = 0.0;
    int used = 0;
    std::size_t mark_at = 0;
    DualOutcome out;

    const int points = static_cast<int>(mesh.size());
    for (int i = 0; i < points; ++i) {
        const double s = mesh[i];
        const int gi = tgrid.project_index(s);
        if (std::abs(tgrid.time(gi) - s) <= 1e-9 && gi < tgrid.steps()) {
            while (used < u.budget) {
                const auto a = u.decide(gi, cur, used);
                if (!a) break;
                const Vec& act = disc.acts_p1.reps[*a];
                cost1 += spec.cost_p1(s, cur, act);
                spec.jump_p1(s, cur, act, disp);
                for (int c = 0; c < d; ++c) cur[c] += disp[c];
                ++used;
            }
        }
        while (mark_at < ps.times.size() && ps.times[mark_at] <= s + tol) {
            const int m = ps.marks[mark_at];
            const Vec& e = marks.reps[m];
            out.weight.mark_product *= nu.rate(s, cur, m, used) / sampling_factor;
            cost2 += spec.cost_p2(s, cur, e);
            spec.jump_p2(s, cur, e, disp);
            for (int c = 0; c < d; ++c) cur[c] += disp[c];
            ++out.mark_count;
            ++mark_at;
        }
        if (i + 1 == points) break;
        const double dt = mesh[i + 1] - s;
        run_cost += spec.running_cost(s, cur) * dt;
        double comp = 0.0;
        for (int m = 0; m < marks.size(); ++m)
            comp += marks.weights[m] * (sampling_factor - nu.rate(s, cur, m, used));
        out.weight.log_compensator += dt * comp;

        spec.drift(s, cur, drift_buf);
        spec.diffusion(s, cur, sigma_buf);
        const double sq = std::sqrt(dt);
        double xi[3];
        for (int j = 0; j < d; ++j)
            xi[j] = rng::normal(rng::key4(path_key, rng::brownian, i, j));
        for (int a = 0; a < d; ++a) {
            double noise = 0.0;
            for (int b = 0; b < d; ++b) noise += sigma_buf[a * d + b] * xi[b];
            next[a] = cur[a] + drift_buf[a] * dt + sq * noise;
        }
        std::swap(cur, next);
    }
    out.payoff = spec.terminal_value(cur) + run_cost - cost1 + cost2;
    return out;
}

DualRun collect(const std::vector<DualOutcome>& outcomes, std::uint64_t master_seed,
                long long paths) {
    std::vector<double> weighted(paths), kappa(paths), wcount(paths);
    for (long long i = 0; i < paths; ++i) {
        const double w = outcomes[i].weight.value();
        kappa[i] = w;
        weighted[i] = w * outcomes[i].payoff;
        wcount[i] = w * outcomes[i].mark_count;
    }
    DualRun run;
    run.estimate = summarize(weighted, master_seed);
    const McEstimate kap = summarize(kappa, master_seed);
    run.diag.mean_weight = kap.mean;
    run.diag.weight_std_error = kap.std_error;
    double sum = 0.0, sum2 = 0.0;
    for (double w : kappa) {
        sum += w;
        sum2 += w * w;
    }
    run.diag.ess = sum2 > 0.0 ? sum * sum / sum2 : 0.0;
    run.diag.ess_fraction = run.diag.ess / static_cast<double>(paths);
    run.diag.low_ess_warning = run.diag.ess_fraction < 1e-2;
    const McEstimate cnt = summarize(wcount, master_seed);
    run.diag.weighted_mark_count = cnt.mean;
    run.diag.weighted_mark_count_std_error = cnt.std_error;
    return run;
}

}  // namespace

DualRun evaluate_JR(const ProblemSpec& spec, const Discretization& disc, double t,
                    std::span<const double> x, const ImpulseControl& u,
                    const DensityControl& nu, long long paths, int mesh_steps,
                    std::uint64_t master_seed) {
    std::vector<DualOutcome> outcomes(paths);
    parallel_for(paths, [&](long long p) {
        outcomes[p] = run_fixed(spec, disc, t, x, u, nu, mesh_steps,
                                path_seed(master_seed, p));
    });
    return collect(outcomes, master_seed, paths);
}

DualRun evaluate_JR_rule(const ProblemSpec& spec, const Discretization& disc, double t,
                         std::span<const double> x, const DualMaxRule& u,
                         const DensityControl& nu, long long paths, int mesh_steps,
                         std::uint64_t master_seed, double sampling_factor) {
    if (sampling_factor < 0.0) throw Error("evaluate_JR_rule: negative sampling factor");
    std::vector<DualOutcome> outcomes(paths);
    parallel_for(paths, [&](long long p) {
        outcomes[p] = run_rule(spec, disc, t, x, u, nu, mesh_steps,
                               path_seed(master_seed, p), sampling_factor);
    });
    return collect(outcomes, master_seed, paths);
}

DensityControl nu_star(const PenalizedFamily& fam, int k, int level_index,
                       const ProblemSpec& spec, const Discretization& disc) {
    if (level_index < 0 || level_index >= static_cast<int>(fam.levels.size()))
        throw Error("nu_star: level index out of range");
    if (k < 0 || k > fam.k_max) throw Error("nu_star: budget out of range");
    const double n = fam.levels[level_index];
    const PenalizedFamily* family = &fam;
    const ProblemSpec* sp = &spec;
    const Discretization* dc = &disc;
    DensityControl nu;
    nu.bound = n;
    nu.rate = [family, sp, dc, k, level_index, n](double s, std::span<const double> x,
                                                  int mark, int used) {
        const int kk = std::max(k - used, 0);
        const GridFunction& table = family->at(kk, level_index);
        const Vec& e = dc->acts_p2.reps[mark];
        const int d = sp->dim;
        Vec disp(d), y(d);
        sp->jump_p2(s, x, e, disp);
        for (int c = 0; c < d; ++c) y[c] = x[c] + disp[c];
        const double drop =
            table.eval(s, y) + sp->cost_p2(s, x, e) - table.eval(s, x);
        return drop < 0.0 ? n : 0.0;
    };
    return nu;
}

DualMaxRule u_star(const PenalizedFamily& fam, int k, int level_index,
                   const ProblemSpec& spec, const Discretization& disc) {
    if (level_index < 0 || level_index >= static_cast<int>(fam.levels.size()))
        throw Error("u_star: level index out of range");
    if (k < 0 || k > fam.k_max) throw Error("u_star: budget out of range");
    const PenalizedFamily* family = &fam;
    const ProblemSpec* sp = &spec;
    const Discretization* dc = &disc;
    DualMaxRule rule;
    rule.budget = k;
    rule.decide = [family, sp, dc, k,
                   level_index](int ti, std::span<const double> x,
                                int used) -> std::optional<int> {
        const int kk = k - used;
        if (kk < 1) return std::nullopt;
        const double s = dc->tgrid.time(ti);
        const GridFunction& cur = family->at(kk, level_index);
        const GridFunction& low = family->at(kk - 1, level_index);
        const int d = sp->dim;
        Vec disp(d), y(d);
        double best = -std::numeric_limits<double>::infinity();
        int best_arg = -1;
        for (int a = 0; a < dc->acts_p1.size(); ++a) {
            const Vec& act = dc->acts_p1.reps[a];
            sp->jump_p1(s, x, act, disp);
            for (int c = 0; c < d; ++c) y[c] = x[c] + disp[c];
            const double gain = low.eval(s, y) - sp->cost_p1(s, x, act);
            if (gain > best) {
                best = gain;
                best_arg = a;
            }
        }
        const double here = cur.eval(s, x);
        // Interpolation smears the nodewise-exact reflection equality, so the
        // hit test carries a small slack; a near-hit fire forfeits only the
        // remaining gap, never the full intervention cost.
        if (best >= here - 1e-3 * (1.0 + std::abs(here))) return best_arg;
        return std::nullopt;
    };
    return rule;
}

bool SaddleReport::passed() const {
    if (!value_match) return false;
    for (const SaddleEntry& e : max_deviations)
        if (!e.pass) return false;
    for (const SaddleEntry& e : min_deviations)
        if (!e.pass) return false;
    return true;
}

SaddleReport saddle_check(const ProblemSpec& spec, const Discretization& disc,
                          const PenalizedFamily& fam, int k, int level_index, double t,
                          std::span<const double> x, int deviations, long long paths,
                          int mesh_steps, double slack, std::uint64_t master_seed) {
    SaddleReport report;
    report.slack = slack;
    report.table_value = fam.at(k, level_index).eval(t, x);

    const DualMaxRule best_u = u_star(fam, k, level_index, spec, disc);
    const DensityControl best_nu = nu_star(fam, k, level_index, spec, disc);
    report.center = evaluate_JR_rule(spec, disc, t, x, best_u, best_nu, paths,
                                     mesh_steps, master_seed);
    const double center = report.center.estimate.mean;
    const double center_se = report.center.estimate.std_error;
    report.value_match =
        std::abs(center - report.table_value) <= slack + 3.0 * center_se;

    const double n = fam.levels[level_index];
    const int steps = disc.tgrid.steps();
    const int reps1 = disc.acts_p1.size();

    // Maximizer deviations against the constructed density: none should beat
    // the center beyond slack plus Monte Carlo error.
    for (int dvn = 0; dvn < deviations; ++dvn) {
        DualMaxRule dev;
        std::string label;
        if (dvn == 0) {
            dev.budget = 0;
            dev.decide = [](int, std::span<const double>, int) -> std::optional<int> {
                return std::nullopt;
            };
            label = "never-intervene";
        } else {
            // Forced single impulse at a deterministic grid time and action.
            const int when = static_cast<int>(
                rng::key4(master_seed, rng::perturb, dvn, 1) % static_cast<unsigned>(steps));
            const int what = static_cast<int>(
                rng::key4(master_seed, rng::perturb, dvn, 2) % static_cast<unsigned>(reps1));
            dev.budget = 1;
            dev.decide = [when, what](int ti, std::span<const double>,
                                      int used) -> std::optional<int> {
                if (used > 0 || ti != when) return std::nullopt;
                return what;
            };
            label = "force t" + std::to_string(when) + " a" + std::to_string(what);
        }
        const DualRun run = evaluate_JR_rule(spec, disc, t, x, dev, best_nu, paths,
                                             mesh_steps, master_seed);
        SaddleEntry entry;
        entry.label = label;
        entry.value = run.estimate.mean;
        entry.std_error = run.estimate.std_error;
        entry.margin =
            center + slack + 3.0 * (center_se + entry.std_error) - entry.value;
        entry.pass = entry.margin >= 0.0;
        report.max_deviations.push_back(std::move(entry));
    }

    // Density deviations against the constructed maximizer: none should push
    // the value below the center beyond slack plus Monte Carlo error.  Each
    // constant deviation is sampled at its own intensity, which makes the
    // likelihood ratio one; base-measure reweighting cannot represent
    // densities far above the base rate at these path counts.
    for (int dvn = 0; dvn < deviations; ++dvn) {
        double c;
        std::string label;
        if (dvn == 0) {
            c = 1.0;
            label = "unit density";
        } else if (dvn == 1) {
            c = 0.0;
            label = "zero density";
        } else if (dvn == 2) {
            c = n;
            label = "full density";
        } else {
            c = n * rng::uniform01(rng::key4(master_seed, rng::perturb, dvn, 3));
            label = "constant " + std::to_string(c);
        }
        const DensityControl dev = DensityControl::constant(c, n);
        const DualRun run = evaluate_JR_rule(spec, disc, t, x, best_u, dev, paths,
                                             mesh_steps, master_seed, c);
        SaddleEntry entry;
        entry.label = label;
        entry.value = run.estimate.mean;
        entry.std_error = run.estimate.std_error;
        entry.margin =
            entry.value - (center - slack - 3.0 * (center_se + entry.std_error));
        entry.pass = entry.margin >= 0.0;
        report.min_deviations.push_back(std::move(entry));
    }
    return report;
}

}  // namespace impulse
