#include "impulse/sde_sim.hpp"

#include <algorithm>
#include <cmath>

#include "impulse/parallel.hpp"
#include "impulse/rng.hpp"

namespace impulse {

ImpulseControl ImpulseControl::from_indices(
    Player owner, const ActionPartition& acts,
    const std::vector<std::pair<double, int>>& picks) {
    ImpulseControl u;
    u.owner = owner;
    u.entries.reserve(picks.size());
    for (const auto& [time, idx] : picks) {
        if (idx < 0 || idx >= acts.size())
            throw Error("ImpulseControl: action index out of range");
        u.entries.push_back(ImpulseEntry{time, idx, acts.reps[idx]});
    }
    std::stable_sort(u.entries.begin(), u.entries.end(),
                     [](const ImpulseEntry& a, const ImpulseEntry& b) {
                         return a.time < b.time;
                     });
    return u;
}

CoupledControl couple(const ImpulseControl& u, const ImpulseControl& alpha) {
    if (u.owner != Player::p1 || alpha.owner != Player::p2)
        throw Error("couple: expects (maximizer, minimizer) in that order");
    auto sorted = [](const ImpulseControl& c) {
        for (std::size_t i = 1; i < c.entries.size(); ++i)
            if (c.entries[i].time < c.entries[i - 1].time)
                throw Error("couple: impulse times must be nondecreasing");
    };
    sorted(u);
    sorted(alpha);

    CoupledControl out;
    out.reserve(u.entries.size() + alpha.entries.size());
    std::size_t i = 0, j = 0;
    // Merge by time; the maximizer moves first when times tie.
    while (i < u.entries.size() || j < alpha.entries.size()) {
        const bool take_p1 =
            j >= alpha.entries.size() ||
            (i < u.entries.size() && u.entries[i].time <= alpha.entries[j].time);
        if (take_p1) {
            const ImpulseEntry& e = u.entries[i++];
            out.push_back(CoupledEntry{e.time, Player::p1, e.action_index, e.action});
        } else {
            const ImpulseEntry& e = alpha.entries[j++];
            out.push_back(CoupledEntry{e.time, Player::p2, e.action_index, e.action});
        }
    }
    return out;
}

double PathSample::payoff(const ProblemSpec& spec) const {
    const int last = static_cast<int>(times.size()) - 1;
    return spec.terminal_value(state_at(last)) + run_cost - cost_p1 + cost_p2;
}

std::uint64_t path_seed(std::uint64_t master_seed, long long path_index) {
    return rng::key4(master_seed, 0x70617468ULL, static_cast<std::uint64_t>(path_index));
}

namespace {

// Base mesh plus every impulse time as an exact mesh point.  Nearby points
// merge (keeping the impulse value) so degenerate cells cannot appear.
std::vector<double> refine_mesh(double t, double horizon, int mesh_steps,
                                const CoupledControl& control) {
    std::vector<double> mesh;
    mesh.reserve(mesh_steps + 1 + control.size());
    const double span = horizon - t;
    for (int i = 0; i <= mesh_steps; ++i)
        mesh.push_back(t + span * static_cast<double>(i) / mesh_steps);
    for (const CoupledEntry& e : control) {
        if (e.time < t - 1e-12) throw Error("simulate_path: impulse before start");
        if (e.time < horizon) mesh.push_back(e.time);
    }
    std::sort(mesh.begin(), mesh.end());
    const double tol = 1e-12 * std::max(1.0, span);
    std::vector<double> out;
    out.reserve(mesh.size());
    for (double s : mesh) {
        if (!out.empty() && s - out.back() <= tol) continue;
        out.push_back(s);
    }
    // Snap mesh points to impulse times they were merged with.
    for (const CoupledEntry& e : control) {
        if (e.time >= horizon) continue;
        auto it = std::lower_bound(out.begin(), out.end(), e.time - tol);
        if (it != out.end() && std::abs(*it - e.time) <= tol) *it = e.time;
    }
    out.back() = horizon;
    return out;
}

void euler_step(const ProblemSpec& spec, double s, double dt, std::span<const double> x,
                std::span<double> next, std::span<double> drift_buf,
                std::span<double> sigma_buf, std::uint64_t path_key, long long cell) {
    const int d = spec.dim;
    spec.drift(s, x, drift_buf);
    spec.diffusion(s, x, sigma_buf);
    const double sq = std::sqrt(dt);
    double xi[3];
    for (int j = 0; j < d; ++j)
        xi[j] = rng::normal(rng::key4(path_key, rng::brownian, cell, j));
    for (int a = 0; a < d; ++a) {
        double noise = 0.0;
        for (int b = 0; b < d; ++b) noise += sigma_buf[a * d + b] * xi[b];
        next[a] = x[a] + drift_buf[a] * dt + sq * noise;
    }
}

}  // namespace

PathSample simulate_path(const ProblemSpec& spec, double t, std::span<const double> x,
                         const CoupledControl& control, int mesh_steps,
                         std::uint64_t path_key) {
    if (mesh_steps < 1) throw Error("simulate_path: mesh_steps must be >= 1");
    if (t >= spec.horizon) throw Error("simulate_path: start at or past the horizon");
    const int d = spec.dim;

    PathSample path;
    path.dim = d;
    path.times = refine_mesh(t, spec.horizon, mesh_steps, control);
    const int points = static_cast<int>(path.times.size());
    path.states.resize(static_cast<std::size_t>(points) * d);

    Vec cur(x.begin(), x.end());
    Vec drift_buf(d), sigma_buf(static_cast<std::size_t>(d) * d), disp(d), next(d);
    std::size_t ctrl_at = 0;

    for (int i = 0; i < points; ++i) {
        const double s = path.times[i];
        // Apply every impulse scheduled now, in coupled order; costs and
        // displacements see the pre-jump state.  Entries at the horizon have
        // been dropped by the mesh builder already.
        while (ctrl_at < control.size() && control[ctrl_at].time <= s &&
               control[ctrl_at].time < spec.horizon) {
            const CoupledEntry& e = control[ctrl_at];
            PathSample::Jump jump;
            jump.time = s;
            jump.owner = e.owner;
            jump.pre_state = cur;
            jump.action = e.action;
            if (e.owner == Player::p1) {
                jump.cost = spec.cost_p1(s, cur, e.action);
                spec.jump_p1(s, cur, e.action, disp);
                path.cost_p1 += jump.cost;
            } else {
                jump.cost = spec.cost_p2(s, cur, e.action);
                spec.jump_p2(s, cur, e.action, disp);
                path.cost_p2 += jump.cost;
            }
            for (int a = 0; a < d; ++a) cur[a] += disp[a];
            path.jumps.push_back(std::move(jump));
            ++ctrl_at;
        }
        std::copy(cur.begin(), cur.end(),
                  path.states.begin() + static_cast<std::size_t>(i) * d);
        if (i + 1 < points) {
            const double dt = path.times[i + 1] - s;
            path.run_cost += spec.running_cost(s, cur) * dt;
            euler_step(spec, s, dt, cur, next, drift_buf, sigma_buf, path_key, i);
            std::swap(cur, next);
        }
    }
    return path;
}

McEstimate evaluate_J(const ProblemSpec& spec, double t, std::span<const double> x,
                      const ImpulseControl& u, const ImpulseControl& alpha,
                      long long paths, int mesh_steps, std::uint64_t master_seed) {
    const CoupledControl control = couple(u, alpha);
    std::vector<double> payoffs(paths);
    parallel_for(paths, [&](long long p) {
        const PathSample sample =
            simulate_path(spec, t, x, control, mesh_steps, path_seed(master_seed, p));
        payoffs[p] = sample.payoff(spec);
    });
    return summarize(payoffs, master_seed);
}

std::optional<int> FeedbackStrategy::decide(int time_index, std::span<const double> x,
                                            int own_left, int opp_left) const {
    if (own_left <= 0) return std::nullopt;
    const int k = player == Player::p1 ? std::min(own_left, k_max)
                                       : std::min(opp_left, k_max);
    const int l = player == Player::p1 ? std::min(opp_left, l_max)
                                       : std::min(own_left, l_max);
    const int g = grid.nearest_index(x);
    const std::size_t idx =
        ((static_cast<std::size_t>(k) * (l_max + 1) + l) * tgrid.points() + time_index) *
            grid.total() +
        g;
    const std::int32_t a = act[idx];
    if (a < 0) return std::nullopt;
    return static_cast<int>(a);
}

PlaybackResult play_feedback(const ProblemSpec& spec, double t, std::span<const double> x,
                             const FeedbackStrategy& p1, const FeedbackStrategy& p2,
                             int k0, int l0, long long paths, int substeps,
                             std::uint64_t master_seed) {
    if (p1.player != Player::p1 || p2.player != Player::p2)
        throw Error("play_feedback: strategies on the wrong side");
    if (p1.tgrid.level != p2.tgrid.level ||
        p1.tgrid.horizon != p2.tgrid.horizon)
        throw Error("play_feedback: strategies disagree on the time grid");
    if (substeps < 1) throw Error("play_feedback: substeps must be >= 1");
    const TimeGrid& tgrid = p1.tgrid;
    const int d = spec.dim;
    const int i0 = tgrid.project_index(t);

    std::vector<double> payoffs(paths);
    std::vector<long long> acts1(paths), acts2(paths);
    parallel_for(paths, [&](long long p) {
        const std::uint64_t key = path_seed(master_seed, p);
        Vec cur(x.begin(), x.end());
        Vec drift_buf(d), sigma_buf(static_cast<std::size_t>(d) * d), disp(d), next(d);
        double run_cost = 0.0, cost1 = 0.0, cost2 = 0.0;
        int k_left = k0, l_left = l0;
        long long n1 = 0, n2 = 0;

        for (int i = i0; i < tgrid.steps(); ++i) {
            const double s = tgrid.time(i);
            // Maximizer first, then minimizer, each repeatedly while the rule
            // fires; every application burns one unit of budget.
            while (k_left > 0) {
                const auto a = p1.decide(i, cur, k_left, l_left);
                if (!a) break;
                const Vec& act = p1.actions.reps[*a];
                cost1 += spec.cost_p1(s, cur, act);
                spec.jump_p1(s, cur, act, disp);
                for (int c = 0; c < d; ++c) cur[c] += disp[c];
                --k_left;
                ++n1;
            }
            while (l_left > 0) {
                const auto a = p2.decide(i, cur, l_left, k_left);
                if (!a) break;
                const Vec& act = p2.actions.reps[*a];
                cost2 += spec.cost_p2(s, cur, act);
                spec.jump_p2(s, cur, act, disp);
                for (int c = 0; c < d; ++c) cur[c] += disp[c];
                --l_left;
                ++n2;
            }
            const double slab = tgrid.time(i + 1) - s;
            const double dt = slab / substeps;
            for (int sub = 0; sub < substeps; ++sub) {
                const double ss = s + sub * dt;
                run_cost += spec.running_cost(ss, cur) * dt;
                euler_step(spec, ss, dt, cur, next, drift_buf, sigma_buf, key,
                           static_cast<long long>(i) * substeps + sub);
                std::swap(cur, next);
            }
        }
        payoffs[p] = spec.terminal_value(cur) + run_cost - cost1 + cost2;
        acts1[p] = n1;
        acts2[p] = n2;
    });

    PlaybackResult result;
    result.estimate = summarize(payoffs, master_seed);
    for (long long p = 0; p < paths; ++p) {
        result.total_actions_p1 += acts1[p];
        result.total_actions_p2 += acts2[p];
    }
    result.mean_actions_p1 =
        static_cast<double>(result.total_actions_p1) / static_cast<double>(paths);
    result.mean_actions_p2 =
        static_cast<double>(result.total_actions_p2) / static_cast<double>(paths);
    return result;
}

MomentReport empirical_moment_check(const ProblemSpec& spec, double t,
                                    std::span<const double> x,
                                    const std::vector<CoupledControl>& controls, double p,
                                    long long paths, int mesh_steps,
                                    std::uint64_t master_seed) {
    MomentReport report;
    report.p = p;
    const double scale = 1.0 + std::pow(norm2(x), p);
    for (const CoupledControl& control : controls) {
        std::vector<double> sup_pow(paths);
        parallel_for(paths, [&](long long i) {
            const PathSample sample =
                simulate_path(spec, t, x, control, mesh_steps, path_seed(master_seed, i));
            double sup = 0.0;
            const int points = static_cast<int>(sample.times.size());
            for (int j = 0; j < points; ++j) sup = std::max(sup, norm2(sample.state_at(j)));
            // Pre-jump states can exceed every mesh-time state snapshot.
            for (const auto& jump : sample.jumps) sup = std::max(sup, norm2(jump.pre_state));
            sup_pow[i] = std::pow(sup, p);
        });
        const McEstimate est = summarize(sup_pow, master_seed);
        report.ratios.push_back(est.mean / scale);
        if (est.mean / scale > report.worst_ratio) {
            report.worst_ratio = est.mean / scale;
            report.worst_std_error = est.std_error / scale;
        }
    }
    return report;
}

}  // namespace impulse
