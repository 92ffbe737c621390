#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "impulse/discretize.hpp"
#include "impulse/model.hpp"
#include "impulse/stats.hpp"
#include "impulse/types.hpp"

namespace impulse {

enum class Player { p1, p2 };

struct ImpulseEntry {
    double time = 0.0;
    int action_index = -1;  // representative index when taken from a partition
    Vec action;
};

// One player's intervention list; times nondecreasing.  Entries at or after
// the horizon are inert (they are neither applied nor charged).
struct ImpulseControl {
    Player owner = Player::p1;
    std::vector<ImpulseEntry> entries;

    static ImpulseControl from_indices(Player owner, const ActionPartition& acts,
                                       const std::vector<std::pair<double, int>>& picks);
};

struct CoupledEntry {
    double time = 0.0;
    Player owner = Player::p1;
    int action_index = -1;
    Vec action;
};

// Merge of both players' lists into one ordered sequence; at equal times the
// maximizer goes first.  Relative order within each list is preserved.
using CoupledControl = std::vector<CoupledEntry>;

CoupledControl couple(const ImpulseControl& u, const ImpulseControl& alpha);

struct PathSample {
    std::vector<double> times;   // simulation mesh, impulse times inserted
    std::vector<double> states;  // post-intervention state per mesh time, flattened
    struct Jump {
        double time;
        Player owner;
        Vec pre_state;  // state the jump map and cost were evaluated at
        Vec action;
        double cost;
    };
    std::vector<Jump> jumps;
    double run_cost = 0.0;   // left-endpoint quadrature of f along the path
    double cost_p1 = 0.0;    // total charged to the maximizer
    double cost_p2 = 0.0;    // total credited to the maximizer
    int dim = 1;

    std::span<const double> state_at(int i) const {
        return {states.data() + static_cast<std::size_t>(i) * dim,
                static_cast<std::size_t>(dim)};
    }
    // psi(X_T) + run_cost - cost_p1 + cost_p2
    double payoff(const ProblemSpec& spec) const;
};

// Euler scheme on [t, horizon] with `mesh_steps` uniform cells, refined so
// every impulse time is a mesh point.  Jumps at one time apply in coupled
// order; costs and displacements see the pre-jump state.  Brownian
// increments are keyed by (path_key, cell, coordinate), so two controls with
// the same mesh share noise path by path.
PathSample simulate_path(const ProblemSpec& spec, double t, std::span<const double> x,
                         const CoupledControl& control, int mesh_steps,
                         std::uint64_t path_key);

std::uint64_t path_seed(std::uint64_t master_seed, long long path_index);

McEstimate evaluate_J(const ProblemSpec& spec, double t, std::span<const double> x,
                      const ImpulseControl& u, const ImpulseControl& alpha,
                      long long paths, int mesh_steps, std::uint64_t master_seed);

// Nodewise intervention rule on the product (time grid point, spatial node,
// own budget left, opponent budget left); empty = continue.  Continuous
// states are resolved to the nearest grid node.
struct FeedbackStrategy {
    Player player = Player::p1;
    int k_max = 0, l_max = 0;
    TimeGrid tgrid;
    SpatialGrid grid;
    ActionPartition actions;
    std::vector<std::int32_t> act;  // (((k*(l_max+1)+l)*times)+i)*nodes+g, -1 = continue

    std::optional<int> decide(int time_index, std::span<const double> x, int own_left,
                              int opp_left) const;
};

struct PlaybackResult {
    McEstimate estimate;
    double mean_actions_p1 = 0.0;
    double mean_actions_p2 = 0.0;
    long long total_actions_p1 = 0;
    long long total_actions_p2 = 0;
};

// Plays both rules from (t, x) with budgets (k0, l0).  Rules are consulted at
// time-grid points, maximizer first, repeatedly while they fire and budget
// remains; diffusion in between runs on `substeps` Euler cells per grid slab.
PlaybackResult play_feedback(const ProblemSpec& spec, double t, std::span<const double> x,
                             const FeedbackStrategy& p1, const FeedbackStrategy& p2,
                             int k0, int l0, long long paths, int substeps,
                             std::uint64_t master_seed);

struct MomentReport {
    double p = 2.0;
    // max over controls of E[sup_s |X_s|^p] / (1 + |x0|^p) and its stderr
    double worst_ratio = 0.0;
    double worst_std_error = 0.0;
    std::vector<double> ratios;
};

MomentReport empirical_moment_check(const ProblemSpec& spec, double t,
                                    std::span<const double> x,
                                    const std::vector<CoupledControl>& controls, double p,
                                    long long paths, int mesh_steps,
                                    std::uint64_t master_seed);

}  // namespace impulse
