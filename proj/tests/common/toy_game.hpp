#pragma once

// One-step deterministic instance small enough to brute-force: two time
// points, zero noise, three actions per player, and a five-node state grid
// that every reachable post-jump state lands on exactly.  Both players
// rescale the state; psi = (x-1)^2 makes a sign flip profitable for the
// maximizer from x = 2 and a reset profitable for the minimizer from x = -2.

#include "impulse/discretize.hpp"
#include "impulse/model.hpp"

namespace toy {

inline impulse::ProblemSpec make_game() {
    using impulse::Vec;
    impulse::ProblemSpec spec;
    spec.name = "two-time-toy";
    spec.dim = 1;
    spec.horizon = 1.0;
    spec.drift = [](double, std::span<const double>, std::span<double> out) {
        out[0] = 0.0;
    };
    spec.diffusion = [](double, std::span<const double>, std::span<double> out) {
        out[0] = 0.0;
    };
    spec.running_cost = [](double, std::span<const double>) { return 0.0; };
    spec.terminal_value = [](std::span<const double> x) {
        return (x[0] - 1.0) * (x[0] - 1.0);
    };
    auto scale = [](double, std::span<const double> x, std::span<const double> a,
                    std::span<double> out) { out[0] = (a[0] - 1.0) * x[0]; };
    spec.jump_p1 = scale;
    spec.jump_p2 = scale;
    spec.cost_p1 = [](double, std::span<const double>, std::span<const double> a) {
        return 0.4 + 0.1 * a[0];
    };
    spec.cost_p2 = [](double, std::span<const double>, std::span<const double> a) {
        return 0.4 - 0.1 * a[0];
    };
    spec.actions_p1 = {Vec{-1.0}, Vec{1.0}};
    spec.actions_p2 = {Vec{-1.0}, Vec{1.0}};
    spec.marks.total_mass = 1.0;
    spec.cost_floor = 0.3;
    spec.growth_exp = 2.0;
    spec.jump_bound = 2.0;
    spec.lip_jump = 2.0;
    spec.lip_coeffs = 0.0;
    spec.growth_const = 9.0;
    return spec;
}

inline impulse::Discretization make_disc() {
    impulse::Discretization disc;
    disc.eps = 1.0;
    disc.tgrid = impulse::TimeGrid::from_resolution(1.0, 1.0);  // two time points
    disc.acts_p1 = impulse::ActionPartition::from_points({{-1.0}, {0.0}, {1.0}});
    disc.acts_p2 = impulse::ActionPartition::from_points(
        {{-1.0}, {0.0}, {1.0}}, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
    return disc;
}

inline impulse::SpatialGrid make_grid() {
    return impulse::SpatialGrid::uniform({-2.0}, {2.0}, {5});
}

}  // namespace toy
