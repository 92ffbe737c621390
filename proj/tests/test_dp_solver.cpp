#include <doctest.h>

#include <cmath>
#include <vector>

#include "common/toy_game.hpp"
#include "impulse/dp_solver.hpp"
#include "impulse/model.hpp"
#include "impulse/quadrature.hpp"

using namespace impulse;

TEST_SUITE("dp") {

TEST_CASE("normalized Gauss-Hermite rules match the textbook low orders") {
    const GaussHermite two = gauss_hermite(2);
    REQUIRE(two.nodes.size() == 2);
    CHECK(two.nodes[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(two.nodes[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(two.weights[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(two.weights[1] == doctest::Approx(0.5).epsilon(1e-12));

    const GaussHermite three = gauss_hermite(3);
    REQUIRE(three.nodes.size() == 3);
    CHECK(three.nodes[0] == doctest::Approx(-std::sqrt(3.0)).epsilon(1e-12));
    CHECK(three.nodes[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(three.nodes[2] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
    CHECK(three.weights[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    CHECK(three.weights[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    CHECK_THROWS_AS(gauss_hermite(0), Error);
}

TEST_CASE("transition kernel weights sum to one and degenerate with zero noise") {
    const ProblemSpec spec = builtin_instance("contraction-game");
    const TimeGrid tgrid = TimeGrid::from_resolution(1.0, 0.25);
    const SpatialGrid grid = SpatialGrid::uniform({-2.0, -2.0}, {2.0, 2.0}, {5, 5});
    const TransitionKernel kernel = build_kernel(spec, tgrid, grid, 3);
    CHECK(kernel.points_per_node == 9);
    double sum = 0.0;
    for (double w : kernel.weights) sum += w;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-13));

    ProblemSpec frozen = spec;
    frozen.diffusion = [](double, std::span<const double>, std::span<double> out) {
        out[0] = out[1] = out[2] = out[3] = 0.0;
    };
    const TransitionKernel still = build_kernel(frozen, tgrid, grid, 3);
    for (int g = 0; g < grid.total(); ++g) {
        const Vec x = grid.node(g);
        for (int j = 0; j < still.points_per_node; ++j)
            for (int c = 0; c < 2; ++c) {
                const double p =
                    still.points[0][(static_cast<std::size_t>(g) * 9 + j) * 2 + c];
                CHECK(p == doctest::Approx(x[c]).epsilon(1e-14));
            }
    }

    // Left-endpoint running cost: f(t_0, x) * dt at every node.
    const Vec x0 = grid.node(12);  // the origin
    CHECK(kernel.run_cost[0][12] ==
          doctest::Approx((x0[0] * x0[0] - x0[1] * x0[1]) * 0.25));
}

TEST_CASE("deterministic two-point game reproduces hand-solved values") {
    const ProblemSpec spec = toy::make_game();
    const Discretization disc = toy::make_disc();
    const SpatialGrid grid = toy::make_grid();
    const ValueFamily fam = solve_dp(spec, disc, grid, 1, 0, Ordering::minmax, 3);

    // At x = 2 with one credit: continuing keeps psi(2) = 1, jumping with
    // a = -1 lands on psi(-2) = 9 at cost 0.3.
    const int g2 = grid.nearest_index(Vec{2.0});
    CHECK(fam.value(1, 0, 0, g2) == doctest::Approx(8.7).epsilon(1e-13));
    CHECK(fam.bind_p1[fam.index(1, 0, 0, g2)] == 1);
    CHECK(fam.argmax_p1[fam.index(1, 0, 0, g2)] == 0);

    // At the origin every jump stays put, so intervening only burns cost.
    const int g0 = grid.nearest_index(Vec{0.0});
    CHECK(fam.value(1, 0, 0, g0) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(fam.bind_p1[fam.index(1, 0, 0, g0)] == 0);

    // Terminal slice: psi bitwise, never marked binding.
    CHECK(fam.value(1, 0, 1, g2) == spec.terminal_value(Vec{2.0}));
    CHECK(fam.bind_p1[fam.index(1, 0, 1, g2)] == 0);
    CHECK(fam.argmax_p1[fam.index(1, 0, 1, g2)] == -1);

    // Extraction mirrors the binding flags.
    const FeedbackStrategy rule = extract(fam, Player::p1);
    const auto fire = rule.decide(0, Vec{2.0}, 1, 0);
    REQUIRE(fire.has_value());
    CHECK(*fire == 0);
    CHECK_FALSE(rule.decide(0, Vec{0.0}, 1, 0).has_value());
    CHECK_FALSE(rule.decide(0, Vec{2.0}, 0, 0).has_value());
    CHECK_FALSE(rule.decide(1, Vec{2.0}, 1, 0).has_value());
}

TEST_CASE("no-op instance: all budget tables equal the closed-form value") {
    const ProblemSpec spec = builtin_instance("no-op-game");
    const Discretization disc = Discretization::build(spec, 0.125);
    const SpatialGrid grid = SpatialGrid::uniform({-3.0}, {3.0}, {121});
    const ValueFamily fam = solve_dp(spec, disc, grid, 1, 1, Ordering::minmax, 3);

    // Zero jumps with a positive cost floor: every intervention branch loses,
    // so all budget slices are bitwise copies of the uncontrolled table.
    for (int k = 0; k <= 1; ++k)
        for (int l = 0; l <= 1; ++l)
            for (int i = 0; i <= fam.tgrid.steps(); i += 2)
                for (int g = 0; g < grid.total(); g += 7)
                    CHECK(fam.value(k, l, i, g) == fam.value(0, 0, i, g));

    // v(t, x) = x^2 + sigma^2 (T - t) + x (T - t) with sigma = 0.25.
    const int gp = grid.nearest_index(Vec{-1.5});
    CHECK(grid.node(gp)[0] == doctest::Approx(-1.5));
    CHECK(fam.value(1, 1, 0, gp) == doctest::Approx(0.8125).epsilon(2e-3));
    CHECK(fam.eval(1, 1, 0.0, Vec{-1.5}) == doctest::Approx(0.8125).epsilon(2e-3));
}

TEST_CASE("values are monotone in each budget at every table entry") {
    const ProblemSpec spec = builtin_instance("contraction-game");
    const Discretization disc = Discretization::build(spec, 0.25);
    const SpatialGrid grid = SpatialGrid::uniform({-3.0, -3.0}, {3.0, 3.0}, {31, 31});
    for (Ordering ord : {Ordering::minmax, Ordering::maxmin}) {
        CAPTURE(to_string(ord));
        const ValueFamily fam = solve_dp(spec, disc, grid, 2, 2, ord, 3);
        for (int i = 0; i <= fam.tgrid.steps(); ++i)
            for (int g = 0; g < grid.total(); g += 3) {
                for (int k = 1; k <= 2; ++k)
                    for (int l = 0; l <= 2; ++l)
                        CHECK(fam.value(k, l, i, g) >= fam.value(k - 1, l, i, g));
                for (int l = 1; l <= 2; ++l)
                    for (int k = 0; k <= 2; ++k)
                        CHECK(fam.value(k, l, i, g) <= fam.value(k, l - 1, i, g));
            }
    }
}

TEST_CASE("order gap is zero against itself and rejects mismatched shapes") {
    const ProblemSpec spec = toy::make_game();
    const Discretization disc = toy::make_disc();
    const ValueFamily a = solve_dp(spec, disc, toy::make_grid(), 1, 1, Ordering::minmax);
    const ValueFamily b = solve_dp(spec, disc, toy::make_grid(), 1, 1, Ordering::maxmin);
    CHECK(order_gap(a, a) == 0.0);
    CHECK(order_gap(a, b) >= 0.0);

    const SpatialGrid other = SpatialGrid::uniform({-2.0}, {2.0}, {9});
    const ValueFamily c = solve_dp(spec, disc, other, 1, 1, Ordering::maxmin);
    CHECK_THROWS_AS(order_gap(a, c), Error);
}

TEST_CASE("family evaluation interpolates linearly between time slices") {
    const ProblemSpec spec = toy::make_game();
    const ValueFamily fam =
        solve_dp(spec, toy::make_disc(), toy::make_grid(), 1, 0, Ordering::minmax);
    const double v0 = fam.value(1, 0, 0, 4);
    const double v1 = fam.value(1, 0, 1, 4);
    CHECK(fam.eval(1, 0, 0.5, Vec{2.0}) == doctest::Approx(0.5 * (v0 + v1)));
    CHECK(fam.eval(1, 0, 0.0, Vec{2.0}) == doctest::Approx(v0));
    CHECK(fam.eval(1, 0, 1.0, Vec{2.0}) == doctest::Approx(v1));
}

TEST_CASE("budget sweep on a loss-only instance degenerates cleanly") {
    const ProblemSpec spec = builtin_instance("no-op-game");
    const SpatialGrid grid = SpatialGrid::uniform({-3.0}, {3.0}, {61});
    const ConvergenceReport rep = convergence_study(
        spec, grid, {0.5, 0.25}, {1, 2}, 0, {{0.0, Vec{0.5}}}, Ordering::minmax, 3);
    REQUIRE(rep.eps_values.size() == 2);
    REQUIRE(rep.k_values.size() == 2);
    REQUIRE(rep.k_increments.size() == 2);
    CHECK(rep.k_increments[1][0] == doctest::Approx(0.0).epsilon(1e-15));
    // Identical values across budgets leave nothing to fit.
    CHECK(rep.fit_degenerate);
    CHECK(std::abs(rep.eps_values[1][0] - 0.8125) < 5e-3);
    CHECK_THROWS_AS(
        convergence_study(spec, grid, {}, {1}, 0, {{0.0, Vec{0.0}}}, Ordering::minmax),
        Error);
}

}  // TEST_SUITE
