#include <doctest.h>

#include <cmath>
#include <vector>

#include "impulse/discretize.hpp"
#include "impulse/model.hpp"

using namespace impulse;

TEST_SUITE("discretize") {

TEST_CASE("time grid picks the coarsest dyadic level under the resolution") {
    const TimeGrid g = TimeGrid::from_resolution(1.0, 0.25);
    CHECK(g.level == 2);
    CHECK(g.steps() == 4);
    CHECK(g.dt() == 0.25);
    CHECK(g.time(3) == 0.75);

    // 0.3 does not admit dt = 0.5, so the level still lands on 0.25.
    CHECK(TimeGrid::from_resolution(1.0, 0.3).level == 2);
    // eps equal to a dyadic step must not bump the level through rounding.
    CHECK(TimeGrid::from_resolution(1.0, 0.5).level == 1);
    CHECK(TimeGrid::from_resolution(2.0, 2.0).level == 0);

    CHECK_THROWS_AS(TimeGrid::from_resolution(1.0, 0.0), Error);
    CHECK_THROWS_AS(TimeGrid::from_resolution(-1.0, 0.5), Error);
}

TEST_CASE("time projection is exact on grid points and rounds up between them") {
    const TimeGrid g = TimeGrid::from_resolution(1.0, 0.25);
    for (int i = 0; i <= g.steps(); ++i) CHECK(g.project_index(g.time(i)) == i);
    CHECK(g.project_index(0.5 + 1e-13) == 2);
    CHECK(g.project_index(0.26) == 2);
    CHECK(g.project_index(-0.7) == 0);
    CHECK(g.project_index(42.0) == g.steps());
    CHECK(g.project(0.26) == 0.5);
}

TEST_CASE("action partition covers the box with midpoint representatives") {
    ActionSet box{{-1.0}, {1.0}};
    const ActionPartition part = ActionPartition::build(box, 0.25);
    REQUIRE(part.size() == 8);
    for (int i = 0; i < 8; ++i)
        CHECK(part.reps[i][0] == doctest::Approx(-1.0 + (i + 0.5) * 0.25));

    const Vec probe{0.3};
    const int cell = part.project_index(probe);
    CHECK(cell == 5);
    CHECK(part.project(probe)[0] == doctest::Approx(0.375));
    CHECK_THROWS_AS(part.project_index(Vec{1.5}), Error);

    // Mark weights are uniform over cells and sum to the total mass.
    const ActionPartition marked =
        ActionPartition::build_marks(box, MarkMeasure{2.0}, 0.25);
    REQUIRE(marked.weights.size() == 8);
    for (double w : marked.weights) CHECK(w == doctest::Approx(0.25));
    CHECK(marked.total_weight() == doctest::Approx(2.0));
}

TEST_CASE("explicit representative lists project to the nearest point") {
    const ActionPartition menu =
        ActionPartition::from_points({Vec{-1.0}, Vec{0.0}, Vec{1.0}});
    CHECK(menu.project_index(Vec{0.4}) == 1);
    CHECK(menu.project_index(Vec{-0.9}) == 0);
    // Equidistant candidates resolve to the lowest index.
    CHECK(menu.project_index(Vec{0.5}) == 1);
    CHECK_THROWS_AS(ActionPartition::from_points({}), Error);
    CHECK_THROWS_AS(ActionPartition::from_points({Vec{0.0}}, {1.0, 2.0}), Error);
}

TEST_CASE("spatial grid indexing round-trips and nearest node snaps") {
    const SpatialGrid grid = SpatialGrid::uniform({-3.0}, {3.0}, {61});
    CHECK(grid.total() == 61);
    CHECK(grid.spacing(0) == doctest::Approx(0.1));
    CHECK(grid.node(0)[0] == -3.0);
    CHECK(grid.node(60)[0] == 3.0);
    const int near = grid.nearest_index(Vec{0.26});
    CHECK(grid.node(near)[0] == doctest::Approx(0.3));
    CHECK_THROWS_AS(SpatialGrid::uniform({0.0}, {1.0}, {1}), Error);
    CHECK_THROWS_AS(SpatialGrid::uniform({1.0}, {0.0}, {5}), Error);
}

TEST_CASE("interpolation stays inside the stencil and clamps outside the box") {
    SpatialField f;
    f.grid = SpatialGrid::uniform({0.0}, {1.0}, {2});
    f.v = {1.0, 3.0};
    CHECK(f.eval(Vec{0.25}) == doctest::Approx(1.5));
    CHECK(f.eval(Vec{0.0}) == 1.0);
    CHECK(f.eval(Vec{-5.0}) == 1.0);
    CHECK(f.eval(Vec{7.0}) == 3.0);

    SpatialField g;
    g.grid = SpatialGrid::uniform({0.0, 0.0}, {1.0, 1.0}, {3, 3});
    g.v.resize(9);
    for (int i = 0; i < 9; ++i) g.v[i] = std::sin(3.7 * i) * 2.0;
    for (double px : {0.13, 0.5, 0.88})
        for (double py : {0.07, 0.61, 0.99}) {
            const double val = g.eval(Vec{px, py});
            double lo = g.v[0], hi = g.v[0];
            for (double c : g.v) {
                lo = std::min(lo, c);
                hi = std::max(hi, c);
            }
            CHECK(val >= lo);
            CHECK(val <= hi);
        }
    // Nodes evaluate to their stored values bitwise.
    for (int i = 0; i < 9; ++i) CHECK(g.eval(g.grid.node(i)) == g.v[i]);
}

TEST_CASE("time-stacked slices interpolate linearly and clamp in time") {
    GridFunction gf;
    gf.t0 = 0.0;
    gf.dt = 0.5;
    gf.grid = SpatialGrid::uniform({0.0}, {1.0}, {2});
    gf.slices = {{1.0, 1.0}, {3.0, 3.0}};
    CHECK(gf.eval(0.25, Vec{0.5}) == doctest::Approx(2.0));
    CHECK(gf.eval(-1.0, Vec{0.5}) == doctest::Approx(1.0));
    CHECK(gf.eval(9.0, Vec{0.5}) == doctest::Approx(3.0));
}

TEST_CASE("intervention operators hit hand-computed values on a frozen node") {
    const ProblemSpec spec = builtin_instance("contraction-game");
    const SpatialGrid grid = SpatialGrid::uniform({-3.0, -3.0}, {3.0, 3.0}, {61, 61});
    std::vector<double> psi(grid.total());
    for (int g = 0; g < grid.total(); ++g) psi[g] = spec.terminal_value(grid.node(g));
    const ActionPartition menu =
        ActionPartition::from_points({Vec{-1.0}, Vec{0.0}, Vec{1.0}});

    // At (2, 0): flipping or keeping the first coordinate yields 4 - 0.1,
    // zeroing it refunds nothing and pays the full square, 0 - 4.1.
    const OperatorResult sup = apply_sup_op(spec, menu, grid, psi, 0.5);
    const int g_sup = grid.nearest_index(Vec{2.0, 0.0});
    CHECK(sup.value[g_sup] == doctest::Approx(3.9).epsilon(1e-15));
    CHECK(sup.arg[g_sup] == 0);
    CHECK(sup.clipped == 0);

    // At (0, 2) every minimizer branch costs exactly 4.1.
    const OperatorResult inf = apply_inf_op(spec, menu, grid, psi, 0.5);
    const int g_inf = grid.nearest_index(Vec{0.0, 2.0});
    CHECK(inf.value[g_inf] == doctest::Approx(4.1).epsilon(1e-15));
    CHECK(inf.arg[g_inf] == 0);
}

TEST_CASE("budget recursions collapse correctly at the table edges") {
    const ProblemSpec spec = builtin_instance("contraction-game");
    const SpatialGrid grid = SpatialGrid::uniform({-3.0, -3.0}, {3.0, 3.0}, {31, 31});
    std::vector<double> psi(grid.total());
    for (int g = 0; g < grid.total(); ++g) psi[g] = spec.terminal_value(grid.node(g));
    const ActionPartition menu =
        ActionPartition::from_points({Vec{-1.0}, Vec{0.0}, Vec{1.0}});

    const int K = 1, L = 1;
    std::vector<std::vector<double>> w((K + 1) * (L + 1), psi);
    const BudgetTables tabs =
        budgeted_operators(spec, menu, menu, grid, w, K, L, 0.5);

    REQUIRE(static_cast<int>(tabs.minmax.size()) == (K + 1) * (L + 1));
    for (int g = 0; g < grid.total(); ++g) {
        // Zero budgets pass the input through untouched.
        CHECK(tabs.minmax[tabs.idx(0, 0)][g] == w[0][g]);
        CHECK(tabs.maxmin[tabs.idx(0, 0)][g] == w[0][g]);
        // With only one side budgeted the compositions match the single
        // operators.
        CHECK(tabs.minmax[tabs.idx(1, 0)][g] == tabs.single_sup[tabs.idx(1, 0)][g]);
        CHECK(tabs.maxmin[tabs.idx(0, 1)][g] == tabs.single_inf[tabs.idx(0, 1)][g]);
        // An extra option can only help its owner.
        CHECK(tabs.single_sup[tabs.idx(1, 0)][g] >= w[0][g]);
        CHECK(tabs.single_inf[tabs.idx(0, 1)][g] <= w[0][g]);
    }
}

}  // TEST_SUITE
