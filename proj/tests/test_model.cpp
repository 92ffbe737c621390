#include <doctest.h>

#include <cmath>

#include "impulse/model.hpp"

using namespace impulse;

namespace {

const CheckResult& find_check(const ValidationReport& report, const std::string& name) {
    for (const CheckResult& c : report.checks)
        if (c.check == name) return c;
    throw Error("no check named " + name);
}

// Minimal well-formed 1d instance; individual tests break one property.
ProblemSpec base_1d() {
    ProblemSpec spec;
    spec.name = "test-1d";
    spec.dim = 1;
    spec.horizon = 1.0;
    spec.drift = [](double, std::span<const double>, std::span<double> out) {
        out[0] = 0.0;
    };
    spec.diffusion = [](double, std::span<const double>, std::span<double> out) {
        out[0] = 0.3;
    };
    spec.running_cost = [](double, std::span<const double>) { return 0.0; };
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
    spec.actions_p1 = {{-1.0}, {1.0}};
    spec.actions_p2 = {{-1.0}, {1.0}};
    spec.cost_floor = 0.1;
    spec.growth_exp = 2.0;
    spec.jump_bound = 1.0;
    spec.lip_jump = 1.0;
    spec.lip_coeffs = 0.0;
    spec.growth_const = 1.0;
    return spec;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("built-in instances pass every validator") {
    for (const char* name : {"contraction-game", "no-op-game", "drift-duel-1d"}) {
        CAPTURE(name);
        const ProblemSpec spec = builtin_instance(name);
        const SampleBox box = SampleBox::cube(spec.dim, 2.0);
        CHECK(validate_regularity(spec, box, 2000, 7).passed());
        CHECK(check_commutativity(spec, box, 2000, 7).passed());
        CHECK(check_terminal_consistency(spec, box, 2000, 7).passed());
    }
}

TEST_CASE("unknown instance name throws") {
    CHECK_THROWS_AS(builtin_instance("no-such-game"), Error);
}

TEST_CASE("quadratic drift breaks the declared Lipschitz constant, witness replays") {
    ProblemSpec spec = base_1d();
    spec.drift = [](double, std::span<const double> x, std::span<double> out) {
        out[0] = x[0] * x[0];
    };
    spec.lip_coeffs = 1.0;    // actual quotient reaches |x + y| ~ 4 on the box
    spec.growth_const = 2.5;  // keep the growth check satisfied
    const SampleBox box = SampleBox::cube(1, 2.0);
    const ValidationReport report = validate_regularity(spec, box, 4000, 11);
    CHECK_FALSE(report.passed());

    const CheckResult& lip = find_check(report, "lipschitz-drift-diffusion");
    REQUIRE(lip.status == CheckStatus::fail);
    CHECK(lip.residual > spec.lip_coeffs);

    // The witness pair must reproduce the reported quotient exactly.
    const Vec& x = lip.witness.x;
    const Vec& y = lip.witness.x_alt;
    const double t = lip.witness.t;
    const Vec ax = spec.drift_at(t, x), ay = spec.drift_at(t, y);
    const Vec sx = spec.diffusion_at(t, x), sy = spec.diffusion_at(t, y);
    const double quot =
        (std::abs(ax[0] - ay[0]) + std::abs(sx[0] - sy[0])) / std::abs(x[0] - y[0]);
    CHECK(quot == doctest::Approx(lip.residual).epsilon(1e-12));
}

TEST_CASE("profitable terminal intervention is rejected") {
    ProblemSpec spec = base_1d();
    spec.jump_p1 = [](double, std::span<const double>, std::span<const double> a,
                      std::span<double> out) { out[0] = a[0]; };
    spec.jump_bound = 3.0;
    const SampleBox box = SampleBox::cube(1, 2.0);
    const ValidationReport report = check_terminal_consistency(spec, box, 2000, 3);
    CHECK_FALSE(report.passed());

    // psi(x + a) - cost - psi(x) reaches about 2|x| - 0.1 + 1 on the box.
    const CheckResult& gain = find_check(report, "terminal-no-gain-p1");
    REQUIRE(gain.status == CheckStatus::fail);
    CHECK(gain.residual > 1.0);
    const Vec post = spec.post_jump_p1(spec.horizon, gain.witness.x, gain.witness.action);
    const double replay = spec.terminal_value(post) -
                          spec.cost_p1(spec.horizon, gain.witness.x, gain.witness.action) -
                          spec.terminal_value(gain.witness.x);
    CHECK(replay == doctest::Approx(gain.residual).epsilon(1e-12));
}

TEST_CASE("shift-then-scale interventions do not commute") {
    ProblemSpec spec = base_1d();
    spec.jump_p1 = [](double, std::span<const double>, std::span<const double> a,
                      std::span<double> out) { out[0] = a[0]; };
    spec.jump_p2 = [](double, std::span<const double> x, std::span<const double> e,
                      std::span<double> out) { out[0] = (e[0] - 1.0) * x[0]; };
    spec.jump_bound = 3.0;
    const ValidationReport report =
        check_commutativity(spec, SampleBox::cube(1, 2.0), 2000, 5);
    CHECK_FALSE(report.passed());
    CHECK(find_check(report, "commutativity-final-state").status == CheckStatus::fail);
    // Costs are constant, so cost invariance still holds.
    CHECK(find_check(report, "commutativity-cost-p1").status == CheckStatus::pass);
    CHECK(find_check(report, "commutativity-cost-p2").status == CheckStatus::pass);
}

TEST_CASE("zero-displacement instances admit zero-cost round trips") {
    const ProblemSpec spec = base_1d();  // both jumps are no-ops
    FreeLoopQuery query;
    query.x0 = {1.0};
    query.max_cycle = 2;

    // Mixed one-plus-one chains cancel: +0.1 for the maximizer, -0.1 for the
    // minimizer.  Reported as a candidate floor of zero without a threshold.
    CheckResult open_scan = check_no_free_loop(spec, query);
    CHECK(open_scan.status == CheckStatus::pass);
    CHECK(open_scan.residual == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_FALSE(open_scan.witness.note.empty());

    // Against a required floor the same scan fails.
    query.h2 = 0.05;
    CheckResult gated = check_no_free_loop(spec, query);
    CHECK(gated.status == CheckStatus::fail);
    CHECK(gated.residual < 0.05);
}

TEST_CASE("sampling box spans the requested cube") {
    const SampleBox box = SampleBox::cube(3, 1.5);
    REQUIRE(box.lo.size() == 3);
    for (int c = 0; c < 3; ++c) {
        CHECK(box.lo[c] == -1.5);
        CHECK(box.hi[c] == 1.5);
    }
}

}  // TEST_SUITE
