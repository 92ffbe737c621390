#include <doctest.h>

#include <cmath>
#include <vector>

#include "impulse/randomized.hpp"
#include "impulse/rng.hpp"
#include "impulse/stats.hpp"

using namespace impulse;

namespace {

ImpulseControl empty_p1() {
    ImpulseControl c;
    c.owner = Player::p1;
    return c;
}

// Realized marks of one path, replayed as an explicit minimizer control.
ImpulseControl marks_as_control(const ActionPartition& part, const PoissonSample& s) {
    ImpulseControl alpha;
    alpha.owner = Player::p2;
    for (std::size_t i = 0; i < s.times.size(); ++i)
        alpha.entries.push_back(
            {s.times[i], s.marks[i], part.reps[s.marks[i]]});
    return alpha;
}

}  // namespace

TEST_SUITE("randomized") {

TEST_CASE("mark process draws are reproducible, ordered and in range") {
    const ProblemSpec spec = builtin_instance("contraction-game");
    const Discretization disc = Discretization::build(spec, 0.25);
    const ActionPartition& marks = disc.acts_p2;

    const PoissonSample a = sample_poisson(marks, 1.0, 0.0, 1.0, 42);
    const PoissonSample b = sample_poisson(marks, 1.0, 0.0, 1.0, 42);
    CHECK(a.times == b.times);
    CHECK(a.marks == b.marks);

    long long total = 0;
    bool any_difference = false;
    for (std::uint64_t key = 0; key < 2000; ++key) {
        const PoissonSample s = sample_poisson(marks, 1.0, 0.0, 1.0, key);
        total += static_cast<long long>(s.times.size());
        for (std::size_t i = 0; i < s.times.size(); ++i) {
            CHECK(s.times[i] > 0.0);
            CHECK(s.times[i] <= 1.0);
            if (i > 0) CHECK(s.times[i] > s.times[i - 1]);
            CHECK(s.marks[i] >= 0);
            CHECK(s.marks[i] < marks.size());
        }
        if (s.times != a.times) any_difference = true;
    }
    CHECK(any_difference);
    // Count mean 1.0, stderr 1/sqrt(2000); allow four of them.
    const double mean = static_cast<double>(total) / 2000.0;
    CHECK(std::abs(mean - 1.0) < 4.0 / std::sqrt(2000.0));
}

TEST_CASE("thinning simulator tracks the scaled intensity") {
    const ProblemSpec spec = builtin_instance("contraction-game");
    const Discretization disc = Discretization::build(spec, 0.25);
    long long total = 0;
    for (std::uint64_t key = 0; key < 2000; ++key) {
        const PoissonSample s =
            sample_poisson_direct(disc.acts_p2, 1.0, 2.0, 0.0, 1.0, key);
        total += static_cast<long long>(s.times.size());
        for (std::size_t i = 1; i < s.times.size(); ++i)
            CHECK(s.times[i] > s.times[i - 1]);
    }
    const double mean = static_cast<double>(total) / 2000.0;
    CHECK(std::abs(mean - 2.0) < 4.0 * std::sqrt(2.0) / std::sqrt(2000.0));
}

TEST_CASE("density weights average to one for flat and state-fed rules") {
    const ProblemSpec spec = builtin_instance("contraction-game");
    const Discretization disc = Discretization::build(spec, 0.25);
    const Vec x0{1.0, 1.0};

    std::vector<DensityControl> rules;
    rules.push_back(DensityControl::constant(0.5, 0.5));
    rules.push_back(DensityControl::constant(2.0, 2.0));
    DensityControl wavy;
    wavy.bound = 1.2;
    wavy.rate = [](double s, std::span<const double> x, int, int) {
        return 0.4 + 0.8 * std::sin(s + x[0]) * std::sin(s + x[0]);
    };
    rules.push_back(wavy);

    for (std::size_t r = 0; r < rules.size(); ++r) {
        CAPTURE(r);
        const DualRun run = evaluate_JR(spec, disc, 0.0, x0, empty_p1(), rules[r],
                                        20000, 16, 5000 + r);
        CHECK(std::abs(run.diag.mean_weight - 1.0) <
              4.0 * run.diag.weight_std_error);
        CHECK(run.diag.ess > 0.0);
        CHECK_FALSE(run.diag.low_ess_warning);
    }

    // Constant rules also pin the reweighted mark-count mean, c * mass * T.
    const DualRun half = evaluate_JR(spec, disc, 0.0, x0, empty_p1(),
                                     DensityControl::constant(0.5, 0.5), 20000, 16, 31);
    CHECK(std::abs(half.diag.weighted_mark_count - 0.5) <
          4.0 * half.diag.weighted_mark_count_std_error);

    CHECK_THROWS_AS(DensityControl::constant(-0.25, 1.0), Error);
}

TEST_CASE("unit density replays the base game path for path") {
    const ProblemSpec spec = builtin_instance("contraction-game");
    const Discretization disc = Discretization::build(spec, 0.25);
    const Vec x0{0.5, -1.0};
    ImpulseControl u = empty_p1();
    u.entries = {{0.3, -1, Vec{0.0}}};
    const DensityControl flat = DensityControl::constant(1.0, 1.0);

    for (std::uint64_t master = 100; master < 116; ++master) {
        const DualRun dual = evaluate_JR(spec, disc, 0.0, x0, u, flat, 1, 16, master);
        // Reconstruct the realized marks and play them as a plain control
        // with the same seed: same mesh, same noise, same payoff.
        const PoissonSample s =
            sample_poisson(disc.acts_p2, spec.marks.total_mass, 0.0, spec.horizon,
                           path_seed(master, 0));
        const ImpulseControl alpha = marks_as_control(disc.acts_p2, s);
        const McEstimate direct = evaluate_J(spec, 0.0, x0, u, alpha, 1, 16, master);
        CHECK(dual.estimate.mean == direct.mean);
        CHECK(dual.diag.mean_weight == 1.0);
    }
}

TEST_CASE("a silent budgeted rule reduces to the fixed empty control") {
    const ProblemSpec spec = builtin_instance("contraction-game");
    const Discretization disc = Discretization::build(spec, 0.25);
    const Vec x0{1.0, 0.5};
    const DensityControl nu = DensityControl::constant(0.8, 0.8);

    DualMaxRule silent;
    silent.budget = 2;
    silent.decide = [](int, std::span<const double>, int) {
        return std::optional<int>{};
    };
    const DualRun by_rule =
        evaluate_JR_rule(spec, disc, 0.0, x0, silent, nu, 400, 16, 77);
    const DualRun fixed =
        evaluate_JR(spec, disc, 0.0, x0, empty_p1(), nu, 400, 16, 77);
    CHECK(by_rule.estimate.mean ==
          doctest::Approx(fixed.estimate.mean).epsilon(1e-13));
    CHECK(by_rule.diag.mean_weight ==
          doctest::Approx(fixed.diag.mean_weight).epsilon(1e-13));
}

TEST_CASE("zero density zeroes the weight through the mark product") {
    GirsanovWeight w;
    w.log_compensator = 5.0;
    w.mark_product = 0.0;
    CHECK(w.value() == 0.0);
    w.mark_product = 1.0;
    w.log_compensator = 0.0;
    CHECK(w.value() == 1.0);

    // Suppressing all marks keeps the estimator unbiased: kappa is e^T on
    // mark-free paths and zero otherwise, with mean one.
    const ProblemSpec spec = builtin_instance("contraction-game");
    const Discretization disc = Discretization::build(spec, 0.25);
    const DualRun off = evaluate_JR(spec, disc, 0.0, Vec{0.5, 0.5}, empty_p1(),
                                    DensityControl::constant(0.0, 1.0), 20000, 8, 13);
    CHECK(std::abs(off.diag.mean_weight - 1.0) < 4.0 * off.diag.weight_std_error);
    CHECK(off.diag.weighted_mark_count == 0.0);
}

TEST_CASE("bang-bang density mirrors the table inequality with budget keying") {
    ProblemSpec spec = builtin_instance("contraction-game");
    spec.cost_p2 = [](double, std::span<const double>, std::span<const double>) {
        return 0.1;
    };
    const Discretization disc = Discretization::build(spec, 0.25);
    SchemeConfig config;
    config.grid = SpatialGrid::uniform({-3.0, -3.0}, {3.0, 3.0}, {31, 31});
    PenaltyConfig pen;
    pen.levels = {8};
    pen.k_max = 1;
    const PenalizedFamily fam = solve_penalized(spec, disc, config, pen);

    const DensityControl nu = nu_star(fam, 1, 0, spec, disc);
    CHECK(nu.bound == 8.0);

    Vec y(2), disp(2);
    for (double s : {0.1, 0.6})
        for (double px : {-2.0, -0.5, 1.5})
            for (double py : {-1.8, 0.4, 2.2})
                for (int mark : {0, 3, 7})
                    for (int used : {0, 1, 5}) {
                        const Vec x{px, py};
                        spec.jump_p2(s, x, disc.acts_p2.reps[mark], disp);
                        y[0] = x[0] + disp[0];
                        y[1] = x[1] + disp[1];
                        const int kk = std::max(1 - used, 0);
                        const GridFunction& table = fam.at(kk, 0);
                        const double drop = table.eval(s, y) +
                                            spec.cost_p2(s, x, disc.acts_p2.reps[mark]) -
                                            table.eval(s, x);
                        const double expected = drop < 0.0 ? 8.0 : 0.0;
                        CHECK(nu.rate(s, x, mark, used) == expected);
                    }
}

TEST_CASE("hitting rule fires exactly on the intervention branch") {
    const ProblemSpec spec = builtin_instance("drift-duel-1d");
    const Discretization disc = Discretization::build(spec, 0.25);
    SchemeConfig config;
    config.grid = SpatialGrid::uniform({-3.0}, {3.0}, {61});
    PenaltyConfig pen;
    pen.levels = {8};
    pen.k_max = 2;
    const PenalizedFamily fam = solve_penalized(spec, disc, config, pen);

    const DualMaxRule rule = u_star(fam, 2, 0, spec, disc);
    CHECK(rule.budget == 2);
    CHECK_FALSE(rule.decide(0, Vec{1.0}, 2).has_value());  // budget exhausted

    Vec disp(1);
    for (int ti : {0, 2})
        for (double px : {-2.5, -1.0, 0.0, 1.0, 2.5})
            for (int used : {0, 1}) {
                const double s = disc.tgrid.time(ti);
                const Vec x{px};
                const int kk = 2 - used;
                const GridFunction& cur = fam.at(kk, 0);
                const GridFunction& low = fam.at(kk - 1, 0);
                double best = -1e300;
                int best_i = -1;
                for (int i = 0; i < disc.acts_p1.size(); ++i) {
                    spec.jump_p1(s, x, disc.acts_p1.reps[i], disp);
                    const double cand = low.eval(s, Vec{px + disp[0]}) -
                                        spec.cost_p1(s, x, disc.acts_p1.reps[i]);
                    if (cand > best) {
                        best = cand;
                        best_i = i;
                    }
                }
                const double here = cur.eval(s, x);
                const auto got = rule.decide(ti, x, used);
                if (best >= here - 1e-3 * (1.0 + std::abs(here))) {
                    REQUIRE(got.has_value());
                    CHECK(*got == best_i);
                } else {
                    CHECK_FALSE(got.has_value());
                }
            }
}

TEST_CASE("saddle smoke test: constructed pair matches its table") {
    const ProblemSpec spec = builtin_instance("contraction-game");
    const Discretization disc = Discretization::build(spec, 0.25);
    SchemeConfig config;
    config.grid = SpatialGrid::uniform({-3.0, -3.0}, {3.0, 3.0}, {31, 31});
    PenaltyConfig pen;
    pen.levels = {8};
    pen.k_max = 1;
    const PenalizedFamily fam = solve_penalized(spec, disc, config, pen);

    const SaddleReport rep = saddle_check(spec, disc, fam, 1, 0, 0.0, Vec{1.0, 1.0}, 3,
                                          1500, 16, 0.5, 2026);
    CHECK(rep.max_deviations.size() == 3);
    CHECK(rep.min_deviations.size() == 3);
    CHECK(rep.value_match);
    CHECK(rep.passed());
    CHECK(std::isfinite(rep.table_value));
    CHECK(rep.center.diag.ess > 0.0);
}

TEST_CASE("chi-square helpers agree with hand-computed statistics") {
    const std::vector<double> obs{30.0, 70.0};
    const std::vector<double> probs{0.5, 0.5};
    CHECK(chi_square_stat(obs, probs, 100.0) == doctest::Approx(16.0));
    CHECK(chi_square_tail(0.0, 5) == doctest::Approx(1.0));
    CHECK(chi_square_tail(16.0, 1) < 1e-3);
    // Tail probabilities decrease in the statistic.
    CHECK(chi_square_tail(1.0, 3) > chi_square_tail(5.0, 3));
}

}  // TEST_SUITE
