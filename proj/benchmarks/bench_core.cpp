#include <benchmark/benchmark.h>

#include "impulse/discretize.hpp"
#include "impulse/dp_solver.hpp"
#include "impulse/model.hpp"
#include "impulse/qvi_solver.hpp"
#include "impulse/randomized.hpp"
#include "impulse/sde_sim.hpp"

using namespace impulse;

namespace {

struct Fixture {
    ProblemSpec spec = builtin_instance("contraction-game");
    Discretization disc = Discretization::build(spec, 0.125);
    SpatialGrid grid = SpatialGrid::uniform({-3.0, -3.0}, {3.0, 3.0}, {61, 61});
    std::vector<double> terminal;

    Fixture() {
        terminal.resize(grid.total());
        for (int g = 0; g < grid.total(); ++g)
            terminal[g] = spec.terminal_value(grid.node(g));
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

void BM_SupOperator(benchmark::State& state) {
    Fixture& f = fixture();
    for (auto _ : state) {
        OperatorResult out = apply_sup_op(f.spec, f.disc.acts_p1, f.grid, f.terminal, 0.5);
        benchmark::DoNotOptimize(out.value.data());
    }
    state.SetItemsProcessed(state.iterations() * f.grid.total());
}
BENCHMARK(BM_SupOperator)->Unit(benchmark::kMillisecond);

void BM_BudgetedOperatorTables(benchmark::State& state) {
    Fixture& f = fixture();
    const int budget = static_cast<int>(state.range(0));
    const std::vector<std::vector<double>> w((budget + 1) * (budget + 1), f.terminal);
    for (auto _ : state) {
        BudgetTables tables = budgeted_operators(f.spec, f.disc.acts_p1, f.disc.acts_p2,
                                                 f.grid, w, budget, budget, 0.5);
        benchmark::DoNotOptimize(tables.minmax.data());
    }
}
BENCHMARK(BM_BudgetedOperatorTables)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_BackwardStep(benchmark::State& state) {
    // One-step horizon isolates the quadrature propagation cost.
    Fixture& f = fixture();
    const Discretization one = Discretization::build(f.spec, 1.0);
    for (auto _ : state) {
        ValueFamily fam = solve_dp(f.spec, one, f.grid, 1, 1, Ordering::minmax, 3);
        benchmark::DoNotOptimize(fam.values.data());
    }
    state.SetItemsProcessed(state.iterations() * f.grid.total());
}
BENCHMARK(BM_BackwardStep)->Unit(benchmark::kMillisecond);

void BM_ObstacleScheme(benchmark::State& state) {
    Fixture& f = fixture();
    SchemeConfig config;
    config.grid = SpatialGrid::uniform({-3.0, -3.0}, {3.0, 3.0}, {41, 41});
    config.time_steps = 16;
    for (auto _ : state) {
        GridFunction sol = solve_qvi(f.spec, f.disc, config);
        benchmark::DoNotOptimize(sol.slices.data());
    }
}
BENCHMARK(BM_ObstacleScheme)->Unit(benchmark::kMillisecond);

void BM_PathBatch(benchmark::State& state) {
    Fixture& f = fixture();
    ImpulseControl u;
    u.owner = Player::p1;
    ImpulseControl alpha;
    alpha.owner = Player::p2;
    const Vec x0{1.0, 1.0};
    std::uint64_t seed = 11;
    for (auto _ : state) {
        McEstimate est = evaluate_J(f.spec, 0.0, x0, u, alpha, 256, 64, seed++);
        benchmark::DoNotOptimize(est.mean);
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_PathBatch)->Unit(benchmark::kMillisecond);

void BM_ReweightedPathBatch(benchmark::State& state) {
    Fixture& f = fixture();
    ImpulseControl u;
    u.owner = Player::p1;
    const DensityControl nu = DensityControl::constant(2.0, 2.0);
    const Vec x0{1.0, 1.0};
    std::uint64_t seed = 17;
    for (auto _ : state) {
        DualRun run = evaluate_JR(f.spec, f.disc, 0.0, x0, u, nu, 256, 64, seed++);
        benchmark::DoNotOptimize(run.estimate.mean);
    }
    state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_ReweightedPathBatch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
