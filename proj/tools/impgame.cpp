// Command line driver: validate instances, run the three solvers, cross-check
// them against each other, and turn solver artifacts into plot-ready columns.
// Exit codes: 0 ok, 1 a check or verdict failed, 2 usage or runtime error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "impulse/config.hpp"
#include "impulse/dp_solver.hpp"
#include "impulse/model.hpp"
#include "impulse/qvi_solver.hpp"
#include "impulse/randomized.hpp"

namespace fs = std::filesystem;
using namespace impulse;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string problem, solver, ordering, out_dir;
    double eps = 0.0;
    int k_max = 0, l_max = 0, mesh_steps = 0, quad_order = 0, samples = 0;
    long long paths = 0;
    std::uint64_t seed = 0;
    std::vector<int> penalty_levels, grid_nodes;
    std::vector<double> grid_lo, grid_hi;
    double commutativity_tol = 0.0;

    CLI::Option *o_problem = nullptr, *o_solver = nullptr, *o_ordering = nullptr,
                *o_out = nullptr, *o_eps = nullptr, *o_kmax = nullptr,
                *o_lmax = nullptr, *o_mesh = nullptr, *o_quad = nullptr,
                *o_samples = nullptr, *o_paths = nullptr, *o_seed = nullptr,
                *o_levels = nullptr, *o_nodes = nullptr, *o_lo = nullptr,
                *o_hi = nullptr, *o_ctol = nullptr;

    void attach(CLI::App* app) {
        app->add_option("--config,-c", config_path, "JSON run configuration");
        o_problem = app->add_option("--problem,-p", problem,
                                    "built-in instance name or problem config path");
        o_solver = app->add_option("--solver", solver, "dp | qvi | penalized");
        o_ordering = app->add_option("--ordering", ordering, "minmax | maxmin");
        o_out = app->add_option("--out,-o", out_dir, "artifact directory");
        o_eps = app->add_option("--eps", eps, "discretization resolution");
        o_kmax = app->add_option("--kmax", k_max, "maximizer impulse budget");
        o_lmax = app->add_option("--lmax", l_max, "minimizer impulse budget");
        o_mesh = app->add_option("--mesh-steps", mesh_steps, "simulation mesh steps");
        o_quad = app->add_option("--quad-order", quad_order, "quadrature order");
        o_samples = app->add_option("--samples", samples, "validation sample count");
        o_paths = app->add_option("--paths", paths, "Monte Carlo path count");
        o_seed = app->add_option("--seed", seed, "master seed");
        o_levels = app->add_option("--penalty-levels", penalty_levels,
                                   "penalty intensities, increasing")
                       ->delimiter(',');
        o_nodes = app->add_option("--grid-nodes", grid_nodes,
                                  "spatial nodes per axis")
                      ->delimiter(',');
        o_lo = app->add_option("--grid-lo", grid_lo, "spatial box lower corner")
                   ->delimiter(',');
        o_hi = app->add_option("--grid-hi", grid_hi, "spatial box upper corner")
                   ->delimiter(',');
        o_ctol = app->add_option("--commutativity-tol", commutativity_tol,
                                 "order-independence tolerance");
    }

    RunConfig build() const {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_run_config(config_path);
        if (o_problem->count()) cfg.problem = problem;
        if (o_solver->count()) cfg.solver = solver;
        if (o_ordering->count()) cfg.ordering = ordering_from_string(ordering);
        if (o_out->count()) cfg.out_dir = out_dir;
        if (o_eps->count()) cfg.eps = eps;
        if (o_kmax->count()) cfg.k_max = k_max;
        if (o_lmax->count()) cfg.l_max = l_max;
        if (o_mesh->count()) cfg.mesh_steps = mesh_steps;
        if (o_quad->count()) cfg.quad_order = quad_order;
        if (o_samples->count()) cfg.validation_samples = samples;
        if (o_paths->count()) cfg.paths = paths;
        if (o_seed->count()) cfg.seed = seed;
        if (o_levels->count()) cfg.penalty_levels = penalty_levels;
        if (o_nodes->count()) cfg.grid_nodes = grid_nodes;
        if (o_lo->count()) cfg.grid_lo = grid_lo;
        if (o_hi->count()) cfg.grid_hi = grid_hi;
        if (o_ctol->count()) cfg.commutativity_tol = commutativity_tol;
        return cfg;
    }
};

const char* status_word(CheckStatus s) {
    switch (s) {
        case CheckStatus::pass: return "pass";
        case CheckStatus::warn: return "warn";
        default: return "FAIL";
    }
}

void print_report(const ValidationReport& report) {
    for (const CheckResult& c : report.checks)
        std::cout << "  [" << status_word(c.status) << "] " << c.check
                  << "  residual=" << std::setprecision(6) << c.residual
                  << (c.witness.note.empty() ? "" : "  (" + c.witness.note + ")")
                  << '\n';
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                     since)
        .count();
}

int cmd_validate(const RunConfig& cfg, double box_half, std::optional<double> loop_floor) {
    const ProblemSpec spec = load_problem(cfg.problem);
    const SampleBox box = SampleBox::cube(spec.dim, box_half);

    ValidationReport all;
    all.problem = spec.name;
    for (ValidationReport r :
         {validate_regularity(spec, box, cfg.validation_samples, cfg.seed),
          check_commutativity(spec, box, cfg.validation_samples, cfg.seed,
                              cfg.commutativity_tol),
          check_terminal_consistency(spec, box, cfg.validation_samples, cfg.seed)})
        for (CheckResult& c : r.checks) all.checks.push_back(std::move(c));

    FreeLoopQuery query;
    query.x0 = default_probes(spec).front().x;
    query.h2 = loop_floor;
    query.seed = cfg.seed;
    all.checks.push_back(check_no_free_loop(spec, query));

    std::cout << "validate " << spec.name << '\n';
    print_report(all);

    fs::create_directories(cfg.out_dir);
    write_json(fs::path(cfg.out_dir) / ("validate_" + spec.name + ".json"),
               report_to_json(all));
    std::cout << (all.passed() ? "validation passed" : "validation FAILED") << '\n';
    return all.passed() ? 0 : 1;
}

void print_probe_values(const std::vector<ProbePoint>& probes,
                        const std::function<double(const ProbePoint&)>& value) {
    std::cout << std::setprecision(10);
    for (const ProbePoint& p : probes) {
        std::cout << "  v(t=" << p.t << ", x=[";
        for (std::size_t c = 0; c < p.x.size(); ++c)
            std::cout << (c ? "," : "") << p.x[c];
        std::cout << "]) = " << value(p) << '\n';
    }
}

int cmd_solve(const RunConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    const ProblemSpec spec = load_problem(cfg.problem);
    const SpatialGrid grid = default_grid(spec, cfg);
    const Discretization disc = Discretization::build(spec, cfg.eps);
    const std::vector<ProbePoint> probes =
        cfg.probes.empty() ? default_probes(spec) : cfg.probes;

    fs::create_directories(cfg.out_dir);
    json manifest;
    manifest["tool"] = "impgame 0.1.0";
    manifest["command"] = "solve";
    manifest["config"] = json::parse(cfg.canonical());
    manifest["config_hash"] = cfg.config_hash();
    manifest["seed"] = cfg.seed;
    json artifacts = json::array();
    json timings;

    std::cout << "solve " << spec.name << " with " << cfg.solver << " ("
              << to_string(cfg.ordering) << "), eps=" << cfg.eps << '\n';

    if (cfg.solver == "dp") {
        const auto t0 = std::chrono::steady_clock::now();
        const ValueFamily fam =
            solve_dp(spec, disc, grid, cfg.k_max, cfg.l_max, cfg.ordering,
                     cfg.quad_order);
        timings["solve_ms"] = elapsed_ms(t0);

        const std::string stem = "value_dp_" + std::string(to_string(cfg.ordering));
        {
            std::ofstream os(fs::path(cfg.out_dir) / (stem + ".csv"));
            write_value_csv(os, fam);
        }
        artifacts.push_back(stem + ".csv");
        for (Player pl : {Player::p1, Player::p2}) {
            const std::string name =
                std::string("strategy_p") + (pl == Player::p1 ? "1" : "2") + ".json";
            write_json(fs::path(cfg.out_dir) / name,
                       strategy_to_json(extract(fam, pl)));
            artifacts.push_back(name);
        }
        manifest["clipped_jump_targets"] = fam.clipped;
        print_probe_values(probes, [&](const ProbePoint& p) {
            return fam.eval(cfg.k_max, cfg.l_max, p.t, p.x);
        });
    } else if (cfg.solver == "qvi") {
        SchemeConfig sc;
        sc.grid = grid;
        sc.ordering = cfg.ordering;
        const auto t0 = std::chrono::steady_clock::now();
        const GridFunction sol = solve_qvi(spec, disc, sc);
        timings["solve_ms"] = elapsed_ms(t0);

        const std::string stem = "value_qvi_" + std::string(to_string(cfg.ordering));
        {
            std::ofstream os(fs::path(cfg.out_dir) / (stem + ".csv"));
            write_grid_function_csv(os, sol, stem);
        }
        artifacts.push_back(stem + ".csv");
        manifest["time_steps"] = sol.times() - 1;
        print_probe_values(probes,
                           [&](const ProbePoint& p) { return sol.eval(p.t, p.x); });
    } else if (cfg.solver == "penalized") {
        SchemeConfig sc;
        sc.grid = grid;
        sc.ordering = cfg.ordering;
        PenaltyConfig pen;
        pen.levels = cfg.penalty_levels;
        pen.k_max = cfg.k_max;
        const auto t0 = std::chrono::steady_clock::now();
        const PenalizedFamily fam = solve_penalized(spec, disc, sc, pen);
        timings["solve_ms"] = elapsed_ms(t0);

        for (int k = 0; k <= pen.k_max; ++k)
            for (std::size_t li = 0; li < fam.levels.size(); ++li) {
                const std::string stem = "value_pen_k" + std::to_string(k) + "_n" +
                                         std::to_string(fam.levels[li]);
                std::ofstream os(fs::path(cfg.out_dir) / (stem + ".csv"));
                write_grid_function_csv(os, fam.at(k, static_cast<int>(li)), stem);
                artifacts.push_back(stem + ".csv");
            }
        manifest["time_steps"] = fam.time_steps;
        manifest["dt_was_refined"] = fam.dt_was_refined;
        const GridFunction& top =
            fam.at(pen.k_max, static_cast<int>(fam.levels.size()) - 1);
        print_probe_values(probes,
                           [&](const ProbePoint& p) { return top.eval(p.t, p.x); });
    } else {
        throw Error("unknown solver '" + cfg.solver + "' (dp | qvi | penalized)");
    }

    std::sort(artifacts.begin(), artifacts.end());
    manifest["artifacts"] = artifacts;
    timings["total_ms"] = elapsed_ms(t_start);
    // The only nondeterministic field; drop it when diffing manifests.
    manifest["timings"] = timings;
    write_json(fs::path(cfg.out_dir) / "manifest.json", manifest);
    std::cout << "artifacts in " << cfg.out_dir << '\n';
    return 0;
}

int cmd_crosscheck(const RunConfig& cfg) {
    const ProblemSpec spec = load_problem(cfg.problem);
    const SpatialGrid grid = default_grid(spec, cfg);
    const std::vector<ProbePoint> probes =
        cfg.probes.empty() ? default_probes(spec) : cfg.probes;

    std::cout << "crosscheck " << spec.name << " at " << probes.size() << " probes\n";

    // Each route gets a coarse and a refined run; the verdict tolerance is
    // three times the sum of the observed self-refinement gaps.
    const Discretization disc = Discretization::build(spec, cfg.eps);
    const Discretization disc_fine = Discretization::build(spec, cfg.eps / 2.0);
    const ValueFamily dp_coarse =
        solve_dp(spec, disc, grid, cfg.k_max, cfg.l_max, cfg.ordering, cfg.quad_order);
    const ValueFamily dp_fine = solve_dp(spec, disc_fine, grid, cfg.k_max, cfg.l_max,
                                         cfg.ordering, cfg.quad_order);

    SchemeConfig sc;
    sc.grid = grid;
    sc.ordering = cfg.ordering;
    sc.time_steps = std::max(min_stable_steps(spec, grid, sc.cfl_safety, 0.0), 32);
    const GridFunction qvi_coarse = solve_qvi(spec, disc, sc);
    SchemeConfig sc_fine = sc;
    sc_fine.time_steps = 2 * sc.time_steps;
    const GridFunction qvi_fine = solve_qvi(spec, disc, sc_fine);

    PenaltyConfig pen;
    pen.levels = cfg.penalty_levels;
    pen.k_max = cfg.k_max;
    const PenalizedFamily pen_fam = solve_penalized(spec, disc, sc, pen);
    const int top = static_cast<int>(pen_fam.levels.size()) - 1;

    const GridFunction dp_gf = family_slice(dp_fine, cfg.k_max, cfg.l_max);
    const GridFunction dp_gf_coarse = family_slice(dp_coarse, cfg.k_max, cfg.l_max);
    const GridFunction& pen_top = pen_fam.at(pen.k_max, top);
    const GridFunction& pen_prev = pen_fam.at(pen.k_max, std::max(0, top - 1));

    double self_dp = 0.0, self_qvi = 0.0, self_pen = 0.0;
    for (const ProbePoint& p : probes) {
        self_dp = std::max(self_dp,
                           std::abs(dp_gf.eval(p.t, p.x) - dp_gf_coarse.eval(p.t, p.x)));
        self_qvi = std::max(
            self_qvi, std::abs(qvi_fine.eval(p.t, p.x) - qvi_coarse.eval(p.t, p.x)));
        self_pen = std::max(
            self_pen, std::abs(pen_top.eval(p.t, p.x) - pen_prev.eval(p.t, p.x)));
    }
    const double tol = std::max(3.0 * (self_dp + self_qvi + self_pen), 1e-9);

    const CrossCheckReport report = cross_check(
        {{"dp", &dp_gf}, {"qvi", &qvi_fine}, {"penalized", &pen_top}}, probes, tol);

    json j = crosscheck_to_json(report);
    j["problem"] = spec.name;
    j["ordering"] = to_string(cfg.ordering);
    j["self_refinement"] = {{"dp", self_dp}, {"qvi", self_qvi}, {"penalized", self_pen}};
    j["tolerance"] = tol;
    fs::create_directories(cfg.out_dir);
    write_json(fs::path(cfg.out_dir) / "crosscheck.json", j);

    std::cout << std::setprecision(6) << "self-refinement gaps: dp=" << self_dp
              << " qvi=" << self_qvi << " penalized=" << self_pen << " -> tol=" << tol
              << '\n';
    double worst = 0.0;
    for (const CrossCheckEntry& e : report.entries) worst = std::max(worst, e.gap);
    std::cout << "largest cross gap " << worst << " over " << report.entries.size()
              << " comparisons: " << (report.passed() ? "agree" : "DISAGREE") << '\n';
    return report.passed() ? 0 : 1;
}

// Turns solver CSVs into whitespace-separated columns for plotting: one file
// per requested time row set, holding the t=0 slice at the largest budgets.
int cmd_report(const std::string& in_dir, const std::string& out_dir) {
    const fs::path manifest_path = fs::path(in_dir) / "manifest.json";
    if (!fs::exists(manifest_path))
        throw Error("no manifest.json in '" + in_dir + "' (run solve first)");
    std::ifstream min(manifest_path);
    const json manifest = json::parse(min);
    fs::create_directories(out_dir);

    int written = 0;
    for (const auto& art : manifest.at("artifacts")) {
        const std::string name = art.get<std::string>();
        if (name.find(".csv") == std::string::npos) continue;
        std::ifstream csv(fs::path(in_dir) / name);
        if (!csv) throw Error("missing artifact '" + name + "'");

        std::string header;
        std::getline(csv, header);
        std::vector<std::string> cols;
        {
            std::stringstream ss(header);
            std::string field;
            while (std::getline(ss, field, ',')) cols.push_back(field);
        }
        auto col = [&](const std::string& want) {
            for (std::size_t i = 0; i < cols.size(); ++i)
                if (cols[i] == want) return static_cast<int>(i);
            return -1;
        };
        const int c_ti = col("time_index");
        const int c_val = col("value");
        const int c_k = col("k");
        const int c_l = col("l");
        std::vector<int> c_x;
        for (int c = 0; col("x" + std::to_string(c)) >= 0; ++c)
            c_x.push_back(col("x" + std::to_string(c)));
        if (c_ti < 0 || c_val < 0 || c_x.empty()) continue;

        // Two passes: find the largest budgets, then emit the t=0 slice.
        std::vector<std::vector<std::string>> rows;
        std::string line;
        int k_top = 0, l_top = 0;
        while (std::getline(csv, line)) {
            std::stringstream ss(line);
            std::string field;
            std::vector<std::string> row;
            while (std::getline(ss, field, ',')) row.push_back(field);
            if (c_k >= 0) k_top = std::max(k_top, std::stoi(row[c_k]));
            if (c_l >= 0) l_top = std::max(l_top, std::stoi(row[c_l]));
            rows.push_back(std::move(row));
        }
        const std::string stem = name.substr(0, name.size() - 4);
        std::ofstream out(fs::path(out_dir) / (stem + "_t0.dat"));
        out << "# ";
        for (std::size_t c = 0; c < c_x.size(); ++c) out << "x" << c << ' ';
        out << "value\n";
        for (const auto& row : rows) {
            if (std::stoi(row[c_ti]) != 0) continue;
            if (c_k >= 0 && std::stoi(row[c_k]) != k_top) continue;
            if (c_l >= 0 && std::stoi(row[c_l]) != l_top) continue;
            for (int cx : c_x) out << row[cx] << ' ';
            out << row[c_val] << '\n';
        }
        ++written;
        std::cout << "  " << stem + "_t0.dat" << '\n';
    }
    std::cout << written << " column files in " << out_dir << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"zero-sum impulse game toolkit"};
    app.require_subcommand(1);

    CommonOpts v_opts, s_opts, c_opts;
    double box_half = 2.0;
    double loop_floor = 0.0;
    CLI::App* validate = app.add_subcommand("validate", "check instance regularity");
    v_opts.attach(validate);
    validate->add_option("--box-half", box_half, "sampling box half width");
    CLI::Option* o_floor =
        validate->add_option("--loop-floor", loop_floor,
                             "required cost floor for returning intervention chains");

    CLI::App* solve = app.add_subcommand("solve", "run a solver, write artifacts");
    s_opts.attach(solve);

    CLI::App* crosscheck =
        app.add_subcommand("crosscheck", "compare solver routes at probe points");
    c_opts.attach(crosscheck);

    std::string in_dir = "out", rep_out;
    CLI::App* report = app.add_subcommand("report", "emit gnuplot column files");
    report->add_option("--in", in_dir, "artifact directory from solve");
    report->add_option("--out,-o", rep_out, "column file directory (default --in)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (validate->parsed())
            return cmd_validate(v_opts.build(), box_half,
                                o_floor->count() ? std::optional<double>(loop_floor)
                                                 : std::nullopt);
        if (solve->parsed()) return cmd_solve(s_opts.build());
        if (crosscheck->parsed()) return cmd_crosscheck(c_opts.build());
        if (report->parsed())
            return cmd_report(in_dir, rep_out.empty() ? in_dir : rep_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
