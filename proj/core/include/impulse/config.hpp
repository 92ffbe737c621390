#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "impulse/dp_solver.hpp"
#include "impulse/model.hpp"
#include "impulse/qvi_solver.hpp"
#include "impulse/sde_sim.hpp"

#include <nlohmann/json.hpp>

namespace impulse {

// Everything one run needs, assembled from a JSON config file and command
// line overrides.  Serializing it back (canonical()) is what gets hashed
// into artifacts, so identical settings yield identical manifests.
struct RunConfig {
    std::string problem = "contraction-game";  // built-in name or config path
    std::string solver = "dp";                 // dp | qvi | penalized
    Ordering ordering = Ordering::minmax;
    double eps = 1.0 / 16.0;
    int k_max = 1;
    int l_max = 1;
    std::vector<int> penalty_levels = {8, 16};
    long long paths = 10000;
    int mesh_steps = 64;
    std::uint64_t seed = 1;
    int quad_order = 3;
    Vec grid_lo, grid_hi;          // empty = instance default box
    std::vector<int> grid_nodes;   // empty = instance default resolution
    std::vector<ProbePoint> probes;
    std::string out_dir = "out";

    int validation_samples = 10000;
    double commutativity_tol = 1e-9;

    std::string canonical() const;   // stable JSON text (sorted keys)
    std::uint64_t config_hash() const;  // FNV-1a of canonical()
};

RunConfig load_run_config(const std::string& path);
void apply_json_overrides(RunConfig& cfg, const nlohmann::json& j);

// Instance resolution: a known built-in name, else a path to a problem
// config assembled from coefficient templates (affine drift, constant or
// diagonal diffusion, polynomial data, multiplicative or null jumps,
// polynomial costs in time, state and action).
ProblemSpec load_problem(const std::string& name_or_path);
ProblemSpec problem_from_json(const nlohmann::json& j);

// Default spatial box and resolution per instance, overridable from config.
SpatialGrid default_grid(const ProblemSpec& spec, const RunConfig& cfg);
std::vector<ProbePoint> default_probes(const ProblemSpec& spec);

// Artifact writers.  All payloads are deterministic functions of config and
// seed; wall-clock timings live in a single manifest field callers may
// exclude when diffing.
nlohmann::json report_to_json(const ValidationReport& report);
nlohmann::json check_to_json(const CheckResult& check);
void write_value_csv(std::ostream& os, const ValueFamily& fam);
void write_grid_function_csv(std::ostream& os, const GridFunction& gf,
                             const std::string& label);
void write_path_csv(std::ostream& os, const PathSample& path, long long path_id);
void write_impulse_log_csv(std::ostream& os, const PathSample& path, long long path_id);
nlohmann::json strategy_to_json(const FeedbackStrategy& strat);
nlohmann::json crosscheck_to_json(const CrossCheckReport& report);

std::uint64_t fnv1a(const std::string& text);

}  // namespace impulse
