#include "impulse/config.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

namespace impulse {

using nlohmann::json;

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string RunConfig::canonical() const {
    json j;
    j["problem"] = problem;
    j["solver"] = solver;
    j["ordering"] = to_string(ordering);
    j["eps"] = eps;
    j["k_max"] = k_max;
    j["l_max"] = l_max;
    j["penalty_levels"] = penalty_levels;
    j["paths"] = paths;
    j["mesh_steps"] = mesh_steps;
    j["seed"] = seed;
    j["quad_order"] = quad_order;
    j["grid_lo"] = grid_lo;
    j["grid_hi"] = grid_hi;
    j["grid_nodes"] = grid_nodes;
    json probes_j = json::array();
    for (const ProbePoint& p : probes) probes_j.push_back({{"t", p.t}, {"x", p.x}});
    j["probes"] = probes_j;
    j["out_dir"] = out_dir;
    j["validation_samples"] = validation_samples;
    j["commutativity_tol"] = commutativity_tol;
    return j.dump();
}

std::uint64_t RunConfig::config_hash() const { return fnv1a(canonical()); }

void apply_json_overrides(RunConfig& cfg, const json& j) {
    static const std::set<std::string> known = {
        "problem",      "solver",      "ordering",   "eps",
        "k_max",        "l_max",       "penalty_levels", "paths",
        "mesh_steps",   "seed",        "quad_order", "grid_lo",
        "grid_hi",      "grid_nodes",  "probes",     "out_dir",
        "validation_samples", "commutativity_tol"};
    for (const auto& item : j.items())
        if (!known.count(item.key()))
            throw Error("config: unknown key '" + item.key() + "'");

    if (j.contains("problem")) cfg.problem = j["problem"].get<std::string>();
    if (j.contains("solver")) cfg.solver = j["solver"].get<std::string>();
    if (j.contains("ordering"))
        cfg.ordering = ordering_from_string(j["ordering"].get<std::string>());
    if (j.contains("eps")) cfg.eps = j["eps"].get<double>();
    if (j.contains("k_max")) cfg.k_max = j["k_max"].get<int>();
    if (j.contains("l_max")) cfg.l_max = j["l_max"].get<int>();
    if (j.contains("penalty_levels"))
        cfg.penalty_levels = j["penalty_levels"].get<std::vector<int>>();
    if (j.contains("paths")) cfg.paths = j["paths"].get<long long>();
    if (j.contains("mesh_steps")) cfg.mesh_steps = j["mesh_steps"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("quad_order")) cfg.quad_order = j["quad_order"].get<int>();
    if (j.contains("grid_lo")) cfg.grid_lo = j["grid_lo"].get<Vec>();
    if (j.contains("grid_hi")) cfg.grid_hi = j["grid_hi"].get<Vec>();
    if (j.contains("grid_nodes")) cfg.grid_nodes = j["grid_nodes"].get<std::vector<int>>();
    if (j.contains("probes")) {
        cfg.probes.clear();
        for (const auto& p : j["probes"]) {
            ProbePoint probe;
            probe.t = p.at("t").get<double>();
            probe.x = p.at("x").get<Vec>();
            cfg.probes.push_back(std::move(probe));
        }
    }
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("validation_samples"))
        cfg.validation_samples = j["validation_samples"].get<int>();
    if (j.contains("commutativity_tol"))
        cfg.commutativity_tol = j["commutativity_tol"].get<double>();
}

namespace {

json parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error("parse error in '" + path + "': " + e.what());
    }
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    apply_json_overrides(cfg, parse_file(path));
    return cfg;
}

namespace {

// t^p * prod x_i^{p_i} * prod a_j^{q_j} terms; the workhorse behind every
// scalar coefficient assembled from config.
struct Poly {
    struct Term {
        double coef = 0.0;
        int t_pow = 0;
        std::vector<int> x_pows;
        std::vector<int> a_pows;
    };
    std::vector<Term> terms;

    double eval(double t, std::span<const double> x, std::span<const double> a) const {
        double acc = 0.0;
        for (const Term& term : terms) {
            double v = term.coef;
            for (int p = 0; p < term.t_pow; ++p) v *= t;
            for (std::size_t i = 0; i < term.x_pows.size(); ++i)
                for (int p = 0; p < term.x_pows[i]; ++p) v *= x[i];
            for (std::size_t i = 0; i < term.a_pows.size(); ++i)
                for (int p = 0; p < term.a_pows[i]; ++p) v *= a[i];
            acc += v;
        }
        return acc;
    }
};

Poly parse_poly(const json& j, int dim, int action_dim, const std::string& where) {
    Poly poly;
    if (!j.contains("terms")) throw Error(where + ": poly needs 'terms'");
    for (const auto& tj : j["terms"]) {
        Poly::Term term;
        term.coef = tj.at("coef").get<double>();
        term.t_pow = tj.value("t_pow", 0);
        term.x_pows = tj.value("x_pows", std::vector<int>(dim, 0));
        term.a_pows = tj.value("a_pows", std::vector<int>(action_dim, 0));
        if (static_cast<int>(term.x_pows.size()) != dim)
            throw Error(where + ": x_pows length must equal dim");
        if (static_cast<int>(term.a_pows.size()) != action_dim)
            throw Error(where + ": a_pows length must equal the action dim");
        if (term.t_pow < 0) throw Error(where + ": negative power");
        for (int p : term.x_pows)
            if (p < 0) throw Error(where + ": negative power");
        for (int p : term.a_pows)
            if (p < 0) throw Error(where + ": negative power");
        poly.terms.push_back(std::move(term));
    }
    return poly;
}

ActionSet parse_action_set(const json& j, const std::string& where) {
    ActionSet set;
    set.lo = j.at("lo").get<Vec>();
    set.hi = j.at("hi").get<Vec>();
    if (set.lo.size() != set.hi.size() || set.lo.empty())
        throw Error(where + ": lo/hi must be nonempty and match");
    for (std::size_t i = 0; i < set.lo.size(); ++i)
        if (set.hi[i] < set.lo[i]) throw Error(where + ": hi < lo");
    return set;
}

using JumpFn = std::function<void(double, std::span<const double>,
                                  std::span<const double>, std::span<double>)>;

// Jump templates.  scale_axis: the action's first coordinate rescales one
// state coordinate; scale_all rescales the whole state; shift translates by
// the action vector; none is the zero displacement.
JumpFn parse_jump(const json& j, int dim, int action_dim, const std::string& where) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "none") {
        return [dim](double, std::span<const double>, std::span<const double>,
                     std::span<double> out) {
            for (int c = 0; c < dim; ++c) out[c] = 0.0;
        };
    }
    if (type == "scale_axis") {
        const int axis = j.at("axis").get<int>();
        if (axis < 0 || axis >= dim) throw Error(where + ": axis out of range");
        return [dim, axis](double, std::span<const double> x, std::span<const double> a,
                           std::span<double> out) {
            for (int c = 0; c < dim; ++c) out[c] = 0.0;
            out[axis] = (a[0] - 1.0) * x[axis];
        };
    }
    if (type == "scale_all") {
        return [dim](double, std::span<const double> x, std::span<const double> a,
                     std::span<double> out) {
            for (int c = 0; c < dim; ++c) out[c] = (a[0] - 1.0) * x[c];
        };
    }
    if (type == "shift") {
        if (action_dim != dim) throw Error(where + ": shift needs action dim == dim");
        return [dim](double, std::span<const double>, std::span<const double> a,
                     std::span<double> out) {
            for (int c = 0; c < dim; ++c) out[c] = a[c];
        };
    }
    throw Error(where + ": unknown jump type '" + type + "'");
}

}  // namespace

ProblemSpec problem_from_json(const json& j) {
    ProblemSpec spec;
    spec.name = j.value("name", std::string("custom"));
    spec.dim = j.at("dim").get<int>();
    if (spec.dim < 1 || spec.dim > 3) throw Error("problem: dim must be 1..3");
    spec.horizon = j.at("horizon").get<double>();
    if (spec.horizon <= 0.0) throw Error("problem: horizon must be positive");
    const int d = spec.dim;

    {
        const json& dj = j.at("drift");
        const std::string type = dj.at("type").get<std::string>();
        if (type == "none") {
            spec.drift = [d](double, std::span<const double>, std::span<double> out) {
                for (int c = 0; c < d; ++c) out[c] = 0.0;
            };
        } else if (type == "affine") {
            std::vector<Vec> A(d, Vec(d, 0.0));
            Vec b(d, 0.0);
            if (dj.contains("A")) {
                const auto rows = dj["A"].get<std::vector<Vec>>();
                if (static_cast<int>(rows.size()) != d)
                    throw Error("drift: A must be dim x dim");
                for (int r = 0; r < d; ++r) {
                    if (static_cast<int>(rows[r].size()) != d)
                        throw Error("drift: A must be dim x dim");
                    A[r] = rows[r];
                }
            }
            if (dj.contains("b")) {
                b = dj["b"].get<Vec>();
                if (static_cast<int>(b.size()) != d) throw Error("drift: b length");
            }
            spec.drift = [A, b, d](double, std::span<const double> x,
                                   std::span<double> out) {
                for (int r = 0; r < d; ++r) {
                    double acc = b[r];
                    for (int c = 0; c < d; ++c) acc += A[r][c] * x[c];
                    out[r] = acc;
                }
            };
        } else {
            throw Error("drift: unknown type '" + type + "'");
        }
    }

    {
        const json& sj = j.at("diffusion");
        const std::string type = sj.at("type").get<std::string>();
        if (type != "constant") throw Error("diffusion: unknown type '" + type + "'");
        Vec flat(static_cast<std::size_t>(d) * d, 0.0);
        if (sj.contains("diag")) {
            const Vec diag = sj["diag"].get<Vec>();
            if (static_cast<int>(diag.size()) != d) throw Error("diffusion: diag length");
            for (int c = 0; c < d; ++c) flat[c * d + c] = diag[c];
        } else if (sj.contains("matrix")) {
            const auto rows = sj["matrix"].get<std::vector<Vec>>();
            if (static_cast<int>(rows.size()) != d)
                throw Error("diffusion: matrix must be dim x dim");
            for (int r = 0; r < d; ++r) {
                if (static_cast<int>(rows[r].size()) != d)
                    throw Error("diffusion: matrix must be dim x dim");
                for (int c = 0; c < d; ++c) flat[r * d + c] = rows[r][c];
            }
        } else {
            throw Error("diffusion: need 'diag' or 'matrix'");
        }
        spec.diffusion = [flat, d](double, std::span<const double>, std::span<double> out) {
            for (int i = 0; i < d * d; ++i) out[i] = flat[i];
        };
    }

    spec.actions_p1 = parse_action_set(j.at("actions_p1"), "actions_p1");
    spec.actions_p2 = parse_action_set(j.at("actions_p2"), "actions_p2");
    const int ad1 = spec.actions_p1.dim();
    const int ad2 = spec.actions_p2.dim();

    {
        const Poly f = parse_poly(j.at("running_cost"), d, 0, "running_cost");
        spec.running_cost = [f](double t, std::span<const double> x) {
            return f.eval(t, x, {});
        };
        const Poly psi = parse_poly(j.at("terminal_value"), d, 0, "terminal_value");
        for (const auto& term : psi.terms)
            if (term.t_pow != 0) throw Error("terminal_value: must not depend on t");
        spec.terminal_value = [psi](std::span<const double> x) {
            return psi.eval(0.0, x, {});
        };
    }

    spec.jump_p1 = parse_jump(j.at("jump_p1"), d, ad1, "jump_p1");
    spec.jump_p2 = parse_jump(j.at("jump_p2"), d, ad2, "jump_p2");

    {
        const Poly c1 = parse_poly(j.at("cost_p1"), d, ad1, "cost_p1");
        spec.cost_p1 = [c1](double t, std::span<const double> x,
                            std::span<const double> a) { return c1.eval(t, x, a); };
        const Poly c2 = parse_poly(j.at("cost_p2"), d, ad2, "cost_p2");
        spec.cost_p2 = [c2](double t, std::span<const double> x,
                            std::span<const double> a) { return c2.eval(t, x, a); };
    }

    spec.marks.total_mass = j.value("marks", json::object()).value("total_mass", 1.0);
    if (spec.marks.total_mass <= 0.0) throw Error("marks: total_mass must be positive");

    spec.cost_floor = j.value("cost_floor", 0.1);
    spec.growth_exp = j.value("growth_exp", 2.0);
    spec.jump_bound = j.value("jump_bound", 1.0);
    spec.lip_jump = j.value("lip_jump", 1.0);
    spec.lip_coeffs = j.value("lip_coeffs", 0.0);
    spec.growth_const = j.value("growth_const", 1.0);
    return spec;
}

ProblemSpec load_problem(const std::string& name_or_path) {
    if (name_or_path == "contraction-game" || name_or_path == "no-op-game" ||
        name_or_path == "drift-duel-1d")
        return builtin_instance(name_or_path);
    return problem_from_json(parse_file(name_or_path));
}

SpatialGrid default_grid(const ProblemSpec& spec, const RunConfig& cfg) {
    const int d = spec.dim;
    Vec lo = cfg.grid_lo, hi = cfg.grid_hi;
    if (lo.empty() != hi.empty())
        throw Error("config: grid_lo and grid_hi must be given together");
    if (lo.empty()) {
        lo.assign(d, -3.0);
        hi.assign(d, 3.0);
    }
    if (static_cast<int>(lo.size()) != d || static_cast<int>(hi.size()) != d)
        throw Error("config: grid bounds must have the problem dimension");

    std::vector<int> nodes = cfg.grid_nodes;
    if (nodes.empty()) {
        const int per_axis = d == 1 ? 161 : (d == 2 ? 41 : 17);
        nodes.assign(d, per_axis);
    } else if (nodes.size() == 1 && d > 1) {
        nodes.assign(d, nodes[0]);
    }
    if (static_cast<int>(nodes.size()) != d)
        throw Error("config: grid_nodes must have the problem dimension");
    return SpatialGrid::uniform(std::move(lo), std::move(hi), std::move(nodes));
}

std::vector<ProbePoint> default_probes(const ProblemSpec& spec) {
    const double T = spec.horizon;
    const std::vector<double> times = {0.0, 0.25 * T, 0.5 * T};
    std::vector<Vec> states;
    if (spec.dim == 1) {
        states = {{-1.5}, {-0.5}, {0.5}, {1.5}};
    } else if (spec.dim == 2) {
        states = {{1.0, 1.0}, {-1.0, 1.0}, {1.5, 0.0}, {0.0, -1.5}};
    } else {
        states = {{1.0, 1.0, 1.0}, {-1.0, 0.5, -0.5}, {0.0, 0.0, 1.5}};
    }
    std::vector<ProbePoint> probes;
    for (double t : times)
        for (const Vec& x : states) probes.push_back(ProbePoint{t, x});
    return probes;
}

namespace {

const char* status_name(CheckStatus s) {
    switch (s) {
        case CheckStatus::pass: return "pass";
        case CheckStatus::warn: return "warn";
        default: return "fail";
    }
}

}  // namespace

json check_to_json(const CheckResult& check) {
    json w;
    w["t"] = check.witness.t;
    w["x"] = check.witness.x;
    w["x_alt"] = check.witness.x_alt;
    w["action"] = check.witness.action;
    w["action_alt"] = check.witness.action_alt;
    w["note"] = check.witness.note;
    json j;
    j["check"] = check.check;
    j["status"] = status_name(check.status);
    j["residual"] = check.residual;
    j["witness"] = w;
    return j;
}

json report_to_json(const ValidationReport& report) {
    json j;
    j["problem"] = report.problem;
    j["passed"] = report.passed();
    j["warnings"] = report.has_warnings();
    json checks = json::array();
    for (const CheckResult& c : report.checks) checks.push_back(check_to_json(c));
    j["checks"] = checks;
    return j;
}

namespace {

std::ostream& full_precision(std::ostream& os) {
    os << std::setprecision(17);
    return os;
}

void write_state(std::ostream& os, std::span<const double> x) {
    for (double v : x) os << ',' << v;
}

}  // namespace

void write_value_csv(std::ostream& os, const ValueFamily& fam) {
    full_precision(os);
    os << "ordering,k,l,time_index,t,node";
    for (int c = 0; c < fam.grid.dim(); ++c) os << ",x" << c;
    os << ",value,bind_p1,argmax_p1,bind_p2,argmin_p2\n";
    Vec x(fam.grid.dim());
    for (int k = 0; k <= fam.k_max; ++k)
        for (int l = 0; l <= fam.l_max; ++l)
            for (int i = 0; i < fam.tgrid.points(); ++i)
                for (int g = 0; g < fam.grid.total(); ++g) {
                    fam.grid.node(g, x);
                    const std::size_t at = fam.index(k, l, i, g);
                    os << to_string(fam.ordering) << ',' << k << ',' << l << ',' << i
                       << ',' << fam.tgrid.time(i) << ',' << g;
                    write_state(os, x);
                    os << ',' << fam.values[at] << ',' << int(fam.bind_p1[at]) << ','
                       << fam.argmax_p1[at] << ',' << int(fam.bind_p2[at]) << ','
                       << fam.argmin_p2[at] << '\n';
                }
}

void write_grid_function_csv(std::ostream& os, const GridFunction& gf,
                             const std::string& label) {
    full_precision(os);
    os << "label,time_index,t,node";
    for (int c = 0; c < gf.grid.dim(); ++c) os << ",x" << c;
    os << ",value\n";
    Vec x(gf.grid.dim());
    for (int j = 0; j < gf.times(); ++j)
        for (int g = 0; g < gf.grid.total(); ++g) {
            gf.grid.node(g, x);
            os << label << ',' << j << ',' << gf.time(j) << ',' << g;
            write_state(os, x);
            os << ',' << gf.slices[j][g] << '\n';
        }
}

void write_path_csv(std::ostream& os, const PathSample& path, long long path_id) {
    full_precision(os);
    os << "path,point,t";
    for (int c = 0; c < path.dim; ++c) os << ",x" << c;
    os << '\n';
    for (std::size_t i = 0; i < path.times.size(); ++i) {
        os << path_id << ',' << i << ',' << path.times[i];
        write_state(os, path.state_at(static_cast<int>(i)));
        os << '\n';
    }
}

void write_impulse_log_csv(std::ostream& os, const PathSample& path, long long path_id) {
    full_precision(os);
    os << "path,jump,t,owner,cost";
    for (int c = 0; c < path.dim; ++c) os << ",pre_x" << c;
    os << ",action\n";
    for (std::size_t i = 0; i < path.jumps.size(); ++i) {
        const auto& jump = path.jumps[i];
        os << path_id << ',' << i << ',' << jump.time << ','
           << (jump.owner == Player::p1 ? 1 : 2) << ',' << jump.cost;
        write_state(os, jump.pre_state);
        os << ',';
        for (std::size_t c = 0; c < jump.action.size(); ++c)
            os << (c ? ";" : "") << jump.action[c];
        os << '\n';
    }
}

json strategy_to_json(const FeedbackStrategy& strat) {
    json j;
    j["player"] = strat.player == Player::p1 ? 1 : 2;
    j["k_max"] = strat.k_max;
    j["l_max"] = strat.l_max;
    j["time_points"] = strat.tgrid.points();
    j["horizon"] = strat.tgrid.horizon;
    j["grid_lo"] = strat.grid.lo;
    j["grid_hi"] = strat.grid.hi;
    j["grid_nodes"] = strat.grid.nodes_per_axis;
    json reps = json::array();
    for (const Vec& r : strat.actions.reps) reps.push_back(r);
    j["actions"] = reps;
    // Sparse table: only entries where the rule fires.
    json fires = json::array();
    const std::size_t per_kl =
        static_cast<std::size_t>(strat.tgrid.points()) * strat.grid.total();
    for (std::size_t at = 0; at < strat.act.size(); ++at) {
        if (strat.act[at] < 0) continue;
        const std::size_t kl = at / per_kl;
        const std::size_t rest = at % per_kl;
        json e;
        e["k"] = static_cast<int>(kl / (strat.l_max + 1));
        e["l"] = static_cast<int>(kl % (strat.l_max + 1));
        e["i"] = static_cast<int>(rest / strat.grid.total());
        e["g"] = static_cast<int>(rest % strat.grid.total());
        e["a"] = strat.act[at];
        fires.push_back(e);
    }
    j["fires"] = fires;
    j["fire_count"] = fires.size();
    return j;
}

json crosscheck_to_json(const CrossCheckReport& report) {
    json j;
    j["passed"] = report.passed();
    json entries = json::array();
    for (const CrossCheckEntry& e : report.entries) {
        json ej;
        ej["label"] = e.label;
        ej["t"] = e.t;
        ej["x"] = e.x;
        ej["value_a"] = e.value_a;
        ej["value_b"] = e.value_b;
        ej["gap"] = e.gap;
        ej["tol"] = e.tol;
        ej["pass"] = e.pass;
        entries.push_back(ej);
    }
    j["entries"] = entries;
    return j;
}

}  // namespace impulse
