#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "impulse/types.hpp"

namespace impulse {

// Compact axis-aligned action box.  Continuous sets enter the solvers only
// through finite partitions built from this descriptor (see discretize).
struct ActionSet {
    Vec lo;
    Vec hi;
    int dim() const { return static_cast<int>(lo.size()); }
};

// Finite measure on the minimizer's action set.  Mass is spread uniformly
// over partition cells, so every cell of every partition carries strictly
// positive weight.
struct MarkMeasure {
    double total_mass = 1.0;
};

// Two-player impulse game data.  Vector-valued coefficients write into `out`
// spans (hot loops evaluate them once per node and action).  Jump maps return
// displacements: the post-intervention state is x + jump(t, x, action).
//
// Declared constants are promises the validators test by sampling:
//   cost_floor   lower bound of both intervention costs,
//   growth_exp   polynomial growth exponent of f, psi and the costs,
//   jump_bound   |x + jump| <= max(jump_bound, |x|),
//   lip_jump     Lipschitz constant of both jump maps in x,
//   lip_coeffs   Lipschitz constant of drift and diffusion in x,
//   growth_const |drift|+|diffusion| <= C(1+|x|), data <= C(1+|x|^rho).
struct ProblemSpec {
    std::string name;
    int dim = 1;
    double horizon = 1.0;

    std::function<void(double, std::span<const double>, std::span<double>)> drift;
    // Row-major dim x dim matrix.
    std::function<void(double, std::span<const double>, std::span<double>)> diffusion;
    std::function<double(double, std::span<const double>)> running_cost;
    std::function<double(std::span<const double>)> terminal_value;

    std::function<void(double, std::span<const double>, std::span<const double>,
                       std::span<double>)>
        jump_p1;  // maximizer's displacement
    std::function<void(double, std::span<const double>, std::span<const double>,
                       std::span<double>)>
        jump_p2;  // minimizer's displacement
    std::function<double(double, std::span<const double>, std::span<const double>)>
        cost_p1;  // subtracted from the maximizer's payoff
    std::function<double(double, std::span<const double>, std::span<const double>)>
        cost_p2;  // added to the maximizer's payoff

    ActionSet actions_p1;
    ActionSet actions_p2;
    MarkMeasure marks;

    double cost_floor = 0.1;
    double growth_exp = 2.0;
    double jump_bound = 1.0;
    double lip_jump = 1.0;
    double lip_coeffs = 0.0;
    double growth_const = 1.0;

    // Convenience wrappers allocating the result.
    Vec drift_at(double t, std::span<const double> x) const;
    Vec diffusion_at(double t, std::span<const double> x) const;
    Vec post_jump_p1(double t, std::span<const double> x, std::span<const double> b) const;
    Vec post_jump_p2(double t, std::span<const double> x, std::span<const double> e) const;
};

enum class CheckStatus { pass, warn, fail };

// Enough context to re-evaluate the reported residual from scratch.
struct Witness {
    double t = 0.0;
    Vec x;
    Vec x_alt;
    Vec action;
    Vec action_alt;
    std::string note;
};

struct CheckResult {
    std::string check;
    CheckStatus status = CheckStatus::pass;
    double residual = 0.0;
    Witness witness;
};

struct ValidationReport {
    std::string problem;
    std::vector<CheckResult> checks;
    bool passed() const;      // no fail entries
    bool has_warnings() const;
};

struct SampleBox {
    Vec lo;
    Vec hi;
    static SampleBox cube(int dim, double half_width);
};

// Growth and Lipschitz ratios of the coefficients against the declared
// constants, the jump bound, the cost floor, and finiteness of everything,
// all on `samples` quasi-random points of the box (pairs at distance >= 1e-6
// for difference quotients).  Deterministic in (spec, box, samples, seed).
ValidationReport validate_regularity(const ProblemSpec& spec, const SampleBox& box,
                                     int samples, std::uint64_t seed);

// Order-independence of the two players' interventions.  The gating residual
// compares the final states of the two application orders; the same-argument
// identity on the displacement maps themselves is reported as information
// only, since it fails even for natural multiplicative jumps whose final
// states agree.  Cost invariance under the other player's jump is gating.
ValidationReport check_commutativity(const ProblemSpec& spec, const SampleBox& box,
                                     int samples, std::uint64_t seed, double tol = 1e-9);

// At the horizon no intervention may be profitable:
// sup_b psi(x + jump_p1) - cost_p1 <= psi(x) <= inf_e psi(x + jump_p2) + cost_p2,
// both within tol, with sup/inf over `action_resolution` representatives per
// axis.
ValidationReport check_terminal_consistency(const ProblemSpec& spec, const SampleBox& box,
                                            int samples, std::uint64_t seed,
                                            double tol = 1e-9, int action_resolution = 17);

struct FreeLoopQuery {
    double t = 0.0;
    Vec x0;
    int max_cycle = 2;       // chain length kappa
    int samples = 20000;     // chain draws when exhaustive enumeration is too big
    int action_resolution = 9;
    std::optional<double> h2;  // required cost floor for returning chains
    std::uint64_t seed = 0;
};

// Scans intervention chains that return to within h1 = 1e-3 * (1 + |x0|) of
// the start and reports the smallest |signed cost sum| found.  With h2 given
// this passes/fails against it; without it the minimum is reported as the
// candidate floor.  Mixed chains using both players' no-op-equivalent actions
// typically drive the minimum to zero, which is worth knowing, not hiding.
CheckResult check_no_free_loop(const ProblemSpec& spec, const FreeLoopQuery& query);

// "contraction-game", "no-op-game" or "drift-duel-1d"; anything else throws.
ProblemSpec builtin_instance(const std::string& name);

}  // namespace impulse
