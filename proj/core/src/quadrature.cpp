#include "impulse/quadrature.hpp"

#include <gsl/gsl_integration.h>

#include <cmath>
#include <memory>

#include "impulse/types.hpp"

namespace impulse {

GaussHermite gauss_hermite(int order) {
    if (order < 1) throw Error("gauss_hermite: order must be >= 1");
    // GSL tables the rule for weight exp(-z^2); substituting z = xi/sqrt(2)
    // turns it into the standard normal expectation.
    using Table = std::unique_ptr<gsl_integration_fixed_workspace,
                                  decltype(&gsl_integration_fixed_free)>;
    Table ws(gsl_integration_fixed_alloc(gsl_integration_fixed_hermite,
                                         static_cast<std::size_t>(order), 0.0, 1.0, 0.0,
                                         0.0),
             &gsl_integration_fixed_free);
    if (!ws) throw Error("gauss_hermite: GSL workspace allocation failed");

    const double* z = gsl_integration_fixed_nodes(ws.get());
    const double* w = gsl_integration_fixed_weights(ws.get());

    GaussHermite rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    double total = 0.0;
    for (int i = 0; i < order; ++i) {
        rule.nodes[i] = z[i] * std::sqrt(2.0);
        rule.weights[i] = w[i];
        total += w[i];
    }
    // total is sqrt(pi) up to rounding; dividing by the computed sum pins the
    // weight sum to 1 exactly enough for downstream identity checks.
    for (double& wi : rule.weights) wi /= total;
    return rule;
}

}  // namespace impulse
