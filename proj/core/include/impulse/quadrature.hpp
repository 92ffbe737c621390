#pragma once

#include <vector>

namespace impulse {

// Nodes and weights for E[h(Z)], Z standard normal: E[h] ~ sum w_i h(z_i).
// Weights are normalized so they sum to 1 exactly (up to one final division),
// nodes come out symmetric about 0.  Exact for polynomials up to degree
// 2*order - 1.
struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;
    int order() const { return static_cast<int>(nodes.size()); }
};

GaussHermite gauss_hermite(int order);

}  // namespace impulse
