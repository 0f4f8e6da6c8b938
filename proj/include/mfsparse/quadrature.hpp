#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace mfsparse {

struct Rule1D {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [a, b], nodes by Newton iteration on P_n.
inline Rule1D gauss_legendre(int n, double a = -1.0, double b = 1.0) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
    Rule1D rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        // Refresh the derivative at the converged node.
        double p0 = 1.0, p1 = 0.0;
        for (int j = 0; j < n; ++j) {
            const double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        const double w = 2.0 / ((1.0 - z * z) * dp * dp);
        rule.nodes[i] = mid - half * z;
        rule.nodes[n - 1 - i] = mid + half * z;
        rule.weights[i] = half * w;
        rule.weights[n - 1 - i] = half * w;
    }
    return rule;
}

/// Equispaced periodic trapezoid rule on [0, 2pi) starting at `offset`.
inline Rule1D periodic_trapezoid(int n, double offset = 0.0) {
    if (n < 1) throw std::invalid_argument("periodic_trapezoid: n must be positive");
    Rule1D rule;
    rule.nodes.resize(n);
    rule.weights.assign(n, 2.0 * std::numbers::pi / n);
    for (int i = 0; i < n; ++i) rule.nodes[i] = offset + 2.0 * std::numbers::pi * i / n;
    return rule;
}

}  // namespace mfsparse
