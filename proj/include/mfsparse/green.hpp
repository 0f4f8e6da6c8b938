#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <vector>

#include "errors.hpp"
#include "fields.hpp"
#include "geometry.hpp"
#include "kernels.hpp"
#include "parallel.hpp"

namespace mfsparse {

/// Traces B_j u at boundary quadrature nodes: traces[j][q] is the k-vector (B_j u)(node q).
struct BoundaryData {
    BoundaryQuadrature quad;
    std::vector<std::vector<Eigen::VectorXd>> traces;

    std::size_t operators() const noexcept { return traces.size(); }

    void validate(const Kernel& kernel) const {
        if (static_cast<int>(traces.size()) != kernel.order())
            throw ValidationError("boundary data needs one trace set per boundary operator");
        for (const auto& t : traces) {
            if (t.size() != quad.size()) throw ValidationError("trace length must equal the node count");
            for (const auto& v : t)
                if (v.size() != kernel.k()) throw ValidationError("trace values must have k components");
        }
    }

    BoundaryData scaled(double alpha) const {
        BoundaryData out = *this;
        for (auto& t : out.traces)
            for (auto& v : t) v *= alpha;
        return out;
    }

    BoundaryData plus(const BoundaryData& other) const {
        if (other.quad.size() != quad.size() || other.traces.size() != traces.size())
            throw ValidationError("boundary data sets differ in shape");
        BoundaryData out = *this;
        for (std::size_t j = 0; j < traces.size(); ++j)
            for (std::size_t q = 0; q < quad.size(); ++q) out.traces[j][q] += other.traces[j][q];
        return out;
    }
};

/// Samples (u, du/dnu) for Laplace kernels, or the value for Cauchy-Riemann, at the quadrature nodes.
template <Field F>
BoundaryData sample_boundary_data(const F& u, const Kernel& kernel, const BoundaryQuadrature& quad) {
    BoundaryData d{quad, std::vector<std::vector<Eigen::VectorXd>>(static_cast<std::size_t>(kernel.order()))};
    for (int j = 0; j < kernel.order(); ++j) {
        d.traces[j].resize(quad.size());
        for (std::size_t q = 0; q < quad.size(); ++q) d.traces[j][q] = boundary_values(u, j, quad.nodes[q], quad.normals[q]);
    }
    return d;
}

/// Minimum distance from the boundary, relative to the diameter, at which the quadrature is trusted.
inline constexpr double kNearBoundaryFraction = 1e-2;

/// Boundary-integral reproduction of u at x from its traces:
///   Laplace: int_{dD} (u dPhi/dnu_y - Phi du/dnu) dsigma_y,
///   Cauchy-Riemann: int_{dD} Phi(x, y) (nu_c / 2) f(y) dsigma_y with nu_c the complex unit normal.
/// Equals u(x) inside D and 0 outside the closed domain.
inline Eigen::VectorXd green_reproduce(const Kernel& kernel, const Domain& domain, const BoundaryData& bdata,
                                       const Point& x) {
    bdata.validate(kernel);
    if (x.size() != domain.dim()) throw ValidationError("evaluation point has wrong dimension");
    if (domain.distance_to_boundary(x) < kNearBoundaryFraction * domain.diameter())
        throw NearBoundary("evaluation point is within 1e-2 * diameter of the boundary");
    const BoundaryQuadrature& q = bdata.quad;
    Eigen::VectorXd s = Eigen::VectorXd::Zero(kernel.k());
    for (std::size_t i = 0; i < q.size(); ++i) {
        const Point& y = q.nodes[i];
        const Point& nu = q.normals[i];
        if (kernel.is_laplace()) {
            // Laplace kernels are symmetric, so dPhi(x, y)/dnu_y is the first-argument normal derivative at y.
            const double dphi = eval_boundary_op(kernel, 1, y, x, nu)(0, 0);
            const double phi = eval_kernel(kernel, x, y)(0, 0);
            s[0] += q.weights[i] * (bdata.traces[0][i][0] * dphi - phi * bdata.traces[1][i][0]);
        } else {
            const KernelValue half_normal = complex_to_real(0.5 * std::complex<double>(nu[0], nu[1]));
            s += q.weights[i] * (eval_kernel(kernel, x, y) * half_normal * bdata.traces[0][i]);
        }
    }
    return s;
}

struct ReproductionTable {
    std::vector<int> nodes;
    std::vector<double> error;
    /// Least-squares slope of -log(error) against log(nodes).
    double fitted_order = 0.0;
    /// Least-squares slope of -log(error) against nodes; positive for geometric decay.
    double geometric_rate = 0.0;
};

namespace detail {

inline double ls_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() < 2) return 0.0;
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double den = n * sxx - sx * sx;
    return den == 0.0 ? 0.0 : (n * sxy - sx * sy) / den;
}

}  // namespace detail

/// |green_reproduce - truth(x)|_inf for each node count, using boundary data sampled from the closed-form
/// field u. Errors at or below 1e-15 are excluded from the fits.
template <Field F>
ReproductionTable reproduce_convergence(const Kernel& kernel, const Domain& domain, const F& u, const Point& x,
                                        const std::vector<int>& node_counts) {
    ReproductionTable t;
    t.nodes = node_counts;
    t.error.resize(node_counts.size());
    const bool inside = domain.contains(x);
    const Eigen::VectorXd truth = inside ? Eigen::VectorXd(u.value(x)) : Eigen::VectorXd::Zero(kernel.k());
    parallel_for(node_counts.size(), [&](std::size_t i) {
        const BoundaryQuadrature quad = build_boundary_quadrature(domain, node_counts[i]);
        const BoundaryData d = sample_boundary_data(u, kernel, quad);
        t.error[i] = (green_reproduce(kernel, domain, d, x) - truth).cwiseAbs().maxCoeff();
    });
    std::vector<double> ln, n, le;
    for (std::size_t i = 0; i < node_counts.size(); ++i) {
        if (!(t.error[i] > 1e-15)) continue;
        ln.push_back(std::log(double(node_counts[i])));
        n.push_back(double(node_counts[i]));
        le.push_back(-std::log(t.error[i]));
    }
    t.fitted_order = detail::ls_slope(ln, le);
    t.geometric_rate = detail::ls_slope(n, le);
    return t;
}

}  // namespace mfsparse
