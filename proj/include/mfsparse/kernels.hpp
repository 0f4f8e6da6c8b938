#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <string_view>

#include "errors.hpp"

namespace mfsparse {

/// A point of R^n with n <= 3; never allocates.
using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;

/// k x k value of a fundamental solution (or of a boundary operator applied to it).
using KernelValue = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 2, 2>;

/// Derivatives of Phi(., y) with respect to each coordinate of x; only the first n entries are used.
using KernelGradient = std::array<KernelValue, 3>;

enum class OperatorId { Laplace2D, Laplace3D, CauchyRiemann2D };

inline constexpr double kDefaultSingularityGuard = 1e-12;

/// Descriptor of an elliptic operator together with its bilateral fundamental solution.
struct Kernel {
    OperatorId id = OperatorId::Laplace2D;
    double singularity_guard = kDefaultSingularityGuard;

    /// Ambient dimension n.
    int dim() const noexcept { return id == OperatorId::Laplace3D ? 3 : 2; }
    /// System size k (2 for the decomplexified Cauchy-Riemann operator).
    int k() const noexcept { return id == OperatorId::CauchyRiemann2D ? 2 : 1; }
    /// Operator order m; also the length of the Dirichlet system.
    int order() const noexcept { return id == OperatorId::CauchyRiemann2D ? 1 : 2; }
    bool is_laplace() const noexcept { return id != OperatorId::CauchyRiemann2D; }
};

inline std::string_view kernel_name(OperatorId id) {
    switch (id) {
    case OperatorId::Laplace2D: return "laplace2d";
    case OperatorId::Laplace3D: return "laplace3d";
    case OperatorId::CauchyRiemann2D: return "cauchy-riemann";
    }
    return "unknown";
}

inline Kernel parse_kernel(std::string_view name) {
    if (name == "laplace2d") return Kernel{OperatorId::Laplace2D};
    if (name == "laplace3d") return Kernel{OperatorId::Laplace3D};
    if (name == "cauchy-riemann") return Kernel{OperatorId::CauchyRiemann2D};
    throw ValidationError("unknown kernel id '" + std::string(name) + "'");
}

/// Area of the unit sphere in R^n.
inline double unit_sphere_area(int n) {
    return n == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
}

/// Real 2 x 2 representation [[a, -b], [b, a]] of the complex scalar a + ib.
inline KernelValue complex_to_real(std::complex<double> w) {
    KernelValue m(2, 2);
    m << w.real(), -w.imag(), w.imag(), w.real();
    return m;
}

namespace detail {

inline void check_point(const Kernel& kernel, const Point& p, const char* what) {
    if (p.size() != kernel.dim())
        throw ValidationError(std::string(what) + " has dimension " + std::to_string(p.size()) +
                              ", kernel '" + std::string(kernel_name(kernel.id)) + "' expects " +
                              std::to_string(kernel.dim()));
    if (!p.allFinite()) throw ValidationError(std::string(what) + " has non-finite coordinates");
}

inline double guarded_distance(const Kernel& kernel, const Point& x, const Point& y) {
    check_point(kernel, x, "x");
    check_point(kernel, y, "y");
    const double r = (x - y).norm();
    if (!(r > kernel.singularity_guard))
        throw SingularEvaluation("kernel evaluated at |x - y| = " + std::to_string(r) +
                                 " inside the singularity guard");
    return r;
}

inline std::complex<double> to_complex(const Point& p) { return {p[0], p[1]}; }

}  // namespace detail

/// Phi(x, y): (1/2pi) ln|x-y| in 2D, |x-y|^{-1} / ((2-3) 4pi) in 3D, 1/(pi (zeta - z)) for
/// Cauchy-Riemann with z = x1 + i x2, zeta = y1 + i y2.
inline KernelValue eval_kernel(const Kernel& kernel, const Point& x, const Point& y) {
    const double r = detail::guarded_distance(kernel, x, y);
    KernelValue v(kernel.k(), kernel.k());
    switch (kernel.id) {
    case OperatorId::Laplace2D:
        v(0, 0) = std::log(r) / (2.0 * std::numbers::pi);
        return v;
    case OperatorId::Laplace3D:
        v(0, 0) = 1.0 / ((2.0 - 3.0) * unit_sphere_area(3) * r);
        return v;
    case OperatorId::CauchyRiemann2D:
        return complex_to_real(1.0 / (std::numbers::pi * (detail::to_complex(y) - detail::to_complex(x))));
    }
    return v;
}

/// Gradient of Phi(., y) with respect to x.
inline KernelGradient kernel_gradient(const Kernel& kernel, const Point& x, const Point& y) {
    const double r = detail::guarded_distance(kernel, x, y);
    KernelGradient g;
    if (kernel.is_laplace()) {
        const int n = kernel.dim();
        const double scale = 1.0 / (unit_sphere_area(n) * std::pow(r, n));
        for (int i = 0; i < n; ++i) {
            g[i] = KernelValue(1, 1);
            g[i](0, 0) = scale * (x[i] - y[i]);
        }
        return g;
    }
    // d/dz of 1/(pi (zeta - z)); d/dx1 = d/dz and d/dx2 = i d/dz for holomorphic functions.
    const std::complex<double> diff = detail::to_complex(y) - detail::to_complex(x);
    const std::complex<double> deriv = 1.0 / (std::numbers::pi * diff * diff);
    g[0] = complex_to_real(deriv);
    g[1] = complex_to_real(std::complex<double>(0.0, 1.0) * deriv);
    return g;
}

/// B_j Phi(., y) at x for the Dirichlet system (identity, normal derivative) of the Laplacian,
/// or (identity) for Cauchy-Riemann.
inline KernelValue eval_boundary_op(const Kernel& kernel, int op_index, const Point& x, const Point& y,
                                    const Point& normal_at_x) {
    if (op_index < 0 || op_index >= kernel.order())
        throw UnsupportedOperator("boundary operator " + std::to_string(op_index) + " not defined for '" +
                                  std::string(kernel_name(kernel.id)) + "'");
    if (op_index == 0) return eval_kernel(kernel, x, y);
    detail::check_point(kernel, normal_at_x, "normal");
    const KernelGradient g = kernel_gradient(kernel, x, y);
    KernelValue v = KernelValue::Zero(kernel.k(), kernel.k());
    for (int i = 0; i < kernel.dim(); ++i) v += normal_at_x[i] * g[i];
    return v;
}

/// Centered finite-difference application of the operator to Phi(., y) at x: the discrete Laplacian,
/// or |d-bar f| of the holomorphic column f = Phi(., y) e_1 for Cauchy-Riemann.
inline double pde_residual(const Kernel& kernel, const Point& x, const Point& y, double h) {
    if (!(h > 0.0)) throw ValidationError("finite-difference step must be positive");
    const double r = detail::guarded_distance(kernel, x, y);
    if (r < 10.0 * h)
        throw SingularEvaluation("finite-difference stencil too close to the singularity (|x - y| < 10 h)");
    const int n = kernel.dim();
    auto shifted = [&](int axis, double s) {
        Point p = x;
        p[axis] += s;
        return p;
    };
    if (kernel.is_laplace()) {
        const double center = eval_kernel(kernel, x, y)(0, 0);
        double lap = 0.0;
        for (int i = 0; i < n; ++i) {
            lap += eval_kernel(kernel, shifted(i, h), y)(0, 0) - 2.0 * center +
                   eval_kernel(kernel, shifted(i, -h), y)(0, 0);
        }
        return lap / (h * h);
    }
    auto column = [&](const Point& p) {
        const KernelValue v = eval_kernel(kernel, p, y);
        return std::complex<double>(v(0, 0), v(1, 0));
    };
    const std::complex<double> fx = (column(shifted(0, h)) - column(shifted(0, -h))) / (2.0 * h);
    const std::complex<double> fy = (column(shifted(1, h)) - column(shifted(1, -h))) / (2.0 * h);
    return std::abs(0.5 * (fx + std::complex<double>(0.0, 1.0) * fy));
}

}  // namespace mfsparse
