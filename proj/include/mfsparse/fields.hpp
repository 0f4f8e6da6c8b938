#pragma once

#include <Eigen/Dense>

#include <complex>
#include <concepts>
#include <functional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "kernels.hpp"

namespace mfsparse {

/// Anything that can be sampled like a solution: k values and a k x n gradient at a point.
template <class F>
concept Field = requires(const F& f, const Point& x) {
    { f.components() } -> std::convertible_to<int>;
    { f.value(x) } -> std::convertible_to<Eigen::VectorXd>;
    { f.gradient(x) } -> std::convertible_to<Eigen::MatrixXd>;
};

/// u(x) = sum_j Phi(x, y_j) C_j with every y_j outside the closed domain.
struct KernelExpansion {
    Kernel kernel;
    std::vector<Point> sources;
    std::vector<Eigen::VectorXd> coefficients;

    KernelExpansion() = default;
    explicit KernelExpansion(Kernel k) : kernel(k) {}
    KernelExpansion(Kernel k, std::vector<Point> ys, std::vector<Eigen::VectorXd> cs)
        : kernel(k), sources(std::move(ys)), coefficients(std::move(cs)) {
        if (sources.size() != coefficients.size())
            throw ValidationError("expansion needs one coefficient vector per source");
        for (const auto& c : coefficients)
            if (c.size() != kernel.k()) throw ValidationError("coefficient vector length must equal k");
    }

    int components() const { return kernel.k(); }
    std::size_t size() const { return sources.size(); }

    Eigen::VectorXd value(const Point& x) const {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(kernel.k());
        for (std::size_t j = 0; j < sources.size(); ++j) v += eval_kernel(kernel, x, sources[j]) * coefficients[j];
        return v;
    }

    Eigen::MatrixXd gradient(const Point& x) const {
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(kernel.k(), kernel.dim());
        for (std::size_t j = 0; j < sources.size(); ++j) {
            const KernelGradient kg = kernel_gradient(kernel, x, sources[j]);
            for (int i = 0; i < kernel.dim(); ++i) g.col(i) += kg[i] * coefficients[j];
        }
        return g;
    }

    KernelExpansion scaled(double alpha) const {
        KernelExpansion out = *this;
        for (auto& c : out.coefficients) c *= alpha;
        return out;
    }

    /// Concatenation; represents u + v.
    KernelExpansion plus(const KernelExpansion& other) const {
        KernelExpansion out = *this;
        out.sources.insert(out.sources.end(), other.sources.begin(), other.sources.end());
        out.coefficients.insert(out.coefficients.end(), other.coefficients.begin(), other.coefficients.end());
        return out;
    }
};

/// B_op applied to a field at x: the value, or the normal derivative.
template <Field F>
Eigen::VectorXd boundary_values(const F& field, int op_index, const Point& x, const Point& normal) {
    if (op_index == 0) return field.value(x);
    if (op_index == 1) return field.gradient(x) * normal.head(x.size());
    throw UnsupportedOperator("boundary operator index " + std::to_string(op_index));
}

/// Closed-form field given by callables; used for reference solutions.
class ClosedFormField {
public:
    using ValueFn = std::function<Eigen::VectorXd(const Point&)>;
    using GradFn = std::function<Eigen::MatrixXd(const Point&)>;

    ClosedFormField(std::string name, int components, ValueFn value, GradFn gradient)
        : name_(std::move(name)), components_(components), value_(std::move(value)), gradient_(std::move(gradient)) {}

    const std::string& name() const { return name_; }
    int components() const { return components_; }
    Eigen::VectorXd value(const Point& x) const { return value_(x); }
    Eigen::MatrixXd gradient(const Point& x) const { return gradient_(x); }

private:
    std::string name_;
    int components_;
    ValueFn value_;
    GradFn gradient_;
};

namespace detail {

inline ClosedFormField scalar_field(std::string name, int dim, std::function<double(const Point&)> f,
                                    std::function<Eigen::VectorXd(const Point&)> grad) {
    return ClosedFormField(
        std::move(name), 1,
        [f](const Point& x) { return Eigen::VectorXd::Constant(1, f(x)); },
        [grad, dim](const Point& x) {
            Eigen::MatrixXd g(1, dim);
            g.row(0) = grad(x).transpose();
            return g;
        });
}

inline Eigen::VectorXd vec2(double a, double b) {
    Eigen::VectorXd v(2);
    v << a, b;
    return v;
}

inline Eigen::VectorXd vec3(double a, double b, double c) {
    Eigen::VectorXd v(3);
    v << a, b, c;
    return v;
}

inline int parse_power(const std::string& name, const std::string& prefix) {
    try {
        std::size_t used = 0;
        const int p = std::stoi(name.substr(prefix.size()), &used);
        if (used + prefix.size() != name.size() || p < 0 || p > 20) throw std::invalid_argument(name);
        return p;
    } catch (const std::exception&) {
        throw ValidationError("bad power in truth id '" + name + "'");
    }
}

}  // namespace detail

/// Reference solutions of A u = 0 by id: "zero", "constant", "x1^2-x2^2", "x1*x2", "re-z^p", "im-z^p"
/// (planar Laplace), "x1^2-x2^2", "x1*x2*x3", "x1^2+x2^2-2x3^2" (3D Laplace), "z^p" (Cauchy-Riemann).
inline ClosedFormField make_truth(const std::string& name, const Kernel& kernel) {
    const int n = kernel.dim();
    const int k = kernel.k();
    if (name == "zero" || name == "none")
        return ClosedFormField(
            name, k, [k](const Point&) { return Eigen::VectorXd::Zero(k); },
            [k, n](const Point&) { return Eigen::MatrixXd::Zero(k, n); });
    if (kernel.id == OperatorId::CauchyRiemann2D) {
        int p = 0;
        if (name == "constant") p = 0;
        else if (name.rfind("z^", 0) == 0) p = detail::parse_power(name, "z^");
        else throw ValidationError("unknown Cauchy-Riemann truth '" + name + "'");
        return ClosedFormField(
            name, 2,
            [p](const Point& x) {
                const std::complex<double> w = std::pow(std::complex<double>(x[0], x[1]), p);
                return detail::vec2(w.real(), w.imag());
            },
            [p](const Point& x) {
                const std::complex<double> z(x[0], x[1]);
                const std::complex<double> d = p == 0 ? 0.0 : double(p) * std::pow(z, p - 1);
                const std::complex<double> dy = std::complex<double>(0.0, 1.0) * d;
                Eigen::MatrixXd g(2, 2);
                g << d.real(), dy.real(), d.imag(), dy.imag();
                return g;
            });
    }
    if (name == "constant")
        return detail::scalar_field(
            name, n, [](const Point&) { return 1.0; }, [n](const Point&) { return Eigen::VectorXd::Zero(n); });
    if (name == "x1^2-x2^2")
        return detail::scalar_field(
            name, n, [](const Point& x) { return x[0] * x[0] - x[1] * x[1]; },
            [n](const Point& x) {
                Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
                g[0] = 2 * x[0];
                g[1] = -2 * x[1];
                return g;
            });
    if (n == 2) {
        if (name == "x1*x2")
            return detail::scalar_field(
                name, 2, [](const Point& x) { return x[0] * x[1]; },
                [](const Point& x) { return detail::vec2(x[1], x[0]); });
        const bool re = name.rfind("re-z^", 0) == 0;
        const bool im = name.rfind("im-z^", 0) == 0;
        if (re || im) {
            const int p = detail::parse_power(name, "re-z^");
            return detail::scalar_field(
                name, 2,
                [p, re](const Point& x) {
                    const std::complex<double> w = std::pow(std::complex<double>(x[0], x[1]), p);
                    return re ? w.real() : w.imag();
                },
                [p, re](const Point& x) {
                    const std::complex<double> z(x[0], x[1]);
                    const std::complex<double> d = p == 0 ? 0.0 : double(p) * std::pow(z, p - 1);
                    // f = Re w: grad = (Re w', -Im w'); f = Im w: grad = (Im w', Re w').
                    return re ? detail::vec2(d.real(), -d.imag()) : detail::vec2(d.imag(), d.real());
                });
        }
    } else {
        if (name == "x1*x2*x3")
            return detail::scalar_field(
                name, 3, [](const Point& x) { return x[0] * x[1] * x[2]; },
                [](const Point& x) { return detail::vec3(x[1] * x[2], x[0] * x[2], x[0] * x[1]); });
        if (name == "x1^2+x2^2-2x3^2")
            return detail::scalar_field(
                name, 3, [](const Point& x) { return x[0] * x[0] + x[1] * x[1] - 2 * x[2] * x[2]; },
                [](const Point& x) { return detail::vec3(2 * x[0], 2 * x[1], -4 * x[2]); });
    }
    throw ValidationError("unknown truth id '" + name + "' for kernel '" + std::string(kernel_name(kernel.id)) + "'");
}

}  // namespace mfsparse
