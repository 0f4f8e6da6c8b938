#pragma once

#include <Eigen/Dense>

#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "fields.hpp"
#include "geometry.hpp"
#include "kernels.hpp"
#include "parallel.hpp"

namespace mfsparse {

/// Tolerance for "lies on the boundary" checks of trace functionals.
inline constexpr double kOnBoundaryTolerance = 1e-8;

/// u -> u_r(x).
struct PointEval {
    Point x;
    int component = 0;
};

/// u -> (B_op u)_r(x) for x on the boundary with outward normal `normal`.
struct TraceEval {
    int op_index = 0;
    Point x;
    Point normal;
    int component = 0;
};

/// u -> sum_q density_q w_q (B_op u)_r(x_q) over boundary quadrature nodes; zero density off the arc.
struct WeakPairing {
    int op_index = 0;
    std::vector<Point> nodes;
    std::vector<Point> normals;
    std::vector<double> weighted_density;
    int component = 0;
};

using Functional = std::variant<PointEval, TraceEval, WeakPairing>;

/// Weak pairing with `density` sampled at the nodes of `quad`; nodes where `on_arc` is false get zero.
inline WeakPairing make_weak_pairing(const BoundaryQuadrature& quad, int op_index, const std::vector<double>& density,
                                     int component = 0, const std::vector<bool>& on_arc = {}) {
    if (density.size() != quad.size()) throw ValidationError("weak pairing density needs one value per node");
    WeakPairing w{op_index, quad.nodes, quad.normals, std::vector<double>(quad.size(), 0.0), component};
    for (std::size_t q = 0; q < quad.size(); ++q)
        if (on_arc.empty() || on_arc[q]) w.weighted_density[q] = density[q] * quad.weights[q];
    return w;
}

/// Trace functional at boundary point x; the normal is taken from the domain.
inline TraceEval make_trace(const Domain& domain, int op_index, const Point& x, int component = 0) {
    return TraceEval{op_index, x, domain.outward_normal(x), component};
}

/// One dictionary atom: column `column` of Phi(., source).
struct Atom {
    Point source;
    int column = 0;
};

struct Dictionary {
    std::vector<Atom> atoms;

    std::size_t size() const noexcept { return atoms.size(); }

    /// Every column of Phi(., y) for every y.
    static Dictionary from_sources(const std::vector<Point>& sources, int k) {
        Dictionary d;
        for (const Point& y : sources)
            for (int r = 0; r < k; ++r) d.atoms.push_back({y, r});
        return d;
    }
};

/// Expansion represented by dictionary coefficients c.
inline KernelExpansion expansion_from(const Kernel& kernel, const Dictionary& dict, const Eigen::VectorXd& c) {
    if (static_cast<std::size_t>(c.size()) != dict.size())
        throw ValidationError("coefficient vector length must equal dictionary size");
    KernelExpansion u(kernel);
    for (std::size_t a = 0; a < dict.size(); ++a) {
        Eigen::VectorXd coef = Eigen::VectorXd::Zero(kernel.k());
        coef[dict.atoms[a].column] = c[static_cast<Eigen::Index>(a)];
        u.sources.push_back(dict.atoms[a].source);
        u.coefficients.push_back(coef);
    }
    return u;
}

namespace detail {

inline bool same_point(const Point& a, const Point& b) { return a.size() == b.size() && a == b; }

inline bool same_functional(const Functional& a, const Functional& b) {
    if (a.index() != b.index()) return false;
    if (const auto* p = std::get_if<PointEval>(&a)) {
        const auto& q = std::get<PointEval>(b);
        return p->component == q.component && same_point(p->x, q.x);
    }
    if (const auto* t = std::get_if<TraceEval>(&a)) {
        const auto& s = std::get<TraceEval>(b);
        return t->component == s.component && t->op_index == s.op_index && same_point(t->x, s.x);
    }
    const auto& w = std::get<WeakPairing>(a);
    const auto& v = std::get<WeakPairing>(b);
    return w.component == v.component && w.op_index == v.op_index && w.weighted_density == v.weighted_density &&
           w.nodes.size() == v.nodes.size() &&
           std::equal(w.nodes.begin(), w.nodes.end(), v.nodes.begin(), same_point);
}

}  // namespace detail

/// Finite-rank measurement map M: solutions -> R^{functional count}.
class MeasurementOperator {
public:
    MeasurementOperator(Kernel kernel, Domain domain, std::vector<Functional> functionals)
        : kernel_(kernel), domain_(std::move(domain)), functionals_(std::move(functionals)) {
        validate();
    }

    const Kernel& kernel() const noexcept { return kernel_; }
    const Domain& domain() const noexcept { return domain_; }
    const std::vector<Functional>& functionals() const noexcept { return functionals_; }
    std::size_t size() const noexcept { return functionals_.size(); }

    /// Functional i applied to a field.
    template <Field F>
    double apply_one(std::size_t i, const F& field) const {
        return std::visit(
            [&](const auto& f) -> double {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, PointEval>) {
                    return field.value(f.x)[f.component];
                } else if constexpr (std::is_same_v<T, TraceEval>) {
                    return boundary_values(field, f.op_index, f.x, f.normal)[f.component];
                } else {
                    double s = 0.0;
                    for (std::size_t q = 0; q < f.nodes.size(); ++q) {
                        if (f.weighted_density[q] == 0.0) continue;
                        s += f.weighted_density[q] * boundary_values(field, f.op_index, f.nodes[q], f.normals[q])[f.component];
                    }
                    return s;
                }
            },
            functionals_[i]);
    }

    /// M u for an arbitrary field (reference solutions, expansions).
    template <Field F>
    Eigen::VectorXd apply(const F& field) const {
        Eigen::VectorXd out(static_cast<Eigen::Index>(size()));
        for (std::size_t i = 0; i < size(); ++i) out[static_cast<Eigen::Index>(i)] = apply_one(i, field);
        return out;
    }

    /// Functional i applied to every column of Phi(., y): a row block of length k.
    Eigen::RowVectorXd apply_to_kernel(std::size_t i, const Point& y) const {
        return std::visit(
            [&](const auto& f) -> Eigen::RowVectorXd {
                using T = std::decay_t<decltype(f)>;
                if constexpr (std::is_same_v<T, PointEval>) {
                    return eval_kernel(kernel_, f.x, y).row(f.component);
                } else if constexpr (std::is_same_v<T, TraceEval>) {
                    return eval_boundary_op(kernel_, f.op_index, f.x, y, f.normal).row(f.component);
                } else {
                    Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(kernel_.k());
                    for (std::size_t q = 0; q < f.nodes.size(); ++q) {
                        if (f.weighted_density[q] == 0.0) continue;
                        s += f.weighted_density[q] *
                             eval_boundary_op(kernel_, f.op_index, f.nodes[q], y, f.normals[q]).row(f.component);
                    }
                    return s;
                }
            },
            functionals_[i]);
    }

    void require_exterior(const Point& y) const {
        if (y.size() != domain_.dim()) throw ValidationError("source dimension does not match the domain");
        if (domain_.contains(y) || domain_.distance_to_boundary(y) <= kBoundaryTolerance)
            throw ValidationError("source point lies in the closed domain");
    }

private:
    void validate() const {
        if (kernel_.dim() != domain_.dim()) throw ValidationError("kernel and domain dimensions differ");
        if (functionals_.empty()) throw ValidationError("measurement operator needs at least one functional");
        for (std::size_t i = 0; i < functionals_.size(); ++i) {
            std::visit(
                [&](const auto& f) {
                    using T = std::decay_t<decltype(f)>;
                    if (f.component < 0 || f.component >= kernel_.k())
                        throw ValidationError("functional component out of range");
                    if constexpr (std::is_same_v<T, PointEval>) {
                        if (f.x.size() != domain_.dim()) throw ValidationError("point functional has wrong dimension");
                        if (!domain_.contains(f.x) && domain_.distance_to_boundary(f.x) > kOnBoundaryTolerance)
                            throw ValidationError("point functional lies outside the closed domain");
                    } else {
                        if (f.op_index < 0 || f.op_index >= kernel_.order())
                            throw UnsupportedOperator("trace functional uses boundary operator " +
                                                      std::to_string(f.op_index));
                        if constexpr (std::is_same_v<T, TraceEval>) {
                            if (f.x.size() != domain_.dim() || f.normal.size() != domain_.dim())
                                throw ValidationError("trace functional has wrong dimension");
                            if (domain_.distance_to_boundary(f.x) > kOnBoundaryTolerance)
                                throw ValidationError("trace functional point is not on the boundary");
                        } else {
                            if (f.nodes.size() != f.weighted_density.size() || f.nodes.size() != f.normals.size())
                                throw ValidationError("weak pairing arrays differ in length");
                        }
                    }
                },
                functionals_[i]);
            for (std::size_t j = 0; j < i; ++j)
                if (detail::same_functional(functionals_[i], functionals_[j]))
                    throw ValidationError("functionals " + std::to_string(j) + " and " + std::to_string(i) +
                                          " coincide");
        }
    }

    Kernel kernel_;
    Domain domain_;
    std::vector<Functional> functionals_;
};

/// M u for a kernel expansion whose sources lie outside the closed domain.
inline Eigen::VectorXd apply(const MeasurementOperator& m, const KernelExpansion& u) {
    for (const Point& y : u.sources) m.require_exterior(y);
    return m.apply(u);
}

/// Matrix of M on the dictionary: entry (i, a) = functional i applied to atom a. Rows are filled in
/// parallel; each entry is a fixed-order sum.
inline Eigen::MatrixXd assemble_matrix(const MeasurementOperator& m, const Dictionary& dict) {
    for (const Atom& a : dict.atoms) {
        m.require_exterior(a.source);
        if (a.column < 0 || a.column >= m.kernel().k()) throw ValidationError("atom column out of range");
    }
    Eigen::MatrixXd A(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(dict.size()));
    parallel_for(m.size(), [&](std::size_t i) {
        for (std::size_t a = 0; a < dict.size(); ++a) {
            const Eigen::RowVectorXd row = m.apply_to_kernel(i, dict.atoms[a].source);
            A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a)) = row[dict.atoms[a].column];
        }
    });
    return A;
}

/// Point functionals for every component at each x.
inline std::vector<Functional> point_functionals(const std::vector<Point>& xs, int k) {
    std::vector<Functional> fs;
    for (const Point& x : xs)
        for (int r = 0; r < k; ++r) fs.emplace_back(PointEval{x, r});
    return fs;
}

}  // namespace mfsparse
