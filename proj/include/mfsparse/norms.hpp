#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"
#include "fields.hpp"
#include "geometry.hpp"
#include "measurement.hpp"
#include "parallel.hpp"

namespace mfsparse {

enum class NormKind { L2Interior, H1Interior, LpInterior, BoundaryTrace };

/// Which discretized norm regularizes the problem, and at what quadrature resolution.
struct NormSpec {
    NormKind kind = NormKind::L2Interior;
    double p = 2.0;
    int radial = 64;
    int angular = 64;
    int azimuthal = 0;
    int boundary_nodes = 256;

    bool hilbert() const noexcept { return kind != NormKind::LpInterior || p == 2.0; }
};

inline std::string norm_kind_name(NormKind k) {
    switch (k) {
    case NormKind::L2Interior: return "l2-interior";
    case NormKind::H1Interior: return "h1-interior";
    case NormKind::LpInterior: return "lp-interior";
    case NormKind::BoundaryTrace: return "boundary-trace";
    }
    return "unknown";
}

inline NormKind parse_norm_kind(const std::string& s) {
    if (s == "l2-interior") return NormKind::L2Interior;
    if (s == "h1-interior") return NormKind::H1Interior;
    if (s == "lp-interior") return NormKind::LpInterior;
    if (s == "boundary-trace") return NormKind::BoundaryTrace;
    throw ValidationError("unknown norm kind '" + s + "'");
}

/// Quadrature realization of a NormSpec on a domain: norm^p = sum_g w_g |sample_g(u)|^p, where a sample is
/// u(x) (L2, Lp), (u, grad u)(x) (H1), or B_j u(x) for one boundary operator j (BoundaryTrace).
class NormDiscretization {
public:
    NormDiscretization(const NormSpec& spec, const Domain& domain, const Kernel& kernel)
        : spec_(spec), kernel_(kernel) {
        if (!(spec.p > 1.0) || !std::isfinite(spec.p)) throw ValidationError("norm exponent p must lie in (1, inf)");
        if (spec.kind == NormKind::L2Interior || spec.kind == NormKind::H1Interior) spec_.p = 2.0;
        if (spec_.kind == NormKind::H1Interior && spec_.p != 2.0) throw ValidationError("H1 norm requires p = 2");
        if (spec_.kind == NormKind::BoundaryTrace) {
            const BoundaryQuadrature q = build_boundary_quadrature(domain, spec.boundary_nodes);
            for (int op = 0; op < kernel.order(); ++op) {
                for (std::size_t i = 0; i < q.size(); ++i) {
                    nodes_.push_back(q.nodes[i]);
                    normals_.push_back(q.normals[i]);
                    weights_.push_back(q.weights[i]);
                    ops_.push_back(op);
                }
            }
        } else {
            const InteriorQuadrature q = build_interior_quadrature(domain, spec.radial, spec.angular, spec.azimuthal);
            nodes_ = q.nodes;
            weights_ = q.weights;
            ops_.assign(nodes_.size(), 0);
            normals_.assign(nodes_.size(), Point::Zero(domain.dim()));
        }
    }

    const NormSpec& spec() const noexcept { return spec_; }
    std::size_t groups() const noexcept { return nodes_.size(); }

    int group_dim() const noexcept {
        return spec_.kind == NormKind::H1Interior ? kernel_.k() * (1 + kernel_.dim()) : kernel_.k();
    }

    template <Field F>
    Eigen::VectorXd sample(const F& field, std::size_t g) const {
        const Point& x = nodes_[g];
        switch (spec_.kind) {
        case NormKind::H1Interior: {
            Eigen::VectorXd s(group_dim());
            s.head(kernel_.k()) = field.value(x);
            const Eigen::MatrixXd grad = field.gradient(x);
            for (int i = 0; i < kernel_.dim(); ++i) s.segment(kernel_.k() * (1 + i), kernel_.k()) = grad.col(i);
            return s;
        }
        case NormKind::BoundaryTrace: return boundary_values(field, ops_[g], x, normals_[g]);
        default: return field.value(x);
        }
    }

    template <Field F>
    double norm(const F& field) const {
        double s = 0.0;
        for (std::size_t g = 0; g < groups(); ++g) s += weights_[g] * std::pow(sample(field, g).norm(), spec_.p);
        return std::pow(s, 1.0 / spec_.p);
    }

    /// Rows sqrt(w_g) * sample_g(atom a) stacked over groups, one column per atom: G = E^T E.
    Eigen::MatrixXd weighted_samples(const Dictionary& dict) const {
        const Eigen::Index rows = static_cast<Eigen::Index>(groups()) * group_dim();
        Eigen::MatrixXd E(rows, static_cast<Eigen::Index>(dict.size()));
        parallel_for(dict.size(), [&](std::size_t a) {
            Eigen::VectorXd unit = Eigen::VectorXd::Zero(kernel_.k());
            unit[dict.atoms[a].column] = 1.0;
            const KernelExpansion atom(kernel_, {dict.atoms[a].source}, {unit});
            for (std::size_t g = 0; g < groups(); ++g)
                E.col(static_cast<Eigen::Index>(a)).segment(static_cast<Eigen::Index>(g) * group_dim(), group_dim()) =
                    std::sqrt(weights_[g]) * sample(atom, g);
        });
        return E;
    }

private:
    NormSpec spec_;
    Kernel kernel_;
    std::vector<Point> nodes_;
    std::vector<Point> normals_;
    std::vector<double> weights_;
    std::vector<int> ops_;
};

/// Discretized norm of any field on D. Expansion sources must be outside the closed domain.
template <Field F>
double norm(const NormSpec& spec, const F& u, const Domain& domain, const Kernel& kernel) {
    return NormDiscretization(spec, domain, kernel).norm(u);
}

inline double norm(const NormSpec& spec, const KernelExpansion& u, const Domain& domain) {
    for (const Point& y : u.sources)
        if (domain.contains(y) || domain.distance_to_boundary(y) <= kBoundaryTolerance)
            throw ValidationError("expansion source lies in the closed domain");
    if (u.sources.empty()) return 0.0;
    return NormDiscretization(spec, domain, u.kernel).norm(u);
}

/// Gram matrix of a Hilbert norm on the dictionary plus its regularized Cholesky factor.
struct GramData {
    Eigen::MatrixXd G;
    /// Diagonal shift added before factorization: 1e-12 * trace(G).
    double shift = 0.0;
    /// Lower factor of G + shift I.
    Eigen::MatrixXd L;

    Eigen::Index size() const noexcept { return G.rows(); }

    /// sqrt(c^T (G + shift I) c).
    double norm_of(const Eigen::VectorXd& c) const { return (L.transpose() * c).norm(); }

    /// L^{-1} v.
    Eigen::VectorXd whiten(const Eigen::VectorXd& v) const {
        return L.triangularView<Eigen::Lower>().solve(v);
    }
    /// L^{-T} z.
    Eigen::VectorXd unwhiten(const Eigen::VectorXd& z) const {
        return L.transpose().triangularView<Eigen::Upper>().solve(z);
    }
};

inline constexpr double kGramShiftFactor = 1e-12;

inline GramData gram_from_matrix(Eigen::MatrixXd G) {
    GramData d;
    d.G = 0.5 * (G + G.transpose());
    const double trace = d.G.trace();
    if (!(trace > 0.0) || !std::isfinite(trace)) throw SingularGram("Gram matrix has non-positive trace");
    d.shift = kGramShiftFactor * trace;
    Eigen::MatrixXd reg = d.G;
    reg.diagonal().array() += d.shift;
    Eigen::LLT<Eigen::MatrixXd> llt(reg);
    if (llt.info() != Eigen::Success) throw SingularGram("regularized Gram factorization failed");
    d.L = llt.matrixL();
    return d;
}

/// G[a][b] = discretized inner product of atoms a and b.
inline GramData gram(const NormSpec& spec, const Dictionary& dict, const Domain& domain, const Kernel& kernel) {
    if (!spec.hilbert()) throw NotAHilbertNorm("Gram data requires a p = 2 norm");
    if (dict.size() == 0) throw ValidationError("dictionary is empty");
    const NormDiscretization disc(spec, domain, kernel);
    const Eigen::MatrixXd E = disc.weighted_samples(dict);
    return gram_from_matrix(E.transpose() * E);
}

/// sup { <h, A c> : ||c||_G <= 1 } = ||L^{-1} A^T h||.
inline double dual_norm(const Eigen::VectorXd& h, const Eigen::MatrixXd& A, const GramData& gram) {
    if (h.size() != A.rows()) throw ValidationError("dual vector length must equal functional count");
    return gram.whiten(A.transpose() * h).norm();
}

inline double dual_norm(const Eigen::VectorXd& h, const MeasurementOperator& m, const Dictionary& dict,
                        const GramData& gram) {
    return dual_norm(h, assemble_matrix(m, dict), gram);
}

/// Value of the conjugate of b ||.||: an indicator that is 0 on the closed dual ball of radius b.
struct ConjugateValue {
    bool infinite = false;
    double value = 0.0;
};

inline constexpr double kConjugateTolerance = 1e-9;

inline ConjugateValue fenchel_conjugate_of_norm(double dual_norm_value, double b) {
    if (!(b > 0.0)) throw ValidationError("radius b must be positive");
    if (dual_norm_value <= b * (1.0 + kConjugateTolerance)) return {false, 0.0};
    return {true, std::numeric_limits<double>::infinity()};
}

}  // namespace mfsparse
