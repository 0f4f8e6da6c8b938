#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "measurement.hpp"
#include "norms.hpp"

namespace mfsparse {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// F(g) = (1/q) ||g - target||_q^q for 1 <= q < inf, ||g - target||_inf for q = inf.
struct DataFunctionalSpec {
    double q = 2.0;
    Eigen::VectorXd target;

    bool smooth() const noexcept { return q > 1.0 && std::isfinite(q); }

    double value(const Eigen::VectorXd& g) const {
        const Eigen::VectorXd r = g - target;
        if (!std::isfinite(q)) return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
        if (q == 2.0) return 0.5 * r.squaredNorm();
        return r.cwiseAbs().array().pow(q).sum() / q;
    }

    /// Gradient for 1 < q < inf; a subgradient for q = 1 and q = inf.
    Eigen::VectorXd gradient(const Eigen::VectorXd& g) const {
        const Eigen::VectorXd r = g - target;
        if (q == 2.0) return r;
        Eigen::VectorXd out = Eigen::VectorXd::Zero(r.size());
        if (!std::isfinite(q)) {
            if (r.size() == 0) return out;
            Eigen::Index i = 0;
            r.cwiseAbs().maxCoeff(&i);
            if (r[i] != 0.0) out[i] = r[i] > 0 ? 1.0 : -1.0;
            return out;
        }
        for (Eigen::Index i = 0; i < r.size(); ++i) {
            if (r[i] == 0.0) continue;
            out[i] = (r[i] > 0 ? 1.0 : -1.0) * (q == 1.0 ? 1.0 : std::pow(std::abs(r[i]), q - 1.0));
        }
        return out;
    }

    /// F*(v) = <v, target> + (1/q') ||v||_{q'}^{q'} for 1 < q < inf.
    double conjugate(const Eigen::VectorXd& v) const {
        if (!smooth()) throw ValidationError("closed-form conjugate requires 1 < q < inf");
        if (q == 2.0) return 0.5 * v.squaredNorm() + v.dot(target);
        const double qc = q / (q - 1.0);
        return v.dot(target) + v.cwiseAbs().array().pow(qc).sum() / qc;
    }

    /// Gradient of F* (used by the dual ascent).
    Eigen::VectorXd conjugate_gradient(const Eigen::VectorXd& v) const {
        if (q == 2.0) return v + target;
        const double qc = q / (q - 1.0);
        Eigen::VectorXd out = target;
        for (Eigen::Index i = 0; i < v.size(); ++i)
            if (v[i] != 0.0) out[i] += (v[i] > 0 ? 1.0 : -1.0) * std::pow(std::abs(v[i]), qc - 1.0);
        return out;
    }
};

struct SolveConfig {
    double b = 1e-3;
    int max_iter = 50000;
    /// Stop when the objective decreased by less than tol_rel (relative) over `window` iterations.
    double tol_rel = 1e-14;
    int window = 50;
    /// Stop when the certified duality gap is below gap_tol * (1 + |objective|).
    double gap_tol = 1e-13;
    int restarts = 5;
    std::uint64_t seed = 0;
    bool record_history = false;

    void validate() const {
        if (!(b > 0.0) || !std::isfinite(b)) throw ValidationError("regularization weight b must be positive");
        if (!(tol_rel > 0.0 && tol_rel < 1e-2)) throw ValidationError("tol_rel must lie in (0, 1e-2)");
        if (max_iter < 1) throw ValidationError("max_iter must be positive");
        if (window < 1) throw ValidationError("window must be positive");
    }
};

/// Finite realization of the variational problem: min F(A c) + b ||c||_G over dictionary coefficients.
/// The solver works in whitened coordinates z = L^T c, where ||c||_G = ||z||.
class Instance {
public:
    Instance(Eigen::MatrixXd A, GramData gram, DataFunctionalSpec F, double b)
        : A_(std::move(A)), gram_(std::move(gram)), F_(std::move(F)), b_(b) {
        if (A_.cols() != gram_.size()) throw ValidationError("matrix columns must match the Gram size");
        if (F_.target.size() != A_.rows()) throw ValidationError("target length must equal the functional count");
        if (!(F_.q >= 1.0)) throw ValidationError("data exponent q must lie in [1, inf]");
        if (!(b_ > 0.0) || !std::isfinite(b_)) throw ValidationError("regularization weight b must be positive");
        whitened_ = gram_.L.triangularView<Eigen::Lower>().solve(A_.transpose()).transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(whitened_ * whitened_.transpose());
        k_values_ = eig.eigenvalues().cwiseMax(0.0);
        k_vectors_ = eig.eigenvectors();
        lipschitz_ = k_values_.size() ? k_values_.maxCoeff() : 0.0;
    }

    const Eigen::MatrixXd& A() const noexcept { return A_; }
    const GramData& gram() const noexcept { return gram_; }
    const DataFunctionalSpec& F() const noexcept { return F_; }
    double b() const noexcept { return b_; }
    /// A L^{-T}.
    const Eigen::MatrixXd& whitened() const noexcept { return whitened_; }
    /// ||A L^{-T}||_2^2.
    double lipschitz() const noexcept { return lipschitz_; }
    Eigen::Index functionals() const noexcept { return A_.rows(); }
    Eigen::Index atoms() const noexcept { return A_.cols(); }

    double objective(const Eigen::VectorXd& c) const { return F_.value(A_ * c) + b_ * gram_.norm_of(c); }
    double objective_whitened(const Eigen::VectorXd& z) const { return F_.value(whitened_ * z) + b_ * z.norm(); }

    /// dual_norm(A^T h) = ||L^{-1} A^T h||.
    double dual_norm_of(const Eigen::VectorXd& h) const { return (whitened_.transpose() * h).norm(); }

    /// D(h) = -F*(-h) for dual-feasible h.
    double dual_objective(const Eigen::VectorXd& h) const { return -F_.conjugate(-h); }

    /// Euclidean projection onto {h : ||L^{-1} A^T h|| <= b}.
    Eigen::VectorXd project_dual_feasible(const Eigen::VectorXd& v) const {
        const Eigen::VectorXd w = k_vectors_.transpose() * v;
        const double b2 = b_ * b_;
        auto phi = [&](double lambda) {
            double s = 0.0;
            for (Eigen::Index i = 0; i < w.size(); ++i) {
                const double d = 1.0 + lambda * k_values_[i];
                s += k_values_[i] * w[i] * w[i] / (d * d);
            }
            return s;
        };
        if (phi(0.0) <= b2) return v;
        double lo = 0.0, hi = 1.0;
        while (phi(hi) > b2 && hi < 1e300) {
            lo = hi;
            hi *= 4.0;
        }
        for (int iter = 0; iter < 300 && hi - lo > 1e-15 * hi; ++iter) {
            const double mid = lo > 0.0 ? std::sqrt(lo * hi) : 0.5 * hi;
            (phi(mid) > b2 ? lo : hi) = mid;
        }
        Eigen::VectorXd out(w.size());
        for (Eigen::Index i = 0; i < w.size(); ++i) out[i] = w[i] / (1.0 + hi * k_values_[i]);
        return k_vectors_ * out;
    }

    /// For q = 2: the exact minimizer in whitened coordinates. Stationarity gives the Tikhonov point
    /// z = At^T (At At^T + lambda I)^{-1} h0 with lambda ||z|| = b, a monotone scalar equation in lambda.
    Eigen::VectorXd quadratic_minimizer() const {
        if (F_.q != 2.0) throw ValidationError("closed-form minimizer requires q = 2");
        const Eigen::VectorXd beta = k_vectors_.transpose() * F_.target;
        auto scaled_norm = [&](double lambda) {
            double s = 0.0;
            for (Eigen::Index i = 0; i < beta.size(); ++i) {
                const double d = k_values_[i] + lambda;
                s += k_values_[i] * beta[i] * beta[i] / (d * d);
            }
            return lambda * std::sqrt(s);
        };
        if (dual_norm_of(F_.target) <= b_) return Eigen::VectorXd::Zero(atoms());
        double hi = 1.0;
        while (scaled_norm(hi) < b_ && hi < 1e300) hi *= 4.0;
        double lo = hi;
        while (scaled_norm(lo) > b_ && lo > 1e-300) lo *= 0.25;
        for (int iter = 0; iter < 300 && hi - lo > 1e-16 * hi; ++iter) {
            const double mid = std::sqrt(lo * hi);
            (scaled_norm(mid) < b_ ? lo : hi) = mid;
        }
        const double lambda = 0.5 * (lo + hi);
        Eigen::VectorXd w(beta.size());
        for (Eigen::Index i = 0; i < beta.size(); ++i) w[i] = beta[i] / (k_values_[i] + lambda);
        return whitened_.transpose() * (k_vectors_ * w);
    }

private:
    Eigen::MatrixXd A_;
    GramData gram_;
    DataFunctionalSpec F_;
    double b_;
    Eigen::MatrixXd whitened_;
    Eigen::VectorXd k_values_;
    Eigen::MatrixXd k_vectors_;
    double lipschitz_ = 0.0;
};

/// Assembles A and G for a measurement operator, dictionary and Hilbert norm.
inline Instance build_instance(const MeasurementOperator& m, const Dictionary& dict, const NormSpec& norm_spec,
                               DataFunctionalSpec F, double b) {
    if (!norm_spec.hilbert()) throw NotAHilbertNorm("the primal solver requires a p = 2 regularizer norm");
    if (dict.size() == 0) throw ValidationError("dictionary is empty");
    return Instance(assemble_matrix(m, dict), gram(norm_spec, dict, m.domain(), m.kernel()), std::move(F), b);
}

struct PrimalSolution {
    Eigen::VectorXd c;
    /// Whitened coefficients z = L^T c.
    Eigen::VectorXd z;
    double objective = 0.0;
    double norm_value = 0.0;
    double misfit = 0.0;
    int iterations = 0;
    bool converged = false;
    /// Best certified lower bound found while iterating (smooth q only).
    double lower_bound = -kInfinity;
    std::vector<double> history;
    std::vector<double> lower_history;
};

struct DualSolution {
    Eigen::VectorXd h;
    double objective = 0.0;
    double feasibility_residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct Diagnostics {
    double duality_gap = 0.0;
    double optimality_residual = 0.0;
    int primal_iterations = 0;
    int dual_iterations = 0;
    double gram_shift = 0.0;
};

namespace detail {

inline Eigen::VectorXd shrink(const Eigen::VectorXd& v, double threshold) {
    const double n = v.norm();
    if (n <= threshold) return Eigen::VectorXd::Zero(v.size());
    return (1.0 - threshold / n) * v;
}

inline PrimalSolution finish_primal(const Instance& inst, Eigen::VectorXd z, int iterations, bool converged,
                                    double lower_bound) {
    PrimalSolution s;
    s.c = inst.gram().unwhiten(z);
    s.z = std::move(z);
    s.misfit = inst.F().value(inst.A() * s.c);
    s.norm_value = inst.gram().norm_of(s.c);
    s.objective = s.misfit + inst.b() * s.norm_value;
    s.iterations = iterations;
    s.converged = converged;
    s.lower_bound = lower_bound;
    return s;
}

/// Dual value certified by the feasible point obtained by scaling -grad F(A c) into the dual ball.
inline double certified_lower_bound(const Instance& inst, const Eigen::VectorXd& residual_grad) {
    Eigen::VectorXd h = -residual_grad;
    const double dn = inst.dual_norm_of(h);
    if (dn > inst.b()) h *= inst.b() / dn;
    return inst.dual_objective(h);
}

inline bool window_stalled(const std::vector<double>& objs, int window, double tol_rel) {
    if (static_cast<int>(objs.size()) <= window) return false;
    const double now = objs.back();
    const double before = objs[objs.size() - 1 - window];
    return before - now <= tol_rel * std::max(std::abs(now), 1e-300);
}

inline PrimalSolution minimize_smooth(const Instance& inst, const SolveConfig& cfg, Eigen::VectorXd z) {
    const auto& At = inst.whitened();
    const auto& F = inst.F();
    const double b = inst.b();
    auto smooth_part = [&](const Eigen::VectorXd& v) { return F.value(At * v); };

    double lip = std::max(inst.lipschitz(), 1e-300);
    if (F.q != 2.0) lip = std::max(lip, 1e-12);
    double t = 1.0;
    Eigen::VectorXd y = z;
    double obj = inst.objective_whitened(z);
    double best_lower = -kInfinity;
    std::vector<double> objs{obj};
    std::vector<double> lowers;
    int it = 0;
    bool converged = false;
    for (; it < cfg.max_iter; ++it) {
        const Eigen::VectorXd gy_data = F.gradient(At * y);
        const Eigen::VectorXd grad = At.transpose() * gy_data;
        const double fy = smooth_part(y);
        Eigen::VectorXd x;
        for (int bt = 0; bt < 100; ++bt) {
            x = shrink(y - grad / lip, b / lip);
            const Eigen::VectorXd d = x - y;
            if (smooth_part(x) <= fy + grad.dot(d) + 0.5 * lip * d.squaredNorm() + 1e-15 * std::abs(fy)) break;
            lip *= 2.0;
        }
        const double obj_x = inst.objective_whitened(x);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        Eigen::VectorXd z_next;
        if (obj_x <= obj) {
            z_next = x;
            y = x + ((t - 1.0) / t_next) * (x - z);
            obj = obj_x;
            t = t_next;
        } else {
            // Monotone step with momentum restart.
            z_next = z;
            y = z;
            t = 1.0;
        }
        z = std::move(z_next);
        objs.push_back(obj);

        const Eigen::VectorXd gz_data = F.gradient(At * z);
        const double lower = certified_lower_bound(inst, gz_data);
        best_lower = std::max(best_lower, lower);
        lowers.push_back(best_lower);
        if (obj - best_lower <= cfg.gap_tol * (1.0 + std::abs(obj)) ||
            window_stalled(objs, cfg.window, cfg.tol_rel)) {
            converged = true;
            ++it;
            break;
        }
    }
    PrimalSolution s = finish_primal(inst, z, it, converged, best_lower);
    if (cfg.record_history) {
        s.history = std::move(objs);
        s.lower_history = std::move(lowers);
    }
    return s;
}

/// Proximal subgradient method for q = 1 and q = inf; returns the best iterate.
inline PrimalSolution minimize_nonsmooth(const Instance& inst, const SolveConfig& cfg, Eigen::VectorXd z) {
    const auto& At = inst.whitened();
    const double b = inst.b();
    const double scale = std::sqrt(std::max(inst.lipschitz(), 1e-300));
    const double step0 = 1.0 / scale;
    Eigen::VectorXd best = z;
    double best_obj = inst.objective_whitened(z);
    std::vector<double> objs{best_obj};
    int it = 0;
    bool converged = false;
    for (; it < cfg.max_iter; ++it) {
        const double step = step0 / std::sqrt(it + 1.0);
        const Eigen::VectorXd g = At.transpose() * inst.F().gradient(At * z);
        z = shrink(z - step * g, step * b);
        const double obj = inst.objective_whitened(z);
        if (obj < best_obj) {
            best_obj = obj;
            best = z;
        }
        objs.push_back(best_obj);
        if (it > 10 * cfg.window && window_stalled(objs, 10 * cfg.window, cfg.tol_rel)) {
            converged = true;
            ++it;
            break;
        }
    }
    PrimalSolution s = finish_primal(inst, best, it, converged, -kInfinity);
    if (cfg.record_history) s.history = std::move(objs);
    return s;
}

}  // namespace detail

inline constexpr double kZeroThresholdSlack = 1e-8;

/// Minimizes F(A c) + b ||c||_G by monotone accelerated proximal gradient in whitened coordinates,
/// where the prox of b||.|| is closed-form block shrinkage. Starts from `start` (whitened) when given.
inline PrimalSolution minimize_primal(const Instance& inst, const SolveConfig& cfg,
                                      const Eigen::VectorXd* start = nullptr) {
    cfg.validate();
    Eigen::VectorXd z0 = start ? *start : Eigen::VectorXd::Zero(inst.atoms());
    if (z0.size() != inst.atoms()) throw ValidationError("start vector has wrong length");
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(inst.atoms());
    if (inst.F().smooth()) {
        // 0 is optimal iff -grad F(0) lies in the dual ball of radius b.
        const Eigen::VectorXd g0 = inst.F().gradient(Eigen::VectorXd::Zero(inst.functionals()));
        if (inst.dual_norm_of(g0) <= inst.b() * (1.0 + kZeroThresholdSlack)) {
            PrimalSolution s = detail::finish_primal(inst, zero, 0, true, -kInfinity);
            s.lower_bound = detail::certified_lower_bound(inst, g0);
            if (cfg.record_history) s.history = {s.objective};
            return s;
        }
        // q = 2 without a caller start: iterate from the closed-form point, so the proximal steps only
        // polish it and certify the gap.
        if (!start && inst.F().q == 2.0) z0 = inst.quadratic_minimizer();
        return detail::minimize_smooth(inst, cfg, std::move(z0));
    }
    return detail::minimize_nonsmooth(inst, cfg, std::move(z0));
}

/// Maximizes D(h) = -F*(-h) over {h : dual_norm(A^T h) <= b} by projected gradient ascent.
inline DualSolution solve_dual(const Instance& inst, const SolveConfig& cfg) {
    cfg.validate();
    if (!inst.F().smooth()) throw ValidationError("the dual solver requires 1 < q < inf");
    // d/dh [-F*(-h)] = (grad F*)(-h).
    auto ascent_dir = [&](const Eigen::VectorXd& h) { return inst.F().conjugate_gradient(-h); };
    Eigen::VectorXd h = inst.project_dual_feasible(Eigen::VectorXd::Zero(inst.functionals()));
    double obj = inst.dual_objective(h);
    double step = 1.0;
    int it = 0;
    bool converged = false;
    for (; it < cfg.max_iter; ++it) {
        const Eigen::VectorXd g = ascent_dir(h);
        Eigen::VectorXd h_new;
        double obj_new = obj;
        for (int bt = 0; bt < 200; ++bt) {
            h_new = inst.project_dual_feasible(h + step * g);
            obj_new = inst.dual_objective(h_new);
            const Eigen::VectorXd d = h_new - h;
            if (obj_new >= obj + g.dot(d) - 0.5 / step * d.squaredNorm() - 1e-15 * std::abs(obj)) break;
            step *= 0.5;
        }
        const double move = (h_new - h).norm();
        h = std::move(h_new);
        const double gain = obj_new - obj;
        obj = obj_new;
        if (move <= 1e-15 * (1.0 + h.norm()) || (gain >= 0 && gain <= cfg.tol_rel * (1.0 + std::abs(obj)))) {
            converged = true;
            ++it;
            break;
        }
        step = std::min(step * 2.0, 1e6);
    }
    DualSolution d;
    d.h = h;
    d.objective = obj;
    d.feasibility_residual = std::max(0.0, inst.dual_norm_of(h) - inst.b());
    d.iterations = it;
    d.converged = converged;
    return d;
}

inline double duality_gap(const PrimalSolution& primal, const DualSolution& dual) {
    return primal.objective - dual.objective;
}

/// |<h, A c> - b ||c||_G| together with the gap and iteration counts.
inline Diagnostics check_optimality(const PrimalSolution& primal, const DualSolution& dual, const Instance& inst) {
    Diagnostics d;
    d.duality_gap = duality_gap(primal, dual);
    d.optimality_residual = std::abs(dual.h.dot(inst.A() * primal.c) - inst.b() * primal.norm_value);
    d.primal_iterations = primal.iterations;
    d.dual_iterations = dual.iterations;
    d.gram_shift = inst.gram().shift;
    return d;
}

/// Max pairwise G-distance between minimizers from R seeded random starts.
inline double uniqueness_probe(const Instance& inst, const SolveConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Eigen::VectorXd> zs;
    for (int r = 0; r < std::max(1, cfg.restarts); ++r) {
        Eigen::VectorXd start(inst.atoms());
        for (Eigen::Index i = 0; i < start.size(); ++i) start[i] = normal(rng);
        zs.push_back(minimize_primal(inst, cfg, &start).z);
    }
    double spread = 0.0;
    for (std::size_t i = 0; i < zs.size(); ++i)
        for (std::size_t j = i + 1; j < zs.size(); ++j) spread = std::max(spread, (zs[i] - zs[j]).norm());
    return spread;
}

}  // namespace mfsparse
