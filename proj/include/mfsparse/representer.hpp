#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "errors.hpp"
#include "fields.hpp"
#include "geometry.hpp"
#include "measurement.hpp"
#include "norms.hpp"
#include "parallel.hpp"
#include "solver.hpp"

namespace mfsparse {

/// Square matrix of the functionals applied to kernel columns. Entry (i, j k + r) is functional i
/// applied to column r of Phi(., y_j), so M u = W C for u = sum_j Phi(., y_j) C_j. This is the
/// transpose of the usual textbook display for symmetric kernels; determinant and zero set coincide.
struct WMatrix {
    Eigen::MatrixXd entries;
    std::vector<Point> sources;
    double condition = kInfinity;
    /// -1, 0 or +1.
    int det_sign = 0;
    /// log |det W|; -inf when singular.
    double log_abs_det = -kInfinity;
    /// Hadamard bound prod_j ||column j||, the natural scale of |det W|.
    double hadamard_scale = 0.0;

    double abs_det() const { return std::exp(log_abs_det); }
    double det() const { return det_sign * abs_det(); }
};

struct Determinant {
    int sign = 0;
    double log_abs = -kInfinity;
};

/// Sign-log determinant from an LU factorization.
inline Determinant sign_log_det(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw ValidationError("determinant of a non-square matrix");
    if (m.rows() == 0) return {1, 0.0};
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    const Eigen::MatrixXd& f = lu.matrixLU();
    Determinant d{static_cast<int>(lu.permutationP().determinant()), 0.0};
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
        const double u = f(i, i);
        if (u == 0.0 || !std::isfinite(u)) return {0, -kInfinity};
        if (u < 0) d.sign = -d.sign;
        d.log_abs += std::log(std::abs(u));
    }
    return d;
}

inline double condition_number(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 1.0;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    const double smin = s[s.size() - 1];
    return smin > 0.0 ? s[0] / smin : kInfinity;
}

/// Functional i applied to column r of Phi(., y) for every source: the square matrix behind the
/// sparse construction.
inline WMatrix assemble_W(const MeasurementOperator& m, const std::vector<Point>& sources) {
    const int k = m.kernel().k();
    if (sources.size() * static_cast<std::size_t>(k) != m.size())
        throw ValidationError("W needs source count * k equal to the functional count");
    for (std::size_t j = 0; j < sources.size(); ++j) {
        m.require_exterior(sources[j]);
        for (std::size_t l = 0; l < j; ++l)
            if (sources[l] == sources[j]) throw ValidationError("W sources must be pairwise distinct");
    }
    WMatrix w;
    w.sources = sources;
    const auto n = static_cast<Eigen::Index>(m.size());
    w.entries.resize(n, n);
    parallel_for(m.size(), [&](std::size_t i) {
        for (std::size_t j = 0; j < sources.size(); ++j)
            w.entries.block(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j) * k, 1, k) =
                m.apply_to_kernel(i, sources[j]);
    });
    const Determinant d = sign_log_det(w.entries);
    w.det_sign = d.sign;
    w.log_abs_det = d.log_abs;
    w.condition = condition_number(w.entries);
    w.hadamard_scale = 1.0;
    for (Eigen::Index j = 0; j < n; ++j) w.hadamard_scale *= w.entries.col(j).norm();
    return w;
}

struct DegeneracySample {
    Point y;
    bool valid = false;
    double abs_det = 0.0;
    int sign = 0;
    double condition = kInfinity;
    double scale = 0.0;
};

/// Regular planar grid of candidates origin + (i axis_u) / (nu - 1) + (j axis_v) / (nv - 1).
struct CandidateGrid {
    Point origin;
    Point axis_u;
    Point axis_v;
    int nu = 50;
    int nv = 50;

    std::vector<Point> points() const {
        std::vector<Point> pts;
        for (int j = 0; j < nv; ++j)
            for (int i = 0; i < nu; ++i)
                pts.push_back(origin + (nu > 1 ? Point(axis_u * i / (nu - 1)) : Point(0.0 * axis_u)) +
                              (nv > 1 ? Point(axis_v * j / (nv - 1)) : Point(0.0 * axis_v)));
        return pts;
    }
};

struct ZeroCrossing {
    Point y;
    std::size_t from = 0;
    std::size_t to = 0;
};

struct DegeneracyScan {
    std::vector<DegeneracySample> samples;
    std::vector<ZeroCrossing> crossings;
};

/// |det W| for W built from the fixed sources plus each candidate as the last source. Candidates in the
/// closed domain are reported invalid.
inline std::vector<DegeneracySample> degeneracy_scan(const MeasurementOperator& m, const std::vector<Point>& fixed,
                                                     const std::vector<Point>& candidates) {
    std::vector<DegeneracySample> out(candidates.size());
    parallel_for(candidates.size(), [&](std::size_t c) {
        DegeneracySample& s = out[c];
        s.y = candidates[c];
        if (m.domain().contains(s.y) || m.domain().distance_to_boundary(s.y) <= kBoundaryTolerance) return;
        std::vector<Point> sources = fixed;
        sources.push_back(s.y);
        WMatrix w;
        const int k = m.kernel().k();
        if (sources.size() * static_cast<std::size_t>(k) != m.size())
            throw ValidationError("fixed sources plus one candidate must match the functional count");
        // A candidate equal to a fixed source gives a repeated column: det = 0.
        bool repeated = false;
        for (const Point& f : fixed) repeated = repeated || f == s.y;
        if (repeated) {
            s.valid = true;
            s.abs_det = 0.0;
            s.sign = 0;
            return;
        }
        w = assemble_W(m, sources);
        s.valid = true;
        s.sign = w.det_sign;
        s.abs_det = w.det_sign == 0 ? 0.0 : w.abs_det();
        s.condition = w.condition;
        s.scale = w.hadamard_scale;
    });
    return out;
}

/// Grid scan plus sign-change localization along grid lines by linear interpolation of det W.
inline DegeneracyScan degeneracy_scan(const MeasurementOperator& m, const std::vector<Point>& fixed,
                                      const CandidateGrid& grid) {
    DegeneracyScan scan;
    scan.samples = degeneracy_scan(m, fixed, grid.points());
    auto at = [&](int i, int j) { return static_cast<std::size_t>(j) * grid.nu + i; };
    auto check = [&](std::size_t a, std::size_t b) {
        const auto& sa = scan.samples[a];
        const auto& sb = scan.samples[b];
        if (!sa.valid || !sb.valid || sa.sign == 0 || sb.sign == 0 || sa.sign == sb.sign) return;
        const double da = sa.sign * sa.abs_det, db = sb.sign * sb.abs_det;
        const double t = da / (da - db);
        scan.crossings.push_back({Point(sa.y + t * (sb.y - sa.y)), a, b});
    };
    for (int j = 0; j < grid.nv; ++j)
        for (int i = 0; i < grid.nu; ++i) {
            if (i + 1 < grid.nu) check(at(i, j), at(i + 1, j));
            if (j + 1 < grid.nv) check(at(i, j), at(i, j + 1));
        }
    return scan;
}

inline constexpr double kDefaultConditionEps = 1e-14;

struct SourceSelection {
    SourceCandidates selected;
    std::vector<std::size_t> indices;
    double condition = kInfinity;
    /// Set when cond(W) >= 1 / eps_cond.
    bool conditioning_warning = false;
};

namespace detail {

/// k x k block of functional values for each candidate source.
inline std::vector<Eigen::MatrixXd> candidate_blocks(const MeasurementOperator& m, const std::vector<Point>& cands) {
    std::vector<Eigen::MatrixXd> blocks(cands.size());
    const auto rows = static_cast<Eigen::Index>(m.size());
    const int k = m.kernel().k();
    parallel_for(cands.size(), [&](std::size_t c) {
        blocks[c].resize(rows, k);
        for (std::size_t i = 0; i < m.size(); ++i) blocks[c].row(static_cast<Eigen::Index>(i)) = m.apply_to_kernel(i, cands[c]);
    });
    return blocks;
}

inline double block_volume(const Eigen::MatrixXd& r) {
    if (r.cols() == 1) return r.norm();
    const double d = (r.transpose() * r).determinant();
    return d > 0 ? std::sqrt(d) : 0.0;
}

}  // namespace detail

/// Greedy column-pivoted selection of N sources (volume-maximizing pivoted QR over candidate blocks),
/// refined by determinant-increasing swaps. Linearly dependent candidates, such as duplicates, are
/// never selected.
inline SourceSelection select_sources(const MeasurementOperator& m, const SourceCandidates& candidates, std::size_t count,
                                      double eps_cond = kDefaultConditionEps) {
    const int k = m.kernel().k();
    if (count * static_cast<std::size_t>(k) != m.size())
        throw ValidationError("selected source count times k must equal the functional count");
    if (candidates.points.size() < count) throw InsufficientCandidates("fewer candidates than requested sources");
    for (const Point& y : candidates.points) m.require_exterior(y);

    SourceSelection sel;
    const auto blocks = detail::candidate_blocks(m, candidates.points);
    const std::size_t nc = blocks.size();
    if (nc == count) {
        sel.indices.resize(count);
        std::iota(sel.indices.begin(), sel.indices.end(), std::size_t{0});
    } else {
        std::vector<Eigen::MatrixXd> residual = blocks;
        std::vector<bool> used(nc, false);
        double max_initial = 0.0;
        for (const auto& b : blocks) max_initial = std::max(max_initial, b.norm());
        for (std::size_t step = 0; step < count; ++step) {
            double best = 0.0;
            std::size_t pick = nc;
            for (std::size_t c = 0; c < nc; ++c) {
                if (used[c]) continue;
                const double v = detail::block_volume(residual[c]);
                if (v > best) {
                    best = v;
                    pick = c;
                }
            }
            if (pick == nc || best <= 1e-13 * std::pow(max_initial, k))
                throw InsufficientCandidates("candidates do not contain enough independent sources");
            used[pick] = true;
            sel.indices.push_back(pick);
            // Orthonormalize the chosen residual block and deflate the others (twice for stability).
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(residual[pick]);
            const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(residual[pick].rows(), k);
            for (std::size_t c = 0; c < nc; ++c) {
                if (used[c]) continue;
                residual[c] -= q * (q.transpose() * residual[c]);
                residual[c] -= q * (q.transpose() * residual[c]);
            }
        }
        // Swap refinement: exchanging selected block s for candidate c scales |det W| by
        // |det((W^{-1} B_c)_{block s})|.
        for (int sweep = 0; sweep < 4 * static_cast<int>(count) + 10; ++sweep) {
            Eigen::MatrixXd W(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(m.size()));
            for (std::size_t s = 0; s < count; ++s) W.middleCols(static_cast<Eigen::Index>(s) * k, k) = blocks[sel.indices[s]];
            const Eigen::PartialPivLU<Eigen::MatrixXd> lu(W);
            double best_ratio = 1.0 + 1e-3;
            std::size_t best_s = count, best_c = nc;
            std::vector<bool> chosen(nc, false);
            for (std::size_t idx : sel.indices) chosen[idx] = true;
            for (std::size_t c = 0; c < nc; ++c) {
                if (chosen[c]) continue;
                const Eigen::MatrixXd z = lu.solve(blocks[c]);
                if (!z.allFinite()) break;
                for (std::size_t s = 0; s < count; ++s) {
                    const double ratio = std::abs(z.middleRows(static_cast<Eigen::Index>(s) * k, k).determinant());
                    if (ratio > best_ratio) {
                        best_ratio = ratio;
                        best_s = s;
                        best_c = c;
                    }
                }
            }
            if (best_c == nc) break;
            sel.indices[best_s] = best_c;
        }
    }
    for (std::size_t idx : sel.indices) sel.selected.points.push_back(candidates.points[idx]);
    Eigen::MatrixXd W(static_cast<Eigen::Index>(m.size()), static_cast<Eigen::Index>(m.size()));
    for (std::size_t s = 0; s < count; ++s) W.middleCols(static_cast<Eigen::Index>(s) * k, k) = blocks[sel.indices[s]];
    sel.condition = condition_number(W);
    sel.conditioning_warning = !(sel.condition < 1.0 / eps_cond);
    return sel;
}

/// u = sum_j Phi(., y_j) C_j interpolating the measured vector g, C = W^{-1} g.
struct SparseSolution {
    KernelExpansion expansion;
    /// The measured vector M u^(0) this representer reproduces.
    Eigen::VectorXd provenance;
};

inline SparseSolution build_sparse(const WMatrix& w, const Eigen::VectorXd& g, const Kernel& kernel) {
    const Eigen::Index n = w.entries.rows();
    if (g.size() != n) throw ValidationError("measured vector length must equal W size");
    const int k = kernel.k();
    SparseSolution s;
    s.provenance = g;
    s.expansion = KernelExpansion(kernel);
    s.expansion.sources = w.sources;
    if (g.isZero(0.0)) {
        s.expansion.coefficients.assign(w.sources.size(), Eigen::VectorXd::Zero(k));
        return s;
    }
    if (!(w.condition < 1.0 / std::numeric_limits<double>::epsilon()) || w.det_sign == 0)
        throw SingularW("W is singular at working precision (cond = " + std::to_string(w.condition) + ")");
    const Eigen::VectorXd c = Eigen::PartialPivLU<Eigen::MatrixXd>(w.entries).solve(g);
    if (!c.allFinite()) throw SingularW("W solve produced non-finite coefficients");
    for (std::size_t j = 0; j < w.sources.size(); ++j)
        s.expansion.coefficients.push_back(c.segment(static_cast<Eigen::Index>(j) * k, k));
    return s;
}

struct RepresenterReport {
    double interpolation_residual = 0.0;
    double f_match = 0.0;
    double norm_sparse = 0.0;
    double norm_minimizer = 0.0;
    double norm_ratio = 1.0;
    double sparse_objective = 0.0;
    double primal_objective = 0.0;
};

/// Interpolation residual ||M u# - g||_inf, |F(M u#) - F(g)|, and the norm ratio ||u#|| / ||u^(0)||.
/// Nothing is thresholded here.
inline RepresenterReport verify_representer(const SparseSolution& sparse, const MeasurementOperator& m,
                                            const Eigen::VectorXd& g, const NormSpec& norm_spec,
                                            const PrimalSolution& primal, const Instance& inst) {
    RepresenterReport r;
    const Eigen::VectorXd mu = apply(m, sparse.expansion);
    r.interpolation_residual = (mu - g).size() ? (mu - g).cwiseAbs().maxCoeff() : 0.0;
    r.f_match = std::abs(inst.F().value(mu) - inst.F().value(g));
    r.norm_sparse = norm(norm_spec, sparse.expansion, m.domain());
    r.norm_minimizer = std::sqrt(std::max(0.0, primal.c.dot(inst.gram().G * primal.c)));
    if (r.norm_minimizer == 0.0 && r.norm_sparse == 0.0) r.norm_ratio = 1.0;
    else r.norm_ratio = r.norm_minimizer > 0.0 ? r.norm_sparse / r.norm_minimizer : kInfinity;
    r.sparse_objective = inst.F().value(mu) + inst.b() * r.norm_sparse;
    r.primal_objective = primal.objective;
    return r;
}

struct PlacedSources {
    SourceSelection selection;
    WMatrix w;
    int attempts = 0;
};

/// Picks N sources from dilated-boundary candidates, re-placing them with a jittered angle and a dilation
/// moved towards 1 (seeded) up to five times while W stays ill-conditioned. Throws SingularW when no
/// attempt yields enough independent sources.
inline PlacedSources place_nondegenerate_sources(const MeasurementOperator& m, std::size_t count, int candidate_count,
                                                 double rho, std::uint64_t seed,
                                                 double eps_cond = kDefaultConditionEps) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(0.0, 1.0);
    PlacedSources best;
    double best_cond = kInfinity;
    const int n_cand = std::max<int>(candidate_count, static_cast<int>(count));
    for (int attempt = 0; attempt < 5; ++attempt) {
        const double offset = attempt == 0 ? 0.0 : jitter(rng) * 2.0 * std::numbers::pi / n_cand;
        const double r = 1.0 + (rho - 1.0) * (1.0 - 0.15 * attempt);
        const SourceCandidates cands = place_sources(m.domain(), n_cand, r, offset);
        SourceSelection sel;
        try {
            sel = select_sources(m, cands, count, eps_cond);
        } catch (const InsufficientCandidates&) {
            continue;
        }
        if (sel.condition < best_cond) {
            best_cond = sel.condition;
            best.selection = sel;
            best.attempts = attempt + 1;
        }
        if (!sel.conditioning_warning) break;
    }
    if (best.selection.selected.points.empty()) throw SingularW("no non-degenerate source placement found");
    best.w = assemble_W(m, best.selection.selected.points);
    return best;
}

}  // namespace mfsparse
