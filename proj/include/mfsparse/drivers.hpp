#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "fields.hpp"
#include "geometry.hpp"
#include "measurement.hpp"
#include "norms.hpp"
#include "representer.hpp"
#include "solver.hpp"

namespace mfsparse {

enum class Problem { DataFit, Dirichlet, Cauchy };

inline std::string problem_name(Problem p) {
    switch (p) {
    case Problem::DataFit: return "datafit";
    case Problem::Dirichlet: return "dirichlet";
    case Problem::Cauchy: return "cauchy";
    }
    return "unknown";
}

inline Problem parse_problem(const std::string& s) {
    if (s == "datafit") return Problem::DataFit;
    if (s == "dirichlet") return Problem::Dirichlet;
    if (s == "cauchy") return Problem::Cauchy;
    throw ValidationError("unknown problem '" + s + "'");
}

/// One convergence study: problem type, geometry, reference solution and the N / b_N schedule.
struct ExperimentSpec {
    Problem problem = Problem::Dirichlet;
    Domain domain = Domain::unit_disk();
    Kernel kernel{OperatorId::Laplace2D};
    std::string truth = "x1^2-x2^2";
    std::vector<int> n_schedule{8, 16, 32, 64};
    /// Explicit b_N; when empty b_N = b_scale / N.
    std::vector<double> b_schedule;
    double b_scale = 1e-2;
    double q = 2.0;
    NormSpec norm;
    /// Dilation of the source pseudo-boundary.
    double rho = 2.0;
    /// Minimum dictionary source count; at least twice the W size is always used.
    int dictionary_sources = 128;
    /// Candidate count for the sparse representer, as a multiple of its source count.
    int candidate_factor = 4;
    /// Error compact: the boundary scaled about the centroid by this factor.
    double eval_radius = 0.5;
    int eval_points = 256;
    /// Data-fit training points; a sunflower layout of the largest N points when empty.
    std::vector<Point> training_points;
    /// Cauchy: fraction of the boundary parameter range covered by the data arc.
    double arc_fraction = 0.5;
    /// Standard deviation of seeded Gaussian noise added to the data.
    double noise = 0.0;
    std::uint64_t seed = 0;
    SolveConfig solver;
    bool build_representer = true;

    double b_at(std::size_t i) const {
        return b_schedule.empty() ? b_scale / n_schedule[i] : b_schedule[i];
    }

    void validate() const {
        if (kernel.dim() != domain.dim()) throw ValidationError("kernel and domain dimensions differ");
        if (n_schedule.empty()) throw ValidationError("N schedule is empty");
        for (std::size_t i = 0; i < n_schedule.size(); ++i) {
            if (n_schedule[i] < 1) throw ValidationError("N must be positive");
            if (i > 0 && n_schedule[i] <= n_schedule[i - 1]) throw ValidationError("N schedule must increase strictly");
        }
        if (!b_schedule.empty() && b_schedule.size() != n_schedule.size())
            throw ValidationError("b schedule length must match the N schedule");
        for (std::size_t i = 0; i < n_schedule.size(); ++i)
            if (!(b_at(i) > 0.0) || !std::isfinite(b_at(i))) throw ValidationError("b_N must be positive");
        if (!(q >= 1.0)) throw ValidationError("q must lie in [1, inf]");
        if (!(eval_radius > 0.0 && eval_radius < 1.0)) throw ValidationError("eval_radius must lie in (0, 1)");
        if (eval_points < 1) throw ValidationError("eval_points must be positive");
        if (!(arc_fraction > 0.0 && arc_fraction < 1.0)) throw ValidationError("arc_fraction must lie in (0, 1)");
        if (!(noise >= 0.0)) throw ValidationError("noise must be non-negative");
        if (candidate_factor < 1) throw ValidationError("candidate_factor must be positive");
        if (problem == Problem::DataFit && !training_points.empty() &&
            training_points.size() < static_cast<std::size_t>(n_schedule.back()))
            throw ValidationError("fewer training points than the largest N");
        solver.validate();
    }
};

struct ConvergenceRow {
    int n = 0;
    int functionals = 0;
    double b = 0.0;
    double objective = 0.0;
    double misfit = 0.0;
    double norm_value = 0.0;
    double duality_gap = 0.0;
    double optimality_residual = 0.0;
    /// Sup-error on the evaluation compact (near the data arc for Cauchy problems).
    double sup_error = 0.0;
    /// Cauchy only: sup-error on the compact away from the data arc; NaN otherwise.
    double far_error = std::numeric_limits<double>::quiet_NaN();
    double cond_w = std::numeric_limits<double>::quiet_NaN();
    bool sparse_built = false;
    double interpolation_residual = std::numeric_limits<double>::quiet_NaN();
    double norm_ratio = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    double wall_time = 0.0;
};

struct ConvergenceRecord {
    Problem problem = Problem::Dirichlet;
    std::vector<ConvergenceRow> rows;
    std::vector<std::optional<SparseSolution>> representers;
    /// Discretized norm of the reference solution.
    double truth_norm = 0.0;
    /// Sup-error did not increase over the last two N.
    bool error_nonincreasing_tail = true;
};

namespace detail {

/// Sunflower layout in the scaled domain; nested, so the first N points are spread for every N.
inline std::vector<Point> sunflower_points(const Domain& domain, int count, double scale) {
    std::vector<Point> pts;
    const Point c = domain.centroid();
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    if (domain.dim() == 3) {
        for (const Point& p : sphere_points(c, 1.0, count)) {
            const double s = scale * std::cbrt((pts.size() + 0.5) / count);
            pts.push_back(c + s * (p - c) * domain.diameter() / 2.0);
        }
        return pts;
    }
    for (int i = 0; i < count; ++i) {
        const double s = scale * std::sqrt((i + 0.5) / count);
        const double t = std::fmod(golden * i, 2.0 * std::numbers::pi);
        pts.push_back(c + s * (domain.boundary_point(t) - c));
    }
    return pts;
}

/// N boundary points: equispaced on the whole boundary, or on the data arc [0, 2 pi f] (planar) /
/// polar cap z >= 1 - 2 f (ball), node-centred so the arc end points are excluded.
inline std::vector<Point> boundary_nodes(const Domain& domain, int count, std::optional<double> arc) {
    std::vector<Point> pts;
    if (const auto* b = std::get_if<Ball>(&domain.shape())) {
        const double f = arc.value_or(1.0);
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (int j = 0; j < count; ++j) {
            const double z = 1.0 - 2.0 * f * (j + 0.5) / count;
            const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
            pts.push_back(b->center + b->radius * make_point({rxy * std::cos(golden * j), rxy * std::sin(golden * j), z}));
        }
        return pts;
    }
    for (int i = 0; i < count; ++i) {
        const double t = arc ? 2.0 * std::numbers::pi * *arc * (i + 0.5) / count : 2.0 * std::numbers::pi * i / count;
        pts.push_back(domain.boundary_point(t));
    }
    return pts;
}

/// Compact: scaled boundary points, restricted to the parameter window [from, to] (fractions of the
/// full range; planar) or to z in [z_lo, z_hi] of the unit direction (ball).
inline std::vector<Point> compact_points(const Domain& domain, double scale, int count, double from, double to) {
    std::vector<Point> pts;
    const Point c = domain.centroid();
    if (domain.dim() == 3) {
        const int total = count * 4;
        for (const Point& p : sphere_points(make_point({0.0, 0.0, 0.0}), 1.0, total)) {
            const double z_frac = (1.0 - p[2]) / 2.0;  // 0 at the north pole
            if (z_frac < from || z_frac > to) continue;
            pts.push_back(c + scale * p * domain.diameter() / 2.0);
        }
        return pts;
    }
    for (int i = 0; i < count; ++i) {
        const double t = 2.0 * std::numbers::pi * (from + (to - from) * (i + 0.5) / count);
        pts.push_back(c + scale * (domain.boundary_point(t) - c));
    }
    return pts;
}

template <Field F>
double sup_error(const KernelExpansion& u, const F& truth, const std::vector<Point>& pts) {
    std::vector<double> errs(pts.size(), 0.0);
    parallel_for(pts.size(), [&](std::size_t i) { errs[i] = (u.value(pts[i]) - truth.value(pts[i])).cwiseAbs().maxCoeff(); });
    double e = 0.0;
    for (double v : errs) e = std::max(e, v);
    return e;
}

/// Functionals of the N-th problem instance.
inline std::vector<Functional> experiment_functionals(const ExperimentSpec& spec, int n,
                                                      const std::vector<Point>& training) {
    const int k = spec.kernel.k();
    switch (spec.problem) {
    case Problem::DataFit:
        return point_functionals(std::vector<Point>(training.begin(), training.begin() + n), k);
    case Problem::Dirichlet: {
        std::vector<Functional> fs;
        for (const Point& x : boundary_nodes(spec.domain, n, std::nullopt))
            for (int r = 0; r < k; ++r) fs.emplace_back(make_trace(spec.domain, 0, x, r));
        return fs;
    }
    case Problem::Cauchy: {
        std::vector<Functional> fs;
        for (const Point& x : boundary_nodes(spec.domain, n, spec.arc_fraction))
            for (int op = 0; op < spec.kernel.order(); ++op)
                for (int r = 0; r < k; ++r) fs.emplace_back(make_trace(spec.domain, op, x, r));
        return fs;
    }
    }
    throw ValidationError("unknown problem");
}

}  // namespace detail

inline constexpr double kDriverGapTolerance = 1e-6;

/// Solves one N of the schedule and fills its row. Solver invariants are re-asserted for smooth q.
inline ConvergenceRow run_single(const ExperimentSpec& spec, std::size_t index, const std::vector<Point>& training,
                                 std::optional<SparseSolution>* representer) {
    const auto t0 = std::chrono::steady_clock::now();
    const int n = spec.n_schedule[index];
    const Kernel& kernel = spec.kernel;
    const int k = kernel.k();
    const MeasurementOperator m(kernel, spec.domain, detail::experiment_functionals(spec, n, training));
    const ClosedFormField truth = make_truth(spec.truth, kernel);

    Eigen::VectorXd g = m.apply(truth);
    if (spec.noise > 0.0) {
        std::mt19937_64 rng(spec.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(n)));
        std::normal_distribution<double> normal(0.0, spec.noise);
        for (Eigen::Index i = 0; i < g.size(); ++i) g[i] += normal(rng);
    }

    ConvergenceRow row;
    row.n = n;
    row.functionals = static_cast<int>(m.size());
    row.b = spec.b_at(index);

    const int w_sources = static_cast<int>(m.size()) / k;
    const int dict_sources = std::max(spec.dictionary_sources, 2 * w_sources);
    const Dictionary dict = Dictionary::from_sources(place_sources(spec.domain, dict_sources, spec.rho).points, k);
    const Instance inst = build_instance(m, dict, spec.norm, DataFunctionalSpec{spec.q, g}, row.b);
    SolveConfig cfg = spec.solver;
    cfg.b = row.b;
    cfg.seed = spec.seed;
    const PrimalSolution primal = minimize_primal(inst, cfg);
    row.objective = primal.objective;
    row.misfit = primal.misfit;
    row.norm_value = primal.norm_value;
    row.iterations = primal.iterations;
    if (inst.F().smooth()) {
        const DualSolution dual = solve_dual(inst, cfg);
        const Diagnostics diag = check_optimality(primal, dual, inst);
        row.duality_gap = diag.duality_gap;
        row.optimality_residual = diag.optimality_residual;
        if (!(row.duality_gap <= kDriverGapTolerance * (1.0 + std::abs(row.objective))) ||
            !(row.optimality_residual <= kDriverGapTolerance * (1.0 + row.b * row.norm_value)))
            throw NonConvergence("N = " + std::to_string(n) + ": duality gap " + std::to_string(row.duality_gap) +
                                 ", optimality residual " + std::to_string(row.optimality_residual));
    } else {
        row.duality_gap = std::numeric_limits<double>::quiet_NaN();
        row.optimality_residual = std::numeric_limits<double>::quiet_NaN();
    }

    const KernelExpansion u0 = expansion_from(kernel, dict, primal.c);
    if (spec.problem == Problem::Cauchy) {
        const double f = spec.arc_fraction;
        const double margin = 0.15 * f;
        row.sup_error = detail::sup_error(
            u0, truth, detail::compact_points(spec.domain, spec.eval_radius, spec.eval_points, margin, f - margin));
        const double rest = 1.0 - f;
        row.far_error = detail::sup_error(
            u0, truth,
            detail::compact_points(spec.domain, spec.eval_radius, spec.eval_points, f + 0.15 * rest, 1.0 - 0.15 * rest));
    } else {
        row.sup_error = detail::sup_error(u0, truth, detail::compact_points(spec.domain, spec.eval_radius, spec.eval_points, 0.0, 1.0));
    }

    if (spec.build_representer) {
        // A W that is singular at working precision is recorded (sparse_built = false), not fatal.
        try {
            const PlacedSources placed = place_nondegenerate_sources(m, static_cast<std::size_t>(w_sources),
                                                                     spec.candidate_factor * w_sources, spec.rho,
                                                                     spec.seed + static_cast<std::uint64_t>(n));
            row.cond_w = placed.w.condition;
            const Eigen::VectorXd mu0 = inst.A() * primal.c;
            SparseSolution sparse = build_sparse(placed.w, mu0, kernel);
            const RepresenterReport rep = verify_representer(sparse, m, mu0, spec.norm, primal, inst);
            row.sparse_built = true;
            row.interpolation_residual = rep.interpolation_residual;
            row.norm_ratio = rep.norm_ratio;
            if (representer) *representer = std::move(sparse);
        } catch (const SingularW&) {
            row.sparse_built = false;
            if (std::isnan(row.cond_w)) row.cond_w = kInfinity;
        }
    }
    row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

/// Runs every N of the schedule (in parallel; rows are merged by N).
inline ConvergenceRecord run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    std::vector<Point> training = spec.training_points;
    if (spec.problem == Problem::DataFit) {
        if (training.empty()) training = detail::sunflower_points(spec.domain, spec.n_schedule.back(), 0.8);
        for (std::size_t i = 0; i < training.size(); ++i)
            for (std::size_t j = 0; j < i; ++j)
                if (training[i] == training[j]) throw ValidationError("training points must be pairwise distinct");
    }
    ConvergenceRecord rec;
    rec.problem = spec.problem;
    rec.rows.resize(spec.n_schedule.size());
    rec.representers.resize(spec.n_schedule.size());
    parallel_for(spec.n_schedule.size(),
                 [&](std::size_t i) { rec.rows[i] = run_single(spec, i, training, &rec.representers[i]); });
    rec.truth_norm = norm(spec.norm, make_truth(spec.truth, spec.kernel), spec.domain, spec.kernel);
    const std::size_t r = rec.rows.size();
    rec.error_nonincreasing_tail = r < 2 || rec.rows[r - 1].sup_error <= rec.rows[r - 2].sup_error;
    return rec;
}

inline ConvergenceRecord run_datafit(ExperimentSpec spec) {
    spec.problem = Problem::DataFit;
    return run_experiment(spec);
}

inline ConvergenceRecord run_dirichlet(ExperimentSpec spec) {
    spec.problem = Problem::Dirichlet;
    return run_experiment(spec);
}

inline ConvergenceRecord run_cauchy(ExperimentSpec spec) {
    spec.problem = Problem::Cauchy;
    return run_experiment(spec);
}

struct ConvergenceVerdict {
    /// "consistent" or "no-solution-evidence".
    std::string verdict;
    /// max_N objective_N / b_N.
    double c0 = 0.0;
    /// 3 * discretized norm of the reference solution.
    double bound = 0.0;
    bool certificate_holds = false;
    /// (objective / b) at the last N over the same ratio at the first N.
    double ratio_growth = 1.0;
    bool error_nonincreasing_tail = true;
};

/// Boundedness certificate objective_N <= C0 b_N with C0 fitted as the max ratio, checked against
/// 3 ||u*||; also relays the sup-error trend.
inline ConvergenceVerdict weak_convergence_probe(const ConvergenceRecord& record, double truth_norm) {
    ConvergenceVerdict v;
    std::vector<double> ratios;
    for (const auto& row : record.rows) ratios.push_back(row.objective / row.b);
    for (double r : ratios) v.c0 = std::max(v.c0, r);
    v.bound = 3.0 * truth_norm;
    v.certificate_holds = v.c0 <= v.bound * (1.0 + 1e-9) + 1e-300;
    if (!ratios.empty()) {
        if (ratios.front() > 0.0) v.ratio_growth = ratios.back() / ratios.front();
        else v.ratio_growth = ratios.back() > 0.0 ? kInfinity : 1.0;
    }
    v.error_nonincreasing_tail = record.error_nonincreasing_tail;
    v.verdict = v.certificate_holds ? "consistent" : "no-solution-evidence";
    return v;
}

}  // namespace mfsparse
