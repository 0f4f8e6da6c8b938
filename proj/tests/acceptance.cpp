// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any criterion fails.
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "mfsparse/cli.hpp"

using namespace mfsparse;
using mfsparse::detail::make_point;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
const Kernel kLap2{OperatorId::Laplace2D};
const Kernel kLap3{OperatorId::Laplace3D};
const Kernel kCR{OperatorId::CauchyRiemann2D};

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt_num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

double fit_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    const double n = double(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Verdict degeneracy_sphere() {
    const Point x1 = make_point({0, 0, 0}), x2 = make_point({0.5, 0, 0}), y1 = make_point({2, 2, 0});
    const bool distances = (x1 - y1).norm() == 2 * std::sqrt(2.0) && (x2 - y1).norm() == 2.5;
    const double scale = 1.0 / (std::pow(4 * kPi, 2) * 2 * std::sqrt(2.0) * 2.5);
    const MeasurementOperator m(kLap3, Domain::unit_ball(), point_functionals({x1, x2}, 1));
    const double at_point = degeneracy_scan(m, {y1}, std::vector<Point>{make_point({2, -2, 0})})[0].abs_det;
    const double c = 16.0 / 7.0, r = std::sqrt(c * c - 8.0 / 7.0);
    std::vector<Point> sphere;
    for (const Point& p : sphere_points(make_point({c, 0, 0}), r, 40))
        if (p.norm() > 1.05 && sphere.size() < 10) sphere.push_back(p);
    double worst = 0.0;
    bool valid = sphere.size() == 10;
    for (const auto& s : degeneracy_scan(m, {y1}, sphere)) {
        valid = valid && s.valid;
        worst = std::max(worst, s.abs_det);
    }
    const bool pass = distances && at_point <= 1e-14 * scale && valid && worst <= 1e-12 * scale;
    return {pass, "distances exact=" + std::string(distances ? "yes" : "no") + ", |det| at (2,-2,0) / scale=" +
                      fmt_num(at_point / scale) + ", max |det| / scale on 10 sphere points=" + fmt_num(worst / scale)};
}

Verdict green_identity() {
    const Domain disk = Domain::unit_disk();
    const BoundaryQuadrature q = build_boundary_quadrature(disk, 256);
    std::vector<Point> inside, outside;
    for (double rr : {0.0, 0.35, 0.7})
        for (int i = 0; i < 8; ++i) inside.push_back(make_point({rr * std::cos(i * kPi / 4 + 0.1), rr * std::sin(i * kPi / 4 + 0.1)}));
    for (double rr : {1.5, 3.0})
        for (int i = 0; i < 8; ++i) outside.push_back(make_point({rr * std::cos(i * kPi / 4), rr * std::sin(i * kPi / 4)}));
    double err_in = 0.0, err_out = 0.0, worst_rate = kInfinity;
    for (const char* name : {"constant", "x1^2-x2^2", "re-z^3"}) {
        const ClosedFormField u = make_truth(name, kLap2);
        const BoundaryData d = sample_boundary_data(u, kLap2, q);
        for (const Point& x : inside) err_in = std::max(err_in, std::abs(green_reproduce(kLap2, disk, d, x)[0] - u.value(x)[0]));
        for (const Point& x : outside) err_out = std::max(err_out, std::abs(green_reproduce(kLap2, disk, d, x)[0]));
    }
    // Decay with node count, measured off-centre.
    const ReproductionTable t = reproduce_convergence(kLap2, disk, make_truth("re-z^3", kLap2), make_point({0.5, 0.3}), {8, 12, 16, 24, 32});
    worst_rate = t.geometric_rate;
    bool monotone = true;
    for (std::size_t i = 1; i < t.error.size(); ++i) monotone = monotone && t.error[i] < t.error[i - 1];
    const bool pass = err_in <= 1e-8 && err_out <= 1e-8 && monotone && worst_rate > 0.0 && t.fitted_order > 4.0;
    return {pass, "interior err=" + fmt_num(err_in) + ", exterior=" + fmt_num(err_out) + ", decay rate per node=" +
                      fmt_num(worst_rate) + ", fitted algebraic order=" + fmt_num(t.fitted_order)};
}

Verdict representer_relations() {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> rad(0.0, 0.9), ang(0, 2 * kPi);
    std::normal_distribution<double> gauss(0, 1);
    NormSpec ns;
    ns.radial = 24;
    ns.angular = 48;
    const Domain disk = Domain::unit_disk();
    const Dictionary dict = Dictionary::from_sources(place_sources(disk, 48, 2.0).points, 1);
    int accepted = 0, skipped = 0;
    double worst_res = 0.0, worst_f = 0.0, ratio_lo = kInfinity, ratio_hi = 0.0;
    while (accepted < 50) {
        const int n = 1 + static_cast<int>(rng() % 8);
        std::vector<Point> xs;
        for (int i = 0; i < n; ++i) {
            const double r = rad(rng), t = ang(rng);
            xs.push_back(make_point({r * std::cos(t), r * std::sin(t)}));
        }
        const MeasurementOperator m(kLap2, disk, point_functionals(xs, 1));
        Eigen::VectorXd h(n);
        for (int i = 0; i < n; ++i) h[i] = gauss(rng);
        const Instance inst = build_instance(m, dict, ns, DataFunctionalSpec{2.0, h}, 1e-3);
        const PrimalSolution p = minimize_primal(inst, SolveConfig{});
        PlacedSources placed;
        try {
            placed = place_nondegenerate_sources(m, n, 4 * n, 2.0, rng());
        } catch (const SingularW&) {
            ++skipped;
            continue;
        }
        if (placed.selection.conditioning_warning || placed.w.condition > 1e8) {
            ++skipped;
            continue;
        }
        const Eigen::VectorXd g = inst.A() * p.c;
        const RepresenterReport rep = verify_representer(build_sparse(placed.w, g, kLap2), m, g, ns, p, inst);
        worst_res = std::max(worst_res, g.norm() > 0 ? rep.interpolation_residual / g.norm() : rep.interpolation_residual);
        worst_f = std::max(worst_f, rep.f_match);
        ratio_lo = std::min(ratio_lo, rep.norm_ratio);
        ratio_hi = std::max(ratio_hi, rep.norm_ratio);
        ++accepted;
    }
    return {worst_res <= 1e-8 && worst_f <= 1e-8,
            "50 instances (" + std::to_string(skipped) + " ill-conditioned placements skipped), max residual/|g|=" +
                fmt_num(worst_res) + ", max F mismatch=" + fmt_num(worst_f) + ", norm ratio in [" + fmt_num(ratio_lo) +
                ", " + fmt_num(ratio_hi) + "]"};
}

Verdict duality_suite() {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-0.7, 0.7), ang(0, 2 * kPi), logb(-4, -1);
    std::normal_distribution<double> gauss(0, 1);
    NormSpec ns;
    ns.radial = 20;
    ns.angular = 40;
    const Domain disk = Domain::unit_disk();
    auto random_vec = [&](int n) {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v[i] = gauss(rng);
        return v;
    };
    double worst_gap = 0.0, worst_opt = 0.0, worst_weak = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int nf = 2 + static_cast<int>(rng() % 6), na = 4 + static_cast<int>(rng() % 20);
        std::vector<Point> xs;
        for (int i = 0; i < nf; ++i) xs.push_back(make_point({u(rng), u(rng)}));
        const MeasurementOperator m(kLap2, disk, point_functionals(xs, 1));
        const Dictionary dict = Dictionary::from_sources(place_sources(disk, na, 1.5 + (rng() % 10) * 0.1, ang(rng)).points, 1);
        const Instance inst = build_instance(m, dict, ns, DataFunctionalSpec{2.0, random_vec(nf)}, std::pow(10.0, logb(rng)));
        SolveConfig cfg;
        cfg.record_history = true;
        const PrimalSolution p = minimize_primal(inst, cfg);
        const DualSolution d = solve_dual(inst, cfg);
        const Diagnostics diag = check_optimality(p, d, inst);
        worst_gap = std::max(worst_gap, std::abs(diag.duality_gap) / (1 + std::abs(p.objective)));
        worst_opt = std::max(worst_opt, diag.optimality_residual / (1 + inst.b() * p.norm_value));
        // Weak duality against arbitrary feasible duals and arbitrary primal points.
        for (int k = 0; k < 10; ++k) {
            const Eigen::VectorXd hk = inst.project_dual_feasible(random_vec(nf));
            const Eigen::VectorXd ck = random_vec(na) * 0.1;
            worst_weak = std::max(worst_weak, inst.dual_objective(hk) - inst.objective(ck));
            worst_weak = std::max(worst_weak, inst.dual_objective(hk) - p.objective);
        }
        worst_weak = std::max(worst_weak, d.objective - p.objective);
    }
    // Zero-threshold: c = 0 returned exactly when the subgradient condition holds; brute force confirms it.
    int iff_failures = 0, iff_cases = 0;
    for (int atoms : {1, 2}) {
        for (int trial = 0; trial < 25; ++trial) {
            std::vector<Point> xs{make_point({u(rng), u(rng)}), make_point({u(rng), u(rng)})};
            const MeasurementOperator m(kLap2, disk, point_functionals(xs, 1));
            const Dictionary dict = Dictionary::from_sources(place_sources(disk, atoms, 1.8, ang(rng)).points, 1);
            const Eigen::MatrixXd A = assemble_matrix(m, dict);
            const GramData g = gram(ns, dict, disk, kLap2);
            const Eigen::VectorXd h = random_vec(2);
            const double threshold = dual_norm(h, A, g);
            for (double factor : {0.5, 0.99, 1.01, 2.0}) {
                const Instance inst(A, g, DataFunctionalSpec{2.0, h}, factor * threshold);
                const bool zero = minimize_primal(inst, SolveConfig{}).c.isZero(0.0);
                // Brute force over a polar grid of directions and radii in whitened coordinates.
                double best = inst.objective(Eigen::VectorXd::Zero(atoms));
                const double base = best;
                for (int a = 0; a < (atoms == 1 ? 2 : 720); ++a) {
                    Eigen::VectorXd dir(atoms);
                    if (atoms == 1) dir[0] = a == 0 ? 1.0 : -1.0;
                    else dir << std::cos(a * kPi / 360), std::sin(a * kPi / 360);
                    for (double t = 1e-6; t < 1e2; t *= 1.05) {
                        const Eigen::VectorXd c = g.unwhiten(t * dir);
                        best = std::min(best, inst.objective(c));
                    }
                }
                const bool brute_zero = best >= base - 1e-14 * (1 + base);
                ++iff_cases;
                if (zero != (factor > 1.0) || brute_zero != (factor > 1.0)) ++iff_failures;
            }
        }
    }
    const bool pass = worst_gap <= 1e-6 && worst_opt <= 1e-6 && worst_weak <= 1e-8 && iff_failures == 0;
    return {pass, "100 instances: max gap=" + fmt_num(worst_gap) + ", max optimality residual=" + fmt_num(worst_opt) +
                      ", max weak-duality violation=" + fmt_num(worst_weak) + "; zero-threshold " +
                      std::to_string(iff_cases - iff_failures) + "/" + std::to_string(iff_cases)};
}

Verdict dirichlet_convergence() {
    ExperimentSpec s;
    s.truth = "x1^2-x2^2";
    const ConvergenceRecord r = run_dirichlet(s);
    const ConvergenceVerdict v = weak_convergence_probe(r, r.truth_norm);
    const double e64 = r.rows.back().sup_error;
    const bool pass = r.rows.back().n == 64 && e64 <= 1e-2 && r.error_nonincreasing_tail && v.certificate_holds;
    std::string errs;
    for (const auto& row : r.rows) errs += (errs.empty() ? "" : " ") + fmt_num(row.sup_error);
    return {pass, "sup errors [" + errs + "], C0=" + fmt_num(v.c0) + " vs 3*norm(u*)=" + fmt_num(v.bound)};
}

Verdict cauchy_problem() {
    ExperimentSpec s;
    s.problem = Problem::Cauchy;
    s.truth = "re-z^2";
    s.eval_radius = 0.7;
    const ConvergenceRecord consistent = run_cauchy(s);
    const double near = consistent.rows.back().sup_error;

    ExperimentSpec z = s;
    z.truth = "zero";
    double zero_norm = 0.0;
    for (const auto& row : run_cauchy(z).rows) zero_norm = std::max(zero_norm, row.norm_value);

    ExperimentSpec noisy = s;
    noisy.noise = 0.1;
    noisy.seed = 5;
    noisy.build_representer = false;
    const ConvergenceRecord corrupted = run_cauchy(noisy);
    const ConvergenceVerdict vc = weak_convergence_probe(consistent, consistent.truth_norm);
    const ConvergenceVerdict vn = weak_convergence_probe(corrupted, corrupted.truth_norm);
    const bool pass = near <= 5e-2 && zero_norm <= 1e-12 && vn.ratio_growth >= 10.0;
    return {pass, "near-arc error at N=64: " + fmt_num(near) + " (far " + fmt_num(consistent.rows.back().far_error) +
                      "), zero-data max norm=" + fmt_num(zero_norm) + ", consistent verdict=" + vc.verdict +
                      ", noisy ratio growth=" + fmt_num(vn.ratio_growth) + " (" + vn.verdict + ")"};
}

Verdict pde_residual_order() {
    struct Case {
        Kernel kernel;
        Point x, y;
    };
    const std::vector<Case> cases{{kLap2, make_point({0.1, 0.2}), make_point({0.9, 0.8})},
                                  {kLap3, make_point({0.1, 0.2, -0.1}), make_point({0.9, 0.8, 0.3})},
                                  {kCR, make_point({0.1, 0.2}), make_point({0.9, 0.8})}};
    bool pass = true;
    std::string detail;
    for (const auto& c : cases) {
        std::vector<double> lh, le;
        for (double h : {1e-2, 5e-3, 2.5e-3, 1.25e-3}) {
            lh.push_back(std::log(h));
            le.push_back(std::log(std::abs(pde_residual(c.kernel, c.x, c.y, h))));
        }
        const double order = fit_slope(lh, le);
        pass = pass && order >= 1.8;
        detail += (detail.empty() ? "" : ", ") + std::string(kernel_name(c.kernel.id)) + " order=" + fmt_num(order);
    }
    return {pass, detail};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Verdict determinism() {
    const std::string configs = MFSPARSE_CONFIG_DIR;
    const fs::path root = fs::temp_directory_path() / ("mfsparse_acceptance_" + std::to_string(::getpid()));
    const std::vector<std::pair<std::string, std::string>> cases{{"solve", "solve.json"},
                                                                 {"representer", "representer.json"},
                                                                 {"degeneracy-probe", "ball_degeneracy.json"},
                                                                 {"green-check", "disk.json"},
                                                                 {"converge", "converge_cauchy_noisy.json"}};
    int identical = 0, files = 0;
    bool ok = true;
    for (const auto& [sub, cfg] : cases) {
        std::vector<fs::path> outs;
        for (const char* threads : {"1", "0"}) {
            const fs::path out = root / (sub + "_" + threads);
            const std::string config = configs + "/" + cfg, out_s = out.string();
            const char* argv[] = {"mfsparse", sub.c_str(), "--config", config.c_str(), "--out", out_s.c_str(),
                                  "--seed", "7", "--threads", threads};
            std::ostringstream err;
            ok = ok && run_cli(10, argv, err) == 0;
            outs.push_back(out);
        }
        for (const auto& entry : fs::directory_iterator(outs[0])) {
            ++files;
            const std::string a = slurp(entry.path()), b = slurp(outs[1] / entry.path().filename());
            if (std::hash<std::string>{}(a) == std::hash<std::string>{}(b) && a == b) ++identical;
        }
    }
    fs::remove_all(root);
    return {ok && files > 0 && identical == files,
            std::to_string(identical) + "/" + std::to_string(files) + " output files identical across repeated runs of 5 subcommands"};
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::off);
    struct Criterion {
        const char* name;
        std::function<Verdict()> run;
        double budget_s;
    };
    const std::vector<Criterion> criteria{
        {"degeneracy sphere", degeneracy_sphere, 1.0},
        {"Green identity", green_identity, 5.0},
        {"representer relations", representer_relations, 0.0},
        {"duality suite", duality_suite, 0.0},
        {"Dirichlet convergence", dirichlet_convergence, 60.0},
        {"Cauchy problem", cauchy_problem, 0.0},
        {"kernel PDE residual order", pde_residual_order, 0.0},
        {"determinism", determinism, 0.0},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (criteria[i].budget_s > 0.0 && secs >= criteria[i].budget_s) {
            v.pass = false;
            v.detail += "; exceeded the " + fmt_num(criteria[i].budget_s) + " s budget";
        }
        std::printf("%s %zu %s: %s (%.2f s)\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, v.detail.c_str(), secs);
        std::fflush(stdout);
        failures += v.pass ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
