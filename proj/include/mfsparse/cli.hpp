#pragma once

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "drivers.hpp"
#include "errors.hpp"
#include "green.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "representer.hpp"
#include "solver.hpp"

namespace mfsparse {

/// Parsed command line: subcommand, config, output directory and run controls.
struct RunConfig {
    std::string subcommand;
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    int threads = 0;
    std::string log_level = "warn";
    bool timing = false;
};

namespace cli {

/// Context shared by every subcommand: the effective config (seed applied), its hash and the seed.
struct Context {
    RunConfig run;
    json config;
    std::string hash;
    std::uint64_t seed = 0;

    json header() const {
        return {{"version", kVersion}, {"config_hash", hash}, {"seed", seed}, {"subcommand", run.subcommand}};
    }

    void write(const std::string& name, const std::string& content) const {
        const std::filesystem::path p = std::filesystem::path(run.out_dir) / name;
        std::ofstream out(p, std::ios::binary);
        if (!out) throw ValidationError("cannot write output file '" + p.string() + "'");
        out << content;
        spdlog::info("wrote {}", p.string());
    }

    void write_json(const std::string& name, const json& j) const { write(name, j.dump(2) + "\n"); }
};

inline MeasurementOperator parse_operator(const json& j, Kernel& kernel, Domain& domain) {
    kernel = parse_kernel(io::require(j, "kernel").get<std::string>());
    domain = j.contains("domain") ? parse_domain(j.at("domain"))
                                  : (kernel.dim() == 3 ? Domain::unit_ball() : Domain::unit_disk());
    if (j.contains("singularity_guard")) kernel.singularity_guard = j.at("singularity_guard").get<double>();
    return MeasurementOperator(kernel, domain, parse_functionals(io::require(j, "functionals"), domain));
}

struct SolvedInstance {
    Kernel kernel{OperatorId::Laplace2D};
    Domain domain = Domain::unit_disk();
    std::optional<MeasurementOperator> m;
    Dictionary dict;
    NormSpec norm;
    std::optional<Instance> inst;
    PrimalSolution primal;
    std::optional<DualSolution> dual;
    Diagnostics diag;
    double spread = std::numeric_limits<double>::quiet_NaN();
};

inline SolvedInstance solve_from_config(const Context& ctx) {
    const json& j = ctx.config;
    SolvedInstance s;
    s.m.emplace(parse_operator(j, s.kernel, s.domain));
    const Eigen::VectorXd g = parse_data(j, *s.m, ctx.seed);
    s.dict = Dictionary::from_sources(parse_sources(j.contains("dictionary") ? j.at("dictionary") : json(), s.domain, 64),
                                      s.kernel.k());
    s.norm = parse_norm(j.contains("norm") ? j.at("norm") : json());
    SolveConfig cfg = parse_solver(j.contains("solver") ? j.at("solver") : json());
    cfg.b = io::get_or(j, "b", cfg.b);
    cfg.seed = ctx.seed;
    s.inst.emplace(build_instance(*s.m, s.dict, s.norm, DataFunctionalSpec{parse_q(j), g}, cfg.b));
    s.primal = minimize_primal(*s.inst, cfg);
    spdlog::info("primal: objective {} after {} iterations", s.primal.objective, s.primal.iterations);
    if (s.inst->F().smooth()) {
        s.dual = solve_dual(*s.inst, cfg);
        s.diag = check_optimality(s.primal, *s.dual, *s.inst);
        if (cfg.restarts > 0) s.spread = uniqueness_probe(*s.inst, cfg);
    } else {
        s.diag.primal_iterations = s.primal.iterations;
        s.diag.gram_shift = s.inst->gram().shift;
        s.diag.duality_gap = std::numeric_limits<double>::quiet_NaN();
        s.diag.optimality_residual = std::numeric_limits<double>::quiet_NaN();
    }
    return s;
}

inline void cmd_solve(const Context& ctx) {
    const SolvedInstance s = solve_from_config(ctx);
    json out = ctx.header();
    out["kernel"] = std::string(kernel_name(s.kernel.id));
    out["primal"] = {{"coefficients", io::from_vector(s.primal.c)},
                     {"objective", s.primal.objective},
                     {"norm", s.primal.norm_value},
                     {"misfit", s.primal.misfit},
                     {"iterations", s.primal.iterations},
                     {"converged", s.primal.converged}};
    if (s.dual)
        out["dual"] = {{"h", io::from_vector(s.dual->h)},
                       {"objective", s.dual->objective},
                       {"feasibility_residual", s.dual->feasibility_residual},
                       {"iterations", s.dual->iterations},
                       {"converged", s.dual->converged}};
    out["diagnostics"] = {{"duality_gap", io::number(s.diag.duality_gap)},
                          {"optimality_residual", io::number(s.diag.optimality_residual)},
                          {"primal_iterations", s.diag.primal_iterations},
                          {"dual_iterations", s.diag.dual_iterations},
                          {"gram_shift", s.diag.gram_shift},
                          {"dictionary_size", s.dict.size()},
                          {"uniqueness_spread", io::number(s.spread)}};
    ctx.write_json("solution.json", out);

    std::ostringstream csv;
    csv << "atom,source,column,coefficient\n";
    for (std::size_t a = 0; a < s.dict.size(); ++a) {
        const Point& y = s.dict.atoms[a].source;
        csv << a << ",\"";
        for (Eigen::Index i = 0; i < y.size(); ++i) csv << (i ? " " : "") << csv_number(y[i]);
        csv << "\"," << s.dict.atoms[a].column << ',' << csv_number(s.primal.c[static_cast<Eigen::Index>(a)]) << "\n";
    }
    ctx.write("coefficients.csv", csv.str());
}

inline void cmd_representer(const Context& ctx) {
    const SolvedInstance s = solve_from_config(ctx);
    const json rj = ctx.config.contains("representer") ? ctx.config.at("representer") : json::object();
    const std::size_t count = s.m->size() / static_cast<std::size_t>(s.kernel.k());
    if (s.m->size() % static_cast<std::size_t>(s.kernel.k()) != 0)
        throw ValidationError("functional count must be a multiple of k for the representer");
    WMatrix w;
    int attempts = 1;
    bool warning = false;
    if (rj.contains("points")) {
        w = assemble_W(*s.m, io::to_points(rj.at("points")));
    } else {
        const PlacedSources placed = place_nondegenerate_sources(
            *s.m, count, io::get_or(rj, "candidates", 4 * static_cast<int>(count)), io::get_or(rj, "rho", 2.0), ctx.seed);
        w = placed.w;
        attempts = placed.attempts;
        warning = placed.selection.conditioning_warning;
    }
    const Eigen::VectorXd g = s.inst->A() * s.primal.c;
    const SparseSolution sparse = build_sparse(w, g, s.kernel);
    const RepresenterReport rep = verify_representer(sparse, *s.m, g, s.norm, s.primal, *s.inst);
    json out = ctx.header();
    out["representer"] = sparse_to_json(sparse, {{"config_hash", ctx.hash}, {"primal_objective", s.primal.objective}});
    out["w"] = {{"condition", io::number(w.condition)},
                {"det_sign", w.det_sign},
                {"log_abs_det", io::number(w.log_abs_det)},
                {"hadamard_scale", w.hadamard_scale},
                {"placement_attempts", attempts},
                {"conditioning_warning", warning}};
    out["report"] = {{"interpolation_residual", rep.interpolation_residual},
                     {"f_match", rep.f_match},
                     {"norm_sparse", rep.norm_sparse},
                     {"norm_minimizer", rep.norm_minimizer},
                     {"norm_ratio", io::number(rep.norm_ratio)},
                     {"sparse_objective", rep.sparse_objective},
                     {"primal_objective", rep.primal_objective}};
    ctx.write_json("representer.json", out);
}

inline void cmd_degeneracy(const Context& ctx) {
    const json& j = ctx.config;
    Kernel kernel{OperatorId::Laplace2D};
    Domain domain = Domain::unit_disk();
    const MeasurementOperator m = parse_operator(j, kernel, domain);
    const std::vector<Point> fixed = j.contains("fixed_sources") ? io::to_points(j.at("fixed_sources")) : std::vector<Point>{};
    std::vector<DegeneracySample> samples;
    std::vector<ZeroCrossing> crossings;
    if (j.contains("candidates")) samples = degeneracy_scan(m, fixed, io::to_points(j.at("candidates")));
    if (j.contains("grid")) {
        const json& gj = j.at("grid");
        CandidateGrid grid{io::to_point(io::require(gj, "origin")), io::to_point(io::require(gj, "axis_u")),
                           io::to_point(io::require(gj, "axis_v")), io::get_or(gj, "nu", 50), io::get_or(gj, "nv", 50)};
        if (grid.nu < 1 || grid.nv < 1) throw ValidationError("grid resolution must be positive");
        DegeneracyScan scan = degeneracy_scan(m, fixed, grid);
        const std::size_t offset = samples.size();
        for (auto& c : scan.crossings) {
            c.from += offset;
            c.to += offset;
        }
        samples.insert(samples.end(), scan.samples.begin(), scan.samples.end());
        crossings = std::move(scan.crossings);
    }
    if (samples.empty()) throw ValidationError("degeneracy-probe needs 'candidates' or 'grid'");

    const int dim = domain.dim();
    std::ostringstream csv;
    csv << "index";
    for (int i = 0; i < dim; ++i) csv << ",y" << i + 1;
    csv << ",valid,abs_det,sign,cond,scale,relative_det\n";
    double min_rel = kInfinity;
    std::size_t argmin = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const double rel = s.valid && s.scale > 0 ? s.abs_det / s.scale : std::numeric_limits<double>::quiet_NaN();
        if (s.valid && s.scale > 0 && rel < min_rel) {
            min_rel = rel;
            argmin = i;
        }
        csv << i;
        for (int d = 0; d < dim; ++d) csv << ',' << csv_number(s.y[d]);
        csv << ',' << (s.valid ? 1 : 0) << ',' << csv_number(s.valid ? s.abs_det : std::nan("")) << ',' << s.sign << ','
            << csv_number(s.valid ? s.condition : std::nan("")) << ',' << csv_number(s.valid ? s.scale : std::nan(""))
            << ',' << csv_number(rel) << "\n";
    }
    ctx.write("degeneracy.csv", csv.str());
    json out = ctx.header();
    out["samples"] = samples.size();
    out["min_relative_det"] = io::number(min_rel);
    out["argmin"] = std::isfinite(min_rel) ? io::from_point(samples[argmin].y) : json(nullptr);
    json cj = json::array();
    for (const auto& c : crossings) cj.push_back({{"y", io::from_point(c.y)}, {"from", c.from}, {"to", c.to}});
    out["zero_crossings"] = cj;
    ctx.write_json("degeneracy.json", out);
}

inline void cmd_green(const Context& ctx) {
    const json& j = ctx.config;
    const Kernel kernel = parse_kernel(io::get_or<std::string>(j, "kernel", "laplace2d"));
    const Domain domain = j.contains("domain") ? parse_domain(j.at("domain"))
                                               : (kernel.dim() == 3 ? Domain::unit_ball() : Domain::unit_disk());
    const ClosedFormField u = make_truth(io::get_or<std::string>(j, "truth", "x1^2-x2^2"), kernel);
    const std::vector<Point> pts = io::to_points(io::require(j, "points"));
    const std::vector<int> counts = io::get_or(j, "node_counts", std::vector<int>{16, 32, 64, 128, 256});
    std::ostringstream csv;
    csv << "point";
    for (int i = 0; i < domain.dim(); ++i) csv << ",x" << i + 1;
    csv << ",inside,nodes,error\n";
    json summary = json::array();
    for (std::size_t p = 0; p < pts.size(); ++p) {
        if (pts[p].size() != domain.dim()) throw ValidationError("green-check point has wrong dimension");
        const ReproductionTable t = reproduce_convergence(kernel, domain, u, pts[p], counts);
        const bool inside = domain.contains(pts[p]);
        for (std::size_t i = 0; i < t.nodes.size(); ++i) {
            csv << p;
            for (Eigen::Index d = 0; d < pts[p].size(); ++d) csv << ',' << csv_number(pts[p][d]);
            csv << ',' << (inside ? 1 : 0) << ',' << t.nodes[i] << ',' << csv_number(t.error[i]) << "\n";
        }
        summary.push_back({{"x", io::from_point(pts[p])},
                           {"inside", inside},
                           {"fitted_order", t.fitted_order},
                           {"geometric_rate", t.geometric_rate},
                           {"final_error", t.error.back()}});
    }
    ctx.write("green.csv", csv.str());
    json out = ctx.header();
    out["points"] = summary;
    ctx.write_json("green.json", out);
}

inline void cmd_converge(const Context& ctx) {
    ExperimentSpec spec = parse_experiment(ctx.config);
    spec.seed = ctx.seed;
    const ConvergenceRecord rec = run_experiment(spec);
    ctx.write("convergence.csv", convergence_csv(rec, ctx.run.timing));
    const ConvergenceVerdict v = weak_convergence_probe(rec, rec.truth_norm);
    json out = ctx.header();
    out["problem"] = problem_name(spec.problem);
    out["verdict"] = v.verdict;
    out["c0"] = v.c0;
    out["bound"] = v.bound;
    out["certificate_holds"] = v.certificate_holds;
    out["ratio_growth"] = io::number(v.ratio_growth);
    out["truth_norm"] = rec.truth_norm;
    out["error_nonincreasing_tail"] = rec.error_nonincreasing_tail;
    out["final_sup_error"] = rec.rows.back().sup_error;
    ctx.write_json("summary.json", out);
    json reps = json::array();
    for (std::size_t i = 0; i < rec.representers.size(); ++i)
        reps.push_back(rec.representers[i] ? sparse_to_json(*rec.representers[i],
                                                             {{"n", rec.rows[i].n}, {"config_hash", ctx.hash}})
                                           : json(nullptr));
    json rj = ctx.header();
    rj["representers"] = reps;
    ctx.write_json("representers.json", rj);
}

inline json error_json(const std::string& code, const std::string& message, const json& context) {
    return {{"code", code}, {"message", message}, {"context", context}};
}

}  // namespace cli

/// Runs one subcommand. Returns 0 on success, 2 on validation errors and 3 on numerical failures; failures
/// print an error JSON {code, message, context} to `err` and, when possible, to <out>/error.json.
inline int run_cli(int argc, const char* const* argv, std::ostream& err = std::cerr) {
    CLI::App app{"Sparse minimizers for norm-regularized problems in spaces of elliptic solutions"};
    app.require_subcommand(1, 1);
    RunConfig run;
    std::uint64_t seed_value = 0;
    for (const char* name : {"solve", "representer", "degeneracy-probe", "green-check", "converge"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", run.config_path, "JSON configuration")->required();
        sub->add_option("--out", run.out_dir, "output directory");
        sub->add_option("--seed", seed_value, "seed for every stochastic choice");
        sub->add_option("--threads", run.threads, "worker cap (0 = all cores)")->check(CLI::NonNegativeNumber);
        sub->add_option("--log", run.log_level, "log level")
            ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
        sub->add_flag("--timing", run.timing, "include wall times in outputs");
    }
    json context = json::object();
    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e);
        } catch (const CLI::ParseError& e) {
            err << cli::error_json("usage", e.what(), json::object()).dump() << "\n";
            return 2;
        }
        run.subcommand = app.get_subcommands().front()->get_name();
        if (app.get_subcommands().front()->count("--seed")) run.seed = seed_value;
        context = {{"subcommand", run.subcommand}, {"config", run.config_path}};

        spdlog::set_level(spdlog::level::from_str(run.log_level));
        set_max_threads(run.threads);

        cli::Context ctx;
        ctx.run = run;
        ctx.config = load_config(run.config_path);
        if (!ctx.config.is_object()) throw ValidationError("config must be a JSON object");
        ctx.seed = run.seed ? *run.seed : io::get_or<std::uint64_t>(ctx.config, "seed", 0);
        ctx.config["seed"] = ctx.seed;
        ctx.hash = config_hash(ctx.config);
        std::filesystem::create_directories(run.out_dir);

        const auto t0 = std::chrono::steady_clock::now();
        if (run.subcommand == "solve") cli::cmd_solve(ctx);
        else if (run.subcommand == "representer") cli::cmd_representer(ctx);
        else if (run.subcommand == "degeneracy-probe") cli::cmd_degeneracy(ctx);
        else if (run.subcommand == "green-check") cli::cmd_green(ctx);
        else cli::cmd_converge(ctx);
        if (run.timing)
            spdlog::warn("{} finished in {:.3f} s", run.subcommand,
                         std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        return 0;
    } catch (const Error& e) {
        const json ej = cli::error_json(e.code(), e.what(), context);
        err << ej.dump() << "\n";
        std::error_code ec;
        if (!run.out_dir.empty() && std::filesystem::is_directory(run.out_dir, ec))
            std::ofstream(std::filesystem::path(run.out_dir) / "error.json") << ej.dump(2) << "\n";
        return e.numerical() ? 3 : 2;
    } catch (const json::exception& e) {
        err << cli::error_json("config-parse", e.what(), context).dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << cli::error_json("internal", e.what(), context).dump() << "\n";
        return 3;
    }
}

}  // namespace mfsparse
