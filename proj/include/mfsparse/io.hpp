#pragma once

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "drivers.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "measurement.hpp"
#include "norms.hpp"
#include "representer.hpp"
#include "solver.hpp"

namespace mfsparse {

inline constexpr const char* kVersion = "0.1.0";

using json = nlohmann::json;

MFSPARSE_DEFINE_ERROR(ConfigNotFound, "config-not-found", false)
MFSPARSE_DEFINE_ERROR(ConfigParseError, "config-parse", false)

/// FNV-1a 64-bit hash of the canonical (key-sorted) dump, as 16 hex digits.
inline std::string config_hash(const json& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : config.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

inline json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigNotFound("cannot open config '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigParseError(std::string("invalid JSON in '") + path + "': " + e.what());
    }
}

namespace io {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config field '") + key + "': " + e.what());
    }
}

inline const json& require(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ValidationError(std::string("config is missing '") + key + "'");
    return j.at(key);
}

inline Point to_point(const json& j) {
    if (!j.is_array() || j.size() < 2 || j.size() > 3) throw ValidationError("a point is an array of 2 or 3 numbers");
    Point p(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ValidationError("point coordinates must be numbers");
        p[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return p;
}

inline std::vector<Point> to_points(const json& j) {
    if (!j.is_array()) throw ValidationError("expected an array of points");
    std::vector<Point> pts;
    for (const auto& e : j) pts.push_back(to_point(e));
    return pts;
}

inline json from_point(const Point& p) {
    json a = json::array();
    for (Eigen::Index i = 0; i < p.size(); ++i) a.push_back(p[i]);
    return a;
}

inline json from_points(const std::vector<Point>& ps) {
    json a = json::array();
    for (const Point& p : ps) a.push_back(from_point(p));
    return a;
}

inline json from_vector(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline Eigen::VectorXd to_vector(const json& j) {
    if (!j.is_array()) throw ValidationError("expected an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

/// Finite JSON number, or null for NaN / infinity.
inline json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace io

/// {"shape":"disk","center":[0,0],"radius":1}, {"shape":"ball",...}, or
/// {"shape":"curve","samples":[[x,y],...],"tangents":[[dx,dy],...]}.
inline Domain parse_domain(const json& j) {
    const std::string shape = io::require(j, "shape").get<std::string>();
    if (shape == "disk" || shape == "ball") {
        const Point c = io::to_point(io::require(j, "center"));
        const double r = io::get_or(j, "radius", 1.0);
        if (!(r > 0.0)) throw DegenerateDomain("radius must be positive");
        if (shape == "disk") {
            if (c.size() != 2) throw ValidationError("disk center must be 2D");
            return Domain::disk(c, r);
        }
        if (c.size() != 3) throw ValidationError("ball center must be 3D");
        return Domain::ball(c, r);
    }
    if (shape == "curve")
        return Domain(SmoothCurve{io::to_points(io::require(j, "samples")), io::to_points(io::require(j, "tangents"))});
    throw ValidationError("unknown domain shape '" + shape + "'");
}

inline json domain_to_json(const Domain& d) {
    if (const auto* disk = std::get_if<Disk>(&d.shape()))
        return {{"shape", "disk"}, {"center", io::from_point(disk->center)}, {"radius", disk->radius}};
    if (const auto* ball = std::get_if<Ball>(&d.shape()))
        return {{"shape", "ball"}, {"center", io::from_point(ball->center)}, {"radius", ball->radius}};
    const auto& c = std::get<SmoothCurve>(d.shape());
    return {{"shape", "curve"}, {"samples", io::from_points(c.samples)}, {"tangents", io::from_points(c.tangents)}};
}

/// {"kind":"l2-interior","p":2,"radial":64,"angular":64,"azimuthal":0,"boundary_nodes":256}.
inline NormSpec parse_norm(const json& j) {
    NormSpec n;
    if (j.is_null()) return n;
    n.kind = parse_norm_kind(io::get_or<std::string>(j, "kind", "l2-interior"));
    n.p = io::get_or(j, "p", 2.0);
    n.radial = io::get_or(j, "radial", n.radial);
    n.angular = io::get_or(j, "angular", n.angular);
    n.azimuthal = io::get_or(j, "azimuthal", n.azimuthal);
    n.boundary_nodes = io::get_or(j, "boundary_nodes", n.boundary_nodes);
    return n;
}

inline json norm_to_json(const NormSpec& n) {
    return {{"kind", norm_kind_name(n.kind)}, {"p", n.p},           {"radial", n.radial},
            {"angular", n.angular},          {"azimuthal", n.azimuthal}, {"boundary_nodes", n.boundary_nodes}};
}

/// Solver settings; "b" is read by callers that take it from the config root.
inline SolveConfig parse_solver(const json& j, SolveConfig cfg = {}) {
    if (j.is_null()) return cfg;
    cfg.max_iter = io::get_or(j, "max_iter", cfg.max_iter);
    cfg.tol_rel = io::get_or(j, "tol_rel", cfg.tol_rel);
    cfg.window = io::get_or(j, "window", cfg.window);
    cfg.gap_tol = io::get_or(j, "gap_tol", cfg.gap_tol);
    cfg.restarts = io::get_or(j, "restarts", cfg.restarts);
    return cfg;
}

/// q as a number, or the string "inf".
inline double parse_q(const json& j) {
    if (!j.contains("q")) return 2.0;
    const json& q = j.at("q");
    if (q.is_string()) {
        if (q.get<std::string>() == "inf") return kInfinity;
        throw ValidationError("q must be a number or \"inf\"");
    }
    return q.get<double>();
}

/// Functionals: {"type":"point","x":[..],"component":0}, {"type":"trace","op":1,"x":[..]}, or
/// {"type":"weak","op":0,"nodes":128,"arc":[from,to],"density":[..] | "one"} with the arc given as
/// fractions of the boundary parameter range.
inline std::vector<Functional> parse_functionals(const json& j, const Domain& domain) {
    if (!j.is_array() || j.empty()) throw ValidationError("'functionals' must be a non-empty array");
    std::vector<Functional> fs;
    for (const auto& f : j) {
        const std::string type = io::require(f, "type").get<std::string>();
        const int component = io::get_or(f, "component", 0);
        if (type == "point") {
            fs.emplace_back(PointEval{io::to_point(io::require(f, "x")), component});
        } else if (type == "trace") {
            const Point x = io::to_point(io::require(f, "x"));
            if (x.size() != domain.dim()) throw ValidationError("trace point has wrong dimension");
            fs.emplace_back(make_trace(domain, io::get_or(f, "op", 0), x, component));
        } else if (type == "weak") {
            if (domain.dim() != 2) throw ValidationError("weak pairings are supported on planar domains");
            const int nodes = io::get_or(f, "nodes", 128);
            const BoundaryQuadrature quad = build_boundary_quadrature(domain, nodes);
            std::vector<double> density(quad.size(), 1.0);
            if (f.contains("density") && f.at("density").is_array()) density = f.at("density").get<std::vector<double>>();
            std::vector<bool> on_arc;
            if (f.contains("arc")) {
                const auto arc = f.at("arc").get<std::vector<double>>();
                if (arc.size() != 2) throw ValidationError("arc must be [from, to]");
                for (int i = 0; i < nodes; ++i) {
                    const double t = double(i) / nodes;
                    on_arc.push_back(t >= arc[0] && t <= arc[1]);
                }
            }
            fs.emplace_back(make_weak_pairing(quad, io::get_or(f, "op", 0), density, component, on_arc));
        } else {
            throw ValidationError("unknown functional type '" + type + "'");
        }
    }
    return fs;
}

/// Dictionary sources: {"sources":64,"rho":2.0,"angle_offset":0} or {"points":[[..],..]}.
inline std::vector<Point> parse_sources(const json& j, const Domain& domain, int fallback_count) {
    if (j.is_null()) return place_sources(domain, fallback_count, 2.0).points;
    if (j.contains("points")) return io::to_points(j.at("points"));
    return place_sources(domain, io::get_or(j, "sources", fallback_count), io::get_or(j, "rho", 2.0),
                         io::get_or(j, "angle_offset", 0.0))
        .points;
}

/// Data vector: explicit "data", or M applied to the closed-form "truth", plus seeded "noise".
inline Eigen::VectorXd parse_data(const json& j, const MeasurementOperator& m, std::uint64_t seed) {
    Eigen::VectorXd g;
    if (j.contains("data")) {
        g = io::to_vector(j.at("data"));
        if (static_cast<std::size_t>(g.size()) != m.size())
            throw ValidationError("data length must equal the functional count");
    } else {
        g = m.apply(make_truth(io::get_or<std::string>(j, "truth", "zero"), m.kernel()));
    }
    const double noise = io::get_or(j, "noise", 0.0);
    if (noise > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, noise);
        for (Eigen::Index i = 0; i < g.size(); ++i) g[i] += normal(rng);
    }
    return g;
}

inline ExperimentSpec parse_experiment(const json& j) {
    ExperimentSpec s;
    s.problem = parse_problem(io::get_or<std::string>(j, "problem", "dirichlet"));
    s.kernel = parse_kernel(io::get_or<std::string>(j, "kernel", "laplace2d"));
    s.domain = j.contains("domain") ? parse_domain(j.at("domain"))
                                    : (s.kernel.dim() == 3 ? Domain::unit_ball() : Domain::unit_disk());
    s.truth = io::get_or<std::string>(j, "truth", s.truth);
    s.n_schedule = io::get_or(j, "n_schedule", s.n_schedule);
    s.b_schedule = io::get_or(j, "b_schedule", s.b_schedule);
    s.b_scale = io::get_or(j, "b_scale", s.b_scale);
    s.q = parse_q(j);
    s.norm = parse_norm(j.contains("norm") ? j.at("norm") : json());
    s.rho = io::get_or(j, "rho", s.rho);
    s.dictionary_sources = io::get_or(j, "dictionary_sources", s.dictionary_sources);
    s.candidate_factor = io::get_or(j, "candidate_factor", s.candidate_factor);
    s.eval_radius = io::get_or(j, "eval_radius", s.eval_radius);
    s.eval_points = io::get_or(j, "eval_points", s.eval_points);
    if (j.contains("training_points")) s.training_points = io::to_points(j.at("training_points"));
    s.arc_fraction = io::get_or(j, "arc_fraction", s.arc_fraction);
    s.noise = io::get_or(j, "noise", s.noise);
    s.seed = io::get_or<std::uint64_t>(j, "seed", s.seed);
    s.solver = parse_solver(j.contains("solver") ? j.at("solver") : json());
    s.build_representer = io::get_or(j, "build_representer", s.build_representer);
    return s;
}

/// {"sources":[..],"coefficients":[..],"provenance":{...}}.
inline json sparse_to_json(const SparseSolution& s, const json& provenance) {
    json coefs = json::array();
    for (const auto& c : s.expansion.coefficients) coefs.push_back(io::from_vector(c));
    json prov = provenance;
    prov["measured"] = io::from_vector(s.provenance);
    return {{"kernel", std::string(kernel_name(s.expansion.kernel.id))},
            {"sources", io::from_points(s.expansion.sources)},
            {"coefficients", coefs},
            {"provenance", prov}};
}

/// Round-trip decimal formatting for CSV cells; NaN and infinity as "nan" / "inf".
inline std::string csv_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
}

inline std::string convergence_csv(const ConvergenceRecord& rec, bool timing) {
    std::ostringstream os;
    os << "n,functionals,b,objective,misfit,norm,duality_gap,optimality_residual,sup_error,far_error,cond_w,"
          "sparse_built,interpolation_residual,norm_ratio,iterations";
    if (timing) os << ",wall_time";
    os << "\n";
    for (const auto& r : rec.rows) {
        os << r.n << ',' << r.functionals << ',' << csv_number(r.b) << ',' << csv_number(r.objective) << ','
           << csv_number(r.misfit) << ',' << csv_number(r.norm_value) << ',' << csv_number(r.duality_gap) << ','
           << csv_number(r.optimality_residual) << ',' << csv_number(r.sup_error) << ',' << csv_number(r.far_error)
           << ',' << csv_number(r.cond_w) << ',' << (r.sparse_built ? 1 : 0) << ','
           << csv_number(r.interpolation_residual) << ',' << csv_number(r.norm_ratio) << ',' << r.iterations;
        if (timing) os << ',' << csv_number(r.wall_time);
        os << "\n";
    }
    return os.str();
}

}  // namespace mfsparse
