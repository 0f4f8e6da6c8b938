#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "kernels.hpp"
#include "quadrature.hpp"

namespace mfsparse {

/// Points on the boundary closer than this are not considered inside.
inline constexpr double kBoundaryTolerance = 1e-10;

struct Disk {
    Point center;
    double radius = 1.0;
};

struct Ball {
    Point center;
    double radius = 1.0;
};

/// Closed planar curve sampled at M parameters t_i = 2 pi i / M, with tangents dX/dt.
struct SmoothCurve {
    std::vector<Point> samples;
    std::vector<Point> tangents;
};

using DomainShape = std::variant<Disk, Ball, SmoothCurve>;

struct BoundaryQuadrature {
    std::vector<Point> nodes;
    std::vector<Point> normals;
    std::vector<double> weights;

    std::size_t size() const noexcept { return nodes.size(); }
    double total_weight() const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }
};

/// Tensor quadrature over the interior of D.
struct InteriorQuadrature {
    std::vector<Point> nodes;
    std::vector<double> weights;

    std::size_t size() const noexcept { return nodes.size(); }
};

struct SourceCandidates {
    std::vector<Point> points;
};

namespace detail {

/// Real trigonometric interpolant of equispaced periodic samples of one coordinate.
class TrigInterpolant {
public:
    TrigInterpolant() = default;
    explicit TrigInterpolant(const std::vector<double>& values) {
        const int m = static_cast<int>(values.size());
        const int kmax = m / 2;
        a_.assign(kmax + 1, 0.0);
        b_.assign(kmax + 1, 0.0);
        for (int k = 0; k <= kmax; ++k) {
            for (int j = 0; j < m; ++j) {
                const double t = 2.0 * std::numbers::pi * j / m;
                a_[k] += values[j] * std::cos(k * t);
                b_[k] += values[j] * std::sin(k * t);
            }
            a_[k] *= 2.0 / m;
            b_[k] *= 2.0 / m;
        }
        a_[0] *= 0.5;
        if (m % 2 == 0) {
            a_[kmax] *= 0.5;
            b_[kmax] = 0.0;
        }
    }

    double value(double t) const {
        double s = 0.0;
        for (std::size_t k = 0; k < a_.size(); ++k) s += a_[k] * std::cos(k * t) + b_[k] * std::sin(k * t);
        return s;
    }

    double derivative(double t) const {
        double s = 0.0;
        for (std::size_t k = 1; k < a_.size(); ++k) s += k * (b_[k] * std::cos(k * t) - a_[k] * std::sin(k * t));
        return s;
    }

    double second_derivative(double t) const {
        double s = 0.0;
        for (std::size_t k = 1; k < a_.size(); ++k)
            s -= double(k * k) * (a_[k] * std::cos(k * t) + b_[k] * std::sin(k * t));
        return s;
    }

private:
    std::vector<double> a_, b_;
};

inline double cross2(const Point& a, const Point& b) { return a[0] * b[1] - a[1] * b[0]; }

inline bool segments_intersect(const Point& p1, const Point& p2, const Point& q1, const Point& q2) {
    const double d1 = cross2(q2 - q1, p1 - q1);
    const double d2 = cross2(q2 - q1, p2 - q1);
    const double d3 = cross2(p2 - p1, q1 - p1);
    const double d4 = cross2(p2 - p1, q2 - p1);
    return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

inline Point make_point(std::initializer_list<double> c) {
    Point p(static_cast<Eigen::Index>(c.size()));
    Eigen::Index i = 0;
    for (double v : c) p[i++] = v;
    return p;
}

}  // namespace detail

/// The domain D: a disk, a ball, or a smooth closed curve given by samples.
class Domain {
public:
    explicit Domain(DomainShape shape) : shape_(std::move(shape)) { validate(); }

    static Domain disk(const Point& center, double radius) { return Domain(Disk{center, radius}); }
    static Domain ball(const Point& center, double radius) { return Domain(Ball{center, radius}); }
    static Domain unit_disk() { return disk(detail::make_point({0.0, 0.0}), 1.0); }
    static Domain unit_ball() { return ball(detail::make_point({0.0, 0.0, 0.0}), 1.0); }

    const DomainShape& shape() const noexcept { return shape_; }
    int dim() const noexcept { return std::holds_alternative<Ball>(shape_) ? 3 : 2; }
    const Point& centroid() const noexcept { return centroid_; }
    double diameter() const noexcept { return diameter_; }
    bool is_curve() const noexcept { return std::holds_alternative<SmoothCurve>(shape_); }

    /// Boundary point at parameter t in [0, 2 pi) (planar domains only).
    Point boundary_point(double t) const {
        if (const auto* d = std::get_if<Disk>(&shape_))
            return d->center + d->radius * detail::make_point({std::cos(t), std::sin(t)});
        if (is_curve()) return detail::make_point({fx_.value(t), fy_.value(t)});
        throw ValidationError("boundary_point is defined for planar domains only");
    }

    /// dX/dt at parameter t (planar domains only), oriented counter-clockwise.
    Point boundary_tangent(double t) const {
        if (const auto* d = std::get_if<Disk>(&shape_))
            return d->radius * detail::make_point({-std::sin(t), std::cos(t)});
        if (is_curve()) return orientation_ * detail::make_point({fx_.derivative(t), fy_.derivative(t)});
        throw ValidationError("boundary_tangent is defined for planar domains only");
    }

    /// True iff x lies strictly inside D (boundary points within kBoundaryTolerance report false).
    bool contains(const Point& x) const {
        if (x.size() != dim() || !x.allFinite()) return false;
        if (const auto* d = std::get_if<Disk>(&shape_)) return (x - d->center).norm() < d->radius - kBoundaryTolerance;
        if (const auto* b = std::get_if<Ball>(&shape_)) return (x - b->center).norm() < b->radius - kBoundaryTolerance;
        if (distance_to_boundary(x) <= kBoundaryTolerance) return false;
        return winding_number(x) != 0;
    }

    /// Euclidean distance from x to the boundary of D.
    double distance_to_boundary(const Point& x) const {
        if (const auto* d = std::get_if<Disk>(&shape_)) return std::abs((x - d->center).norm() - d->radius);
        if (const auto* b = std::get_if<Ball>(&shape_)) return std::abs((x - b->center).norm() - b->radius);
        return (x - boundary_point(nearest_parameter(x))).norm();
    }

    /// Outward unit normal at the boundary point closest to x.
    Point outward_normal(const Point& x) const {
        if (const auto* d = std::get_if<Disk>(&shape_)) return radial_unit(x - d->center);
        if (const auto* b = std::get_if<Ball>(&shape_)) return radial_unit(x - b->center);
        return normal_at_parameter(nearest_parameter(x));
    }

    /// Length (2D) or area (3D) of the boundary.
    double boundary_measure() const {
        if (const auto* d = std::get_if<Disk>(&shape_)) return 2.0 * std::numbers::pi * d->radius;
        if (const auto* b = std::get_if<Ball>(&shape_)) return 4.0 * std::numbers::pi * b->radius * b->radius;
        double len = 0.0;
        const int m = 4096;
        for (int i = 0; i < m; ++i) len += boundary_tangent(2.0 * std::numbers::pi * i / m).norm();
        return len * 2.0 * std::numbers::pi / m;
    }

    Point normal_at_parameter(double t) const {
        const Point tan = boundary_tangent(t);
        return detail::make_point({tan[1], -tan[0]}) / tan.norm();
    }

    /// Parameter of the boundary point nearest to x (planar domains only).
    double nearest_parameter(const Point& x) const {
        if (const auto* d = std::get_if<Disk>(&shape_)) {
            const Point r = x - d->center;
            double t = std::atan2(r[1], r[0]);
            return t < 0 ? t + 2.0 * std::numbers::pi : t;
        }
        if (!is_curve()) throw ValidationError("nearest_parameter is defined for planar domains only");
        const int m = static_cast<int>(dense_.size());
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < m; ++i) {
            const double dist = (dense_[i] - x).squaredNorm();
            if (dist < best_d) {
                best_d = dist;
                best = i;
            }
        }
        // Newton on d/dt |X(t) - x|^2 / 2 = (X - x) . X'.
        double t = 2.0 * std::numbers::pi * best / m;
        const double dt_max = 2.0 * std::numbers::pi / m;
        for (int iter = 0; iter < 30; ++iter) {
            const double px = fx_.value(t) - x[0], py = fy_.value(t) - x[1];
            const double dx = fx_.derivative(t), dy = fy_.derivative(t);
            const double g = px * dx + py * dy;
            const double h = dx * dx + dy * dy + px * fx_.second_derivative(t) + py * fy_.second_derivative(t);
            double step = h > 0 ? g / h : g / (dx * dx + dy * dy);
            step = std::clamp(step, -dt_max, dt_max);
            t -= step;
            if (std::abs(step) < 1e-15) break;
        }
        t = std::fmod(t, 2.0 * std::numbers::pi);
        return t < 0 ? t + 2.0 * std::numbers::pi : t;
    }

private:
    static Point radial_unit(const Point& r) {
        const double n = r.norm();
        if (n == 0.0) throw ValidationError("outward normal undefined at the center");
        return r / n;
    }

    int winding_number(const Point& x) const {
        int wn = 0;
        const std::size_t m = dense_.size();
        for (std::size_t i = 0; i < m; ++i) {
            const Point& a = dense_[i];
            const Point& b = dense_[(i + 1) % m];
            if (a[1] <= x[1]) {
                if (b[1] > x[1] && detail::cross2(b - a, x - a) > 0) ++wn;
            } else if (b[1] <= x[1] && detail::cross2(b - a, x - a) < 0) {
                --wn;
            }
        }
        return wn;
    }

    void validate() {
        if (auto* d = std::get_if<Disk>(&shape_)) {
            if (d->center.size() != 2) throw ValidationError("disk center must be 2D");
            if (!(d->radius > 0) || !std::isfinite(d->radius)) throw ValidationError("disk radius must be positive");
            centroid_ = d->center;
            diameter_ = 2.0 * d->radius;
            return;
        }
        if (auto* b = std::get_if<Ball>(&shape_)) {
            if (b->center.size() != 3) throw ValidationError("ball center must be 3D");
            if (!(b->radius > 0) || !std::isfinite(b->radius)) throw ValidationError("ball radius must be positive");
            centroid_ = b->center;
            diameter_ = 2.0 * b->radius;
            return;
        }
        auto& c = std::get<SmoothCurve>(shape_);
        const std::size_t m = c.samples.size();
        if (m < 8) throw DegenerateDomain("curve needs at least 8 samples");
        if (c.tangents.size() != m) throw DegenerateDomain("curve needs one tangent per sample");
        std::vector<double> xs(m), ys(m);
        for (std::size_t i = 0; i < m; ++i) {
            if (c.samples[i].size() != 2 || c.tangents[i].size() != 2)
                throw DegenerateDomain("curve samples and tangents must be 2D");
            if (c.tangents[i].norm() == 0.0) throw DegenerateDomain("zero tangent in curve table");
            xs[i] = c.samples[i][0];
            ys[i] = c.samples[i][1];
        }
        fx_ = detail::TrigInterpolant(xs);
        fy_ = detail::TrigInterpolant(ys);

        const int dense_count = std::max<int>(512, static_cast<int>(4 * m));
        dense_.resize(dense_count);
        for (int i = 0; i < dense_count; ++i) {
            const double t = 2.0 * std::numbers::pi * i / dense_count;
            dense_[i] = detail::make_point({fx_.value(t), fy_.value(t)});
        }
        for (int i = 0; i < dense_count; ++i) {
            for (int j = i + 2; j < dense_count; ++j) {
                if (i == 0 && j == dense_count - 1) continue;
                if (detail::segments_intersect(dense_[i], dense_[i + 1], dense_[j], dense_[(j + 1) % dense_count]))
                    throw DegenerateDomain("curve table self-intersects");
            }
        }
        double area2 = 0.0, cx = 0.0, cy = 0.0;
        for (int i = 0; i < dense_count; ++i) {
            const Point& a = dense_[i];
            const Point& b = dense_[(i + 1) % dense_count];
            const double cr = detail::cross2(a, b);
            area2 += cr;
            cx += (a[0] + b[0]) * cr;
            cy += (a[1] + b[1]) * cr;
        }
        if (std::abs(area2) < 1e-14) throw DegenerateDomain("curve encloses zero area");
        orientation_ = area2 > 0 ? 1.0 : -1.0;
        centroid_ = detail::make_point({cx / (3.0 * area2), cy / (3.0 * area2)});
        diameter_ = 0.0;
        const int stride = std::max(1, dense_count / 512);
        for (int i = 0; i < dense_count; i += stride)
            for (int j = i + stride; j < dense_count; j += stride)
                diameter_ = std::max(diameter_, (dense_[i] - dense_[j]).norm());
    }

    DomainShape shape_;
    Point centroid_;
    double diameter_ = 0.0;
    double orientation_ = 1.0;
    detail::TrigInterpolant fx_, fy_;
    std::vector<Point> dense_;
};

/// Boundary quadrature: periodic trapezoid (planar), or Gauss-Legendre in cos(theta) times trapezoid in
/// phi on the sphere (`secondary_count` azimuthal nodes, default 2 * node_count).
inline BoundaryQuadrature build_boundary_quadrature(const Domain& domain, int node_count, int secondary_count = 0) {
    if (node_count < 8) throw ValidationError("boundary quadrature needs at least 8 nodes");
    BoundaryQuadrature q;
    if (const auto* b = std::get_if<Ball>(&domain.shape())) {
        const int n_phi = secondary_count > 0 ? secondary_count : 2 * node_count;
        const Rule1D polar = gauss_legendre(node_count);
        const Rule1D azimuth = periodic_trapezoid(n_phi);
        const double r2 = b->radius * b->radius;
        for (int i = 0; i < node_count; ++i) {
            const double z = polar.nodes[i];
            const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
            for (int j = 0; j < n_phi; ++j) {
                const double phi = azimuth.nodes[j];
                const Point n = detail::make_point({s * std::cos(phi), s * std::sin(phi), z});
                q.nodes.push_back(b->center + b->radius * n);
                q.normals.push_back(n);
                q.weights.push_back(r2 * polar.weights[i] * azimuth.weights[j]);
            }
        }
        return q;
    }
    const auto* curve = std::get_if<SmoothCurve>(&domain.shape());
    const bool native = curve && static_cast<int>(curve->samples.size()) == node_count;
    const Rule1D rule = periodic_trapezoid(node_count);
    for (int i = 0; i < node_count; ++i) {
        const double t = rule.nodes[i];
        Point x = domain.boundary_point(t);
        Point tan = domain.boundary_tangent(t);
        if (native) {
            x = curve->samples[i];
            // Table tangents may be given clockwise; keep them aligned with the interpolant orientation.
            tan = curve->tangents[i].dot(tan) >= 0 ? curve->tangents[i] : Point(-curve->tangents[i]);
        }
        q.nodes.push_back(x);
        q.normals.push_back(detail::make_point({tan[1], -tan[0]}) / tan.norm());
        q.weights.push_back(tan.norm() * rule.weights[i]);
    }
    return q;
}

/// Interior tensor rule: Gauss-Legendre in the radial coordinate of the star-shaped map
/// x = c + s (X(t) - c) times trapezoid in t (planar), or GL(r) x GL(cos theta) x trapezoid(phi) (ball).
inline InteriorQuadrature build_interior_quadrature(const Domain& domain, int radial, int angular, int azimuthal = 0) {
    if (radial < 1 || angular < 3) throw ValidationError("interior quadrature resolution too small");
    InteriorQuadrature q;
    if (const auto* b = std::get_if<Ball>(&domain.shape())) {
        const int n_phi = azimuthal > 0 ? azimuthal : 2 * angular;
        const Rule1D rr = gauss_legendre(radial, 0.0, b->radius);
        const Rule1D polar = gauss_legendre(angular);
        const Rule1D az = periodic_trapezoid(n_phi);
        for (int i = 0; i < radial; ++i) {
            for (int j = 0; j < angular; ++j) {
                const double z = polar.nodes[j];
                const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
                for (int l = 0; l < n_phi; ++l) {
                    const double phi = az.nodes[l];
                    const Point dir = detail::make_point({s * std::cos(phi), s * std::sin(phi), z});
                    q.nodes.push_back(b->center + rr.nodes[i] * dir);
                    q.weights.push_back(rr.nodes[i] * rr.nodes[i] * rr.weights[i] * polar.weights[j] * az.weights[l]);
                }
            }
        }
        return q;
    }
    const Point c = domain.centroid();
    const Rule1D rs = gauss_legendre(radial, 0.0, 1.0);
    const Rule1D ts = periodic_trapezoid(angular);
    for (int j = 0; j < angular; ++j) {
        const Point x = domain.boundary_point(ts.nodes[j]);
        const Point tan = domain.boundary_tangent(ts.nodes[j]);
        const double jac = detail::cross2(x - c, tan);
        if (!(jac > 0))
            throw DegenerateDomain("interior quadrature requires a domain star-shaped about its centroid");
        for (int i = 0; i < radial; ++i) {
            const double s = rs.nodes[i];
            q.nodes.push_back(c + s * (x - c));
            q.weights.push_back(rs.weights[i] * s * jac * ts.weights[j]);
        }
    }
    return q;
}

/// Sources on the boundary dilated about the centroid by `rho`, equispaced in parameter
/// (Fibonacci spiral on the dilated sphere in 3D), rotated by `angle_offset`.
inline SourceCandidates place_sources(const Domain& domain, int count, double rho, double angle_offset = 0.0) {
    if (!(rho > 1.0) || !std::isfinite(rho)) throw InvalidDilation("dilation factor rho must exceed 1");
    if (count < 1) throw ValidationError("source count must be positive");
    SourceCandidates s;
    s.points.reserve(count);
    const Point c = domain.centroid();
    if (const auto* b = std::get_if<Ball>(&domain.shape())) {
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (int j = 0; j < count; ++j) {
            const double z = 1.0 - (2.0 * j + 1.0) / count;
            const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double phi = angle_offset + golden * j;
            s.points.push_back(b->center +
                               rho * b->radius * detail::make_point({rxy * std::cos(phi), rxy * std::sin(phi), z}));
        }
    } else {
        for (int j = 0; j < count; ++j) {
            const double t = angle_offset + 2.0 * std::numbers::pi * j / count;
            s.points.push_back(c + rho * (domain.boundary_point(t) - c));
        }
    }
    const double min_dist = 1e-3 * domain.diameter();
    for (const Point& p : s.points) {
        if (domain.contains(p) || domain.distance_to_boundary(p) < min_dist)
            throw InvalidDilation("dilated source is not strictly outside the closed domain");
    }
    return s;
}

/// `count` points on the circle of given radius about `center`, angles in [from, to).
inline std::vector<Point> circle_points(const Point& center, double radius, int count, double from = 0.0,
                                        double to = 2.0 * std::numbers::pi) {
    std::vector<Point> pts;
    pts.reserve(count);
    for (int i = 0; i < count; ++i) {
        const double t = from + (to - from) * i / count;
        pts.push_back(center + radius * detail::make_point({std::cos(t), std::sin(t)}));
    }
    return pts;
}

/// Fibonacci points on the sphere of given radius about `center`.
inline std::vector<Point> sphere_points(const Point& center, double radius, int count) {
    std::vector<Point> pts;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int j = 0; j < count; ++j) {
        const double z = 1.0 - (2.0 * j + 1.0) / count;
        const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
        pts.push_back(center + radius * detail::make_point({rxy * std::cos(golden * j), rxy * std::sin(golden * j), z}));
    }
    return pts;
}

}  // namespace mfsparse
