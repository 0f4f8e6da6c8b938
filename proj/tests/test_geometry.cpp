#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mfsparse/geometry.hpp"
#include "mfsparse/quadrature.hpp"

using namespace mfsparse;
using mfsparse::detail::make_point;

namespace {

constexpr double kPi = std::numbers::pi;

/// Table of an ellipse with semi-axes a, b: samples and tangents at t_i = 2 pi i / m.
SmoothCurve ellipse_table(double a, double b, int m) {
    SmoothCurve c;
    for (int i = 0; i < m; ++i) {
        const double t = 2 * kPi * i / m;
        c.samples.push_back(make_point({a * std::cos(t), b * std::sin(t)}));
        c.tangents.push_back(make_point({-a * std::sin(t), b * std::cos(t)}));
    }
    return c;
}

}  // namespace

TEST(Quadrature, GaussLegendreIntegratesPolynomials) {
    const Rule1D r = gauss_legendre(8, 0.0, 2.0);
    double s = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], 15);
    EXPECT_NEAR(s, std::pow(2.0, 16) / 16.0, 1e-9);
}

TEST(BoundaryQuadrature, DiskPerimeter) {
    const BoundaryQuadrature q = build_boundary_quadrature(Domain::unit_disk(), 64);
    EXPECT_NEAR(q.total_weight(), 2 * kPi, 1e-12);
    double first_moment = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) first_moment += q.weights[i] * q.nodes[i][0];
    EXPECT_NEAR(first_moment, 0.0, 1e-12);
}

TEST(BoundaryQuadrature, BallArea) {
    const BoundaryQuadrature q = build_boundary_quadrature(Domain::unit_ball(), 32, 64);
    EXPECT_NEAR(q.total_weight(), 4 * kPi, 1e-3);
}

TEST(BoundaryQuadrature, NodesNormalsInvariants) {
    for (const Domain& d : {Domain::unit_disk(), Domain::disk(make_point({1, -2}), 0.5), Domain::unit_ball()}) {
        const BoundaryQuadrature q = build_boundary_quadrature(d, 16);
        for (std::size_t i = 0; i < q.size(); ++i) {
            EXPECT_NEAR(q.normals[i].norm(), 1.0, 1e-12);
            EXPECT_LE(d.distance_to_boundary(q.nodes[i]), 1e-10);
            EXPECT_GT(q.weights[i], 0.0);
        }
    }
}

TEST(BoundaryQuadrature, TooFewNodes) { EXPECT_THROW(build_boundary_quadrature(Domain::unit_disk(), 7), ValidationError); }

TEST(BoundaryQuadrature, RefinementOrderOnSecondMoment) {
    // The trapezoid rule on the circle converges faster than any power; require at least order 2.
    double prev = std::abs([&] {
        const BoundaryQuadrature q = build_boundary_quadrature(Domain::unit_disk(), 8);
        double s = 0;
        for (std::size_t i = 0; i < q.size(); ++i) s += q.weights[i] * std::pow(q.nodes[i][0], 6);
        return s;
    }() - 2 * kPi * 5.0 / 16.0);
    const BoundaryQuadrature q = build_boundary_quadrature(Domain::unit_disk(), 16);
    double s = 0;
    for (std::size_t i = 0; i < q.size(); ++i) s += q.weights[i] * std::pow(q.nodes[i][0], 6);
    const double err = std::abs(s - 2 * kPi * 5.0 / 16.0);
    EXPECT_TRUE(err <= prev / 4.0 || err < 1e-13);

    const BoundaryQuadrature q2 = build_boundary_quadrature(Domain::unit_disk(), 64);
    double s2 = 0;
    for (std::size_t i = 0; i < q2.size(); ++i) s2 += q2.weights[i] * q2.nodes[i][0] * q2.nodes[i][0];
    EXPECT_NEAR(s2, kPi, 1e-12);
}

TEST(Curve, EllipseTableMatchesAnalyticGeometry) {
    const Domain e(ellipse_table(2.0, 1.0, 64));
    EXPECT_NEAR(e.centroid().norm(), 0.0, 1e-12);
    EXPECT_TRUE(e.contains(make_point({1.9, 0.0})));
    EXPECT_FALSE(e.contains(make_point({0.0, 1.1})));
    // Ramanujan's second approximation is accurate to ~1e-10 here.
    const double a = 2.0, b = 1.0, h = std::pow((a - b) / (a + b), 2);
    const double perimeter = kPi * (a + b) * (1 + 3 * h / (10 + std::sqrt(4 - 3 * h)));
    EXPECT_NEAR(build_boundary_quadrature(e, 256).total_weight(), perimeter, 1e-6);
    const InteriorQuadrature iq = build_interior_quadrature(e, 16, 128);
    double area = 0;
    for (double w : iq.weights) area += w;
    EXPECT_NEAR(area, kPi * a * b, 1e-8);
}

TEST(Curve, SelfIntersectionRejected) {
    SmoothCurve c;
    const int m = 32;
    for (int i = 0; i < m; ++i) {
        const double t = 2 * kPi * i / m;
        // Lemniscate-like figure eight crosses itself at the origin.
        c.samples.push_back(make_point({std::sin(t), std::sin(t) * std::cos(t)}));
        c.tangents.push_back(make_point({std::cos(t), std::cos(2 * t)}));
    }
    EXPECT_THROW(Domain{c}, DegenerateDomain);
}

TEST(Contains, DiskExamples) {
    const Domain d = Domain::unit_disk();
    EXPECT_TRUE(d.contains(make_point({0, 0})));
    EXPECT_FALSE(d.contains(make_point({2, 0})));
    EXPECT_FALSE(d.contains(make_point({1, 0})));
    EXPECT_FALSE(Domain::unit_ball().contains(make_point({0, 0, 1})));
    EXPECT_TRUE(Domain::unit_ball().contains(make_point({0, 0, 0.5})));
}

TEST(InteriorQuadrature, DiskAndBallVolumes) {
    double area = 0;
    for (double w : build_interior_quadrature(Domain::unit_disk(), 8, 16).weights) area += w;
    EXPECT_NEAR(area, kPi, 1e-12);
    double vol = 0;
    for (double w : build_interior_quadrature(Domain::unit_ball(), 6, 6).weights) vol += w;
    EXPECT_NEAR(vol, 4.0 * kPi / 3.0, 1e-12);
}

TEST(PlaceSources, Examples) {
    const SourceCandidates four = place_sources(Domain::unit_disk(), 4, 2.0);
    ASSERT_EQ(four.points.size(), 4u);
    for (int j = 0; j < 4; ++j) {
        EXPECT_NEAR(four.points[j][0], 2 * std::cos(j * kPi / 2), 1e-14);
        EXPECT_NEAR(four.points[j][1], 2 * std::sin(j * kPi / 2), 1e-14);
    }
    const SourceCandidates one = place_sources(Domain::unit_disk(), 1, 1.5);
    EXPECT_NEAR(one.points[0][0], 1.5, 1e-15);
    EXPECT_NEAR(one.points[0][1], 0.0, 1e-15);
    const SourceCandidates six = place_sources(Domain::unit_ball(), 6, 2.0);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_NEAR(six.points[i].norm(), 2.0, 1e-14);
        for (std::size_t j = 0; j < i; ++j) EXPECT_GT((six.points[i] - six.points[j]).norm(), 0.1);
    }
}

TEST(PlaceSources, InvalidDilation) {
    EXPECT_THROW(place_sources(Domain::unit_disk(), 4, 1.0), InvalidDilation);
    EXPECT_THROW(place_sources(Domain::unit_disk(), 4, 0.5), InvalidDilation);
}
