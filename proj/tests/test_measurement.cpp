#include <gtest/gtest.h>

#include <random>

#include "mfsparse/measurement.hpp"
#include "mfsparse/parallel.hpp"

using namespace mfsparse;
using mfsparse::detail::make_point;

namespace {

const Kernel kLap2{OperatorId::Laplace2D};
const Kernel kLap3{OperatorId::Laplace3D};
const Kernel kCR{OperatorId::CauchyRiemann2D};

KernelExpansion random_expansion(const Kernel& kernel, int count, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> angle(0.0, 6.283185307179586), radius(1.5, 3.0), coef(-1.0, 1.0);
    std::vector<Point> ys;
    std::vector<Eigen::VectorXd> cs;
    for (int j = 0; j < count; ++j) {
        const double t = angle(rng), r = radius(rng);
        ys.push_back(make_point({r * std::cos(t), r * std::sin(t)}));
        Eigen::VectorXd c(kernel.k());
        for (int i = 0; i < kernel.k(); ++i) c[i] = coef(rng);
        cs.push_back(c);
    }
    return KernelExpansion(kernel, ys, cs);
}

std::vector<Functional> mixed_functionals(const Domain& disk) {
    std::vector<Functional> fs{PointEval{make_point({0.3, 0.1}), 0}, PointEval{make_point({-0.2, 0.5}), 0},
                               make_trace(disk, 1, make_point({0.0, 1.0})),
                               make_trace(disk, 0, make_point({-1.0, 0.0}))};
    const BoundaryQuadrature q = build_boundary_quadrature(disk, 64);
    std::vector<double> density(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) density[i] = std::cos(3 * std::atan2(q.nodes[i][1], q.nodes[i][0]));
    fs.push_back(make_weak_pairing(q, 1, density));
    return fs;
}

}  // namespace

TEST(Apply, EmptyExpansionGivesZero) {
    const MeasurementOperator m(kLap2, Domain::unit_disk(), mixed_functionals(Domain::unit_disk()));
    EXPECT_EQ(apply(m, KernelExpansion(kLap2, {}, {})), Eigen::VectorXd::Zero(5));
}

TEST(Apply, SingleSource3D) {
    const Point x = make_point({0.1, 0.2, 0.3}), y = make_point({0.0, 2.0, 0.0});
    const MeasurementOperator m(kLap3, Domain::unit_ball(), {PointEval{x, 0}});
    Eigen::VectorXd c(1);
    c << 1.7;
    const Eigen::VectorXd v = apply(m, KernelExpansion(kLap3, {y}, {c}));
    EXPECT_DOUBLE_EQ(v[0], 1.7 * eval_kernel(kLap3, x, y)(0, 0));
}

TEST(Apply, DirectSummationOracle) {
    const std::vector<Point> xs{make_point({0.1, 0.1}), make_point({-0.4, 0.2}), make_point({0.0, -0.7})};
    const std::vector<Point> ys{make_point({2.0, 0.0}), make_point({0.0, -1.5})};
    const double c0 = 0.6, c1 = -1.3;
    const MeasurementOperator m(kLap2, Domain::unit_disk(), point_functionals(xs, 1));
    Eigen::VectorXd a(1), b(1);
    a << c0;
    b << c1;
    const Eigen::VectorXd v = apply(m, KernelExpansion(kLap2, ys, {a, b}));
    for (int i = 0; i < 3; ++i) {
        const double d0 = (xs[i] - ys[0]).norm(), d1 = (xs[i] - ys[1]).norm();
        const double oracle = (c0 * std::log(d0) + c1 * std::log(d1)) / (2 * std::numbers::pi);
        EXPECT_NEAR(v[i], oracle, 1e-14);
    }
}

TEST(Apply, WeakPairingAgainstAnalyticIntegral) {
    // For u = Re z^3 on the unit circle, du/dnu = 3 cos(3t), so the pairing with cos(3t) is 3 pi.
    const Domain disk = Domain::unit_disk();
    const BoundaryQuadrature q = build_boundary_quadrature(disk, 64);
    std::vector<double> density(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) density[i] = std::cos(3 * std::atan2(q.nodes[i][1], q.nodes[i][0]));
    const MeasurementOperator m(kLap2, disk, {make_weak_pairing(q, 1, density)});
    const ClosedFormField u = make_truth("re-z^3", kLap2);
    EXPECT_NEAR(m.apply(u)[0], 3 * std::numbers::pi, 1e-12);
}

TEST(Apply, SourceInsideDomainRejected) {
    const MeasurementOperator m(kLap2, Domain::unit_disk(), {PointEval{make_point({0.0, 0.0}), 0}});
    Eigen::VectorXd c(1);
    c << 1.0;
    EXPECT_THROW(apply(m, KernelExpansion(kLap2, {make_point({0.5, 0.0})}, {c})), ValidationError);
}

TEST(MeasurementOperator, Validation) {
    const Domain disk = Domain::unit_disk();
    EXPECT_THROW(MeasurementOperator(kLap2, disk, {}), ValidationError);
    EXPECT_THROW(MeasurementOperator(kLap2, disk, {PointEval{make_point({2.0, 0.0}), 0}}), ValidationError);
    EXPECT_THROW(MeasurementOperator(kLap2, disk, {PointEval{make_point({0.1, 0.0}), 0}, PointEval{make_point({0.1, 0.0}), 0}}),
                 ValidationError);
    EXPECT_THROW(MeasurementOperator(kLap2, disk, {TraceEval{0, make_point({0.5, 0.0}), make_point({1.0, 0.0}), 0}}),
                 ValidationError);
    EXPECT_THROW(MeasurementOperator(kCR, disk, {make_trace(disk, 1, make_point({1.0, 0.0}))}), UnsupportedOperator);
    EXPECT_THROW(MeasurementOperator(kLap3, disk, {PointEval{make_point({0.1, 0.0}), 0}}), ValidationError);
}

TEST(AssembleMatrix, SingleEntryMatchesApply) {
    const MeasurementOperator m(kLap2, Domain::unit_disk(), {PointEval{make_point({0.2, -0.3}), 0}});
    const Dictionary d = Dictionary::from_sources({make_point({0.0, 3.0})}, 1);
    Eigen::VectorXd c(1);
    c << 1.0;
    EXPECT_EQ(assemble_matrix(m, d)(0, 0), apply(m, KernelExpansion(kLap2, {make_point({0.0, 3.0})}, {c}))[0]);
}

TEST(AssembleMatrix, PointRowsGiveCrossKernelMatrix) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    std::vector<Point> xs;
    for (int i = 0; i < 6; ++i) xs.push_back(make_point({u(rng), u(rng)}));
    const SourceCandidates ys = place_sources(Domain::unit_disk(), 9, 2.0);
    const Eigen::MatrixXd A =
        assemble_matrix(MeasurementOperator(kLap2, Domain::unit_disk(), point_functionals(xs, 1)), Dictionary::from_sources(ys.points, 1));
    for (int i = 0; i < 6; ++i)
        for (int a = 0; a < 9; ++a)
            EXPECT_NEAR(A(i, a), std::log((xs[i] - ys.points[a]).norm()) / (2 * std::numbers::pi), 1e-15);
}

TEST(AssembleMatrix, DuplicatedAtomDuplicatesColumn) {
    const MeasurementOperator m(kLap2, Domain::unit_disk(), mixed_functionals(Domain::unit_disk()));
    Dictionary d = Dictionary::from_sources({make_point({1.5, 0.5}), make_point({1.5, 0.5})}, 1);
    const Eigen::MatrixXd A = assemble_matrix(m, d);
    EXPECT_EQ(A.col(0), A.col(1));
}

TEST(AssembleMatrix, ConsistentWithApplyAndLinear) {
    std::mt19937_64 rng(17);
    const Domain disk = Domain::unit_disk();
    for (const Kernel& kernel : {kLap2, kCR}) {
        std::vector<Functional> fs;
        if (kernel.is_laplace()) {
            fs = mixed_functionals(disk);
        } else {
            fs = point_functionals({make_point({0.3, 0.1}), make_point({-0.1, -0.6})}, 2);
            fs.push_back(make_trace(disk, 0, make_point({0.0, -1.0}), 1));
        }
        const MeasurementOperator m(kernel, disk, fs);
        for (int trial = 0; trial < 10; ++trial) {
            const KernelExpansion u = random_expansion(kernel, 4, rng), v = random_expansion(kernel, 3, rng);
            const Eigen::VectorXd mu = apply(m, u), mv = apply(m, v);
            const double scale = 1.0 + mu.cwiseAbs().maxCoeff() + mv.cwiseAbs().maxCoeff();
            EXPECT_LE((apply(m, u.plus(v)) - mu - mv).cwiseAbs().maxCoeff(), 1e-12 * scale);
            EXPECT_LE((apply(m, u.scaled(-2.5)) + 2.5 * mu).cwiseAbs().maxCoeff(), 1e-12 * scale);

            const Dictionary d = Dictionary::from_sources(u.sources, kernel.k());
            Eigen::VectorXd c(static_cast<Eigen::Index>(d.size()));
            for (std::size_t j = 0; j < u.size(); ++j) c.segment(j * kernel.k(), kernel.k()) = u.coefficients[j];
            EXPECT_LE((assemble_matrix(m, d) * c - mu).cwiseAbs().maxCoeff(), 1e-12 * scale);
        }
    }
}

TEST(AssembleMatrix, BitwiseIndependentOfWorkerCount) {
    const MeasurementOperator m(kLap2, Domain::unit_disk(), mixed_functionals(Domain::unit_disk()));
    const Dictionary d = Dictionary::from_sources(place_sources(Domain::unit_disk(), 40, 1.7).points, 1);
    set_max_threads(1);
    const Eigen::MatrixXd serial = assemble_matrix(m, d);
    set_max_threads(8);
    const Eigen::MatrixXd threaded = assemble_matrix(m, d);
    set_max_threads(0);
    EXPECT_EQ(serial, threaded);
}
