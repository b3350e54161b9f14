#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "hamgrad/operators.hpp"
#include "hamgrad/sampling.hpp"

using namespace hamgrad;

namespace {

constexpr double kPi = std::numbers::pi;

double linf_error(const DiscreteManifold& m, const ScalarField& got, const PointFunction& exact,
                  bool skip_boundary = false) {
    double e = 0.0;
    for (int i = 0; i < m.size(); ++i) {
        if (skip_boundary && m.is_boundary(i)) continue;
        const auto c = m.coord(i);
        e = std::max(e, std::abs(got[i] - exact(c[0], c[1])));
    }
    return e;
}

double laplace_error(const GeometrySpec& spec, const PointFunction& f, const PointFunction& lap) {
    const auto m = build_geometry(spec);
    return linf_error(m, laplace_beltrami(m, sample_field(m, f)), lap);
}

ScalarField noise_field(const DiscreteManifold& m, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(m.size()));
    for (auto& x : v) x = d(rng);
    return {m, std::move(v)};
}

double weighted_norm(const DiscreteManifold& m, const ScalarField& f) {
    double s = 0.0;
    for (int i = 0; i < m.size(); ++i) s += m.volume(i) * f[i] * f[i];
    return std::sqrt(s);
}

} // namespace

// ---------------------------------------------------------------------------
// build_geometry

TEST(BuildGeometry, CircleIsUniformPeriodicGrid) {
    const auto m = build_geometry(GeometrySpec::circle(256, 2.0 * kPi));
    EXPECT_EQ(m.size(), 256);
    for (int i = 0; i < m.size(); ++i) EXPECT_EQ(m.neighbors(i).size(), 2u);
    EXPECT_GE(m.total_volume(), 2.0 * kPi * 0.99);
    EXPECT_LE(m.total_volume(), 2.0 * kPi * 1.01);
    EXPECT_FALSE(m.has_boundary());
}

TEST(BuildGeometry, IntervalHasTwoBoundaryNodes) {
    const auto m = build_geometry(GeometrySpec::interval(128, kPi));
    EXPECT_EQ(m.size(), 128);
    ASSERT_EQ(m.boundary_nodes().size(), 2u);
    EXPECT_EQ(m.boundary_nodes()[0], 0);
    EXPECT_EQ(m.boundary_nodes()[1], 127);
    EXPECT_TRUE(m.boundary_convex());
    EXPECT_NEAR(m.total_volume(), kPi, 1e-12);
}

TEST(BuildGeometry, SphereAreaMatchesQuadratureOracle) {
    // Composite Simpson on 2π r² ∫ sin θ dθ, independent of the grid weights.
    const double r = 1.0;
    const int n = 20000;
    double s = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        s += w * std::sin(kPi * k / n);
    }
    const double area = 2.0 * kPi * r * r * s * (kPi / n) / 3.0;
    const auto m = build_geometry(GeometrySpec::sphere2(64, 128, r));
    EXPECT_EQ(m.size(), 64 * 128 + 2);
    EXPECT_NEAR(m.total_volume() / area, 1.0, 0.01);
}

TEST(BuildGeometry, TorusVolumeIsExact) {
    const auto m = build_geometry(GeometrySpec::torus2(64, 64, 2.0 * kPi, 2.0 * kPi));
    EXPECT_NEAR(m.total_volume(), 4.0 * kPi * kPi, 1e-9);
}

TEST(BuildGeometry, RejectsInvalidSpecs) {
    EXPECT_THROW(build_geometry(GeometrySpec::circle(7, 1.0)), GeometryError);
    EXPECT_THROW(build_geometry(GeometrySpec::interval(64, 0.0)), GeometryError);
    EXPECT_THROW(build_geometry(GeometrySpec::box2(16, 16, 1.0, -1.0)), GeometryError);
    auto bad = GeometrySpec::circle(64, 1.0);
    bad.boundary = BoundaryKind::neumann;
    EXPECT_THROW(build_geometry(bad), GeometryError);
    auto bad_box = GeometrySpec::box2(16, 16, 1.0, 1.0);
    bad_box.boundary = BoundaryKind::none;
    EXPECT_THROW(build_geometry(bad_box), GeometryError);
}

TEST(BuildGeometry, StencilsAreSymmetricWithPositiveWeights) {
    for (const auto& spec : {GeometrySpec::circle(16, 1.0), GeometrySpec::interval(16, 2.0),
                             GeometrySpec::torus2(12, 10, 1.0, 2.0), GeometrySpec::box2(9, 11, 1.0, 3.0),
                             GeometrySpec::sphere2(8, 16, 2.0)}) {
        const auto m = build_geometry(spec);
        for (int i = 0; i < m.size(); ++i) {
            EXPECT_GT(m.volume(i), 0.0);
            for (std::size_t k = 0; k < m.neighbors(i).size(); ++k) {
                const int j = m.neighbors(i)[k];
                EXPECT_GT(m.conductances(i)[k], 0.0);
                const auto back = m.neighbors(j);
                EXPECT_NE(std::find(back.begin(), back.end(), i), back.end());
            }
        }
    }
}

// ---------------------------------------------------------------------------
// laplace_beltrami

TEST(LaplaceBeltrami, AnnihilatesConstantsOnEveryGeometry) {
    for (const auto& spec : {GeometrySpec::circle(64, 2.0 * kPi), GeometrySpec::interval(33, kPi),
                             GeometrySpec::torus2(32, 24, 2.0 * kPi, 3.0), GeometrySpec::box2(17, 21, kPi, 2.0),
                             GeometrySpec::sphere2(32, 64, 1.5)}) {
        const auto m = build_geometry(spec);
        const auto lap = laplace_beltrami(m, ScalarField::constant(m, 3.0));
        EXPECT_LE(lap.max_abs(), 1e-12) << to_string(spec.kind);
    }
}

TEST(LaplaceBeltrami, CircleCosineIsSecondOrder) {
    auto f = [](double x, double) { return std::cos(x); };
    auto lap = [](double x, double) { return -std::cos(x); };
    const double e128 = laplace_error(GeometrySpec::circle(128, 2.0 * kPi), f, lap);
    const double e256 = laplace_error(GeometrySpec::circle(256, 2.0 * kPi), f, lap);
    const double h = 2.0 * kPi / 256;
    EXPECT_LE(e256, h * h);
    EXPECT_GE(e128 / e256, 3.0);
    EXPECT_LE(e128 / e256, 5.0);
}

TEST(LaplaceBeltrami, SphereFirstHarmonicEigenvalue) {
    const double err = laplace_error(
        GeometrySpec::sphere2(64, 128, 1.0), [](double th, double) { return std::cos(th); },
        [](double th, double) { return -2.0 * std::cos(th); });
    EXPECT_LE(err, 5e-2);
}

TEST(LaplaceBeltrami, SphereScalesWithRadius) {
    const double r = 2.0;
    const double err = laplace_error(
        GeometrySpec::sphere2(64, 128, r), [](double th, double) { return std::cos(th); },
        [r](double th, double) { return -2.0 * std::cos(th) / (r * r); });
    EXPECT_LE(err, 5e-2 / (r * r));
}

TEST(LaplaceBeltrami, RefinementOrderOnTorusBoxAndSphere) {
    auto f2 = [](double x, double y) { return std::cos(x) * std::cos(2.0 * y); };
    auto l2 = [](double x, double y) { return -5.0 * std::cos(x) * std::cos(2.0 * y); };
    const double t1 = laplace_error(GeometrySpec::torus2(32, 32, 2.0 * kPi, 2.0 * kPi), f2, l2);
    const double t2 = laplace_error(GeometrySpec::torus2(64, 64, 2.0 * kPi, 2.0 * kPi), f2, l2);
    EXPECT_GE(t1 / t2, 3.0);
    EXPECT_LE(t1 / t2, 5.0);

    const auto coarse = GeometrySpec::box2(33, 33, kPi, kPi);
    const double b1 = laplace_error(coarse, f2, l2);
    const double b2 = laplace_error(coarse.refined(2), f2, l2);
    EXPECT_GE(b1 / b2, 3.0);
    EXPECT_LE(b1 / b2, 5.0);

    auto z = [](double th, double) { return std::cos(th); };
    auto lz = [](double th, double) { return -2.0 * std::cos(th); };
    const double s1 = laplace_error(GeometrySpec::sphere2(32, 64, 1.0), z, lz);
    const double s2 = laplace_error(GeometrySpec::sphere2(64, 128, 1.0), z, lz);
    EXPECT_GE(s1 / s2, 3.0);
    EXPECT_LE(s1 / s2, 5.0);
}

TEST(LaplaceBeltrami, RejectsForeignField) {
    const auto a = build_geometry(GeometrySpec::circle(64, 1.0));
    const auto b = build_geometry(GeometrySpec::circle(64, 2.0));
    EXPECT_THROW(laplace_beltrami(a, ScalarField::constant(b, 1.0)), FieldMismatch);
}

TEST(LaplaceBeltrami, IntegrationByPartsOnClosedGeometries) {
    std::mt19937_64 rng(11);
    for (const auto& spec : {GeometrySpec::circle(64, 2.0 * kPi), GeometrySpec::torus2(24, 16, 2.0 * kPi, 1.0),
                             GeometrySpec::sphere2(16, 32, 1.0)}) {
        const auto m = build_geometry(spec);
        for (int trial = 0; trial < 20; ++trial) {
            const auto f = noise_field(m, rng);
            const auto g = noise_field(m, rng);
            const auto lf = laplace_beltrami(m, f);
            const auto lg = laplace_beltrami(m, g);
            double lhs = 0.0;
            for (int i = 0; i < m.size(); ++i) lhs += m.volume(i) * (lf[i] * g[i] - lg[i] * f[i]);
            EXPECT_LE(std::abs(lhs), 1e-10 * weighted_norm(m, f) * weighted_norm(m, g)) << to_string(spec.kind);
        }
    }
}

// ---------------------------------------------------------------------------
// gradient_norm_sq

TEST(GradientNormSq, ConstantHasZeroGradient) {
    for (const auto& spec : {GeometrySpec::interval(16, 1.0), GeometrySpec::sphere2(8, 16, 1.0)}) {
        const auto m = build_geometry(spec);
        EXPECT_EQ(gradient_norm_sq(m, ScalarField::constant(m, 2.5)).max_abs(), 0.0);
    }
}

TEST(GradientNormSq, CircleCosineIsSecondOrder) {
    auto err = [](int n) {
        const auto m = build_geometry(GeometrySpec::circle(n, 2.0 * kPi));
        const auto g = gradient_norm_sq(m, sample_field(m, [](double x, double) { return std::cos(x); }));
        return linf_error(m, g, [](double x, double) { return std::sin(x) * std::sin(x); });
    };
    const double e1 = err(128), e2 = err(256);
    EXPECT_LE(e2, std::pow(2.0 * kPi / 256, 2));
    EXPECT_GE(e1 / e2, 3.0);
    EXPECT_LE(e1 / e2, 5.0);
}

TEST(GradientNormSq, LinearFieldIsExactOnInterval) {
    const auto m = build_geometry(GeometrySpec::interval(64, kPi));
    const auto g = gradient_norm_sq(m, sample_field(m, [](double x, double) { return x; }));
    for (int i = 0; i < m.size(); ++i) EXPECT_NEAR(g[i], 1.0, 1e-10);
}

TEST(GradientNormSq, SphereFirstHarmonicIncludingPoles) {
    const auto m = build_geometry(GeometrySpec::sphere2(64, 128, 1.0));
    const auto g = gradient_norm_sq(m, sample_field(m, [](double th, double) { return std::cos(th); }));
    EXPECT_LE(linf_error(m, g, [](double th, double) { return std::sin(th) * std::sin(th); }), 1e-3);
    // X = sin θ cos λ has unit gradient at the poles.
    const auto gx = gradient_norm_sq(
        m, sample_field(m, [](double th, double lam) { return std::sin(th) * std::cos(lam); }));
    EXPECT_NEAR(gx[0], 1.0, 1e-12);
    EXPECT_NEAR(gx[m.size() - 1], 1.0, 1e-12);
}

// ---------------------------------------------------------------------------
// hessian

TEST(Hessian, ConstantGivesZeroTensor) {
    const auto m = build_geometry(GeometrySpec::box2(12, 12, 1.0, 1.0));
    const auto h = hessian(m, ScalarField::constant(m, 4.0));
    for (int i = 0; i < m.size(); ++i)
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) EXPECT_EQ(h.entry(i, a, b), 0.0);
}

TEST(Hessian, CircleCosineIsSecondOrder) {
    auto err = [](int n) {
        const auto m = build_geometry(GeometrySpec::circle(n, 2.0 * kPi));
        const auto h = hessian(m, sample_field(m, [](double x, double) { return std::cos(x); }));
        double e = 0.0;
        for (int i = 0; i < m.size(); ++i) e = std::max(e, std::abs(h.entry(i, 0, 0) + std::cos(m.coord(i)[0])));
        return e;
    };
    const double e1 = err(128), e2 = err(256);
    EXPECT_GE(e1 / e2, 3.0);
    EXPECT_LE(e1 / e2, 5.0);
}

TEST(Hessian, QuadraticIsExactOnIntervalAndBox) {
    const auto m = build_geometry(GeometrySpec::interval(40, kPi));
    const auto h = hessian(m, sample_field(m, [](double x, double) { return 0.5 * x * x; }));
    for (int i = 0; i < m.size(); ++i) EXPECT_NEAR(h.entry(i, 0, 0), 1.0, 1e-10);

    const auto b = build_geometry(GeometrySpec::box2(20, 24, kPi, 2.0));
    const auto hb = hessian(b, sample_field(b, [](double x, double y) { return x * x + 0.5 * x * y - y * y; }));
    for (int i = 0; i < b.size(); ++i) {
        EXPECT_NEAR(hb.entry(i, 0, 0), 2.0, 1e-9);
        EXPECT_NEAR(hb.entry(i, 0, 1), 0.5, 1e-9);
        EXPECT_EQ(hb.entry(i, 0, 1), hb.entry(i, 1, 0));
        EXPECT_NEAR(hb.entry(i, 1, 1), -2.0, 1e-9);
    }
}

TEST(Hessian, SphereCovariantHessianOfFirstHarmonic) {
    // D²z = −z·g on the unit sphere.
    const auto m = build_geometry(GeometrySpec::sphere2(64, 128, 1.0));
    const auto h = hessian(m, sample_field(m, [](double th, double) { return std::cos(th); }));
    double err = 0.0;
    for (int i = 0; i < m.size(); ++i) {
        const double z = std::cos(m.coord(i)[0]);
        err = std::max({err, std::abs(h.entry(i, 0, 0) + z), std::abs(h.entry(i, 1, 1) + z),
                        std::abs(h.entry(i, 0, 1))});
    }
    EXPECT_LE(err, 5e-3);
    // Non-axisymmetric harmonic X = sin θ cos λ.
    const auto hx = hessian(m, sample_field(m, [](double th, double lam) { return std::sin(th) * std::cos(lam); }));
    // The 1/sin θ metric factors make the ring next to each pole first order.
    double err_body = 0.0, err_all = 0.0;
    for (int i = 0; i < m.size(); ++i) {
        const auto c = m.coord(i);
        const double x = std::sin(c[0]) * std::cos(c[1]);
        const double e = std::max({std::abs(hx.entry(i, 0, 0) + x), std::abs(hx.entry(i, 1, 1) + x),
                                   std::abs(hx.entry(i, 0, 1))});
        err_all = std::max(err_all, e);
        if (std::sin(c[0]) > 0.1) err_body = std::max(err_body, e);
    }
    EXPECT_LE(err_body, 5e-3);
    EXPECT_LE(err_all, 1e-2);
}

// ---------------------------------------------------------------------------
// directional_drift

TEST(DirectionalDrift, ConstantPotentialGivesZero) {
    const auto m = build_geometry(GeometrySpec::torus2(16, 16, 1.0, 1.0));
    const auto u = sample_field(m, [](double x, double y) { return std::cos(2 * kPi * x) + std::sin(2 * kPi * y); });
    EXPECT_EQ(directional_drift(m, ScalarField::constant(m, 1.0), u).max_abs(), 0.0);
}

TEST(DirectionalDrift, NonPeriodicPotentialIsRejected) {
    const auto m = build_geometry(GeometrySpec::circle(64, 2.0 * kPi));
    EXPECT_THROW(sample_field(m, [](double x, double) { return x; }), GeometryError);
    EXPECT_THROW(FieldExpr::parse("quad 0.5").evaluate(m), GeometryError);
}

TEST(DirectionalDrift, CircleProductOfDerivatives) {
    auto err = [](int n) {
        const auto m = build_geometry(GeometrySpec::circle(n, 2.0 * kPi));
        const auto d = directional_drift(m, sample_field(m, [](double x, double) { return std::cos(x); }),
                                         sample_field(m, [](double x, double) { return std::sin(x); }));
        return linf_error(m, d, [](double x, double) { return -std::sin(x) * std::cos(x); });
    };
    const double e1 = err(128), e2 = err(256);
    EXPECT_LE(e2, std::pow(2.0 * kPi / 256, 2));
    EXPECT_GE(e1 / e2, 3.0);
    EXPECT_LE(e1 / e2, 5.0);
}

// ---------------------------------------------------------------------------
// bakry_emery_bound

TEST(BakryEmery, FlatGeometriesWithoutPotential) {
    for (const auto& spec : {GeometrySpec::circle(32, 1.0), GeometrySpec::torus2(16, 16, 1.0, 1.0)}) {
        const auto m = build_geometry(spec);
        EXPECT_EQ(bakry_emery_bound(m, ScalarField::constant(m, 0.0)), 0.0);
    }
}

TEST(BakryEmery, CircleCosinePotential) {
    const auto m = build_geometry(GeometrySpec::circle(256, 2.0 * kPi));
    const auto b = bakry_emery_detail(m, sample_field(m, [](double x, double) { return std::cos(x); }));
    EXPECT_NEAR(b.K, 1.0, 1e-3);
    // The analytic extremum of −φ'' = cos x sits at x = 0.
    EXPECT_EQ(b.node, 0);
}

TEST(BakryEmery, SpherePositiveCurvature) {
    const auto m = build_geometry(GeometrySpec::sphere2(16, 32, 1.0));
    EXPECT_EQ(bakry_emery_bound(m, ScalarField::constant(m, 0.0)), 0.0);
}

TEST(BakryEmery, ZeroForConvexPotentials) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    const auto m = build_geometry(GeometrySpec::box2(24, 24, kPi, kPi));
    for (int trial = 0; trial < 25; ++trial) {
        // Positive-definite quadratic plus positive exponentials of linear forms.
        const double l1 = 0.2 + d(rng), l2 = 0.2 + d(rng), rot = kPi * d(rng);
        const double c = std::cos(rot), s = std::sin(rot);
        const double axx = l1 * c * c + l2 * s * s, ayy = l1 * s * s + l2 * c * c, axy = (l1 - l2) * c * s;
        const double w = d(rng), al = d(rng) - 0.5, be = d(rng) - 0.5;
        const auto phi = sample_field(m, [&](double x, double y) {
            return 0.5 * (axx * x * x + 2 * axy * x * y + ayy * y * y) + w * std::exp(al * x + be * y);
        });
        const auto h = hessian(m, phi);
        bool psd = true;
        for (int i = 0; i < m.size(); ++i) psd = psd && h.min_eigenvalue(i) >= 0.0;
        ASSERT_TRUE(psd);
        EXPECT_EQ(bakry_emery_bound(m, phi), 0.0);
    }
}
