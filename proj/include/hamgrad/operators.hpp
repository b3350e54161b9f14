#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "hamgrad/field.hpp"
#include "hamgrad/geometry.hpp"

namespace hamgrad {

namespace detail {

// Coordinate derivative along one axis: centered in the interior, second-order
// one-sided at bounded-axis ends. Not defined at the sphere poles.
inline double axis_derivative(const DiscreteManifold& m, std::span<const double> f, int i, int axis) {
    const AxisStencil& s = m.stencil(i, axis);
    const double d = m.axis_step(axis);
    if (s.minus >= 0 && s.plus >= 0) return (f[s.plus] - f[s.minus]) / (2.0 * d);
    if (s.minus < 0) {
        const int p = s.plus;
        const int pp = m.stencil(p, axis).plus;
        return (-3.0 * f[i] + 4.0 * f[p] - f[pp]) / (2.0 * d);
    }
    const int q = s.minus;
    const int qq = m.stencil(q, axis).minus;
    return (3.0 * f[i] - 4.0 * f[q] + f[qq]) / (2.0 * d);
}

inline double axis_second_derivative(const DiscreteManifold& m, std::span<const double> f, int i, int axis) {
    const AxisStencil& s = m.stencil(i, axis);
    const double d2 = m.axis_step(axis) * m.axis_step(axis);
    if (s.minus >= 0 && s.plus >= 0) return (f[s.plus] - 2.0 * f[i] + f[s.minus]) / d2;
    auto walk = [&](int from, bool forward) {
        const AxisStencil& t = m.stencil(from, axis);
        return forward ? t.plus : t.minus;
    };
    const bool forward = s.minus < 0;
    const int n1 = walk(i, forward);
    const int n2 = walk(n1, forward);
    const int n3 = walk(n2, forward);
    return (2.0 * f[i] - 5.0 * f[n1] + 4.0 * f[n2] - f[n3]) / d2;
}

// Fourier moments of the ring around a pole: returns the ring nodes' longitudes
// projected on cos/sin of order `order`, i.e. (2/L) Σ g_k cos(order λ_k), ... .
struct RingMoments {
    double mean = 0.0;
    double c1 = 0.0, s1 = 0.0, c2 = 0.0, s2 = 0.0;
};

inline RingMoments ring_moments(const DiscreteManifold& m, std::span<const double> f, int pole) {
    const auto ring = m.pole_ring(pole);
    const double dph = m.axis_step(1);
    const double lon = static_cast<double>(ring.size());
    RingMoments out;
    for (std::size_t k = 0; k < ring.size(); ++k) {
        const double g = f[ring[k]] - f[pole];
        const double lam = static_cast<double>(k) * dph;
        out.mean += g / lon;
        out.c1 += 2.0 * g * std::cos(lam) / lon;
        out.s1 += 2.0 * g * std::sin(lam) / lon;
        out.c2 += 2.0 * g * std::cos(2.0 * lam) / lon;
        out.s2 += 2.0 * g * std::sin(2.0 * lam) / lon;
    }
    return out;
}

} // namespace detail

/// Discrete Laplace–Beltrami operator in weighted graph form. Bounded domains
/// carry the mirror Neumann closure through their half-cell weights.
inline ScalarField laplace_beltrami(const DiscreteManifold& m, const ScalarField& f) {
    require_bound(m, f, "laplace_beltrami");
    const auto v = f.values();
    std::vector<double> out(v.size());
    for (int i = 0; i < m.size(); ++i) {
        const auto nb = m.neighbors(i);
        const auto w = m.conductances(i);
        double acc = 0.0;
        for (std::size_t k = 0; k < nb.size(); ++k) acc += w[k] * (v[nb[k]] - v[i]);
        out[i] = acc / m.volume(i);
    }
    return {m, std::move(out)};
}

/// Per-node gradient in an orthonormal frame (second component unused in 1D).
/// At the sphere poles the frame is the tangent plane with e_x towards λ = 0.
inline std::vector<std::array<double, 2>> gradient(const DiscreteManifold& m, const ScalarField& f) {
    require_bound(m, f, "gradient");
    const auto v = f.values();
    std::vector<std::array<double, 2>> g(v.size(), {0.0, 0.0});
    for (int i = 0; i < m.size(); ++i) {
        if (m.is_pole(i)) {
            const auto mo = detail::ring_moments(m, v, i);
            const double chord = m.spec().extent[0] * std::sin(m.axis_step(0));
            g[i] = {mo.c1 / chord, mo.s1 / chord};
            continue;
        }
        for (int a = 0; a < m.dimension(); ++a) {
            g[i][a] = detail::axis_derivative(m, v, i, a) / m.metric_scale(i, a);
        }
    }
    return g;
}

/// |∇f|² in the metric, from centered differences (one-sided at boundary nodes).
inline ScalarField gradient_norm_sq(const DiscreteManifold& m, const ScalarField& f) {
    const auto g = gradient(m, f);
    std::vector<double> out(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i][0] * g[i][0] + g[i][1] * g[i][1];
    return {m, std::move(out)};
}

/// Metric inner product ∇φ·∇u of the discrete gradients.
inline ScalarField directional_drift(const DiscreteManifold& m, const ScalarField& phi, const ScalarField& u) {
    require_bound(m, phi, "directional_drift");
    require_bound(m, u, "directional_drift");
    const auto gp = gradient(m, phi);
    const auto gu = gradient(m, u);
    std::vector<double> out(gp.size());
    for (std::size_t i = 0; i < gp.size(); ++i) out[i] = gp[i][0] * gu[i][0] + gp[i][1] * gu[i][1];
    return {m, std::move(out)};
}

/// Hessian in an orthonormal frame. Flat geometries use coordinate second
/// differences; the sphere uses the covariant Hessian in latitude-longitude
/// coordinates, and a normal-coordinate ring fit at the poles.
inline TensorField hessian(const DiscreteManifold& m, const ScalarField& f) {
    require_bound(m, f, "hessian");
    const auto v = f.values();
    const int n = m.size();
    std::vector<std::array<double, 3>> h(static_cast<std::size_t>(n), {0.0, 0.0, 0.0});
    if (m.dimension() == 1) {
        for (int i = 0; i < n; ++i) h[i][0] = detail::axis_second_derivative(m, v, i, 0);
        return {m, std::move(h)};
    }

    std::vector<double> d0(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        if (!m.is_pole(i)) d0[i] = detail::axis_derivative(m, v, i, 0);
    }
    const bool sphere = m.kind() == GeometryKind::sphere2;
    const double r = sphere ? m.spec().extent[0] : 1.0;
    for (int i = 0; i < n; ++i) {
        if (m.is_pole(i)) {
            const auto mo = detail::ring_moments(m, v, i);
            const double rho2 = std::pow(r * m.axis_step(0), 2);
            const double trace = 4.0 * mo.mean / rho2;
            const double diff = 4.0 * mo.c2 / rho2;
            h[i] = {0.5 * (trace + diff), 2.0 * mo.s2 / rho2, 0.5 * (trace - diff)};
            continue;
        }
        const double f00 = detail::axis_second_derivative(m, v, i, 0);
        const double f11 = detail::axis_second_derivative(m, v, i, 1);
        const double f01 = detail::axis_derivative(m, d0, i, 1);
        if (!sphere) {
            h[i] = {f00, f01, f11};
            continue;
        }
        const double th = m.coord(i)[0];
        const double st = std::sin(th);
        const double ct = std::cos(th);
        const double f0 = d0[i];
        const double f1 = detail::axis_derivative(m, v, i, 1);
        h[i] = {f00 / (r * r), (f01 - ct / st * f1) / (r * r * st), (f11 + st * ct * f0) / (r * r * st * st)};
    }
    return {m, std::move(h)};
}

struct BakryEmeryBound {
    double K = 0.0;
    /// Node where Rc + D²φ attains its smallest eigenvalue.
    int node = 0;
    double min_eigenvalue = 0.0;
};

/// Smallest K ≥ 0 with Rc + D²φ ≥ −K at every node.
inline BakryEmeryBound bakry_emery_detail(const DiscreteManifold& m, const ScalarField& phi) {
    require_bound(m, phi, "bakry_emery_bound");
    const TensorField h = hessian(m, phi);
    BakryEmeryBound out;
    out.min_eigenvalue = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m.size(); ++i) {
        const double e = m.ricci_min(i) + h.min_eigenvalue(i);
        if (e < out.min_eigenvalue) {
            out.min_eigenvalue = e;
            out.node = i;
        }
    }
    out.K = std::max(0.0, -out.min_eigenvalue);
    return out;
}

inline double bakry_emery_bound(const DiscreteManifold& m, const ScalarField& phi) {
    return bakry_emery_detail(m, phi).K;
}

} // namespace hamgrad
