#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hamgrad/field.hpp"
#include "hamgrad/geometry.hpp"

namespace hamgrad {

/// Absolute tolerance for periodicity of potentials on closed geometries.
inline constexpr double kPeriodicityTol = 1e-8;

using PointFunction = std::function<double(double, double)>;

namespace detail {

// Periods of the coordinate axes (0 for non-periodic axes).
inline std::array<double, 2> periods(const GeometrySpec& s) {
    switch (s.kind) {
    case GeometryKind::circle: return {s.extent[0], 0.0};
    case GeometryKind::torus2: return {s.extent[0], s.extent[1]};
    case GeometryKind::sphere2: return {0.0, 2.0 * std::numbers::pi};
    default: return {0.0, 0.0};
    }
}

} // namespace detail

/// Samples a closed-form function at the node coordinates ((x, y), or (θ, λ) on
/// the sphere). On periodic axes the function must repeat within 1e-8; on the
/// sphere it must also be single-valued at the poles.
inline ScalarField sample_field(const DiscreteManifold& m, const PointFunction& fn) {
    const auto per = detail::periods(m.spec());
    std::vector<double> out(static_cast<std::size_t>(m.size()));
    for (int i = 0; i < m.size(); ++i) {
        const auto c = m.coord(i);
        const double v = fn(c[0], c[1]);
        for (int a = 0; a < 2; ++a) {
            if (per[a] == 0.0) continue;
            auto shifted = c;
            shifted[a] += per[a];
            if (!(std::abs(fn(shifted[0], shifted[1]) - v) <= kPeriodicityTol)) {
                throw GeometryError("non-periodic potential on a closed geometry (axis " + std::to_string(a) +
                                    ", node " + std::to_string(i) + ")");
            }
        }
        if (m.is_pole(i)) {
            for (int q = 1; q < 4; ++q) {
                if (!(std::abs(fn(c[0], q * 0.5 * std::numbers::pi) - v) <= kPeriodicityTol)) {
                    throw GeometryError("field is multi-valued at a sphere pole");
                }
            }
        }
        out[i] = v;
    }
    return {m, std::move(out)};
}

namespace detail {

inline double unit_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double signed_uniform(std::mt19937_64& rng) { return 2.0 * unit_uniform(rng) - 1.0; }

} // namespace detail

/// Smooth random positive field with sup exactly `sup`. The underlying function
/// is a low-mode expansion (Neumann-compatible cosines on bounded axes, full
/// Fourier on periodic ones, low-degree polynomials on the sphere) whose
/// coefficients depend only on `seed`, so refined grids sample the same function.
inline ScalarField random_smooth_field(const DiscreteManifold& m, std::uint64_t seed, double sup) {
    if (!(sup > 0.0)) throw PreconditionError("random field sup must be positive");
    constexpr double pi = std::numbers::pi;
    std::mt19937_64 rng(seed);
    const GeometrySpec& s = m.spec();
    PointFunction g;
    switch (s.kind) {
    case GeometryKind::circle: {
        std::vector<double> a(4), b(4);
        for (int k = 0; k < 4; ++k) {
            a[k] = detail::signed_uniform(rng);
            b[k] = detail::signed_uniform(rng);
        }
        const double L = s.extent[0];
        g = [a, b, L](double x, double) {
            double v = 0.0;
            for (int k = 1; k <= 4; ++k) {
                const double arg = 2.0 * pi * k * x / L;
                v += (a[k - 1] * std::cos(arg) + b[k - 1] * std::sin(arg)) / (k * k);
            }
            return v;
        };
        break;
    }
    case GeometryKind::interval: {
        std::vector<double> a(4);
        for (auto& c : a) c = detail::signed_uniform(rng);
        const double L = s.extent[0];
        g = [a, L](double x, double) {
            double v = 0.0;
            for (int k = 1; k <= 4; ++k) v += a[k - 1] * std::cos(pi * k * x / L) / (k * k);
            return v;
        };
        break;
    }
    case GeometryKind::torus2: {
        std::vector<std::array<double, 4>> c(9);
        for (auto& q : c) {
            for (auto& x : q) x = detail::signed_uniform(rng);
        }
        const double Lx = s.extent[0], Ly = s.extent[1];
        g = [c, Lx, Ly](double x, double y) {
            double v = 0.0;
            for (int k = 0; k < 3; ++k) {
                for (int l = 0; l < 3; ++l) {
                    if (k == 0 && l == 0) continue;
                    const auto& q = c[k * 3 + l];
                    const double X = 2.0 * pi * k * x / Lx, Y = 2.0 * pi * l * y / Ly;
                    v += (q[0] * std::cos(X) * std::cos(Y) + q[1] * std::cos(X) * std::sin(Y) +
                          q[2] * std::sin(X) * std::cos(Y) + q[3] * std::sin(X) * std::sin(Y)) /
                         (1.0 + k * k + l * l);
                }
            }
            return v;
        };
        break;
    }
    case GeometryKind::box2: {
        std::vector<double> c(16);
        for (auto& x : c) x = detail::signed_uniform(rng);
        const double Lx = s.extent[0], Ly = s.extent[1];
        g = [c, Lx, Ly](double x, double y) {
            double v = 0.0;
            for (int k = 0; k < 4; ++k) {
                for (int l = 0; l < 4; ++l) {
                    if (k == 0 && l == 0) continue;
                    v += c[k * 4 + l] * std::cos(pi * k * x / Lx) * std::cos(pi * l * y / Ly) /
                         (1.0 + k * k + l * l);
                }
            }
            return v;
        };
        break;
    }
    case GeometryKind::sphere2: {
        // Monomials X^i Y^j Z^k with 1 <= i+j+k <= 3.
        std::vector<std::array<int, 3>> powers;
        for (int i = 0; i <= 3; ++i)
            for (int j = 0; i + j <= 3; ++j)
                for (int k = 0; i + j + k <= 3; ++k)
                    if (i + j + k > 0) powers.push_back({i, j, k});
        std::vector<double> c(powers.size());
        for (auto& x : c) x = detail::signed_uniform(rng);
        g = [c, powers](double th, double lam) {
            const double X = std::sin(th) * std::cos(lam);
            const double Y = std::sin(th) * std::sin(lam);
            const double Z = std::cos(th);
            double v = 0.0;
            for (std::size_t q = 0; q < powers.size(); ++q) {
                const auto& p = powers[q];
                v += c[q] * std::pow(X, p[0]) * std::pow(Y, p[1]) * std::pow(Z, p[2]) / (p[0] + p[1] + p[2]);
            }
            return v;
        };
        break;
    }
    }
    const ScalarField raw = sample_field(m, g);
    const double lo = raw.min();
    const double hi = raw.max();
    if (!(hi - lo > 0.0)) throw PreconditionError("degenerate random field");
    constexpr double floor_fraction = 0.25;
    std::vector<double> out(static_cast<std::size_t>(m.size()));
    int arg = 0;
    for (int i = 0; i < m.size(); ++i) {
        out[i] = sup * (floor_fraction + (1.0 - floor_fraction) * (raw[i] - lo) / (hi - lo));
        if (raw[i] == hi) arg = i;
    }
    out[arg] = sup;
    for (double& v : out) v = std::min(v, sup);
    return {m, std::move(out)};
}

/// Reads a tabulated field: whitespace-separated values in node order. Periodic
/// axes carry one duplicated closing sample per line (circle n+1 values, torus
/// (nx+1)(ny+1), sphere rings of lon+1 values between the two poles); each
/// duplicate must match its wrap-around partner within 1e-8.
inline ScalarField read_tabulated_field(const DiscreteManifold& m, std::istream& in) {
    std::vector<double> raw;
    double v;
    while (in >> v) raw.push_back(v);
    if (!in.eof()) throw PreconditionError("tabulated field: unparsable value");
    const GeometrySpec& s = m.spec();
    auto expect = [&](std::size_t n) {
        if (raw.size() != n) {
            throw PreconditionError("tabulated field: expected " + std::to_string(n) + " values, got " +
                                    std::to_string(raw.size()));
        }
    };
    auto seam = [&](double a, double b) {
        if (!(std::abs(a - b) <= kPeriodicityTol)) {
            throw GeometryError("non-periodic tabulated field on a closed geometry");
        }
    };
    std::vector<double> out;
    switch (s.kind) {
    case GeometryKind::interval:
    case GeometryKind::box2:
        expect(static_cast<std::size_t>(m.size()));
        out = raw;
        break;
    case GeometryKind::circle: {
        const int n = s.resolution[0];
        expect(static_cast<std::size_t>(n + 1));
        seam(raw[0], raw[n]);
        out.assign(raw.begin(), raw.begin() + n);
        break;
    }
    case GeometryKind::torus2: {
        const int nx = s.resolution[0], ny = s.resolution[1];
        expect(static_cast<std::size_t>((nx + 1) * (ny + 1)));
        auto at = [&](int i, int j) { return raw[static_cast<std::size_t>(i + (nx + 1) * j)]; };
        for (int j = 0; j <= ny; ++j) seam(at(0, j), at(nx, j));
        for (int i = 0; i <= nx; ++i) seam(at(i, 0), at(i, ny));
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) out.push_back(at(i, j));
        break;
    }
    case GeometryKind::sphere2: {
        const int rings = s.resolution[0], lon = s.resolution[1];
        expect(static_cast<std::size_t>(2 + rings * (lon + 1)));
        out.push_back(raw[0]);
        for (int r = 0; r < rings; ++r) {
            const std::size_t base = 1 + static_cast<std::size_t>(r) * (lon + 1);
            seam(raw[base], raw[base + lon]);
            out.insert(out.end(), raw.begin() + static_cast<std::ptrdiff_t>(base),
                       raw.begin() + static_cast<std::ptrdiff_t>(base + lon));
        }
        out.push_back(raw.back());
        break;
    }
    }
    return {m, std::move(out)};
}

/// Closed-form field vocabulary, terms joined by " + ":
///   const c | coscomb a0 a1 k1 [a2 k2 ...] | cosxy a kx ky |
///   gauss amp center width | gauss amp cx cy width | quad c [cx [cy]]
/// and the standalone forms `random seed sup` and `file PATH`.
/// `coscomb` and `gauss` act on the first coordinate (θ on the sphere); Gaussians
/// use the minimum-image distance on periodic axes.
class FieldExpr {
public:
    static FieldExpr parse(const std::string& text) {
        FieldExpr e;
        e.text_ = text;
        std::vector<std::vector<std::string>> terms(1);
        std::istringstream ss(text);
        std::string tok;
        while (ss >> tok) {
            if (tok == "+") {
                terms.emplace_back();
                continue;
            }
            terms.back().push_back(tok);
        }
        for (auto& t : terms) {
            if (t.empty()) throw PreconditionError("empty term in field expression '" + text + "'");
            e.terms_.push_back(parse_term(t, text));
        }
        for (const auto& t : e.terms_) {
            if ((t.name == "random" || t.name == "file") && e.terms_.size() != 1) {
                throw PreconditionError("'" + t.name + "' cannot be combined with other terms");
            }
        }
        return e;
    }

    [[nodiscard]] const std::string& text() const noexcept { return text_; }
    [[nodiscard]] bool is_random() const { return terms_.size() == 1 && terms_[0].name == "random"; }
    [[nodiscard]] bool is_file() const { return terms_.size() == 1 && terms_[0].name == "file"; }
    [[nodiscard]] bool is_zero() const {
        return terms_.size() == 1 && terms_[0].name == "const" && terms_[0].args[0] == 0.0;
    }

    [[nodiscard]] ScalarField evaluate(const DiscreteManifold& m) const {
        if (is_random()) {
            return random_smooth_field(m, static_cast<std::uint64_t>(terms_[0].args[0]), terms_[0].args[1]);
        }
        if (is_file()) {
            std::ifstream in(terms_[0].path);
            if (!in) throw PreconditionError("cannot open tabulated field '" + terms_[0].path + "'");
            return read_tabulated_field(m, in);
        }
        const auto per = detail::periods(m.spec());
        const bool two_d = m.dimension() == 2;
        auto terms = terms_;
        return sample_field(m, [terms, per, two_d](double x, double y) {
            double v = 0.0;
            for (const auto& t : terms) v += eval_term(t, x, y, per, two_d);
            return v;
        });
    }

private:
    struct Term {
        std::string name;
        std::vector<double> args;
        std::string path;
    };

    static Term parse_term(const std::vector<std::string>& t, const std::string& text) {
        Term term;
        term.name = t[0];
        if (term.name == "file") {
            if (t.size() != 2) throw PreconditionError("'file' expects one path in '" + text + "'");
            term.path = t[1];
            return term;
        }
        for (std::size_t k = 1; k < t.size(); ++k) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(t[k], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != t[k].size()) {
                throw PreconditionError("bad number '" + t[k] + "' in field expression '" + text + "'");
            }
            term.args.push_back(v);
        }
        const auto n = term.args.size();
        bool ok = false;
        if (term.name == "const") ok = n == 1;
        else if (term.name == "coscomb") ok = n >= 1 && n % 2 == 1;
        else if (term.name == "cosxy") ok = n == 3;
        else if (term.name == "gauss") ok = (n == 3 || n == 4) && term.args.back() > 0.0;
        else if (term.name == "quad") ok = n >= 1 && n <= 3;
        else if (term.name == "random") ok = n == 2 && term.args[0] >= 0.0 && term.args[1] > 0.0;
        else throw PreconditionError("unknown field form '" + term.name + "' in '" + text + "'");
        if (!ok) throw PreconditionError("wrong arguments for '" + term.name + "' in '" + text + "'");
        return term;
    }

    static double wrap(double d, double period) {
        if (period == 0.0) return d;
        d = std::fmod(d, period);
        if (d > 0.5 * period) d -= period;
        if (d < -0.5 * period) d += period;
        return d;
    }

    static double eval_term(const Term& t, double x, double y, const std::array<double, 2>& per, bool two_d) {
        const auto& a = t.args;
        if (t.name == "const") return a[0];
        if (t.name == "coscomb") {
            double v = a[0];
            for (std::size_t k = 1; k + 1 < a.size(); k += 2) v += a[k] * std::cos(a[k + 1] * x);
            return v;
        }
        if (t.name == "cosxy") return a[0] * std::cos(a[1] * x) * std::cos(a[2] * y);
        if (t.name == "gauss") {
            const double dx = wrap(x - a[1], per[0]);
            double d2 = dx * dx;
            if (a.size() == 4) {
                const double dy = wrap(y - a[2], per[1]);
                d2 += dy * dy;
            }
            const double w = a.back();
            return a[0] * std::exp(-d2 / (2.0 * w * w));
        }
        if (t.name == "quad") {
            const double cx = a.size() > 1 ? a[1] : 0.0;
            const double cy = a.size() > 2 ? a[2] : 0.0;
            double v = (x - cx) * (x - cx);
            if (two_d) v += (y - cy) * (y - cy);
            return a[0] * v;
        }
        return 0.0;
    }

    std::string text_;
    std::vector<Term> terms_;
};

} // namespace hamgrad
