#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hamgrad/errors.hpp"

namespace hamgrad {

enum class GeometryKind { circle, torus2, interval, box2, sphere2 };
enum class BoundaryKind { none, neumann };

inline std::string_view to_string(GeometryKind kind) {
    switch (kind) {
    case GeometryKind::circle: return "circle";
    case GeometryKind::torus2: return "torus2";
    case GeometryKind::interval: return "interval";
    case GeometryKind::box2: return "box2";
    case GeometryKind::sphere2: return "sphere2";
    }
    return "unknown";
}

inline std::string_view to_string(BoundaryKind kind) {
    return kind == BoundaryKind::none ? "none" : "neumann";
}

/// Description of one of the built-in model geometries.
///
/// `resolution` counts nodes per axis. For `interval`/`box2` the count includes
/// both boundary nodes; for `sphere2` it is (latitude rings, longitudes) and the
/// two poles come on top. `extent` holds circumferences for periodic axes, side
/// lengths for bounded axes and the radius (first slot) for `sphere2`.
struct GeometrySpec {
    GeometryKind kind = GeometryKind::circle;
    std::array<int, 2> resolution{0, 0};
    std::array<double, 2> extent{0.0, 0.0};
    BoundaryKind boundary = BoundaryKind::none;

    [[nodiscard]] int dimension() const noexcept {
        return (kind == GeometryKind::circle || kind == GeometryKind::interval) ? 1 : 2;
    }

    [[nodiscard]] static BoundaryKind natural_boundary(GeometryKind kind) noexcept {
        return (kind == GeometryKind::interval || kind == GeometryKind::box2) ? BoundaryKind::neumann
                                                                              : BoundaryKind::none;
    }

    static GeometrySpec circle(int n, double circumference) {
        return {GeometryKind::circle, {n, 0}, {circumference, 0.0}, BoundaryKind::none};
    }
    static GeometrySpec interval(int n, double length) {
        return {GeometryKind::interval, {n, 0}, {length, 0.0}, BoundaryKind::neumann};
    }
    static GeometrySpec torus2(int nx, int ny, double lx, double ly) {
        return {GeometryKind::torus2, {nx, ny}, {lx, ly}, BoundaryKind::none};
    }
    static GeometrySpec box2(int nx, int ny, double lx, double ly) {
        return {GeometryKind::box2, {nx, ny}, {lx, ly}, BoundaryKind::neumann};
    }
    static GeometrySpec sphere2(int rings, int longitudes, double radius) {
        return {GeometryKind::sphere2, {rings, longitudes}, {radius, 0.0}, BoundaryKind::none};
    }

    /// Same geometry with every axis count multiplied by `factor`
    /// (node counts for bounded axes keep their endpoints: n -> factor*(n-1)+1).
    [[nodiscard]] GeometrySpec refined(int factor) const {
        GeometrySpec out = *this;
        const bool bounded = (kind == GeometryKind::interval || kind == GeometryKind::box2);
        for (int a = 0; a < dimension(); ++a) {
            out.resolution[a] = bounded ? factor * (resolution[a] - 1) + 1 : factor * resolution[a];
        }
        return out;
    }

    /// Coarsened counterpart of `refined(2)`; returns false when an axis would drop below 8.
    [[nodiscard]] bool halved(GeometrySpec& out) const {
        out = *this;
        const bool bounded = (kind == GeometryKind::interval || kind == GeometryKind::box2);
        for (int a = 0; a < dimension(); ++a) {
            const int n = resolution[a];
            const int m = bounded ? (n - 1) / 2 + 1 : n / 2;
            if (m < 8) return false;
            out.resolution[a] = m;
        }
        return true;
    }
};

inline void validate(const GeometrySpec& spec) {
    const int dim = spec.dimension();
    for (int a = 0; a < dim; ++a) {
        if (spec.resolution[a] < 8) {
            throw GeometryError("resolution must be at least 8 on every axis (got " +
                                std::to_string(spec.resolution[a]) + ")");
        }
    }
    const int extents = spec.kind == GeometryKind::sphere2 ? 1 : dim;
    for (int a = 0; a < extents; ++a) {
        if (!(spec.extent[a] > 0.0) || !std::isfinite(spec.extent[a])) {
            throw GeometryError("geometry extent must be strictly positive");
        }
    }
    if (spec.boundary != GeometrySpec::natural_boundary(spec.kind)) {
        throw GeometryError("boundary '" + std::string(to_string(spec.boundary)) +
                            "' is inconsistent with geometry kind '" +
                            std::string(to_string(spec.kind)) + "'");
    }
}

/// Index pair of the structured neighbours of a node along one coordinate axis;
/// -1 marks a missing neighbour (domain boundary, or a pole on the sphere).
struct AxisStencil {
    int minus = -1;
    int plus = -1;
};

/// Immutable discretization of a model geometry in weighted graph-Laplacian form:
/// (Δf)_i = (1/vol_i) Σ_j w_ij (f_j − f_i) with symmetric conductances w_ij.
class DiscreteManifold {
public:
    [[nodiscard]] const GeometrySpec& spec() const noexcept { return spec_; }
    [[nodiscard]] GeometryKind kind() const noexcept { return spec_.kind; }
    [[nodiscard]] int dimension() const noexcept { return spec_.dimension(); }
    [[nodiscard]] int size() const noexcept { return static_cast<int>(volume_.size()); }
    [[nodiscard]] std::uint64_t hash() const noexcept { return hash_; }

    [[nodiscard]] std::array<double, 2> coord(int i) const { return coords_[i]; }
    [[nodiscard]] std::span<const double> volumes() const noexcept { return volume_; }
    [[nodiscard]] double volume(int i) const { return volume_[i]; }
    [[nodiscard]] double total_volume() const noexcept {
        double s = 0.0;
        for (double v : volume_) s += v;
        return s;
    }

    [[nodiscard]] std::span<const int> neighbors(int i) const {
        return {nbr_index_.data() + nbr_offset_[i], nbr_index_.data() + nbr_offset_[i + 1]};
    }
    [[nodiscard]] std::span<const double> conductances(int i) const {
        return {nbr_weight_.data() + nbr_offset_[i], nbr_weight_.data() + nbr_offset_[i + 1]};
    }

    /// Smallest eigenvalue of the analytic Ricci tensor at node i.
    [[nodiscard]] double ricci_min(int i) const { return ricci_min_[i]; }

    [[nodiscard]] std::span<const int> boundary_nodes() const noexcept { return boundary_nodes_; }
    [[nodiscard]] bool is_boundary(int i) const { return is_boundary_[i] != 0; }
    [[nodiscard]] bool has_boundary() const noexcept { return !boundary_nodes_.empty(); }
    [[nodiscard]] bool boundary_convex() const noexcept { return boundary_convex_; }

    [[nodiscard]] const AxisStencil& stencil(int i, int axis) const { return axes_[i][axis]; }
    /// Coordinate step along an axis (θ/λ increments on the sphere).
    [[nodiscard]] double axis_step(int axis) const { return axis_step_[axis]; }
    /// Length of a unit coordinate increment along `axis` at node i.
    [[nodiscard]] double metric_scale(int i, int axis) const { return scale_[i][axis]; }
    /// Largest grid spacing, measured in the metric.
    [[nodiscard]] double spacing() const noexcept { return spacing_; }
    /// Node counts per axis (rings/longitudes on the sphere).
    [[nodiscard]] std::array<int, 2> shape() const noexcept { return spec_.resolution; }

    [[nodiscard]] bool is_pole(int i) const {
        return spec_.kind == GeometryKind::sphere2 && (i == 0 || i == size() - 1);
    }
    /// Nodes of the latitude ring adjacent to a pole, in longitude order.
    [[nodiscard]] std::vector<int> pole_ring(int pole) const {
        const int rings = spec_.resolution[0];
        const int lon = spec_.resolution[1];
        const int first = pole == 0 ? 1 : 1 + (rings - 1) * lon;
        std::vector<int> out(static_cast<std::size_t>(lon));
        for (int k = 0; k < lon; ++k) out[k] = first + k;
        return out;
    }

    /// Grid index (i, j) of a node on a tensor grid; the sphere returns (ring-1, lon).
    [[nodiscard]] std::array<int, 2> grid_index(int node) const {
        if (spec_.kind == GeometryKind::sphere2) {
            const int lon = spec_.resolution[1];
            return {(node - 1) / lon, (node - 1) % lon};
        }
        if (dimension() == 1) return {node, 0};
        return {node % spec_.resolution[0], node / spec_.resolution[0]};
    }

    friend DiscreteManifold build_geometry(const GeometrySpec& spec);

private:
    DiscreteManifold() = default;

    void finalize_edges(const std::vector<std::vector<std::pair<int, double>>>& adj);

    GeometrySpec spec_{};
    std::uint64_t hash_ = 0;
    std::vector<std::array<double, 2>> coords_;
    std::vector<double> volume_;
    std::vector<int> nbr_offset_;
    std::vector<int> nbr_index_;
    std::vector<double> nbr_weight_;
    std::vector<double> ricci_min_;
    std::vector<int> boundary_nodes_;
    std::vector<char> is_boundary_;
    bool boundary_convex_ = false;
    std::vector<std::array<AxisStencil, 2>> axes_;
    std::vector<std::array<double, 2>> scale_;
    std::array<double, 2> axis_step_{0.0, 0.0};
    double spacing_ = 0.0;
};

namespace detail {

inline std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t geometry_hash(const GeometrySpec& s) {
    std::uint64_t h = 14695981039346656037ULL;
    const auto kind = static_cast<std::int32_t>(s.kind);
    const auto boundary = static_cast<std::int32_t>(s.boundary);
    h = fnv1a(h, &kind, sizeof kind);
    h = fnv1a(h, &boundary, sizeof boundary);
    for (int a = 0; a < 2; ++a) {
        const std::int32_t r = s.resolution[a];
        h = fnv1a(h, &r, sizeof r);
        std::uint64_t bits = 0;
        std::memcpy(&bits, &s.extent[a], sizeof bits);
        h = fnv1a(h, &bits, sizeof bits);
    }
    return h;
}

inline void add_edge(std::vector<std::vector<std::pair<int, double>>>& adj, int i, int j, double w) {
    adj[i].emplace_back(j, w);
    adj[j].emplace_back(i, w);
}

} // namespace detail

inline std::string hash_hex(std::uint64_t h) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int k = 15; k >= 0; --k) {
        out[k] = digits[h & 0xF];
        h >>= 4;
    }
    return out;
}

inline void DiscreteManifold::finalize_edges(const std::vector<std::vector<std::pair<int, double>>>& adj) {
    nbr_offset_.assign(adj.size() + 1, 0);
    for (std::size_t i = 0; i < adj.size(); ++i) {
        nbr_offset_[i + 1] = nbr_offset_[i] + static_cast<int>(adj[i].size());
    }
    nbr_index_.reserve(nbr_offset_.back());
    nbr_weight_.reserve(nbr_offset_.back());
    for (const auto& row : adj) {
        for (auto [j, w] : row) {
            if (!(w > 0.0)) throw GeometryError("non-positive edge conductance");
            nbr_index_.push_back(j);
            nbr_weight_.push_back(w);
        }
    }
    for (double v : volume_) {
        if (!(v > 0.0)) throw GeometryError("non-positive volume weight");
    }
    // Symmetric stencil with matching conductances.
    for (int i = 0; i < size(); ++i) {
        auto nb = neighbors(i);
        auto cw = conductances(i);
        for (std::size_t k = 0; k < nb.size(); ++k) {
            const int j = nb[k];
            bool found = false;
            auto nbj = neighbors(j);
            auto cwj = conductances(j);
            for (std::size_t m = 0; m < nbj.size(); ++m) {
                if (nbj[m] == i && cwj[m] == cw[k]) {
                    found = true;
                    break;
                }
            }
            if (!found) throw GeometryError("asymmetric neighbour stencil");
        }
    }
}

/// Builds the discrete geometry. Periodic axes use uniform periodic grids,
/// bounded axes use vertex-centred grids whose half-cells at the ends realize
/// the mirror (ghost node) Neumann closure, and the sphere uses a
/// latitude-longitude grid with one lumped node per polar cap.
inline DiscreteManifold build_geometry(const GeometrySpec& spec) {
    validate(spec);
    DiscreteManifold m;
    m.spec_ = spec;
    m.hash_ = detail::geometry_hash(spec);
    constexpr double pi = std::numbers::pi;
    std::vector<std::vector<std::pair<int, double>>> adj;

    switch (spec.kind) {
    case GeometryKind::circle:
    case GeometryKind::interval: {
        const int n = spec.resolution[0];
        const bool periodic = spec.kind == GeometryKind::circle;
        const double h = periodic ? spec.extent[0] / n : spec.extent[0] / (n - 1);
        m.coords_.resize(n);
        m.volume_.resize(n);
        m.axes_.resize(n);
        m.scale_.assign(n, {1.0, 1.0});
        m.is_boundary_.assign(n, 0);
        adj.resize(n);
        for (int i = 0; i < n; ++i) {
            m.coords_[i] = {i * h, 0.0};
            const bool end = !periodic && (i == 0 || i == n - 1);
            m.volume_[i] = end ? 0.5 * h : h;
            AxisStencil st;
            st.minus = i > 0 ? i - 1 : (periodic ? n - 1 : -1);
            st.plus = i < n - 1 ? i + 1 : (periodic ? 0 : -1);
            m.axes_[i][0] = st;
        }
        for (int i = 0; i + 1 < n; ++i) detail::add_edge(adj, i, i + 1, 1.0 / h);
        if (periodic) detail::add_edge(adj, n - 1, 0, 1.0 / h);
        if (!periodic) {
            m.boundary_nodes_ = {0, n - 1};
            m.is_boundary_[0] = m.is_boundary_[n - 1] = 1;
            m.boundary_convex_ = true;
        }
        m.ricci_min_.assign(n, 0.0);
        m.axis_step_ = {h, 0.0};
        m.spacing_ = h;
        break;
    }
    case GeometryKind::torus2:
    case GeometryKind::box2: {
        const int nx = spec.resolution[0];
        const int ny = spec.resolution[1];
        const bool periodic = spec.kind == GeometryKind::torus2;
        const double hx = periodic ? spec.extent[0] / nx : spec.extent[0] / (nx - 1);
        const double hy = periodic ? spec.extent[1] / ny : spec.extent[1] / (ny - 1);
        const int n = nx * ny;
        m.coords_.resize(n);
        m.volume_.resize(n);
        m.axes_.resize(n);
        m.scale_.assign(n, {1.0, 1.0});
        m.is_boundary_.assign(n, 0);
        adj.resize(n);
        auto id = [nx](int i, int j) { return i + nx * j; };
        auto half_x = [&](int i) { return (!periodic && (i == 0 || i == nx - 1)) ? 0.5 : 1.0; };
        auto half_y = [&](int j) { return (!periodic && (j == 0 || j == ny - 1)) ? 0.5 : 1.0; };
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const int k = id(i, j);
                m.coords_[k] = {i * hx, j * hy};
                m.volume_[k] = hx * hy * half_x(i) * half_y(j);
                AxisStencil sx;
                sx.minus = i > 0 ? id(i - 1, j) : (periodic ? id(nx - 1, j) : -1);
                sx.plus = i < nx - 1 ? id(i + 1, j) : (periodic ? id(0, j) : -1);
                AxisStencil sy;
                sy.minus = j > 0 ? id(i, j - 1) : (periodic ? id(i, ny - 1) : -1);
                sy.plus = j < ny - 1 ? id(i, j + 1) : (periodic ? id(i, 0) : -1);
                m.axes_[k] = {sx, sy};
                if (!periodic && (i == 0 || i == nx - 1 || j == 0 || j == ny - 1)) {
                    m.is_boundary_[k] = 1;
                    m.boundary_nodes_.push_back(k);
                }
            }
        }
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                if (i + 1 < nx || periodic) {
                    detail::add_edge(adj, id(i, j), id((i + 1) % nx, j), half_y(j) * hy / hx);
                }
                if (j + 1 < ny || periodic) {
                    detail::add_edge(adj, id(i, j), id(i, (j + 1) % ny), half_x(i) * hx / hy);
                }
            }
        }
        m.boundary_convex_ = !periodic;
        m.ricci_min_.assign(n, 0.0);
        m.axis_step_ = {hx, hy};
        m.spacing_ = std::max(hx, hy);
        break;
    }
    case GeometryKind::sphere2: {
        const int rings = spec.resolution[0];
        const int lon = spec.resolution[1];
        const double r = spec.extent[0];
        const double dth = pi / (rings + 1);
        const double dph = 2.0 * pi / lon;
        const int n = rings * lon + 2;
        const int north = 0;
        const int south = n - 1;
        auto id = [lon](int ring, int k) { return 1 + (ring - 1) * lon + ((k % lon) + lon) % lon; };
        m.coords_.resize(n);
        m.volume_.resize(n);
        m.axes_.resize(n);
        m.scale_.assign(n, {r, 0.0});
        m.is_boundary_.assign(n, 0);
        adj.resize(n);
        const double cap = 2.0 * pi * r * r * (1.0 - std::cos(0.5 * dth));
        m.coords_[north] = {0.0, 0.0};
        m.coords_[south] = {pi, 0.0};
        m.volume_[north] = m.volume_[south] = cap;
        for (int ring = 1; ring <= rings; ++ring) {
            const double th = ring * dth;
            for (int k = 0; k < lon; ++k) {
                const int node = id(ring, k);
                m.coords_[node] = {th, k * dph};
                m.volume_[node] = r * r * std::sin(th) * dth * dph;
                m.scale_[node] = {r, r * std::sin(th)};
                AxisStencil st;
                st.minus = ring > 1 ? id(ring - 1, k) : north;
                st.plus = ring < rings ? id(ring + 1, k) : south;
                AxisStencil sp;
                sp.minus = id(ring, k - 1);
                sp.plus = id(ring, k + 1);
                m.axes_[node] = {st, sp};
            }
        }
        const double w_pole = std::sin(0.5 * dth) * dph / dth;
        for (int k = 0; k < lon; ++k) {
            detail::add_edge(adj, north, id(1, k), w_pole);
            detail::add_edge(adj, south, id(rings, k), w_pole);
        }
        for (int ring = 1; ring <= rings; ++ring) {
            const double th = ring * dth;
            for (int k = 0; k < lon; ++k) {
                detail::add_edge(adj, id(ring, k), id(ring, k + 1), dth / (std::sin(th) * dph));
                if (ring < rings) {
                    detail::add_edge(adj, id(ring, k), id(ring + 1, k),
                                     std::sin((ring + 0.5) * dth) * dph / dth);
                }
            }
        }
        m.ricci_min_.assign(n, 1.0 / (r * r));
        m.axis_step_ = {dth, dph};
        m.spacing_ = r * std::max(dth, dph);
        break;
    }
    }
    m.finalize_edges(adj);
    return m;
}

} // namespace hamgrad
