#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "hamgrad/errors.hpp"
#include "hamgrad/field.hpp"
#include "hamgrad/format.hpp"
#include "hamgrad/geometry.hpp"
#include "hamgrad/operators.hpp"

namespace hamgrad {

enum class ProblemKind { drifting, lognonlinear };
enum class Scheme { explicit_euler, implicit_euler, crank_nicolson };

inline std::string_view to_string(ProblemKind k) { return k == ProblemKind::drifting ? "drifting" : "lognonlinear"; }

inline std::string_view to_string(Scheme s) {
    switch (s) {
    case Scheme::explicit_euler: return "explicit_euler";
    case Scheme::implicit_euler: return "implicit_euler";
    case Scheme::crank_nicolson: return "crank_nicolson";
    }
    return "unknown";
}

/// u_t − Δu = −∇φ·∇u (drifting) or u_t − Δu = a·u·log u (lognonlinear), u > 0.
struct Problem {
    std::shared_ptr<const DiscreteManifold> geometry;
    ProblemKind kind = ProblemKind::drifting;
    ScalarField phi;
    double a = 0.0;
    ScalarField initial;

    static Problem drifting(std::shared_ptr<const DiscreteManifold> m, ScalarField phi, ScalarField u0) {
        Problem p{std::move(m), ProblemKind::drifting, std::move(phi), 0.0, std::move(u0)};
        p.validate();
        return p;
    }

    static Problem lognonlinear(std::shared_ptr<const DiscreteManifold> m, double a, ScalarField u0) {
        ScalarField zero = ScalarField::constant(*m, 0.0);
        Problem p{std::move(m), ProblemKind::lognonlinear, std::move(zero), a, std::move(u0)};
        p.validate();
        return p;
    }

    [[nodiscard]] const DiscreteManifold& manifold() const { return *geometry; }

    void validate() const {
        if (!geometry) throw PreconditionError("problem has no geometry");
        require_bound(*geometry, initial, "problem initial data");
        require_bound(*geometry, phi, "problem potential");
        if (!std::isfinite(a)) throw PreconditionError("coefficient a must be finite");
        for (int i = 0; i < initial.size(); ++i) {
            if (!(initial[i] > 0.0)) {
                throw PreconditionError("initial data must be strictly positive (node " + std::to_string(i) + ")");
            }
        }
    }
};

struct Schedule {
    double t_end = 1.0;
    std::optional<double> dt; ///< empty means "auto"
    int stride = 1;
    Scheme scheme = Scheme::implicit_euler;
};

struct Snapshot {
    double t = 0.0;
    ScalarField u;
};

struct SolverMeta {
    Scheme scheme = Scheme::implicit_euler;
    double dt = 0.0;
    long steps = 0;
    std::uint64_t geometry_hash = 0;
};

/// Time-stamped snapshots of one solve, starting with the exact initial data.
struct Trajectory {
    Problem problem;
    std::vector<Snapshot> snapshots;
    SolverMeta meta;

    [[nodiscard]] const DiscreteManifold& manifold() const { return problem.manifold(); }
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

/// Spatial generator L of the linear part: Δ_h minus the upwinded drift term.
/// Off-diagonal entries are nonnegative and rows sum to zero, so I + dt·L is
/// order preserving whenever 1 + dt·L_ii ≥ 0. The normal drift component is
/// dropped on Neumann boundary nodes, where u_ν = 0.
inline SparseMatrix assemble_generator(const Problem& p) {
    const DiscreteManifold& m = p.manifold();
    const int n = m.size();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * 7);
    for (int i = 0; i < n; ++i) {
        const auto nb = m.neighbors(i);
        const auto w = m.conductances(i);
        double diag = 0.0;
        for (std::size_t k = 0; k < nb.size(); ++k) {
            const double c = w[k] / m.volume(i);
            trip.emplace_back(i, nb[k], c);
            diag -= c;
        }
        trip.emplace_back(i, i, diag);
    }
    if (p.kind == ProblemKind::drifting) {
        const auto b = gradient(m, p.phi);
        for (int i = 0; i < n; ++i) {
            if (m.is_pole(i)) {
                const double mag = std::hypot(b[i][0], b[i][1]);
                if (mag == 0.0) continue;
                const auto ring = m.pole_ring(i);
                const double dph = m.axis_step(1);
                double alpha = std::atan2(-b[i][1], -b[i][0]);
                if (alpha < 0.0) alpha += 2.0 * std::numbers::pi;
                const double pos = alpha / dph;
                const int lon = static_cast<int>(ring.size());
                const int k0 = static_cast<int>(std::floor(pos)) % lon;
                const int k1 = (k0 + 1) % lon;
                const double frac = pos - std::floor(pos);
                const double c = mag / (m.spec().extent[0] * m.axis_step(0));
                trip.emplace_back(i, ring[k0], c * (1.0 - frac));
                trip.emplace_back(i, ring[k1], c * frac);
                trip.emplace_back(i, i, -c);
                continue;
            }
            for (int a = 0; a < m.dimension(); ++a) {
                const AxisStencil& s = m.stencil(i, a);
                if (s.minus < 0 || s.plus < 0 || b[i][a] == 0.0) continue;
                const double c = std::abs(b[i][a]) / (m.metric_scale(i, a) * m.axis_step(a));
                trip.emplace_back(i, b[i][a] > 0.0 ? s.minus : s.plus, c);
                trip.emplace_back(i, i, -c);
            }
        }
    }
    SparseMatrix L(n, n);
    L.setFromTriplets(trip.begin(), trip.end());
    L.makeCompressed();
    return L;
}

/// Largest explicit step keeping every entry of I + dt·L nonnegative, times `safety`.
inline double stable_dt(const Problem& p, double safety = 1.0) {
    if (!(safety > 0.0 && safety <= 1.0)) throw PreconditionError("safety must lie in (0, 1]");
    const SparseMatrix L = assemble_generator(p);
    double worst = 0.0;
    for (int i = 0; i < L.rows(); ++i) worst = std::max(worst, -L.coeff(i, i));
    return safety / worst;
}

/// Relative residual target for every linear solve.
inline constexpr double kLinearSolveTol = 1e-12;
/// Values above this are treated as blow-up.
inline constexpr double kBlowUpCap = 1e12;

/// Advances one problem with a fixed step; owns the factorized system.
class Stepper {
public:
    Stepper(const Problem& p, double dt, Scheme scheme) : problem_(&p), dt_(dt), scheme_(scheme) {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw PreconditionError("dt must be positive");
        L_ = assemble_generator(p);
        if (scheme == Scheme::explicit_euler) {
            double worst = 0.0;
            for (int i = 0; i < L_.rows(); ++i) worst = std::max(worst, -L_.coeff(i, i));
            if (dt * worst > 1.0 + 1e-12) {
                std::ostringstream os;
                os << "explicit dt " << dt << " exceeds the stable limit " << 1.0 / worst;
                throw PreconditionError(os.str());
            }
            return;
        }
        const double theta = scheme == Scheme::implicit_euler ? 1.0 : 0.5;
        SparseMatrix id(L_.rows(), L_.cols());
        id.setIdentity();
        A_ = id - (theta * dt) * L_;
        A_.makeCompressed();
        lu_ = std::make_unique<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>>();
        lu_->analyzePattern(A_);
        lu_->factorize(A_);
        if (lu_->info() != Eigen::Success) throw ConvergenceError("factorization of the implicit system failed");
    }

    [[nodiscard]] double dt() const noexcept { return dt_; }

    /// u at time t to u at t + dt; throws SolverAbort on positivity loss or blow-up.
    [[nodiscard]] std::vector<double> advance(const std::vector<double>& u, double t) const {
        const Eigen::Index n = static_cast<Eigen::Index>(u.size());
        Eigen::Map<const Eigen::VectorXd> uv(u.data(), n);
        Eigen::VectorXd source = Eigen::VectorXd::Zero(n);
        if (problem_->kind == ProblemKind::lognonlinear && problem_->a != 0.0) {
            for (Eigen::Index i = 0; i < n; ++i) source[i] = problem_->a * uv[i] * std::log(uv[i]);
        }
        Eigen::VectorXd next;
        if (scheme_ == Scheme::explicit_euler) {
            next = uv + dt_ * (L_ * uv + source);
        } else {
            Eigen::VectorXd rhs = uv + dt_ * source;
            if (scheme_ == Scheme::crank_nicolson) rhs += (0.5 * dt_) * (L_ * uv);
            next = lu_->solve(rhs);
            const double scale = std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
            for (int pass = 0;; ++pass) {
                const Eigen::VectorXd r = rhs - A_ * next;
                if (r.lpNorm<Eigen::Infinity>() <= kLinearSolveTol * scale) break;
                if (pass == 4) throw ConvergenceError("linear solve missed the 1e-12 residual target");
                next += lu_->solve(r);
            }
        }
        std::vector<double> out(next.data(), next.data() + n);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!(out[i] > 0.0)) {
                std::ostringstream os;
                os << "positivity lost at node " << i << ", t=" << t + dt_ << " (u=" << out[i] << ")";
                throw SolverAbort(os.str(), static_cast<int>(i), t + dt_, t);
            }
            if (out[i] > kBlowUpCap) {
                std::ostringstream os;
                os << "blow-up at node " << i << ", t=" << t + dt_ << " (u=" << out[i] << ")";
                throw SolverAbort(os.str(), static_cast<int>(i), t + dt_, t);
            }
        }
        return out;
    }

private:
    const Problem* problem_;
    double dt_;
    Scheme scheme_;
    SparseMatrix L_;
    SparseMatrix A_;
    std::unique_ptr<Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>> lu_;
};

struct State {
    double t = 0.0;
    std::vector<double> u;
};

/// One step of the chosen scheme. The log source is always evaluated at the
/// current state.
inline State step(const State& s, const Problem& p, double dt, Scheme scheme) {
    const Stepper stepper(p, dt, scheme);
    return {s.t + dt, stepper.advance(s.u, s.t)};
}

/// dt used for a schedule: explicit "auto" is 0.9 × the stable limit, implicit
/// "auto" is h².
inline double resolve_dt(const Problem& p, const Schedule& sch) {
    if (sch.dt) return *sch.dt;
    if (sch.scheme == Scheme::explicit_euler) return stable_dt(p, 0.9);
    const double h = p.manifold().spacing();
    return h * h;
}

/// Integrates to t_end with a uniform step (the requested dt shrunk so that a
/// whole number of steps lands on t_end), keeping every `stride`-th state and
/// the final one.
inline Trajectory solve(const Problem& p, const Schedule& sch) {
    p.validate();
    if (!(sch.t_end > 0.0)) throw PreconditionError("t_end must be positive");
    if (sch.stride < 1) throw PreconditionError("snapshot stride must be positive");
    const double dt_req = resolve_dt(p, sch);
    if (!(dt_req > 0.0)) throw PreconditionError("dt must be positive");
    const long steps = std::max(1L, static_cast<long>(std::ceil(sch.t_end / dt_req - 1e-9)));
    const double dt = sch.t_end / static_cast<double>(steps);

    Trajectory traj{p, {}, {sch.scheme, dt, steps, p.manifold().hash()}};
    traj.snapshots.push_back({0.0, p.initial});
    const Stepper stepper(traj.problem, dt, sch.scheme);
    std::vector<double> u(p.initial.values().begin(), p.initial.values().end());
    for (long k = 1; k <= steps; ++k) {
        const double t_prev = static_cast<double>(k - 1) * dt;
        try {
            u = stepper.advance(u, t_prev);
        } catch (const SolverAbort& e) {
            throw SolverAbort(std::string(e.what()) + "; last good snapshot t=" +
                                  format_number(traj.snapshots.back().t),
                              e.node(), e.time(), traj.snapshots.back().t);
        }
        if (k % sch.stride == 0 || k == steps) {
            const double t = k == steps ? sch.t_end : static_cast<double>(k) * dt;
            traj.snapshots.push_back({t, ScalarField(p.manifold(), u)});
        }
    }
    return traj;
}

} // namespace hamgrad
