#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "hamgrad/errors.hpp"
#include "hamgrad/field.hpp"
#include "hamgrad/operators.hpp"
#include "hamgrad/solver.hpp"

namespace hamgrad {

enum class ResidualTag { drift, classic, nonlinear };

inline std::string_view to_string(ResidualTag t) {
    switch (t) {
    case ResidualTag::drift: return "drift";
    case ResidualTag::classic: return "classic";
    case ResidualTag::nonlinear: return "nonlinear";
    }
    return "unknown";
}

inline constexpr double kDefaultLogFloor = 1e-12;
inline constexpr double kNormalizationTol = 1e-9;

struct NegLog {
    ScalarField f;
    bool floor_activated = false;
};

/// f = −log(max(u, floor)) nodewise.
inline NegLog neg_log(const DiscreteManifold& m, const ScalarField& u, double floor = kDefaultLogFloor) {
    require_bound(m, u, "neg_log");
    if (!(floor > 0.0)) throw PreconditionError("log floor must be positive");
    NegLog out;
    std::vector<double> f(static_cast<std::size_t>(u.size()));
    for (int i = 0; i < u.size(); ++i) {
        double v = u[i];
        if (!(v >= floor)) {
            v = floor;
            out.floor_activated = true;
        }
        f[i] = 0.0 - std::log(v);
    }
    out.f = ScalarField(m, std::move(f));
    return out;
}

struct ResidualRecord {
    double t = 0.0;
    double min_residual = 0.0;
    int argmin_node = 0;
    double sup_u = 0.0;
    double max_grad_f_sq = 0.0;
    bool sup_below_one = true;
};

struct ResidualSeries {
    ResidualTag tag = ResidualTag::drift;
    double K = 0.0;
    bool exploratory = false;
    bool floor_activated = false;
    std::vector<ResidualRecord> records;

    [[nodiscard]] const ResidualRecord& worst() const {
        const ResidualRecord* w = &records.front();
        for (const auto& r : records) {
            if (r.min_residual < w->min_residual) w = &r;
        }
        return *w;
    }
};

/// Residual of the drift estimate, (2Kt+1)f − t|∇f|², at one time.
inline ScalarField drift_residual_field(const DiscreteManifold& m, const ScalarField& f, double t, double K) {
    const ScalarField g = gradient_norm_sq(m, f);
    std::vector<double> r(static_cast<std::size_t>(f.size()));
    for (int i = 0; i < f.size(); ++i) r[i] = (2.0 * K * t + 1.0) * f[i] - t * g[i];
    return {m, std::move(r)};
}

namespace detail {

inline void accumulate(ResidualRecord& rec, const ScalarField& residual, const ScalarField& u,
                       const ScalarField& grad_sq) {
    rec.min_residual = std::numeric_limits<double>::infinity();
    for (int i = 0; i < residual.size(); ++i) {
        if (residual[i] < rec.min_residual) {
            rec.min_residual = residual[i];
            rec.argmin_node = i;
        }
    }
    rec.sup_u = u.max();
    rec.max_grad_f_sq = grad_sq.max();
    rec.sup_below_one = rec.sup_u < 1.0;
}

} // namespace detail

/// Checks sup u₀ = 1 (within 1e-9), the normalization the drift estimate assumes.
inline void require_normalized(const ScalarField& u0) {
    const double s = u0.max();
    if (!(std::abs(s - 1.0) <= kNormalizationTol)) {
        throw PreconditionError("drift estimate requires sup u0 = 1 (got sup u0 = " + std::to_string(s) + ")");
    }
}

/// Per-snapshot minimum of (2Kt+1)f − t|∇f|², f = −log u, with K from
/// bakry_emery_bound(M, φ).
inline ResidualSeries drift_residual(const Trajectory& traj, const ScalarField& phi) {
    const DiscreteManifold& m = traj.manifold();
    if (traj.problem.kind != ProblemKind::drifting) {
        throw PreconditionError("drift residual needs a drifting-equation trajectory");
    }
    require_bound(m, phi, "drift_residual");
    require_normalized(traj.snapshots.front().u);
    ResidualSeries s;
    s.tag = ResidualTag::drift;
    s.K = bakry_emery_bound(m, phi);
    for (const auto& snap : traj.snapshots) {
        const NegLog nl = neg_log(m, snap.u);
        s.floor_activated |= nl.floor_activated;
        const ScalarField g = gradient_norm_sq(m, nl.f);
        std::vector<double> r(static_cast<std::size_t>(m.size()));
        for (int i = 0; i < m.size(); ++i) r[i] = (2.0 * s.K * snap.t + 1.0) * nl.f[i] - snap.t * g[i];
        ResidualRecord rec;
        rec.t = snap.t;
        detail::accumulate(rec, ScalarField(m, std::move(r)), snap.u, g);
        s.records.push_back(rec);
    }
    return s;
}

inline ResidualSeries drift_residual(const Trajectory& traj) { return drift_residual(traj, traj.problem.phi); }

/// K above this counts as positive curvature deficit for the classic form.
inline constexpr double kClassicFlatTol = 1e-9;

/// Per-snapshot minimum of (A−u)² log(A/(A−u)) − t|∇u|², A = trajectory sup + 1e-12.
/// Where A − u ≤ floor the logarithmic term takes its limit 0.
inline ResidualSeries classic_residual(const Trajectory& traj, double floor = kDefaultLogFloor) {
    const DiscreteManifold& m = traj.manifold();
    if (traj.problem.kind != ProblemKind::drifting) {
        throw PreconditionError("classic residual needs a drifting-equation trajectory");
    }
    const double K = bakry_emery_bound(m, traj.problem.phi);
    if (K > kClassicFlatTol) {
        throw PreconditionError("classic estimate requires K = 0 (Bakry-Emery bound gives K = " + std::to_string(K) +
                                ")");
    }
    double A = 0.0;
    for (const auto& snap : traj.snapshots) A = std::max(A, snap.u.max());
    A += 1e-12;
    ResidualSeries s;
    s.tag = ResidualTag::classic;
    s.K = K;
    for (const auto& snap : traj.snapshots) {
        const ScalarField g = gradient_norm_sq(m, snap.u);
        std::vector<double> r(static_cast<std::size_t>(m.size()));
        for (int i = 0; i < m.size(); ++i) {
            const double gap = A - snap.u[i];
            const double head = gap <= floor ? 0.0 : gap * gap * std::log(A / gap);
            r[i] = head - snap.t * g[i];
        }
        ResidualRecord rec;
        rec.t = snap.t;
        detail::accumulate(rec, ScalarField(m, std::move(r)), snap.u, g);
        s.records.push_back(rec);
    }
    return s;
}

/// Per-snapshot minimum of f − t|∇f|² for the log-nonlinear equation.
/// Outside a ≤ 0, sup u₀ < 1 only exploratory evaluation is allowed.
inline ResidualSeries nonlinear_residual(const Trajectory& traj, bool exploratory = false) {
    const DiscreteManifold& m = traj.manifold();
    if (traj.problem.kind != ProblemKind::lognonlinear) {
        throw PreconditionError("nonlinear residual needs a log-nonlinear trajectory");
    }
    const double sup0 = traj.snapshots.front().u.max();
    if (!exploratory) {
        if (traj.problem.a > 0.0) {
            throw PreconditionError("nonlinear estimate requires a <= 0 (got a = " + std::to_string(traj.problem.a) +
                                    ")");
        }
        if (!(sup0 < 1.0)) {
            throw PreconditionError("nonlinear estimate requires sup u0 < 1 (got " + std::to_string(sup0) + ")");
        }
    }
    ResidualSeries s;
    s.tag = ResidualTag::nonlinear;
    s.exploratory = exploratory;
    for (const auto& snap : traj.snapshots) {
        const NegLog nl = neg_log(m, snap.u);
        s.floor_activated |= nl.floor_activated;
        const ScalarField g = gradient_norm_sq(m, nl.f);
        std::vector<double> r(static_cast<std::size_t>(m.size()));
        for (int i = 0; i < m.size(); ++i) r[i] = nl.f[i] - snap.t * g[i];
        ResidualRecord rec;
        rec.t = snap.t;
        detail::accumulate(rec, ScalarField(m, std::move(r)), snap.u, g);
        s.records.push_back(rec);
    }
    return s;
}

struct WorstRecord {
    double t = 0.0;
    int node = 0;
    double residual = 0.0;
};

struct RefinementNote {
    double coarse_worst = 0.0;
    double fine_worst = 0.0;
    /// coarse/fine magnitude when both are negative.
    std::optional<double> ratio;
};

struct Verdict {
    bool holds = true;
    WorstRecord worst;
    double tolerance = 0.0;
    bool exploratory = false;
    std::optional<RefinementNote> refinement;
};

/// holds iff every per-snapshot minimum is ≥ −tol.
inline Verdict check_estimate(const ResidualSeries& series, double tol) {
    if (!(tol >= 0.0)) throw PreconditionError("tolerance must be nonnegative");
    if (series.records.empty()) throw PreconditionError("empty residual series");
    const ResidualRecord& w = series.worst();
    Verdict v;
    v.worst = {w.t, w.argmin_node, w.min_residual};
    v.tolerance = tol;
    v.holds = w.min_residual >= -tol;
    v.exploratory = series.exploratory;
    return v;
}

inline RefinementNote refinement_note(const ResidualSeries& coarse, const ResidualSeries& fine) {
    RefinementNote n;
    n.coarse_worst = coarse.worst().min_residual;
    n.fine_worst = fine.worst().min_residual;
    if (n.coarse_worst < 0.0 && n.fine_worst < 0.0) n.ratio = n.coarse_worst / n.fine_worst;
    return n;
}

/// Verdict of `series` with a note comparing its worst residual to a companion
/// run at another resolution.
inline Verdict check_estimate(const ResidualSeries& series, double tol, const ResidualSeries& coarse) {
    Verdict v = check_estimate(series, tol);
    v.refinement = refinement_note(coarse, series);
    return v;
}

/// Resolution-scaled tolerance: 0.5·h for the drift estimate with an active
/// potential (the upwinded drift is first order), 5·h² otherwise.
inline double auto_tolerance(ResidualTag tag, const DiscreteManifold& m, bool drift_active) {
    const double h = m.spacing();
    if (tag == ResidualTag::drift && drift_active) return 0.5 * h;
    return 5.0 * h * h;
}

inline bool is_constant(const ScalarField& f) { return f.size() == 0 || f.max() == f.min(); }

} // namespace hamgrad
