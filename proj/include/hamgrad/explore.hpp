#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hamgrad/estimates.hpp"
#include "hamgrad/geometry.hpp"
#include "hamgrad/sampling.hpp"
#include "hamgrad/solver.hpp"

namespace hamgrad {

/// Parameter grid for the log-nonlinear equation outside (and inside) the
/// regime a ≤ 0, sup u₀ < 1 where the estimate f − t|∇f|² ≥ 0 is known.
struct SweepSpec {
    GeometrySpec geometry;
    std::vector<double> a_values;
    std::vector<double> sup_values;
    std::vector<std::uint64_t> seeds;
    Schedule schedule;
    /// Fixed tolerance; empty selects 5·h² at the base resolution.
    std::optional<double> tolerance;
    bool refine = true;
    /// Worker count; 0 uses the hardware concurrency.
    unsigned threads = 0;
};

enum class CellVerdict { holds, violated, aborted };
enum class RefinementClass { none, numerical, persistent, aborted, unrefined };

inline std::string_view to_string(CellVerdict v) {
    switch (v) {
    case CellVerdict::holds: return "holds";
    case CellVerdict::violated: return "violated";
    case CellVerdict::aborted: return "aborted";
    }
    return "unknown";
}

inline std::string_view to_string(RefinementClass c) {
    switch (c) {
    case RefinementClass::none: return "none";
    case RefinementClass::numerical: return "numerical";
    case RefinementClass::persistent: return "persistent";
    case RefinementClass::aborted: return "aborted";
    case RefinementClass::unrefined: return "unrefined";
    }
    return "unknown";
}

struct SweepCell {
    double a = 0.0;
    double sup_u0 = 0.0;
    std::uint64_t seed = 0;
    CellVerdict verdict = CellVerdict::holds;
    std::optional<double> worst_residual;
    std::optional<double> first_violation_t;
    RefinementClass refinement = RefinementClass::none;
    std::string note;

    [[nodiscard]] bool proven_regime() const noexcept { return a <= 0.0 && sup_u0 < 1.0; }
};

struct SweepReport {
    std::vector<SweepCell> cells;
    double tolerance = 0.0;
    std::uint64_t geometry_hash = 0;

    [[nodiscard]] bool proven_regime_holds() const {
        return std::all_of(cells.begin(), cells.end(),
                           [](const SweepCell& c) { return !c.proven_regime() || c.verdict == CellVerdict::holds; });
    }
};

/// Ratio of fine to coarse violation magnitude above which a violation counts as persistent.
inline constexpr double kPersistenceRatio = 0.6;

namespace detail {

struct CellRun {
    bool aborted = false;
    std::string abort_reason;
    ResidualSeries series;
};

inline CellRun run_cell_at(const GeometrySpec& g, const Schedule& sch, double a, double sup, std::uint64_t seed) {
    CellRun out;
    try {
        auto m = std::make_shared<const DiscreteManifold>(build_geometry(g));
        Problem p = Problem::lognonlinear(m, a, random_smooth_field(*m, seed, sup));
        const Trajectory traj = solve(p, sch);
        out.series = nonlinear_residual(traj, true);
    } catch (const SolverAbort& e) {
        out.aborted = true;
        out.abort_reason = e.what();
    }
    return out;
}

inline double violation(const ResidualSeries& s) { return std::max(0.0, -s.worst().min_residual); }

inline SweepCell evaluate_cell(const SweepSpec& spec, double tol, double a, double sup, std::uint64_t seed) {
    SweepCell cell;
    cell.a = a;
    cell.sup_u0 = sup;
    cell.seed = seed;
    const CellRun base = run_cell_at(spec.geometry, spec.schedule, a, sup, seed);
    if (base.aborted) {
        cell.verdict = CellVerdict::aborted;
        cell.refinement = RefinementClass::aborted;
        cell.note = base.abort_reason;
        return cell;
    }
    const Verdict v = check_estimate(base.series, tol);
    cell.worst_residual = v.worst.residual;
    for (const auto& r : base.series.records) {
        if (r.min_residual < -tol) {
            cell.first_violation_t = r.t;
            break;
        }
    }
    if (v.holds) {
        cell.verdict = CellVerdict::holds;
        cell.refinement = RefinementClass::none;
        return cell;
    }
    cell.verdict = CellVerdict::violated;
    if (!spec.refine) {
        cell.refinement = RefinementClass::unrefined;
        return cell;
    }
    const double coarse = violation(base.series);
    const CellRun fine = run_cell_at(spec.geometry.refined(2), spec.schedule, a, sup, seed);
    if (fine.aborted) {
        cell.refinement = RefinementClass::aborted;
        cell.note = "refined run aborted: " + fine.abort_reason;
        return cell;
    }
    const double fine_mag = violation(fine.series);
    if (fine_mag <= kPersistenceRatio * coarse) {
        cell.refinement = RefinementClass::numerical;
        return cell;
    }
    cell.refinement = RefinementClass::persistent;
    const CellRun finer = run_cell_at(spec.geometry.refined(4), spec.schedule, a, sup, seed);
    if (finer.aborted) {
        cell.note = "second refinement aborted: " + finer.abort_reason;
    } else if (violation(finer.series) <= kPersistenceRatio * fine_mag) {
        cell.refinement = RefinementClass::numerical;
        cell.note = "reclassified: violation shrinks between 2n and 4n";
    }
    return cell;
}

} // namespace detail

/// Evaluates every (a, sup u₀, seed) cell. Cells are independent and may run
/// on several workers; the report keeps the grid order a → sup → seed.
inline SweepReport run_sweep(const SweepSpec& spec) {
    validate(spec.geometry);
    if (spec.a_values.empty() || spec.sup_values.empty() || spec.seeds.empty()) {
        throw PreconditionError("sweep grid must be non-empty on every axis");
    }
    for (double s : spec.sup_values) {
        if (!(s > 0.0)) throw PreconditionError("sweep sup values must be positive");
    }
    const DiscreteManifold base = build_geometry(spec.geometry);
    SweepReport report;
    report.geometry_hash = base.hash();
    report.tolerance = spec.tolerance ? *spec.tolerance : auto_tolerance(ResidualTag::nonlinear, base, false);

    struct Job {
        double a, sup;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (double a : spec.a_values)
        for (double s : spec.sup_values)
            for (auto seed : spec.seeds) jobs.push_back({a, s, seed});
    report.cells.resize(jobs.size());

    unsigned workers = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(jobs.size()));
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](unsigned w) {
        try {
            for (std::size_t j = next++; j < jobs.size(); j = next++) {
                report.cells[j] = detail::evaluate_cell(spec, report.tolerance, jobs[j].a, jobs[j].sup, jobs[j].seed);
            }
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    if (workers <= 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return report;
}

} // namespace hamgrad
