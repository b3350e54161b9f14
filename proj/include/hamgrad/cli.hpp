#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hamgrad/errors.hpp"
#include "hamgrad/estimates.hpp"
#include "hamgrad/explore.hpp"
#include "hamgrad/gap.hpp"
#include "hamgrad/geometry.hpp"
#include "hamgrad/report.hpp"
#include "hamgrad/sampling.hpp"
#include "hamgrad/solver.hpp"

namespace hamgrad::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kOk = 0, kUsage = 1, kViolated = 2, kAbort = 3 };

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Parsed flat key=value run configuration.
struct RunConfig {
    GeometrySpec geometry;
    ProblemKind kind = ProblemKind::drifting;
    double a = 0.0;
    std::string phi = "const 0";
    std::optional<std::string> initial;
    Schedule schedule;
    bool stride_auto = false;
    std::optional<ResidualTag> check_tag;
    std::optional<double> check_tol; ///< empty = auto
    bool check_refine = true;
    std::string output_dir = ".";
    std::vector<double> sweep_a;
    std::vector<double> sweep_sup;
    std::vector<std::uint64_t> sweep_seeds;
    bool sweep_refine = true;
    unsigned sweep_threads = 0;

    [[nodiscard]] bool has_sweep() const { return !sweep_a.empty() || !sweep_sup.empty() || !sweep_seeds.empty(); }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, const std::string& seps) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (seps.find(c) != std::string::npos) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

/// Real number, optionally a multiple of pi: "3.5", "pi", "2pi", "0.5*pi", "-pi".
inline double parse_real(const std::string& key, std::string s) {
    s = trim(s);
    double factor = 1.0;
    if (s.size() >= 2 && s.compare(s.size() - 2, 2, "pi") == 0) {
        factor = std::numbers::pi;
        s = trim(s.substr(0, s.size() - 2));
        if (!s.empty() && s.back() == '*') s = trim(s.substr(0, s.size() - 1));
        if (s.empty() || s == "+") return factor;
        if (s == "-") return -factor;
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (s.empty() || used != s.size() || !std::isfinite(v)) {
        throw ConfigError("config key '" + key + "': cannot parse number '" + s + "'");
    }
    return v * factor;
}

inline long parse_int(const std::string& key, const std::string& s) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (s.empty() || used != s.size()) throw ConfigError("config key '" + key + "': cannot parse integer '" + s + "'");
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + s + "'");
}

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "geometry.kind",   "geometry.resolution", "geometry.extent", "geometry.boundary", "problem.kind",
        "problem.a",       "problem.phi",         "initial",         "schedule.scheme",   "schedule.dt",
        "schedule.t_end",  "schedule.stride",     "check.tag",       "check.tol",         "check.refine",
        "output.dir",      "sweep.a",             "sweep.sup",       "sweep.seeds",       "sweep.refine",
        "sweep.threads"};
    return keys;
}

} // namespace detail

/// Parses `key = value` lines; `#` starts a comment. Unknown or repeated keys are errors.
inline RunConfig parse_config(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (!detail::known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
        if (!kv.emplace(key, value).second) throw ConfigError("duplicate config key '" + key + "'");
    }

    RunConfig c;
    auto get = [&](const std::string& k) -> std::optional<std::string> {
        const auto it = kv.find(k);
        if (it == kv.end()) return std::nullopt;
        return it->second;
    };

    const auto kind = get("geometry.kind");
    if (!kind) throw ConfigError("missing config key 'geometry.kind'");
    static const std::map<std::string, GeometryKind> kinds{{"circle", GeometryKind::circle},
                                                           {"torus2", GeometryKind::torus2},
                                                           {"interval", GeometryKind::interval},
                                                           {"box2", GeometryKind::box2},
                                                           {"sphere2", GeometryKind::sphere2}};
    if (!kinds.count(*kind)) throw ConfigError("unknown geometry.kind '" + *kind + "'");
    c.geometry.kind = kinds.at(*kind);
    const int dim = c.geometry.dimension();
    const bool sphere = c.geometry.kind == GeometryKind::sphere2;
    c.geometry.boundary = GeometrySpec::natural_boundary(c.geometry.kind);
    if (const auto b = get("geometry.boundary")) {
        if (*b == "none") c.geometry.boundary = BoundaryKind::none;
        else if (*b == "neumann") c.geometry.boundary = BoundaryKind::neumann;
        else throw ConfigError("unknown geometry.boundary '" + *b + "'");
    }

    const auto res = get("geometry.resolution");
    if (!res) throw ConfigError("missing config key 'geometry.resolution'");
    const auto parts = detail::split(*res, "x,");
    if (parts.size() > static_cast<std::size_t>(dim)) throw ConfigError("too many resolution entries for geometry");
    for (std::size_t a = 0; a < parts.size(); ++a) {
        c.geometry.resolution[a] = static_cast<int>(detail::parse_int("geometry.resolution", parts[a]));
    }
    if (dim == 2 && parts.size() == 1) {
        c.geometry.resolution[1] = sphere ? 2 * c.geometry.resolution[0] : c.geometry.resolution[0];
    }

    const double default_extent =
        (c.geometry.kind == GeometryKind::circle || c.geometry.kind == GeometryKind::torus2) ? 2.0 * std::numbers::pi
        : sphere                                                                              ? 1.0
                                                                                              : std::numbers::pi;
    c.geometry.extent = {default_extent, sphere ? 0.0 : (dim == 2 ? default_extent : 0.0)};
    if (const auto ext = get("geometry.extent")) {
        const auto e = detail::split(*ext, ",");
        const std::size_t want = sphere ? 1 : static_cast<std::size_t>(dim);
        if (e.size() > want) throw ConfigError("too many extent entries for geometry");
        for (std::size_t a = 0; a < e.size(); ++a) c.geometry.extent[a] = detail::parse_real("geometry.extent", e[a]);
        if (want == 2 && e.size() == 1) c.geometry.extent[1] = c.geometry.extent[0];
    }

    if (const auto pk = get("problem.kind")) {
        if (*pk == "drifting") c.kind = ProblemKind::drifting;
        else if (*pk == "lognonlinear") c.kind = ProblemKind::lognonlinear;
        else throw ConfigError("unknown problem.kind '" + *pk + "'");
    }
    if (const auto a = get("problem.a")) c.a = detail::parse_real("problem.a", *a);
    if (const auto phi = get("problem.phi")) c.phi = *phi;
    c.initial = get("initial");

    if (const auto s = get("schedule.scheme")) {
        if (*s == "explicit_euler") c.schedule.scheme = Scheme::explicit_euler;
        else if (*s == "implicit_euler") c.schedule.scheme = Scheme::implicit_euler;
        else if (*s == "crank_nicolson") c.schedule.scheme = Scheme::crank_nicolson;
        else throw ConfigError("unknown schedule.scheme '" + *s + "'");
    }
    if (const auto dt = get("schedule.dt"); dt && *dt != "auto") {
        c.schedule.dt = detail::parse_real("schedule.dt", *dt);
        if (!(*c.schedule.dt > 0.0)) throw ConfigError("schedule.dt must be positive");
    }
    if (const auto te = get("schedule.t_end")) c.schedule.t_end = detail::parse_real("schedule.t_end", *te);
    if (!(c.schedule.t_end > 0.0)) throw ConfigError("schedule.t_end must be positive");
    if (const auto st = get("schedule.stride")) {
        if (*st == "auto") {
            c.stride_auto = true;
        } else {
            c.schedule.stride = static_cast<int>(detail::parse_int("schedule.stride", *st));
            if (c.schedule.stride < 1) throw ConfigError("schedule.stride must be positive");
        }
    }

    if (const auto tag = get("check.tag")) {
        if (*tag == "drift") c.check_tag = ResidualTag::drift;
        else if (*tag == "classic") c.check_tag = ResidualTag::classic;
        else if (*tag == "nonlinear") c.check_tag = ResidualTag::nonlinear;
        else throw ConfigError("unknown check.tag '" + *tag + "'");
    }
    if (const auto tol = get("check.tol"); tol && *tol != "auto") {
        c.check_tol = detail::parse_real("check.tol", *tol);
        if (!(*c.check_tol >= 0.0)) throw ConfigError("check.tol must be nonnegative");
    }
    if (const auto r = get("check.refine")) c.check_refine = detail::parse_bool("check.refine", *r);
    if (const auto d = get("output.dir")) c.output_dir = *d;

    if (const auto v = get("sweep.a")) {
        for (const auto& s : detail::split(*v, ",")) c.sweep_a.push_back(detail::parse_real("sweep.a", s));
    }
    if (const auto v = get("sweep.sup")) {
        for (const auto& s : detail::split(*v, ",")) c.sweep_sup.push_back(detail::parse_real("sweep.sup", s));
    }
    if (const auto v = get("sweep.seeds")) {
        for (const auto& s : detail::split(*v, ",")) {
            const long seed = detail::parse_int("sweep.seeds", s);
            if (seed < 0) throw ConfigError("sweep seeds must be nonnegative");
            c.sweep_seeds.push_back(static_cast<std::uint64_t>(seed));
        }
    }
    if (const auto r = get("sweep.refine")) c.sweep_refine = detail::parse_bool("sweep.refine", *r);
    if (const auto t = get("sweep.threads")) c.sweep_threads = static_cast<unsigned>(detail::parse_int("sweep.threads", *t));
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path + "'");
    return parse_config(in);
}

/// Sets axis 0 to n and scales the other axis by the same factor.
inline GeometrySpec override_resolution(GeometrySpec g, int n) {
    if (g.dimension() == 2) {
        const double ratio = static_cast<double>(g.resolution[1]) / g.resolution[0];
        g.resolution[1] = static_cast<int>(std::lround(n * ratio));
    }
    g.resolution[0] = n;
    return g;
}

struct Flags {
    std::string config;
    std::string out;
    bool dump_trajectory = false;
    int resolution_override = 0;
    bool corrupt_lambda = false;
};

namespace detail {

struct Setup {
    RunConfig config;
    std::shared_ptr<const DiscreteManifold> manifold;
    std::filesystem::path out_dir;
};

inline Setup prepare(const Flags& f) {
    Setup s;
    s.config = load_config(f.config);
    if (f.resolution_override > 0) s.config.geometry = override_resolution(s.config.geometry, f.resolution_override);
    s.manifold = std::make_shared<const DiscreteManifold>(build_geometry(s.config.geometry));
    s.out_dir = f.out.empty() ? std::filesystem::path(s.config.output_dir) : std::filesystem::path(f.out);
    return s;
}

inline Problem make_problem(const RunConfig& c, const std::shared_ptr<const DiscreteManifold>& m) {
    if (!c.initial) throw ConfigError("missing config key 'initial'");
    ScalarField u0 = FieldExpr::parse(*c.initial).evaluate(*m);
    if (c.kind == ProblemKind::drifting) {
        ScalarField phi = FieldExpr::parse(c.phi).evaluate(*m);
        return Problem::drifting(m, std::move(phi), std::move(u0));
    }
    return Problem::lognonlinear(m, c.a, std::move(u0));
}

inline Schedule make_schedule(const RunConfig& c, const Problem& p) {
    Schedule s = c.schedule;
    if (c.stride_auto) {
        const double dt = resolve_dt(p, s);
        const long steps = std::max(1L, static_cast<long>(std::ceil(s.t_end / dt - 1e-9)));
        s.stride = static_cast<int>(std::max(1L, (steps + 99) / 100));
    }
    return s;
}

/// Enforces the hypotheses of the selected estimate before any solve.
inline void require_check_preconditions(ResidualTag tag, const Problem& p) {
    switch (tag) {
    case ResidualTag::drift:
        if (p.kind != ProblemKind::drifting) throw PreconditionError("drift check needs problem.kind = drifting");
        require_normalized(p.initial);
        break;
    case ResidualTag::classic: {
        if (p.kind != ProblemKind::drifting) throw PreconditionError("classic check needs problem.kind = drifting");
        const double K = bakry_emery_bound(p.manifold(), p.phi);
        if (K > kClassicFlatTol) {
            throw PreconditionError("classic check requires K = 0, but the potential gives K = " + format_number(K));
        }
        break;
    }
    case ResidualTag::nonlinear:
        if (p.kind != ProblemKind::lognonlinear) {
            throw PreconditionError("nonlinear check needs problem.kind = lognonlinear");
        }
        if (p.a > 0.0) throw PreconditionError("nonlinear check requires a <= 0 (use the sweep to explore a > 0)");
        if (!(p.initial.max() < 1.0)) throw PreconditionError("nonlinear check requires sup u0 < 1");
        break;
    }
}

inline ResidualSeries residuals(ResidualTag tag, const Trajectory& traj) {
    switch (tag) {
    case ResidualTag::drift: return drift_residual(traj);
    case ResidualTag::classic: return classic_residual(traj);
    case ResidualTag::nonlinear: return nonlinear_residual(traj);
    }
    return {};
}

inline std::string summary_text(const std::vector<std::pair<std::string, std::string>>& kv) {
    std::string s;
    for (const auto& [k, v] : kv) s += k + "=" + v + "\n";
    return s;
}

} // namespace detail

inline int cmd_solve(const Flags& f, std::ostream& out) {
    auto s = detail::prepare(f);
    const Problem p = detail::make_problem(s.config, s.manifold);
    const Schedule sch = detail::make_schedule(s.config, p);
    const Trajectory traj = solve(p, sch);
    if (f.dump_trajectory) write_atomically(s.out_dir / "trajectory.csv", trajectory_csv(traj));
    out << "solved t_end=" << format_number(sch.t_end) << " snapshots=" << traj.snapshots.size() << "\n";
    return kOk;
}

inline int cmd_check(const Flags& f, std::ostream& out) {
    auto s = detail::prepare(f);
    if (!s.config.check_tag) throw ConfigError("missing config key 'check.tag'");
    const ResidualTag tag = *s.config.check_tag;
    const Problem p = detail::make_problem(s.config, s.manifold);
    detail::require_check_preconditions(tag, p);
    const double tol =
        s.config.check_tol ? *s.config.check_tol : auto_tolerance(tag, *s.manifold, !is_constant(p.phi));

    const Schedule sch = detail::make_schedule(s.config, p);
    const Trajectory traj = solve(p, sch);
    if (f.dump_trajectory) write_atomically(s.out_dir / "trajectory.csv", trajectory_csv(traj));
    const ResidualSeries series = detail::residuals(tag, traj);
    Verdict v = check_estimate(series, tol);

    GeometrySpec coarse_spec;
    if (s.config.check_refine && s.config.geometry.halved(coarse_spec)) {
        try {
            auto cm = std::make_shared<const DiscreteManifold>(build_geometry(coarse_spec));
            const Problem cp = detail::make_problem(s.config, cm);
            Schedule csch = sch;
            csch.stride = 1;
            const ResidualSeries coarse = detail::residuals(tag, solve(cp, csch));
            v.refinement = refinement_note(coarse, series);
        } catch (const SolverAbort&) {
            // companion run is advisory only
        }
    }

    write_atomically(s.out_dir / "residuals.csv", residual_csv(series));
    std::vector<std::pair<std::string, std::string>> kv{
        {"command", "check"},
        {"tag", std::string(to_string(tag))},
        {"holds", v.holds ? "true" : "false"},
        {"worst_t", format_number(v.worst.t)},
        {"worst_node", std::to_string(v.worst.node)},
        {"worst_residual", format_number(v.worst.residual)},
        {"tolerance", format_number(tol)},
        {"K", format_number(series.K)},
        {"geometry_hash", hash_hex(s.manifold->hash())},
        {"resolution", resolution_string(s.config.geometry)},
        {"scheme", std::string(to_string(traj.meta.scheme))},
        {"dt", format_number(traj.meta.dt)},
        {"log_floor_activated", series.floor_activated ? "true" : "false"},
    };
    if (v.refinement) {
        kv.emplace_back("refinement_coarse_worst", format_number(v.refinement->coarse_worst));
        kv.emplace_back("refinement_fine_worst", format_number(v.refinement->fine_worst));
        kv.emplace_back("refinement_ratio", v.refinement->ratio ? format_number(*v.refinement->ratio) : "");
    }
    const std::string summary = detail::summary_text(kv);
    write_atomically(s.out_dir / "verdict.txt", summary);
    out << summary;
    return v.holds ? kOk : kViolated;
}

inline int cmd_gap(const Flags& f, std::ostream& out) {
    auto s = detail::prepare(f);
    if (!s.manifold->has_boundary()) {
        throw PreconditionError("gap needs an interval or box2 geometry (got " +
                                std::string(to_string(s.config.geometry.kind)) + ")");
    }
    const GapProblem g = build_gap_problem(*s.manifold);
    const double lambda = f.corrupt_lambda ? g.lambda + 1.0 : g.lambda;
    const GapVerification ver = verify_gap(*s.manifold, lambda, g.u, g.phi, s.config.schedule.t_end);
    GapReport rep{g.lambda1, g.lambda2, g.lambda, g.min_phi_hess_eig, ver.max_pde_residual,
                  resolution_string(s.config.geometry)};
    write_atomically(s.out_dir / "gap.csv", gap_csv(rep));
    const std::string summary = detail::summary_text({
        {"command", "gap"},
        {"holds", ver.holds() ? "true" : "false"},
        {"gap", format_number(g.lambda)},
        {"lambda_used", format_number(lambda)},
        {"max_pde_residual", format_number(ver.max_pde_residual)},
        {"tolerance", format_number(ver.pde.tolerance)},
        {"neumann_derivative", format_number(ver.neumann_derivative)},
        {"neumann_tolerance", format_number(kGapNeumannTol)},
        {"min_phi_hess_eig", format_number(g.min_phi_hess_eig)},
        {"K", format_number(bakry_emery_bound(*s.manifold, g.phi))},
        {"geometry_hash", hash_hex(s.manifold->hash())},
        {"resolution", rep.resolution},
    });
    write_atomically(s.out_dir / "gap_summary.txt", summary);
    out << summary;
    return ver.holds() ? kOk : kViolated;
}

inline int cmd_sweep(const Flags& f, std::ostream& out) {
    auto s = detail::prepare(f);
    const RunConfig& c = s.config;
    if (c.sweep_a.empty() || c.sweep_sup.empty() || c.sweep_seeds.empty()) {
        throw ConfigError("sweep needs sweep.a, sweep.sup and sweep.seeds");
    }
    SweepSpec spec;
    spec.geometry = c.geometry;
    spec.a_values = c.sweep_a;
    spec.sup_values = c.sweep_sup;
    spec.seeds = c.sweep_seeds;
    spec.schedule = c.schedule;
    spec.tolerance = c.check_tol;
    spec.refine = c.sweep_refine;
    spec.threads = c.sweep_threads;
    const SweepReport rep = run_sweep(spec);
    write_atomically(s.out_dir / "sweep.csv", sweep_csv(rep));
    std::size_t proven = 0, proven_holds = 0, exploratory = 0;
    for (const auto& cell : rep.cells) {
        if (cell.proven_regime()) {
            ++proven;
            proven_holds += cell.verdict == CellVerdict::holds;
        } else {
            ++exploratory;
        }
    }
    const std::string summary = detail::summary_text({
        {"command", "sweep"},
        {"cells", std::to_string(rep.cells.size())},
        {"proven_cells", std::to_string(proven)},
        {"proven_holds", std::to_string(proven_holds)},
        {"exploratory_cells", std::to_string(exploratory)},
        {"tolerance", format_number(rep.tolerance)},
        {"K", format_number(0.0)},
        {"geometry_hash", hash_hex(rep.geometry_hash)},
        {"resolution", resolution_string(c.geometry)},
    });
    write_atomically(s.out_dir / "sweep_summary.txt", summary);
    out << summary;
    return rep.proven_regime_holds() ? kOk : kViolated;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hamilton-type gradient estimate laboratory"};
    app.require_subcommand(1);
    Flags flags;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", flags.config, "run configuration (key = value)")->required();
        sub->add_option("--out", flags.out, "output directory (overrides output.dir)");
        sub->add_flag("--dump-trajectory", flags.dump_trajectory, "write trajectory.csv");
        sub->add_option("--resolution-override", flags.resolution_override, "axis-0 resolution for refinement studies")
            ->check(CLI::Range(8, 1 << 20));
    };
    auto* solve_cmd = app.add_subcommand("solve", "integrate the configured equation");
    auto* check_cmd = app.add_subcommand("check", "solve and evaluate an estimate residual");
    auto* gap_cmd = app.add_subcommand("gap", "fundamental-gap drift construction");
    auto* sweep_cmd = app.add_subcommand("sweep", "parameter sweep for the log-nonlinear equation");
    for (auto* sub : {solve_cmd, check_cmd, gap_cmd, sweep_cmd}) add_common(sub);
    gap_cmd->add_flag("--corrupt-lambda", flags.corrupt_lambda, "debug: verify with lambda + 1");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }

    try {
        if (*solve_cmd) return cmd_solve(flags, out);
        if (*check_cmd) return cmd_check(flags, out);
        if (*gap_cmd) return cmd_gap(flags, out);
        return cmd_sweep(flags, out);
    } catch (const SolverAbort& e) {
        err << "solver abort: " << e.what() << "\n";
        return kAbort;
    } catch (const ConvergenceError& e) {
        err << "solver abort: " << e.what() << "\n";
        return kAbort;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    }
}

} // namespace hamgrad::cli
