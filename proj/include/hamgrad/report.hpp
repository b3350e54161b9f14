#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>

#include "hamgrad/estimates.hpp"
#include "hamgrad/format.hpp"
#include "hamgrad/explore.hpp"
#include "hamgrad/gap.hpp"
#include "hamgrad/solver.hpp"

namespace hamgrad {

/// Writes `content` to `path` through a temporary file and a rename.
inline void write_atomically(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
        out << content;
        if (!out) throw Error("write to '" + tmp.string() + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

/// `t,node_index,x[,y],u`, one row per node per snapshot.
inline std::string trajectory_csv(const Trajectory& traj) {
    const DiscreteManifold& m = traj.manifold();
    std::ostringstream os;
    os << (m.dimension() == 2 ? "t,node_index,x,y,u\n" : "t,node_index,x,u\n");
    for (const auto& snap : traj.snapshots) {
        const std::string t = format_number(snap.t);
        for (int i = 0; i < m.size(); ++i) {
            const auto c = m.coord(i);
            os << t << ',' << i << ',' << format_number(c[0]);
            if (m.dimension() == 2) os << ',' << format_number(c[1]);
            os << ',' << format_number(snap.u[i]) << '\n';
        }
    }
    return os.str();
}

/// `tag,t,min_residual,argmin_node,sup_u,max_grad_f_sq,K`, one row per snapshot.
inline std::string residual_csv(const ResidualSeries& s) {
    std::ostringstream os;
    os << "tag,t,min_residual,argmin_node,sup_u,max_grad_f_sq,K\n";
    const std::string K = format_number(s.K);
    for (const auto& r : s.records) {
        os << to_string(s.tag) << ',' << format_number(r.t) << ',' << format_number(r.min_residual) << ','
           << r.argmin_node << ',' << format_number(r.sup_u) << ',' << format_number(r.max_grad_f_sq) << ',' << K
           << '\n';
    }
    return os.str();
}

struct GapReport {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double gap = 0.0;
    double min_phi_hess_eig = 0.0;
    double max_pde_residual = 0.0;
    std::string resolution;
};

/// `lambda1,lambda2,gap,min_phi_hess_eig,max_pde_residual,resolution`.
inline std::string gap_csv(const GapReport& g) {
    std::ostringstream os;
    os << "lambda1,lambda2,gap,min_phi_hess_eig,max_pde_residual,resolution\n"
       << format_number(g.lambda1) << ',' << format_number(g.lambda2) << ',' << format_number(g.gap) << ','
       << format_number(g.min_phi_hess_eig) << ',' << format_number(g.max_pde_residual) << ',' << g.resolution
       << '\n';
    return os.str();
}

/// `a,sup_u0,seed,verdict,worst_residual,first_violation_t,refinement_class`.
inline std::string sweep_csv(const SweepReport& r) {
    std::ostringstream os;
    os << "a,sup_u0,seed,verdict,worst_residual,first_violation_t,refinement_class\n";
    for (const auto& c : r.cells) {
        os << format_number(c.a) << ',' << format_number(c.sup_u0) << ',' << c.seed << ',' << to_string(c.verdict)
           << ',' << format_optional(c.worst_residual) << ',' << format_optional(c.first_violation_t) << ','
           << to_string(c.refinement) << '\n';
    }
    return os.str();
}

inline std::string resolution_string(const GeometrySpec& g) {
    if (g.dimension() == 1) return std::to_string(g.resolution[0]);
    return std::to_string(g.resolution[0]) + "x" + std::to_string(g.resolution[1]);
}

} // namespace hamgrad
