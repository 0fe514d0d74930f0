// Command-line front end: run / ensemble / eig-audit / estimate / mesh-audit.
// Exit codes: 0 success, 1 config error, 2 numerical failure, 3 I/O failure.

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sch/config.hpp"
#include "sch/driver.hpp"
#include "sch/errors.hpp"
#include "sch/io.hpp"
#include "sch/quadrature.hpp"
#include "sch/rng.hpp"
#include "sch/spectral.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
    int paths = 0;
    std::string seed;
    int workers = 0;
};

void attach_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("-c,--config", f.config_path, "configuration file");
    cmd->add_option("-s,--set", f.overrides, "override as key=value (repeatable)");
    cmd->add_option("-o,--out", f.out_dir, "output directory");
    cmd->add_option("--seed", f.seed, "master seed");
    cmd->add_option("-p,--paths", f.paths, "number of sample paths");
    cmd->add_option("-w,--workers", f.workers, "concurrent path workers");
}

// Flags become trailing config lines, so one parser validates everything.
sch::RunConfig build_config(const CommonFlags& f) {
    std::string text;
    if (!f.config_path.empty()) text = sch::read_text_file(f.config_path);
    for (const std::string& kv : f.overrides) {
        text += '\n';
        text += kv;
    }
    if (!f.out_dir.empty()) text += "\nout_dir = " + f.out_dir;
    if (!f.seed.empty()) text += "\nseed = " + f.seed;
    if (f.paths > 0) text += "\npaths = " + std::to_string(f.paths);
    if (f.workers > 0) text += "\nworkers = " + std::to_string(f.workers);
    return sch::parse_config(text);
}

int cmd_run(const CommonFlags& flags) {
    sch::RunConfig cfg = build_config(flags);
    sch::PathResult path = sch::run_path(cfg, 0);
    sch::write_path_outputs(cfg.out_dir, cfg, path);
    if (!path.completed) {
        std::fprintf(stderr, "path aborted: %s\n", path.failure.c_str());
        return 2;
    }
    std::printf("steps %zu  closing(center) %s  closing(lambda) %s  r_tilde %s  r_hat %s%s\n",
                path.steps.size(),
                path.closing.center_fired ? sch::format_number(path.closing.center_time).c_str()
                                          : "none",
                sch::format_number(path.closing.lambda_time).c_str(),
                sch::format_number(path.r_tilde).c_str(),
                sch::format_number(path.nonlinear.r_hat).c_str(),
                path.nonlinear.certified ? " (certified)" : "");
    std::printf("outputs in %s\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_ensemble(const CommonFlags& flags) {
    sch::RunConfig cfg = build_config(flags);
    sch::EnsembleResult ens = sch::run_ensemble(cfg);
    sch::write_ensemble_outputs(cfg.out_dir, cfg, ens);
    std::printf("paths %d completed, %d failed\n", ens.completed, ens.failed);
    if (!ens.closing_times.empty())
        std::printf("closing mean %s  stddev %s  (n = %zu)\n",
                    sch::format_number(ens.closing_mean).c_str(),
                    sch::format_number(ens.closing_stddev).c_str(), ens.closing_times.size());
    std::printf("combined bound %s  (mean linear %s, mean nonlinear %s)\n",
                sch::format_number(ens.total.total).c_str(),
                sch::format_number(ens.mean_linear).c_str(),
                sch::format_number(ens.total.mean_nonlinear).c_str());
    std::printf("outputs in %s\n", cfg.out_dir.c_str());
    return ens.completed > 0 ? 0 : 2;
}

int cmd_eig_audit(int resolution, double eps) {
    std::printf("state,resolution,lambda,iterations,residual,stagnated\n");
    for (int res : {resolution, 2 * resolution}) {
        sch::Mesh mesh = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, res);
        sch::FemCache cache(mesh);
        struct Case {
            const char* name;
            sch::FeFunction u;
        };
        std::vector<Case> cases;
        sch::FeFunction ones;
        ones.generation = mesh.generation;
        ones.v = Eigen::VectorXd::Ones(mesh.num_vertices());
        cases.push_back({"constant_one", ones});
        sch::FeFunction zero;
        zero.generation = mesh.generation;
        zero.v = Eigen::VectorXd::Zero(mesh.num_vertices());
        cases.push_back({"constant_zero", zero});
        cases.push_back({"tanh_annulus", sch::initial_condition(mesh, 0.2, 0.55, eps)});
        for (const Case& c : cases) {
            sch::EigenResult r = sch::principal_eigenvalue(cache, c.u, eps);
            std::printf("%s,%d,%s,%d,%s,%d\n", c.name, res,
                        sch::format_number(r.lambda).c_str(), r.iterations,
                        sch::format_number(r.rayleigh_residual).c_str(), r.stagnated ? 1 : 0);
        }
    }
    return 0;
}

int cmd_estimate(const CommonFlags& flags, const std::string& snapshot_path) {
    sch::RunConfig cfg = build_config(flags);
    sch::SnapshotData snap = sch::read_snapshot_file(snapshot_path);
    sch::FemCache cache(snap.mesh);
    const sch::FeFunction& u = snap.field("u");

    Eigen::VectorXd eta3_sq = sch::space_indicator_3_elements(cache, u, cfg.eps);
    double eta3 = std::sqrt(eta3_sq.sum());
    double w_jump = 0.0;
    bool have_w = false;
    for (const auto& [name, f] : snap.fields)
        if (name == "w") {
            w_jump = std::sqrt(sch::edge_jump_indicator(snap.mesh, f).sum());
            have_w = true;
        }

    std::string global = "quantity,value\n";
    global += "eta_space3_u," + sch::format_number(eta3) + "\n";
    if (have_w) global += "w_jump_root," + sch::format_number(w_jump) + "\n";
    global += "t," + sch::format_number(snap.t) + "\n";
    global += "epsilon," + sch::format_number(cfg.eps) + "\n";

    std::string elems = "element,eta_space3_sq_u\n";
    for (Eigen::Index i = 0; i < eta3_sq.size(); ++i)
        elems += std::to_string(i) + "," + sch::format_number(eta3_sq[i]) + "\n";

    sch::ensure_directory(cfg.out_dir);
    sch::write_text_file(cfg.out_dir + "/estimate.csv", global);
    sch::write_text_file(cfg.out_dir + "/estimate_elements.csv", elems);
    std::printf("eta_space3_u %s on %d elements (t = %s)\n", sch::format_number(eta3).c_str(),
                snap.mesh.num_triangles(), sch::format_number(snap.t).c_str());
    return 0;
}

int cmd_mesh_audit(int resolution, int rounds, std::uint64_t seed) {
    sch::Mesh mesh = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, resolution);
    mesh.audit_conformity();
    sch::Rng rng(seed);
    for (int r = 0; r < rounds; ++r) {
        sch::MarkSet marks;
        for (int i = 0; i < mesh.num_triangles(); ++i)
            if (rng.uniform() < 0.3) marks.refine.push_back(i);
        mesh = sch::refine(mesh, marks);
        mesh.audit_conformity();
        sch::MarkSet back;
        for (int i = 0; i < mesh.num_triangles(); ++i)
            if (rng.uniform() < 0.3) back.coarsen.push_back(i);
        sch::CoarsenResult res = sch::coarsen(mesh, back);
        mesh = std::move(res.mesh);
        mesh.audit_conformity();
        double amin = 180.0;
        for (int i = 0; i < mesh.num_triangles(); ++i)
            amin = std::min(amin, mesh.min_angle(i));
        std::printf("round %d: %d vertices, %d triangles, min angle %s\n", r + 1,
                    mesh.num_vertices(), mesh.num_triangles(), sch::format_number(amin).c_str());
    }
    std::printf("conformity audits passed\n");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"adaptive finite elements for the stochastic Cahn-Hilliard equation"};
    app.require_subcommand(1);

    CommonFlags run_flags;
    CLI::App* run = app.add_subcommand("run", "simulate a single path");
    attach_common(run, run_flags);

    CommonFlags ens_flags;
    CLI::App* ensemble = app.add_subcommand("ensemble", "simulate a Monte-Carlo ensemble");
    attach_common(ensemble, ens_flags);

    int eig_resolution = 6;
    double eig_eps = 0.125;
    CLI::App* eig = app.add_subcommand("eig-audit", "principal eigenvalue self-audit");
    eig->add_option("--resolution", eig_resolution, "base mesh resolution");
    eig->add_option("--epsilon", eig_eps, "interface width");

    CommonFlags est_flags;
    std::string snapshot_path;
    CLI::App* estimate =
        app.add_subcommand("estimate", "recompute space indicators from a snapshot file");
    attach_common(estimate, est_flags);
    estimate->add_option("--snapshot", snapshot_path, "snapshot file")->required();

    int mesh_resolution = 8;
    int mesh_rounds = 4;
    std::uint64_t mesh_seed = 1;
    CLI::App* mesh_audit =
        app.add_subcommand("mesh-audit", "randomized refine/coarsen conformity audit");
    mesh_audit->add_option("--resolution", mesh_resolution, "base mesh resolution");
    mesh_audit->add_option("--rounds", mesh_rounds, "refine/coarsen rounds");
    mesh_audit->add_option("--seed", mesh_seed, "marking seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (run->parsed()) return cmd_run(run_flags);
        if (ensemble->parsed()) return cmd_ensemble(ens_flags);
        if (eig->parsed()) return cmd_eig_audit(eig_resolution, eig_eps);
        if (estimate->parsed()) return cmd_estimate(est_flags, snapshot_path);
        if (mesh_audit->parsed()) return cmd_mesh_audit(mesh_resolution, mesh_rounds, mesh_seed);
    } catch (const sch::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const sch::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const sch::NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
