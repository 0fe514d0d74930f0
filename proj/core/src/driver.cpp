#include "sch/driver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <thread>
#include <utility>

#include "sch/errors.hpp"
#include "sch/quadrature.hpp"
#include "sch/rng.hpp"
#include "sch/spectral.hpp"

namespace sch {

std::function<double(Vec2)> initial_profile(double r1, double r2, double eps) {
    double scale = std::sqrt(2.0) * eps;
    return [r1, r2, scale](Vec2 p) {
        double r = norm(p);
        return -std::tanh(std::max(r1 - r, r - r2) / scale);
    };
}

FeFunction initial_condition(const Mesh& mesh, double r1, double r2, double eps) {
    if (!(0.0 < r1 && r1 < r2)) throw ConfigError("initial condition needs 0 < r1 < r2");
    auto f = initial_profile(r1, r2, eps);
    FeFunction out;
    out.generation = mesh.generation;
    out.v.resize(mesh.num_vertices());
    for (int i = 0; i < mesh.num_vertices(); ++i) out.v[i] = f(mesh.vertices[i]);
    return out;
}

double evaluate_at(const Mesh& mesh, const FeFunction& f, Vec2 p) {
    if (f.generation != mesh.generation || f.v.size() != mesh.num_vertices())
        throw NumericalError("evaluate: field does not live on this mesh");
    int t = mesh.locate(p);
    if (t < 0) throw NumericalError("evaluate: point outside the mesh");
    auto b = mesh.barycentric(t, p);
    const auto& v = mesh.tri(t);
    return b[0] * f.v[v[0]] + b[1] * f.v[v[1]] + b[2] * f.v[v[2]];
}

double ginzburg_landau_energy(const FemCache& cache, const FeFunction& u, double eps) {
    const Mesh& mesh = cache.mesh();
    double grad = cache.h1_seminorm(u.v);
    const TriQuadRule& rule = tri_rule(4); // (u^2-1)^2 is quartic in the P1 coefficients
    double well = 0.0;
    for (int i = 0; i < mesh.num_triangles(); ++i) {
        const auto& v = mesh.tri(i);
        well += integrate(mesh, i, rule, [&](Vec2, const std::array<double, 3>& b) {
            double uu = b[0] * u.v[v[0]] + b[1] * u.v[v[1]] + b[2] * u.v[v[2]];
            double q = uu * uu - 1.0;
            return 0.25 * q * q;
        });
    }
    return 0.5 * eps * grad * grad + well / eps;
}

ClosingDetection detect_closing(const std::vector<double>& t, const std::vector<double>& u_center,
                                const std::vector<double>& lambda) {
    if (t.size() != u_center.size() || t.size() != lambda.size())
        throw NumericalError("closing detection: traces have different lengths");
    ClosingDetection out;
    if (t.empty()) return out;

    if (u_center.front() >= 0.0) {
        out.center_fired = true;
        out.center_time = t.front();
    } else {
        for (size_t i = 1; i < t.size(); ++i) {
            if (u_center[i] >= 0.0) {
                // linear interpolation of the zero crossing
                double a = u_center[i - 1], b = u_center[i];
                double w = (b > a) ? (0.0 - a) / (b - a) : 1.0;
                out.center_fired = true;
                out.center_time = t[i - 1] + w * (t[i] - t[i - 1]);
                break;
            }
        }
    }

    size_t peak = 0;
    for (size_t i = 1; i < lambda.size(); ++i)
        if (lambda[i] > lambda[peak]) peak = i;
    out.lambda_fired = true;
    out.lambda_time = t[peak];
    out.lambda_peak = lambda[peak];

    if (out.center_fired) out.gap = std::abs(out.center_time - out.lambda_time);
    return out;
}

namespace {

double square(double x) { return x * x; }

// H^-1 seminorm squared with the (roundoff or quadrature scale) mass-mean
// removed; the norm is only defined on the zero-mean part.
double hm1_sq(const FemCache& cache, Eigen::VectorXd v) {
    v.array() -= cache.integral(v) / cache.area();
    return square(cache.hminus1_norm(v));
}

void shrink_indicators(StepIndicators& si) {
    for (SpaceIndicators* s : {&si.space, &si.space_hat}) {
        s->eta1_volume_sq.resize(0);
        s->eta1_jump_sq.resize(0);
        s->eta2_sq.resize(0);
        s->eta3_sq.resize(0);
    }
}

// Two-level estimate of ||P_h u0 - u0||_{H^-1}^2: compare the prolongated
// coarse projection with the projection on one uniform refinement.
double initial_projection_defect_sq(const Mesh& mesh, const FemCache& cache,
                                    const std::function<double(Vec2)>& profile) {
    MarkSet all;
    all.refine.resize(mesh.num_triangles());
    std::iota(all.refine.begin(), all.refine.end(), 0);
    Mesh fine = refine(mesh, all);
    FemCache fine_cache(fine);
    Eigen::VectorXd lifted = prolongate(fine, l2_project(cache, profile).v);
    Eigen::VectorXd d = l2_project(fine_cache, profile).v - lifted;
    return hm1_sq(fine_cache, std::move(d));
}

// The dedicated coarse mesh for the linear branch when tilde_resolution > 0.
struct LinearSystem {
    Mesh mesh;
    std::optional<FemCache> cache;
    TimeState state;
    SaddleCache saddle;
};

void run_path_impl(const RunConfig& cfg, int path_index, PathResult& out) {
    const double eps = cfg.eps;
    const double gamma = cfg.gamma;
    const double t_final = cfg.t_final;

    NoiseModel model = make_cosine_noise(cfg.noise_lmax, cfg.sigma, cfg.gamma);
    if (cfg.noise_truncation >= 0)
        model.truncation_r = std::min(cfg.noise_truncation, static_cast<int>(model.modes.size()));
    auto profile = initial_profile(cfg.r1, cfg.r2, eps);

    Mesh mesh = build_initial_mesh(-1.0, -1.0, 1.0, 1.0, cfg.resolution);
    std::optional<FemCache> cache;
    cache.emplace(mesh);
    TimeState state = initial_state(*cache, profile, model, eps);
    SaddleCache saddle;

    const bool dual = cfg.tilde_resolution > 0;
    std::optional<LinearSystem> lin;
    if (dual) {
        lin.emplace();
        lin->mesh = build_initial_mesh(-1.0, -1.0, 1.0, 1.0, cfg.tilde_resolution);
        lin->cache.emplace(lin->mesh);
        lin->state = initial_state(*lin->cache, profile, model, eps);
    }

    out.initial_defect_hm1_sq = initial_projection_defect_sq(mesh, *cache, profile);
    out.hoelder_integral = hoelder_noise_integral(model, t_final, cfg.estimators.hoelder_a);

    Rng rng = Rng(cfg.seed).derive(static_cast<std::uint64_t>(path_index));
    NoiseIndicators noise_ind(model, eps);

    size_t next_snap = 0;
    auto take_snapshots_up_to = [&](double now) {
        while (next_snap < cfg.snapshot_times.size() &&
               cfg.snapshot_times[next_snap] <= now + 1e-12 * t_final) {
            Snapshot s;
            s.requested_t = cfg.snapshot_times[next_snap];
            s.t = now;
            s.mesh = mesh;
            s.u = state.u;
            s.w = state.w;
            out.snapshots.push_back(std::move(s));
            ++next_snap;
        }
    };
    take_snapshots_up_to(0.0);

    std::int64_t defects_gen = -1;
    ProjectionDefects defects;

    FeFunction eig_vec;
    bool have_eig = false;

    double tau_next = cfg.tau_init;
    const size_t max_steps = 2'000'000; // aborts runaway configurations before memory does

    while (state.t < t_final * (1.0 - 1e-12)) {
        double tau = std::min(tau_next, t_final - state.t);
        TimeState begin = state;
        TimeState lbegin;
        if (dual) lbegin = lin->state;

        int rejections = 0;
        NewtonReport report;
        Eigen::VectorXd increments;
        StepNoise noise;

        // Post-coupled completion of one level on the coupled mesh.
        auto complete = [&](const FemCache& c, const StepNoise& n) {
            if (!dual) {
                advance_noise(state, c, model, increments, n, eps);
                step_linear_spde(state, c, eps, gamma, n, tau, saddle);
            }
            step_nonlinear_rpde(state, c, eps, tau, state.u, saddle);
            if (!dual) step_transformed(state, c, eps, gamma, state.g_h, tau, saddle);
            finish_step(state, tau);
        };

        // A rejected step halves tau and draws fresh increments for the new
        // interval; nothing of the rejected attempt is kept.
        while (true) {
            increments = sample_increments(model, rng, tau);
            noise = make_step_noise(model, increments, *cache, begin.t);
            state = begin;
            report = step_coupled(state, *cache, eps, gamma, noise, tau, cfg.newton);
            if (report.converged) break;
            ++rejections;
            if (tau <= cfg.stepper.tau_min * (1.0 + 1e-12))
                throw NumericalError("Newton failed at tau_min near t = " + std::to_string(begin.t));
            tau = std::max(0.5 * tau, cfg.stepper.tau_min);
        }
        complete(*cache, noise);

        // Re-solve the level from the transferred previous state with the
        // same increments; returns the marking indicator on the new mesh.
        auto redo_on = [&](const FemCache& c) {
            StepNoise n = make_step_noise(model, increments, c, begin.t);
            state = begin;
            report = step_coupled(state, c, eps, gamma, n, tau, cfg.newton);
            if (!report.converged)
                throw NumericalError("Newton failed on the adapted mesh near t = " +
                                     std::to_string(begin.t));
            complete(c, n);
            return space_indicator_3_elements(c, state.u, eps);
        };

        AdaptOutcome aout;
        if (cfg.adapt_enabled) {
            AdaptCallbacks cb;
            cb.after_refine = [&](const Mesh& m) {
                begin = prolong_state(begin, m);
                cache.emplace(m);
                refresh_g(begin, *cache, eps);
                return redo_on(*cache);
            };
            cb.after_coarsen = [&](const Mesh& m, const std::vector<int>& kept) {
                begin = restrict_state(begin, m, kept);
                cache.emplace(m);
                refresh_g(begin, *cache, eps);
                return redo_on(*cache);
            };
            aout = adapt_step(mesh, space_indicator_3_elements(*cache, state.u, eps), cfg.adapt, cb);
        } else {
            double e3 = std::sqrt(space_indicator_3_elements(*cache, state.u, eps).sum());
            aout.eta_initial = aout.eta_final = e3;
            aout.tolerance_met = e3 <= cfg.adapt.tol;
            aout.dof_initial = aout.dof_final = mesh.num_vertices();
        }

        // Advance the dedicated linear branch once per accepted level; it
        // never participates in rejections or adaptation.
        if (dual) {
            const FemCache& c = *lin->cache;
            StepNoise n = make_step_noise(model, increments, c, lbegin.t);
            advance_noise(lin->state, c, model, increments, n, eps);
            step_linear_spde(lin->state, c, eps, gamma, n, tau, lin->saddle);
            step_transformed(lin->state, c, eps, gamma, lin->state.g_h, tau, lin->saddle);
            finish_step(lin->state, tau);
        }

        const FemCache& c = *cache;
        const FemCache& lc = dual ? *lin->cache : c;
        const TimeState& lprev = dual ? lbegin : begin;
        const TimeState& lcur = dual ? lin->state : state;

        StepRecord rec;
        rec.t = state.t;
        rec.tau = tau;
        rec.rejections = rejections;
        rec.dof = mesh.num_vertices();
        rec.elements = mesh.num_triangles();
        rec.newton_iterations = report.iterations;
        rec.newton_residual = report.final_residual;
        rec.adapt = aout;

        // Noise indicators accumulate history; advance exactly once per
        // accepted level, with the defects of the mesh the noise lives on.
        {
            const Mesh& nm = dual ? lin->mesh : mesh;
            if (defects_gen != nm.generation) {
                defects = projection_defects(nm, lc, model);
                defects_gen = nm.generation;
            }
            rec.indicators.noise = noise_ind.advance(NoiseStep{begin.t, tau}, defects);
        }

        auto lap = g_laplacian_eval(model, lcur.mode_acc, eps);
        const double eg = std::pow(eps, gamma);
        std::function<double(Vec2)> forcing = [lap, eg](Vec2 p) { return eg * lap(p); };

        rec.indicators.t = state.t;
        rec.indicators.tau = tau;
        rec.indicators.space = space_indicators(lc, lprev.y, lcur.y, lcur.y_w, tau, eps, forcing);
        rec.indicators.time = time_indicators(lc, lprev.y, lcur.y, lprev.y_w, lcur.y_w, eps);
        rec.indicators.space_hat =
            space_indicators(c, begin.u_hat, state.u_hat, state.w_hat, tau, eps);
        rec.indicators.time_hat = time_indicators_nonlinear(
            c, begin.u_hat, state.u_hat, begin.w_hat, state.w_hat, begin.u, state.u, eps);
        rec.indicators.mu =
            mu_bounds(rec.indicators.space, rec.indicators.time, cfg.estimators.clement_constant);
        rec.indicators.mu_hat = mu_bounds(rec.indicators.space_hat, rec.indicators.time_hat,
                                          cfg.estimators.clement_constant);

        rec.du_tilde_hm1_sq = hm1_sq(lc, lcur.u_tilde.v - lprev.u_tilde.v);
        rec.dy_hm1_sq = hm1_sq(lc, lcur.y.v - lprev.y.v);
        rec.du_tilde_grad_sq = square(lc.h1_seminorm(lcur.u_tilde.v - lprev.u_tilde.v));
        rec.dy_grad_sq = square(lc.h1_seminorm(lcur.y.v - lprev.y.v));

        EigenOptions eopt = cfg.eig;
        eopt.warm_start =
            (have_eig && eig_vec.generation == mesh.generation) ? &eig_vec : nullptr;
        EigenResult er = principal_eigenvalue(c, state.u, eps, eopt);
        eig_vec = er.eigvec;
        have_eig = true;
        rec.indicators.lambda_ch = er.lambda;
        rec.eig_iterations = er.iterations;
        rec.eig_residual = er.rayleigh_residual;

        StepAudits a_main = audit_state(state, c, eps, gamma);
        if (dual) {
            StepAudits a_lin = audit_state(lin->state, *lin->cache, eps, gamma);
            rec.audits.mass_drift = a_main.mass_drift;
            // u and u_tilde live on different meshes; the splitting defect is
            // not a nodal quantity here.
            rec.audits.splitting_error = std::numeric_limits<double>::quiet_NaN();
            rec.audits.identity_u = a_lin.identity_u;
            rec.audits.identity_w = a_lin.identity_w;
        } else {
            rec.audits = a_main;
        }

        rec.mass = c.integral(state.u.v);
        rec.energy = ginzburg_landau_energy(c, state.u, eps);
        rec.u_center = evaluate_at(mesh, state.u, Vec2{0.0, 0.0});
        rec.u_min = state.u.v.minCoeff();
        rec.u_max = state.u.v.maxCoeff();

        shrink_indicators(rec.indicators);
        out.steps.push_back(std::move(rec));
        take_snapshots_up_to(state.t);

        tau_next = adapt_timestep(report, tau, cfg.stepper);
        if (out.steps.size() >= max_steps)
            throw NumericalError("step limit exceeded; the controller cannot reach t_final");
    }

    std::vector<double> ts, ucent, lams;
    ts.reserve(out.steps.size());
    for (const StepRecord& r : out.steps) {
        ts.push_back(r.t);
        ucent.push_back(r.u_center);
        lams.push_back(r.indicators.lambda_ch);
    }
    out.closing = detect_closing(ts, ucent, lams);

    LinearBoundInputs li;
    NonlinearBoundInputs ni;
    for (const StepRecord& r : out.steps) {
        li.tau.push_back(r.tau);
        li.mu.push_back(r.indicators.mu);
        li.eta_noise1.push_back(r.indicators.noise.eta1);
        li.eta_noise2.push_back(r.indicators.noise.eta2);
        li.eta_noise3.push_back(r.indicators.noise.eta3);
        li.du_tilde_hm1_sq.push_back(r.du_tilde_hm1_sq);
        li.dy_hm1_sq.push_back(r.dy_hm1_sq);
        li.du_tilde_grad_sq.push_back(r.du_tilde_grad_sq);
        li.dy_grad_sq.push_back(r.dy_grad_sq);
        ni.tau.push_back(r.tau);
        ni.mu_hat.push_back(r.indicators.mu_hat);
        ni.lambda_ch.push_back(r.indicators.lambda_ch);
    }
    li.hoelder_integral = out.hoelder_integral;
    ni.initial_error_hm1_sq = out.initial_defect_hm1_sq;

    out.r_tilde = linear_bound(li, cfg.estimators, t_final, eps, gamma);
    out.nonlinear = nonlinear_bound(ni, cfg.estimators, eps, t_final);
}

} // namespace

PathResult run_path(const RunConfig& cfg_in, int path_index) {
    RunConfig cfg = cfg_in;
    cfg.resolve();
    cfg.validate(); // config trouble propagates; numerical trouble is recorded
    PathResult out;
    out.path_index = path_index;
    try {
        run_path_impl(cfg, path_index, out);
        out.completed = true;
    } catch (const std::exception& e) {
        out.completed = false;
        out.failure = e.what();
    }
    return out;
}

EnsembleResult run_ensemble(const RunConfig& cfg_in) {
    RunConfig cfg = cfg_in;
    cfg.resolve();
    cfg.validate();

    EnsembleResult out;
    out.paths.resize(cfg.paths);

    int workers = std::min(cfg.workers, cfg.paths);
    if (workers <= 1) {
        for (int i = 0; i < cfg.paths; ++i) out.paths[i] = run_path(cfg, i);
    } else {
        std::atomic<int> next{0};
        auto work = [&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= cfg.paths) return;
                out.paths[i] = run_path(cfg, i);
            }
        };
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& th : pool) th.join();
    }

    // Serial reduction in path order: results are independent of scheduling.
    std::vector<double> r_hats;
    std::vector<bool> certified;
    for (const PathResult& p : out.paths) {
        if (!p.completed) {
            ++out.failed;
            continue;
        }
        ++out.completed;
        out.mean_linear += p.r_tilde;
        r_hats.push_back(p.nonlinear.r_hat);
        certified.push_back(p.nonlinear.certified);
        if (p.closing.center_fired) out.closing_times.push_back(p.closing.center_time);
    }
    if (out.completed > 0) out.mean_linear /= out.completed;

    size_t n = out.closing_times.size();
    if (n > 0) {
        out.closing_mean =
            std::accumulate(out.closing_times.begin(), out.closing_times.end(), 0.0) /
            static_cast<double>(n);
        if (n > 1) {
            double ss = 0.0;
            for (double ct : out.closing_times) ss += square(ct - out.closing_mean);
            out.closing_stddev = std::sqrt(ss / static_cast<double>(n - 1));
        }
    }

    TotalBoundInputs ti;
    ti.mean_linear = out.mean_linear;
    ti.r_hat = std::move(r_hats);
    ti.certified = std::move(certified);
    out.total = total_bound(ti, cfg.estimators);
    return out;
}

} // namespace sch
