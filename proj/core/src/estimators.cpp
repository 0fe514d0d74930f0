#include "sch/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <string>

#include "sch/errors.hpp"
#include "sch/model.hpp"
#include "sch/quadrature.hpp"

namespace sch {
namespace {

void check_generation(const FemCache& cache, std::initializer_list<const FeFunction*> fields) {
    const Mesh& mesh = cache.mesh();
    for (const FeFunction* f : fields)
        if (f->generation != mesh.generation || f->size() != mesh.num_vertices())
            throw NumericalError("indicator fields on wrong mesh generation");
}

// Split per-edge squared contributions evenly between the incident elements,
// so the element sums reproduce the edge sum exactly.
Eigen::VectorXd halve_onto_elements(const Mesh& mesh, const Eigen::VectorXd& per_edge) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh.num_triangles());
    for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
        const Mesh::Edge& edge = mesh.edges[e];
        if (edge.boundary()) continue;
        double half = 0.5 * per_edge[static_cast<Eigen::Index>(e)];
        out[edge.t0] += half;
        out[edge.t1] += half;
    }
    return out;
}

double positive_part(double x) { return x > 0.0 ? x : 0.0; }

} // namespace

void EstimatorConfig::validate() const {
    if (!(delta > 0.0 && delta < 0.5)) throw ConfigError("estimator delta must lie in (0, 1/2)");
    if (dimension_a != 1.0 && dimension_a != 0.8)
        throw ConfigError("estimator dimension exponent must be 1 (2d) or 4/5 (3d)");
    auto positive = [](double v, const char* what) {
        if (!(v > 0.0)) throw ConfigError(std::string("estimator constant must be positive: ") + what);
    };
    positive(clement_constant, "clement_constant");
    positive(interp_constant, "interp_constant");
    positive(c_infty, "c_infty");
    positive(c_h_infty, "c_h_infty");
    positive(eps_tilde, "eps_tilde");
    positive(generic_constant, "generic_constant");
    positive(c_p, "c_p");
    positive(c0_moment, "c0_moment");
    positive(c0_hat_moment, "c0_hat_moment");
    if (!(hoelder_p > 2.0) || !(hoelder_a > 2.0))
        throw ConfigError("path regularity exponents p, a must exceed 2");
    if (!(hoelder_a >= hoelder_p)) throw ConfigError("path regularity needs a >= p");
    if (!(hoelder_q > 1.0 / hoelder_p)) throw ConfigError("path regularity needs q > 1/p");
    if (!(1.0 / hoelder_p + hoelder_q < 0.5 - 1.0 / hoelder_a))
        throw ConfigError("path regularity needs 1/p + q < 1/2 - 1/a");
}

SpaceIndicators space_indicators(const FemCache& cache, const FeFunction& prev,
                                 const FeFunction& cur, const FeFunction& cur_w, double tau,
                                 double eps, const std::function<double(Vec2)>& forcing) {
    check_generation(cache, {&prev, &cur, &cur_w});
    if (!(tau > 0.0)) throw ConfigError("space indicators need tau > 0");
    if (!(eps > 0.0)) throw ConfigError("space indicators need eps > 0");
    const Mesh& mesh = cache.mesh();
    int nt = mesh.num_triangles();

    SpaceIndicators out;
    out.eta1_volume_sq.resize(nt);
    out.eta2_sq.resize(nt);

    // The volume residual is P1 in the fields plus the smooth forcing; the
    // degree-6 rule is exact without forcing and resolves the cosine sums of
    // the noise term at the mesh sizes in use.
    const TriQuadRule& rule = tri_rule(forcing ? 6 : 2);
    for (int i = 0; i < nt; ++i) {
        const auto& t = mesh.tri(i);
        double d0 = (cur.v[t[0]] - prev.v[t[0]]) / tau;
        double d1 = (cur.v[t[1]] - prev.v[t[1]]) / tau;
        double d2 = (cur.v[t[2]] - prev.v[t[2]]) / tau;
        double w0 = cur_w.v[t[0]], w1 = cur_w.v[t[1]], w2 = cur_w.v[t[2]];
        double vol = integrate(mesh, i, rule, [&](Vec2 p, const std::array<double, 3>& b) {
            double r = b[0] * d0 + b[1] * d1 + b[2] * d2;
            if (forcing) r += forcing(p);
            return r * r;
        });
        double wsq = integrate(mesh, i, rule, [&](Vec2, const std::array<double, 3>& b) {
            double w = b[0] * w0 + b[1] * w1 + b[2] * w2;
            return w * w;
        });
        double h2 = cache.diameters()[i] * cache.diameters()[i];
        out.eta1_volume_sq[i] = h2 * vol;
        out.eta2_sq[i] = h2 * wsq;
    }

    out.eta1_jump_sq = halve_onto_elements(mesh, edge_jump_indicator(mesh, cur_w));
    out.eta3_sq = eps * halve_onto_elements(mesh, edge_jump_indicator(mesh, cur));

    out.eta1 = std::sqrt(out.eta1_volume_sq.sum()) + std::sqrt(out.eta1_jump_sq.sum());
    out.eta2 = std::sqrt(out.eta2_sq.sum());
    out.eta3 = std::sqrt(out.eta3_sq.sum());
    return out;
}

Eigen::VectorXd space_indicator_3_elements(const FemCache& cache, const FeFunction& u,
                                           double eps) {
    check_generation(cache, {&u});
    if (!(eps > 0.0)) throw ConfigError("space indicators need eps > 0");
    const Mesh& mesh = cache.mesh();
    return eps * halve_onto_elements(mesh, edge_jump_indicator(mesh, u));
}

TimeIndicators time_indicators(const FemCache& cache, const FeFunction& prev,
                               const FeFunction& cur, const FeFunction& prev_w,
                               const FeFunction& cur_w, double eps) {
    check_generation(cache, {&prev, &cur, &prev_w, &cur_w});
    if (!(eps > 0.0)) throw ConfigError("time indicators need eps > 0");
    Eigen::VectorXd dv = prev.v - cur.v;
    Eigen::VectorXd dw = prev_w.v - cur_w.v;
    TimeIndicators out;
    out.eta1 = cache.h1_seminorm(dw);
    out.eta2 = cache.l2_norm(dw);
    out.eta3 = eps * cache.h1_seminorm(dv);
    return out;
}

TimeIndicators time_indicators_nonlinear(const FemCache& cache, const FeFunction& prev,
                                         const FeFunction& cur, const FeFunction& prev_w,
                                         const FeFunction& cur_w, const FeFunction& u_prev,
                                         const FeFunction& u_cur, double eps) {
    TimeIndicators out = time_indicators(cache, prev, cur, prev_w, cur_w, eps);
    check_generation(cache, {&u_prev, &u_cur});
    const Mesh& mesh = cache.mesh();
    const TriQuadRule& rule = tri_rule(6); // (f(u^n) - f(u^{n-1}))^2 is degree 6
    double acc = 0.0;
    for (int i = 0; i < mesh.num_triangles(); ++i) {
        const auto& t = mesh.tri(i);
        acc += integrate(mesh, i, rule, [&](Vec2, const std::array<double, 3>& b) {
            double a = b[0] * u_cur.v[t[0]] + b[1] * u_cur.v[t[1]] + b[2] * u_cur.v[t[2]];
            double p = b[0] * u_prev.v[t[0]] + b[1] * u_prev.v[t[1]] + b[2] * u_prev.v[t[2]];
            double d = double_well(a) - double_well(p);
            return d * d;
        });
    }
    out.eta2 += std::sqrt(acc) / eps;
    return out;
}

MuValues mu_bounds(const SpaceIndicators& space, const TimeIndicators& time,
                   double clement_constant) {
    MuValues mu;
    mu.mu_m1 = clement_constant * space.eta1 + time.eta1;
    mu.mu_0 = time.eta2;
    mu.mu_1 = time.eta3 + space.eta2 + clement_constant * space.eta3;
    return mu;
}

double linear_bound(const LinearBoundInputs& in, const EstimatorConfig& cfg, double t_final,
                    double eps, double gamma) {
    std::size_t n = in.tau.size();
    if (n == 0) throw ConfigError("linear bound needs at least one step");
    if (in.mu.size() != n || in.eta_noise1.size() != n || in.eta_noise2.size() != n ||
        in.eta_noise3.size() != n || in.du_tilde_hm1_sq.size() != n || in.dy_hm1_sq.size() != n ||
        in.du_tilde_grad_sq.size() != n || in.dy_grad_sq.size() != n)
        throw ConfigError("linear bound inputs have mismatched step counts");
    if (!(eps > 0.0) || !(t_final > 0.0)) throw ConfigError("linear bound needs eps, T > 0");

    double noise1 = 0.0, noise2 = 0.0, noise3 = 0.0;
    double mu_int = 0.0, grad_diff = 0.0;
    double max_du = 0.0, max_dy = 0.0, tau_max = 0.0;
    double w0 = std::sqrt(t_final / eps);
    for (std::size_t i = 0; i < n; ++i) {
        noise1 += in.eta_noise1[i];
        noise2 += in.eta_noise2[i];
        noise3 = std::max(noise3, in.eta_noise3[i]);
        const MuValues& mu = in.mu[i];
        mu_int += in.tau[i] * (t_final * mu.mu_m1 * mu.mu_m1 + w0 * mu.mu_0 * mu.mu_0 +
                               mu.mu_1 * mu.mu_1 / eps);
        grad_diff += in.tau[i] * (in.du_tilde_grad_sq[i] + in.dy_grad_sq[i]);
        max_du = std::max(max_du, in.du_tilde_hm1_sq[i]);
        max_dy = std::max(max_dy, in.dy_hm1_sq[i]);
        tau_max = std::max(tau_max, in.tau[i]);
    }
    double hoelder = cfg.c_p * std::pow(tau_max, 2.0 * cfg.hoelder_lambda()) *
                     std::pow(in.hoelder_integral, 2.0 / cfg.hoelder_a);
    return cfg.generic_constant *
           (std::pow(eps, 2.0 * gamma + 1.0) * noise1 + std::pow(eps, 2.0 * gamma) * noise2 +
            noise3 + mu_int + max_du + max_dy + eps * grad_diff + hoelder);
}

GronwallOutcome gronwall_check(double a_value, double b_value, double beta,
                               const std::vector<double>& alpha, const std::vector<double>& tau,
                               double t_final) {
    if (!(a_value >= 0.0) || !(b_value >= 0.0)) throw ConfigError("gronwall needs A, B >= 0");
    if (!(beta > 0.0)) throw ConfigError("gronwall needs beta > 0");
    if (alpha.size() != tau.size()) throw ConfigError("gronwall alpha/tau length mismatch");
    double integral = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) integral += alpha[i] * tau[i];

    GronwallOutcome out;
    out.growth = std::exp(integral);
    out.lhs = 8.0 * a_value * out.growth;
    out.bound = out.lhs;
    double base = 8.0 * b_value * (1.0 + t_final) * out.growth;
    out.rhs = base > 0.0 ? std::pow(base, -1.0 / beta) : std::numeric_limits<double>::infinity();
    out.condition_holds = out.lhs <= out.rhs;
    return out;
}

NonlinearBoundResult nonlinear_bound(const NonlinearBoundInputs& in, const EstimatorConfig& cfg,
                                     double eps, double t_final) {
    std::size_t n = in.tau.size();
    if (in.mu_hat.size() != n || in.lambda_ch.size() != n)
        throw ConfigError("nonlinear bound inputs have mismatched step counts");
    if (!(eps > 0.0)) throw ConfigError("nonlinear bound needs eps > 0");
    if (!(in.initial_error_hm1_sq >= 0.0))
        throw ConfigError("nonlinear bound needs a nonnegative initial error");

    double one3 = 1.0 - eps * eps * eps;
    NonlinearBoundResult out;
    double lambda_pos_int = 0.0, prefactor_int = 0.0;
    std::vector<double> alpha(n);
    for (std::size_t i = 0; i < n; ++i) {
        const MuValues& mu = in.mu_hat[i];
        out.mu_integral +=
            in.tau[i] * (mu.mu_m1 * mu.mu_m1 + mu.mu_0 * mu.mu_0 / (eps * eps) +
                         mu.mu_1 * mu.mu_1 / (eps * eps * eps * eps));
        lambda_pos_int += in.tau[i] * positive_part(in.lambda_ch[i]);
        prefactor_int += in.tau[i] * positive_part(26.0 + 4.0 * one3 * in.lambda_ch[i]);
        alpha[i] = positive_part(9.0 + 4.0 * one3 * in.lambda_ch[i]);
    }
    out.prefactor = std::exp(prefactor_int);

    double c = cfg.generic_constant;
    double interp = cfg.interp_constant * cfg.c_h_infty *
                    std::pow(cfg.c_infty, 1.0 - cfg.dimension_a);
    double root = std::sqrt(cfg.eps_tilde);
    double stable = one3 + 8.0 * one3 * one3 / (eps * eps * eps);
    double coupling = c * interp * std::pow(cfg.eps_tilde, 0.5 + cfg.dimension_a) / (eps * eps);
    double leak = c * std::pow(cfg.eps_tilde, 0.5 - cfg.delta) / (eps * eps * eps * eps);

    // Admissibility condition, with its own coefficients on the threshold
    // terms, checked through the generalized Gronwall certificate.
    double a_cond = out.mu_integral + in.initial_error_hm1_sq +
                    root * (4.0 * eps * root + 4.0 * one3 * root * lambda_pos_int +
                            2.0 * stable * root + coupling) +
                    leak;
    double b_cond = interp / std::pow(eps, 5.0);
    out.gronwall = gronwall_check(a_cond, b_cond, 0.5 * cfg.dimension_a, alpha, in.tau, t_final);
    out.certified = out.gronwall.condition_holds;

    // Assembled bound and the breakdown of its threshold summands.
    double terms[5] = {2.0 * root * 2.0 * eps * root,
                       2.0 * root * 2.0 * one3 * root * lambda_pos_int,
                       2.0 * root * stable * root, 2.0 * root * coupling, leak};
    out.r_hat = out.prefactor * 8.0 *
                (out.mu_integral + in.initial_error_hm1_sq + terms[0] + terms[1] + terms[2] +
                 terms[3] + terms[4]);
    double best = 0.0;
    for (int i = 0; i < 5; ++i)
        if (terms[i] > best) {
            best = terms[i];
            out.dominant_threshold_term = i;
        }
    return out;
}

TotalBoundResult total_bound(const TotalBoundInputs& in, const EstimatorConfig& cfg) {
    if (in.r_hat.size() != in.certified.size())
        throw ConfigError("total bound per-path inputs have mismatched lengths");
    if (!(in.mean_linear >= 0.0)) throw ConfigError("total bound needs a nonnegative linear mean");

    TotalBoundResult out;
    if (!in.r_hat.empty()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < in.r_hat.size(); ++i)
            if (in.certified[i]) acc += in.r_hat[i];
        out.mean_nonlinear = acc / static_cast<double>(in.r_hat.size());
    }
    out.eps_tilde_used = std::max(std::pow(in.mean_linear, 0.75), cfg.eps_tilde);
    out.fluctuation = std::sqrt(in.mean_linear / out.eps_tilde_used +
                                std::pow(out.eps_tilde_used, cfg.delta) * cfg.c0_moment);
    out.total = cfg.generic_constant *
                (in.mean_linear + out.mean_nonlinear +
                 std::sqrt(cfg.c0_hat_moment) * out.fluctuation);
    return out;
}

} // namespace sch
