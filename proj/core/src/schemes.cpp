#include "sch/schemes.hpp"

#include <algorithm>
#include <cmath>

#include "sch/errors.hpp"
#include "sch/quadrature.hpp"

namespace sch {
namespace {

// Load vector F_i = int f(u_h) phi_i dx; the integrand is quartic, so the
// degree-4 rule is exact and the Newton Jacobian below is the exact
// derivative of this load.
Eigen::VectorXd double_well_load(const Mesh& mesh, const Eigen::VectorXd& u) {
    const TriQuadRule& rule = tri_rule(4);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh.num_vertices());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& v = mesh.tri(t);
        double a = mesh.area(t);
        for (const auto& qp : rule.points) {
            double uq = qp.bary[0] * u[v[0]] + qp.bary[1] * u[v[1]] + qp.bary[2] * u[v[2]];
            double fw = a * qp.w * double_well(uq);
            for (int k = 0; k < 3; ++k) out[v[k]] += fw * qp.bary[k];
        }
    }
    return out;
}

// 2n x 2n block matrix [[M/tau, K], [-eps K - shift W, M]] where W is an
// optional weighted mass block (the Newton Jacobian uses W = M_{f'(u)}).
SparseOperator saddle_matrix(const FemCache& cache, double eps, double tau,
                             const SparseOperator* W, double shift) {
    int n = cache.M().rows();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(4 * cache.M().nonZeros());
    auto add_block = [&](const SparseOperator& A, double scale, int roff, int coff) {
        for (int k = 0; k < A.outerSize(); ++k)
            for (SparseOperator::InnerIterator it(A, k); it; ++it)
                trip.emplace_back(roff + static_cast<int>(it.row()),
                                  coff + static_cast<int>(it.col()), scale * it.value());
    };
    add_block(cache.M(), 1.0 / tau, 0, 0);
    add_block(cache.K(), 1.0, 0, n);
    add_block(cache.K(), -eps, n, 0);
    if (W) add_block(*W, -shift, n, 0);
    add_block(cache.M(), 1.0, n, n);
    SparseOperator A(2 * n, 2 * n);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();
    return A;
}

void check_tau(double tau) {
    if (!(tau > 0.0)) throw ConfigError("time step must be positive");
}

void check_generation(const FeFunction& f, const FemCache& cache, const char* what) {
    if (f.generation != cache.mesh().generation || f.size() != cache.mesh().num_vertices())
        throw NumericalError(std::string("state field on wrong mesh generation: ") + what);
}

// Residual audit for the direct linear solves.
void check_linear_residual(const SparseOperator& M, const SparseOperator& K, double eps,
                           double tau, const Eigen::VectorXd& v, const Eigen::VectorXd& q,
                           const Eigen::VectorXd& r1, const Eigen::VectorXd& r2) {
    double n1 = (M * v / tau + K * q - r1).norm();
    double n2 = (-eps * (K * v) + M * q - r2).norm();
    double scale = std::max({1.0, r1.norm(), r2.norm()});
    if (!(std::sqrt(n1 * n1 + n2 * n2) <= 1e-10 * scale))
        throw NumericalError("saddle solve residual exceeds tolerance");
}

} // namespace

double adapt_timestep(const NewtonReport& report, double tau, const TimestepControl& ctrl) {
    if (!(tau > 0.0)) throw ConfigError("time step must be positive");
    double next = tau;
    if (report.iterations < ctrl.grow_below)
        next = 2.0 * tau;
    else if (report.iterations > ctrl.shrink_above)
        next = 0.5 * tau;
    return std::clamp(next, ctrl.tau_min, ctrl.tau_max);
}

StepNoise StepNoise::zero(int n) {
    StepNoise s;
    s.load = Eigen::VectorXd::Zero(n);
    s.projection = Eigen::VectorXd::Zero(n);
    return s;
}

StepNoise make_step_noise(const NoiseModel& model, const Eigen::VectorXd& increments,
                          const FemCache& cache, double t_prev) {
    StepNoise s;
    s.load = increment_load(model, increments, cache.mesh(), t_prev);
    s.projection = cache.mass_solve(s.load);
    return s;
}

TimeState initial_state(const FemCache& cache, const std::function<double(Vec2)>& u0,
                        const NoiseModel& model, double eps) {
    const Mesh& mesh = cache.mesh();
    int n = mesh.num_vertices();
    TimeState s;
    s.u = l2_project(cache, u0);
    s.u_hat = s.u;
    auto zero = [&] {
        FeFunction f;
        f.generation = mesh.generation;
        f.v = Eigen::VectorXd::Zero(n);
        return f;
    };
    s.u_tilde = zero();
    s.w_tilde = zero();
    s.y = zero();
    s.y_w = zero();
    s.noise_sum = zero();
    s.g_h = zero();
    // w fields from the respective second equations at the initial data.
    s.w = zero();
    s.w.v = cache.mass_solve(eps * (cache.K() * s.u.v) +
                             (1.0 / eps) * double_well_load(mesh, s.u.v));
    s.w_hat = s.w;
    s.mode_acc = ModeAccumulator(model);
    s.mass0 = cache.integral(s.u.v);
    return s;
}

void SaddleCache::solve(const FemCache& cache, double eps, double tau, const Eigen::VectorXd& r1,
                        const Eigen::VectorXd& r2, Eigen::VectorXd& v, Eigen::VectorXd& q) {
    std::int64_t gen = cache.mesh().generation;
    if (!ready_ || gen_ != gen || eps_ != eps || tau_ != tau) {
        lu_.compute(saddle_matrix(cache, eps, tau, nullptr, 0.0));
        if (lu_.info() != Eigen::Success) throw NumericalError("saddle factorization failed");
        gen_ = gen;
        eps_ = eps;
        tau_ = tau;
        ready_ = true;
    }
    int n = static_cast<int>(r1.size());
    Eigen::VectorXd rhs(2 * n);
    rhs.head(n) = r1;
    rhs.tail(n) = r2;
    Eigen::VectorXd x = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success) throw NumericalError("saddle solve failed");
    v = x.head(n);
    q = x.tail(n);
    check_linear_residual(cache.M(), cache.K(), eps, tau, v, q, r1, r2);
}

void advance_noise(TimeState& state, const FemCache& cache, const NoiseModel& model,
                   const Eigen::VectorXd& increments, const StepNoise& noise, double eps) {
    check_generation(state.noise_sum, cache, "noise_sum");
    state.mode_acc.advance(model, increments, state.t);
    state.noise_sum.v += noise.projection;
    refresh_g(state, cache, eps);
}

void refresh_g(TimeState& state, const FemCache& cache, double eps) {
    check_generation(state.noise_sum, cache, "noise_sum");
    state.g_h.generation = state.noise_sum.generation;
    state.g_h.v = -eps * cache.mass_solve(cache.K() * state.noise_sum.v);
}

NewtonReport step_coupled(TimeState& state, const FemCache& cache, double eps, double gamma,
                          const StepNoise& noise, double tau, const NewtonOptions& opts) {
    check_tau(tau);
    check_generation(state.u, cache, "u");
    const Mesh& mesh = cache.mesh();
    const SparseOperator &M = cache.M(), &K = cache.K();
    int n = mesh.num_vertices();
    double eg = std::pow(eps, gamma);

    Eigen::VectorXd u = state.u.v, w = state.w.v;
    const Eigen::VectorXd& u_prev = state.u.v;

    auto residual = [&](const Eigen::VectorXd& uu, const Eigen::VectorXd& ww,
                        Eigen::VectorXd& R1, Eigen::VectorXd& R2) {
        R1 = (M * (uu - u_prev) - eg * noise.load) / tau + K * ww;
        R2 = M * ww - eps * (K * uu) - (1.0 / eps) * double_well_load(mesh, uu);
    };

    NewtonReport report;
    Eigen::VectorXd R1(n), R2(n);
    residual(u, w, R1, R2);
    double res = std::sqrt(R1.squaredNorm() + R2.squaredNorm());
    report.residual_history.push_back(res);

    // Aim below half the tolerance while the iteration budget lasts: the
    // mass-law correction after the loop perturbs the second-block residual
    // slightly.
    double target = 0.5 * opts.tol;
    while (res > target && report.iterations < opts.max_iter) {
        FeFunction uf{state.u.generation, u};
        SparseOperator W = assemble_weighted_mass(mesh, uf, double_well_prime);
        Eigen::SparseLU<SparseOperator> lu;
        lu.compute(saddle_matrix(cache, eps, tau, &W, 1.0 / eps));
        if (lu.info() != Eigen::Success) throw NumericalError("Newton factorization failed");
        Eigen::VectorXd rhs(2 * n);
        rhs.head(n) = -R1;
        rhs.tail(n) = -R2;
        Eigen::VectorXd dx = lu.solve(rhs);
        if (lu.info() != Eigen::Success) throw NumericalError("Newton solve failed");
        u += dx.head(n);
        w += dx.tail(n);
        ++report.iterations;
        residual(u, w, R1, R2);
        res = std::sqrt(R1.squaredNorm() + R2.squaredNorm());
        report.residual_history.push_back(res);
        if (!std::isfinite(res)) break;
    }

    if (!std::isfinite(res) || res > opts.tol) {
        report.final_residual = res;
        report.converged = false;
        return report; // state untouched; caller rejects the step
    }

    // Enforce the first (linear) equation exactly: u from w via the mass
    // solve.  This pins the discrete mass law at roundoff since the noise
    // load sums to zero and K has zero row sums.
    u = u_prev + cache.mass_solve(eg * noise.load - tau * (K * w));
    residual(u, w, R1, R2);
    res = std::sqrt(R1.squaredNorm() + R2.squaredNorm());
    report.residual_history.push_back(res);
    report.final_residual = res;
    report.converged = res <= opts.tol;
    if (!report.converged) return report;

    state.u.v = u;
    state.w.v = w;
    return report;
}

void step_linear_spde(TimeState& state, const FemCache& cache, double eps, double gamma,
                      const StepNoise& noise, double tau, SaddleCache& saddle) {
    check_tau(tau);
    check_generation(state.u_tilde, cache, "u_tilde");
    double eg = std::pow(eps, gamma);
    Eigen::VectorXd r1 = (cache.M() * state.u_tilde.v + eg * noise.load) / tau;
    Eigen::VectorXd r2 = Eigen::VectorXd::Zero(r1.size());
    saddle.solve(cache, eps, tau, r1, r2, state.u_tilde.v, state.w_tilde.v);
}

void step_nonlinear_rpde(TimeState& state, const FemCache& cache, double eps, double tau,
                         const FeFunction& u_coupled_new, SaddleCache& saddle) {
    check_tau(tau);
    check_generation(state.u_hat, cache, "u_hat");
    check_generation(u_coupled_new, cache, "u_coupled_new");
    Eigen::VectorXd r1 = cache.M() * state.u_hat.v / tau;
    Eigen::VectorXd r2 = (1.0 / eps) * double_well_load(cache.mesh(), u_coupled_new.v);
    saddle.solve(cache, eps, tau, r1, r2, state.u_hat.v, state.w_hat.v);
}

void step_transformed(TimeState& state, const FemCache& cache, double eps, double gamma,
                      const FeFunction& g_field, double tau, SaddleCache& saddle) {
    check_tau(tau);
    check_generation(state.y, cache, "y");
    check_generation(g_field, cache, "g_field");
    double eg = std::pow(eps, gamma);
    Eigen::VectorXd r1 = cache.M() * state.y.v / tau + eg * (cache.K() * g_field.v);
    Eigen::VectorXd r2 = Eigen::VectorXd::Zero(r1.size());
    saddle.solve(cache, eps, tau, r1, r2, state.y.v, state.y_w.v);
}

void finish_step(TimeState& state, double tau) {
    check_tau(tau);
    state.t += tau;
    state.tau = tau;
}

NoisePath make_path(const NoiseModel& model, std::uint64_t seed, const std::vector<double>& taus) {
    Rng rng(seed);
    NoisePath path;
    path.seed = seed;
    path.times.push_back(0.0);
    double t = 0.0;
    for (double tau : taus) {
        path.increments.push_back(sample_increments(model, rng, tau));
        t += tau;
        path.times.push_back(t);
    }
    return path;
}

FeFunction accumulate_g(const NoiseModel& model, const NoisePath& path, const Mesh& mesh,
                        double eps, int up_to_n) {
    if (up_to_n < 0 || up_to_n > static_cast<int>(path.increments.size()))
        throw ConfigError("step index outside the recorded path");
    ModeAccumulator acc(model);
    for (int j = 0; j < up_to_n; ++j) acc.advance(model, path.increments[j], path.times[j]);
    auto g = g_eval(model, acc, eps);
    FeFunction f;
    f.generation = mesh.generation;
    f.v.resize(mesh.num_vertices());
    for (int i = 0; i < mesh.num_vertices(); ++i) f.v[i] = g(mesh.point(i));
    return f;
}

StepAudits audit_state(const TimeState& state, const FemCache& cache, double eps, double gamma) {
    double eg = std::pow(eps, gamma);
    StepAudits a;
    a.mass_drift = std::abs(cache.integral(state.u.v) - state.mass0);
    a.splitting_error =
        (state.u.v - state.u_tilde.v - state.u_hat.v).lpNorm<Eigen::Infinity>();
    a.identity_u =
        (state.u_tilde.v - state.y.v - eg * state.noise_sum.v).lpNorm<Eigen::Infinity>();
    a.identity_w =
        (state.w_tilde.v - state.y_w.v + eg * state.g_h.v).lpNorm<Eigen::Infinity>();
    return a;
}

namespace {

template <typename Transfer>
TimeState transfer_state(const TimeState& state, std::int64_t new_gen, Transfer&& tr) {
    TimeState out = state;
    for (FeFunction* f : {&out.u, &out.w, &out.u_tilde, &out.w_tilde, &out.u_hat, &out.w_hat,
                          &out.y, &out.y_w, &out.noise_sum, &out.g_h}) {
        f->v = tr(f->v);
        f->generation = new_gen;
    }
    return out;
}

} // namespace

TimeState prolong_state(const TimeState& state, const Mesh& fine) {
    return transfer_state(state, fine.generation,
                          [&](const Eigen::VectorXd& v) { return prolongate(fine, v); });
}

TimeState restrict_state(const TimeState& state, const Mesh& coarse,
                         const std::vector<int>& kept_old) {
    return transfer_state(state, coarse.generation, [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd out(static_cast<int>(kept_old.size()));
        for (int i = 0; i < out.size(); ++i) out[i] = v[kept_old[i]];
        return out;
    });
}

} // namespace sch
