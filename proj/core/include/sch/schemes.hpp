#pragma once

// The four time-stepping schemes: the coupled nonlinear scheme, the linear
// SPDE scheme, the nonlinear random PDE scheme (linear in its unknowns since
// f is frozen at the coupled solution), and the transformed scheme, plus the
// Newton solver and the iteration-count time-step controller.
//
// All four schemes share one implicit saddle structure per step,
//   [ M/tau   K ] [v]   [r1]
//   [ -eps K  M ] [q] = [r2],
// and the linear three share a single factorization per (mesh, tau).
//
// The noise enters the coupled and linear schemes through the exact weak
// load of sigma^{n-1} D_n W^r; the transformed scheme is forced by the
// discrete field g_h = -eps M^{-1} K S_h built from the accumulated
// projected noise S_h.  With these choices the transformation identities
//   u_tilde^n = y^n + eps^gamma S_h^n,
//   w_tilde^n = y_w^n - eps^gamma g_h^n
// hold at solver roundoff on every mesh sequence, because the identity
// telescopes through any transfer applied consistently to all states.

#include <array>
#include <limits>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "sch/fem.hpp"
#include "sch/model.hpp"
#include "sch/noise.hpp"

namespace sch {

struct NewtonOptions {
    double tol = 5e-9; // combined block residual, 2-norm
    int max_iter = 50;
};

struct NewtonReport {
    int iterations = 0;
    double final_residual = 0.0;
    bool converged = false;
    std::vector<double> residual_history; // one entry per iterate, for tail checks
};

struct TimestepControl {
    double tau_min = 1e-14;
    double tau_max = std::numeric_limits<double>::infinity();
    int grow_below = 5;    // iterations < grow_below -> 2 tau
    int shrink_above = 50; // iterations > shrink_above -> tau / 2
};

// Iteration-count step controller; pure.
double adapt_timestep(const NewtonReport& report, double tau, const TimestepControl& ctrl);

// Per-step noise data consumed by the schemes.
struct StepNoise {
    Eigen::VectorXd load;       // (sigma^{n-1} D_n W^r, phi_i), exact
    Eigen::VectorXd projection; // M^{-1} load: coefficients of P_h (increment field)

    static StepNoise zero(int n);
};
StepNoise make_step_noise(const NoiseModel& model, const Eigen::VectorXd& increments,
                          const FemCache& cache, double t_prev);

// Complete per-path solver state at one time level.  All FeFunctions live on
// the same mesh generation.
struct TimeState {
    double t = 0.0;
    double tau = 0.0; // last accepted step size
    FeFunction u, w;             // coupled pair
    FeFunction u_tilde, w_tilde; // linear SPDE pair
    FeFunction u_hat, w_hat;     // random PDE pair
    FeFunction y, y_w;           // transformed pair
    FeFunction noise_sum;        // S_h^n: accumulated projected noise
    FeFunction g_h;              // -eps M^{-1} K S_h^n
    ModeAccumulator mode_acc;    // B_l^n = sum_j sigma^{j-1} dbeta_l^j
    double mass0 = 0.0;          // (u^0, 1)
};

// State at t = 0: u = u_hat = L2 projection of u0, u_tilde = y = 0, the w
// fields initialized consistently with their defining second equations.
TimeState initial_state(const FemCache& cache, const std::function<double(Vec2)>& u0,
                        const NoiseModel& model, double eps);

// Factorization of the shared saddle matrix, reused while (generation, eps,
// tau) are unchanged.
class SaddleCache {
public:
    // Solves the saddle system for (v, q); factorizes on key change.
    void solve(const FemCache& cache, double eps, double tau, const Eigen::VectorXd& r1,
               const Eigen::VectorXd& r2, Eigen::VectorXd& v, Eigen::VectorXd& q);

private:
    std::int64_t gen_ = -1;
    double eps_ = 0.0, tau_ = 0.0;
    bool ready_ = false;
    Eigen::SparseLU<SparseOperator> lu_;
};

// Noise bookkeeping for the step about to be taken: advances the mode
// accumulator and S_h by the projected increment and refreshes g_h.
void advance_noise(TimeState& state, const FemCache& cache, const NoiseModel& model,
                   const Eigen::VectorXd& increments, const StepNoise& noise, double eps);

// Recompute g_h from noise_sum (needed after a mesh transfer).
void refresh_g(TimeState& state, const FemCache& cache, double eps);

// One implicit step of the coupled scheme: Newton on the block system, full
// Jacobian with the f'(u)-weighted mass.  On convergence u is re-derived
// from the (linear) first equation so the discrete mass law holds at
// roundoff; u, w are updated in place.  On failure the state is untouched.
NewtonReport step_coupled(TimeState& state, const FemCache& cache, double eps, double gamma,
                          const StepNoise& noise, double tau, const NewtonOptions& opts = {});

// One step of the linear SPDE scheme for (u_tilde, w_tilde).
void step_linear_spde(TimeState& state, const FemCache& cache, double eps, double gamma,
                      const StepNoise& noise, double tau, SaddleCache& saddle);

// One step of the random PDE scheme for (u_hat, w_hat); f is evaluated at
// the already-computed coupled solution at the new time level.
void step_nonlinear_rpde(TimeState& state, const FemCache& cache, double eps, double tau,
                         const FeFunction& u_coupled_new, SaddleCache& saddle);

// One step of the transformed scheme for (y, y_w) with forcing
// eps^gamma (grad g_field, grad phi).
void step_transformed(TimeState& state, const FemCache& cache, double eps, double gamma,
                      const FeFunction& g_field, double tau, SaddleCache& saddle);

// Advance the clock after all sub-steps of an accepted step.
void finish_step(TimeState& state, double tau);

// Nodal interpolation of the accumulated forcing g^{r,n} rebuilt from a
// recorded path (closed-form Laplacians of the modes).
struct NoisePath {
    std::uint64_t seed = 0;
    std::vector<double> times;               // t_0 .. t_N
    std::vector<Eigen::VectorXd> increments; // per step, truncation_r entries
};
NoisePath make_path(const NoiseModel& model, std::uint64_t seed, const std::vector<double>& taus);
FeFunction accumulate_g(const NoiseModel& model, const NoisePath& path, const Mesh& mesh,
                        double eps, int up_to_n);

// Post-step audit quantities; each must sit at solver accuracy after every
// accepted step.
struct StepAudits {
    double mass_drift = 0.0;      // |(u,1) - (u0,1)|
    double splitting_error = 0.0; // ||u - u_tilde - u_hat||_inf
    double identity_u = 0.0;      // ||u_tilde - y - eps^gamma S_h||_inf
    double identity_w = 0.0;      // ||w_tilde - y_w + eps^gamma g_h||_inf
};
StepAudits audit_state(const TimeState& state, const FemCache& cache, double eps, double gamma);

// Transfer every field of the state onto a refinement / a coarsening of its
// mesh.  Refinement prolongates (exact for nested P1); coarsening restricts
// by vertex injection.  g_h must be refreshed against the new mesh's
// operators afterwards; the driver does this through refresh_g.
TimeState prolong_state(const TimeState& state, const Mesh& fine);
TimeState restrict_state(const TimeState& state, const Mesh& coarse,
                         const std::vector<int>& kept_old);

} // namespace sch
