#pragma once

// Finite-rank Q-Wiener increments dW = sum_l nu_l e_l dbeta_l, the scalar
// intensity process sigma(t), tail descriptions for the truncated spectrum,
// and the three per-step noise error indicators.

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "sch/fem.hpp"
#include "sch/modeload.hpp"
#include "sch/rng.hpp"

namespace sch {

// Scalar, spatially constant intensity in closed form; a null profile means
// sigma is constant in time.  Operator-valued or solution-dependent
// intensities are out of scope.
struct SigmaProcess {
    double amplitude = 1.0;
    std::function<double(double)> profile; // multiplies amplitude

    bool constant() const { return !profile; }
    double operator()(double t) const { return profile ? amplitude * profile(t) : amplitude; }
};

// Spectral sums over the modes that are not listed explicitly.  The retained
// part of the spectrum is always listed, so these only feed tail terms.
struct TailSpec {
    double grad_sq = 0.0;    // sum nu_l^2 ||grad e_l||^2 over unlisted modes
    double hminus1_sq = 0.0; // sum nu_l^2 ||e_l||_{H^-1}^2 over unlisted modes

    static TailSpec none() { return {}; }
    // Power law nu = c (l1^2+l2^2)^{-s/2} on the index lattice outside the
    // box max(l1,l2) <= box; requires s > 2 so the gradient sum converges.
    static TailSpec power_lattice(double c, double s, int box);
};

struct NoiseModel {
    std::vector<CosMode> modes; // spatial eigenfunctions with amplitudes nu
    int truncation_r = 0;       // schemes see modes[0 .. truncation_r)
    double gamma = 1.0;         // noise scaling exponent in eps^gamma
    SigmaProcess sigma;
    TailSpec tail; // contribution of modes beyond the listed ones

    void validate() const; // throws ConfigError on an inconsistent model

    // Exact spectral sums from the eigenrelation -Lap e_l = lambda_l e_l:
    // ||grad e_l||^2 = lambda_l, ||e_l||_{H^-1}^2 = 1/lambda_l.
    double grad_sq_beyond(int r) const;
    double hminus1_sq_beyond(int r) const;
    double grad_sq_total() const { return grad_sq_beyond(0); }
    double hminus1_sq_total() const { return hminus1_sq_beyond(0); }
};

// The finite-dimensional model used by the experiments: modes
// cos(pi l1 (x-1)) cos(pi l2 (y-1)), l1,l2 in {1..lmax}, all amplitudes 1/2,
// no tail, fully retained.
NoiseModel make_cosine_noise(int lmax, double sigma_amplitude, double gamma);

// One N(0, tau) draw per retained mode.  Throws ConfigError for tau <= 0.
Eigen::VectorXd sample_increments(const NoiseModel& model, Rng& rng, double tau);

// Nodal interpolation of sigma(t_prev) sum_l nu_l e_l dbeta_l with the exact
// mean of the interpolant removed.  The continuous field has zero mean but
// its interpolant does not on a general mesh, and downstream mass audits
// require mean-zero increments.
FeFunction increment_field(const NoiseModel& model, const Eigen::VectorXd& increments,
                           const Mesh& mesh, double t_prev);

// Exact weak load b_i = (sigma(t_prev) sum_l nu_l e_l dbeta_l, phi_i).  The
// schemes consume this load (and its mass solve, the L2 projection), which
// keeps the discrete mass balance and the discrete transformation identity
// at roundoff level.
Eigen::VectorXd increment_load(const NoiseModel& model, const Eigen::VectorXd& increments,
                               const Mesh& mesh, double t_prev);

// Running coefficients B_l^n = sum_{j<=n} sigma(t_{j-1}) dbeta_l^j of the
// accumulated truncated noise sum_j sigma^{j-1} D_j W^r.
struct ModeAccumulator {
    Eigen::VectorXd b; // one per listed mode; stays zero beyond truncation_r

    ModeAccumulator() = default;
    explicit ModeAccumulator(const NoiseModel& model);
    void advance(const NoiseModel& model, const Eigen::VectorXd& increments, double t_prev);
};

// Accumulated noise field sum_j sigma^{j-1} D_j W^r = sum_l nu_l B_l e_l.
std::function<double(Vec2)> accumulated_noise_eval(const NoiseModel& model,
                                                   const ModeAccumulator& acc);
// Transformation forcing g^n = eps Lap(sum_j sigma^{j-1} D_j W^r)
//                            = -eps sum_l nu_l lambda_l B_l e_l.
std::function<double(Vec2)> g_eval(const NoiseModel& model, const ModeAccumulator& acc,
                                   double eps);
// Lap g^n = eps sum_l nu_l lambda_l^2 B_l e_l, the datum of the first space
// indicator's element residual.
std::function<double(Vec2)> g_laplacian_eval(const NoiseModel& model, const ModeAccumulator& acc,
                                             double eps);

// L2-projection defects of the retained modes on a mesh.  The energy defect
// ||grad(P_h e - e)||^2 expands into exact quantities; the H^-1 defect has no
// closed form and is estimated by a discrete negative-norm solve on a
// once-uniformly-refined companion mesh.
struct ProjectionDefects {
    double energy_sum = 0.0;   // sum_{l<=r} nu_l^2 ||grad(P_h e_l - e_l)||^2
    double hminus1_sum = 0.0;  // sum_{l<=r} nu_l^2 ||P_h e_l - e_l||_{H^-1}^2
};
ProjectionDefects projection_defects(const Mesh& mesh, const FemCache& cache,
                                     const NoiseModel& model);

struct NoiseStep {
    double t_prev = 0.0;
    double tau = 0.0;
};

// Streaming per-step evaluation of the three noise indicators; the running
// sums over past steps are kept internally so each step costs O(r).
class NoiseIndicators {
public:
    NoiseIndicators(const NoiseModel& model, double eps);

    struct Values {
        double eta1 = 0.0, eta2 = 0.0, eta3 = 0.0;
    };
    Values advance(const NoiseStep& step, const ProjectionDefects& defects);

private:
    const NoiseModel* model_;
    double eps_;
    double sig2_time_ = 0.0;    // sum_j tau_j sigma(t_{j-1})^2
    double sigdiff_time_ = 0.0; // sum_j int_{t_{j-1}}^{t_j} (sigma - sigma^{j-1})^2
};

// Path-regularity integral sum_l nu_l^2 lambda_l^{-a/2} int_0^T |sigma(s)|^a ds
// feeding the Hoelder remainder of the linear error bound.  Covers the listed
// modes; an analytic tail would need lambda-resolved data beyond the stored
// l2 sums, and the experiment model lists every mode.
double hoelder_noise_integral(const NoiseModel& model, double t_end, double a);

// Batch forms over a recorded step sequence.
std::vector<double> noise_indicator_1(const NoiseModel& model,
                                      const std::vector<NoiseStep>& steps);

struct NoiseInd23 {
    std::vector<double> eta2, eta3;
};
NoiseInd23 noise_indicators_2_3(const NoiseModel& model, const Mesh& mesh, const FemCache& cache,
                                double eps, const std::vector<NoiseStep>& steps);

} // namespace sch
