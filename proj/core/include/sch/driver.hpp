#pragma once

// Path orchestration: one full simulation per path (sample noise, coupled
// Newton step with iteration-count tau control, the three sub-scheme solves,
// indicator evaluation, principal eigenvalue, mesh adaptation with one
// re-solve per adaptation round), closing-time detection and Monte-Carlo
// ensembles with the combined error bound.
//
// Every per-path quantity is a deterministic function of (master seed, path
// index, config): the noise stream is derived per path, and no step depends
// on scheduling.  Ensemble reductions run in path-index order after the
// workers join, so means are independent of the worker count.

#include <string>
#include <vector>

#include "sch/adaptivity.hpp"
#include "sch/config.hpp"
#include "sch/estimators.hpp"
#include "sch/schemes.hpp"

namespace sch {

// The two-circles profile: -tanh(max{-(|x|-r1), |x|-r2} / (sqrt(2) eps)),
// about -1 inside r1 and outside r2, about +1 on the annulus between.
std::function<double(Vec2)> initial_profile(double r1, double r2, double eps);

// Nodal interpolation of the profile.
FeFunction initial_condition(const Mesh& mesh, double r1, double r2, double eps);

// Everything recorded per accepted step.
struct StepRecord {
    double t = 0.0;
    double tau = 0.0;
    int dof = 0;      // vertices of the mesh the step ended on
    int elements = 0; // active triangles
    int newton_iterations = 0;
    double newton_residual = 0.0;
    int rejections = 0; // tau halvings before this step was accepted
    double mass = 0.0;
    double energy = 0.0; // Ginzburg-Landau energy of u
    double u_center = 0.0;
    double u_min = 0.0, u_max = 0.0;
    int eig_iterations = 0;
    double eig_residual = 0.0;
    StepAudits audits;
    // Per-element indicator maps are dropped before storing; the globals and
    // the bound inputs below survive.
    StepIndicators indicators;
    AdaptOutcome adapt;
    double du_tilde_hm1_sq = 0.0;
    double dy_hm1_sq = 0.0;
    double du_tilde_grad_sq = 0.0;
    double dy_grad_sq = 0.0;
};

// Dual topological-change detector: the primary watches the sign of u at the
// domain center (the inner circle vanishing), the secondary the maximum of
// the eigenvalue trace; both times and their gap are reported.
struct ClosingDetection {
    bool center_fired = false;
    double center_time = 0.0; // zero crossing, linearly interpolated
    bool lambda_fired = false;
    double lambda_time = 0.0; // argmax of the trace
    double lambda_peak = 0.0;
    double gap = 0.0; // |center_time - lambda_time| when both fired
};

ClosingDetection detect_closing(const std::vector<double>& t, const std::vector<double>& u_center,
                                const std::vector<double>& lambda);

struct Snapshot {
    double requested_t = 0.0;
    double t = 0.0; // time of the accepted step that crossed requested_t
    Mesh mesh;
    FeFunction u, w;
};

struct PathResult {
    int path_index = 0;
    bool completed = false;
    std::string failure; // diagnostics when a path aborts
    std::vector<StepRecord> steps;
    ClosingDetection closing;
    double r_tilde = 0.0; // linear-branch error bound
    NonlinearBoundResult nonlinear;
    double hoelder_integral = 0.0;
    double initial_defect_hm1_sq = 0.0; // two-level estimate of the
                                        // projection defect at t = 0
    std::vector<Snapshot> snapshots;
};

// One full path.  Throws nothing for per-step trouble it can handle by
// halving tau; an unrecoverable failure is reported in PathResult::failure
// with completed = false.
PathResult run_path(const RunConfig& cfg, int path_index = 0);

struct EnsembleResult {
    std::vector<PathResult> paths;
    int completed = 0;
    int failed = 0;
    std::vector<double> closing_times; // center detector, completed paths
    double closing_mean = 0.0;
    double closing_stddev = 0.0;
    double mean_linear = 0.0; // mean of r_tilde over completed paths
    TotalBoundResult total;
};

EnsembleResult run_ensemble(const RunConfig& cfg);

// Ginzburg-Landau energy eps/2 ||grad u||^2 + 1/eps int (u^2-1)^2/4.
double ginzburg_landau_energy(const FemCache& cache, const FeFunction& u, double eps);

// Pointwise evaluation of a P1 function.
double evaluate_at(const Mesh& mesh, const FeFunction& f, Vec2 p);

} // namespace sch
