#pragma once

// Mark-refine-coarsen control per time level, driven by the per-element
// squared contributions of the gradient-jump indicator.  The mesh surgery
// lives in mesh.hpp; this layer owns the marking policy and the
// refine-until-tolerance loop, while the caller re-solves and recomputes
// indicators through callbacks after every mesh change.

#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "sch/mesh.hpp"

namespace sch {

struct AdaptConfig {
    double tol = 1e-2;            // target for the global indicator
    double doerfler_theta = 0.5;  // bulk fraction of the squared indicator
    double coarsen_fraction = 0.1; // of the equidistributed share sqrt(tol/count)
    int max_rounds = 8;           // refinement rounds per time level
    double h_min = 0.0;           // elements this small are not refined
    double h_max = std::numeric_limits<double>::infinity(); // cap for coarsening

    void validate() const; // throws ConfigError
};

struct AdaptOutcome {
    int rounds = 0;             // refinement rounds executed
    bool tolerance_met = false; // final global indicator at or below tol
    int refined = 0;            // elements marked for refinement, summed
    int coarsened = 0;          // elements handed to the merge pass
    double eta_initial = 0.0;
    double eta_final = 0.0;
    int dof_initial = 0;
    int dof_final = 0;
};

// Smallest set of elements whose squared indicators sum to at least
// theta * total, greedily from the largest.  Empty when the total vanishes.
std::vector<int> doerfler_mark(const Eigen::VectorXd& eta_sq, double theta);

// Elements whose indicator falls below coarsen_fraction * sqrt(tol / count).
std::vector<int> coarsen_mark(const Eigen::VectorXd& eta_sq, double tol,
                              double coarsen_fraction);

// Callbacks re-establish the caller's state on the new mesh and return the
// fresh per-element squared indicator.  after_coarsen receives the surviving
// input-mesh vertex per coarse vertex for nodal restriction.
struct AdaptCallbacks {
    std::function<Eigen::VectorXd(const Mesh&)> after_refine;
    std::function<Eigen::VectorXd(const Mesh&, const std::vector<int>&)> after_coarsen;
};

// Refine by bulk marking until the global indicator reaches tol or the round
// budget is spent, then run one coarsening pass over the quiet elements.
// The mesh reference is replaced by each new generation in turn.
AdaptOutcome adapt_step(Mesh& mesh, Eigen::VectorXd eta_sq, const AdaptConfig& cfg,
                        const AdaptCallbacks& callbacks);

} // namespace sch
