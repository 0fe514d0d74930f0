#pragma once

// Principal eigenvalue Lambda_CH(t) of the Cahn-Hilliard operator linearized
// about the numerical solution:
//   -Lambda_CH = inf { (eps ||grad n||^2 + (1/eps)(f'(u_h) n, n)) / ||n||_{H^-1}^2 }
// over zero-mean discrete n.  Discretely this is the smallest eigenvalue of
// the pencil (A, B) with A = eps K + (1/eps) M_{f'(u_h)} restricted to the
// zero-mean subspace and B = M K0^+ M the negative-norm Gram operator,
// applied matrix-free through Poisson solves.  A is indefinite once u_h
// enters the spinodal region, so Lambda_CH may cross zero; B is positive
// definite on the constraint space.

#include "sch/fem.hpp"

namespace sch {

struct EigenResult {
    double lambda = 0.0; // Lambda_CH = -(smallest Rayleigh quotient)
    FeFunction eigvec;   // zero-mean minimizer, normalized in the B inner product
    double rayleigh_residual = 0.0;
    int iterations = 0;
    bool stagnated = false; // best-so-far returned without reaching tol
};

struct EigenOptions {
    double tol = 1e-8; // relative Rayleigh residual
    int max_iter = 600;
    int block = 4;                          // subspace width, 1..4: must exceed
                                            // the near-degenerate clusters of
                                            // the flat spinodal spectrum
    const FeFunction* warm_start = nullptr; // previous time level's eigenvector
};

EigenResult principal_eigenvalue(const FemCache& cache, const FeFunction& u_h, double eps,
                                 const EigenOptions& opts = {});
EigenResult principal_eigenvalue(const Mesh& mesh, const FeFunction& u_h, double eps,
                                 const EigenOptions& opts = {});

} // namespace sch
