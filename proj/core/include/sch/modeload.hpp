#pragma once

// Tensor-cosine fields e(x,y) = cos(l1 pi (x-1)) cos(l2 pi (y-1)) on the
// square (-1,1)^2 and their exact integrals against the P1 basis.  These are
// Neumann Laplace eigenfunctions with -Lap e = lambda e, lambda =
// pi^2 (l1^2 + l2^2), unit L2 norm, and zero mean.
//
// Loads are computed in closed form: with -Lap e = lambda e,
//   int_T e phi   = ( int_T grad e . grad phi  -  bdry_T (grad e . n) phi ) / lambda,
//   int_T grad e . grad phi = grad phi . bdry_T e n ds,
// so everything reduces to line integrals of cos/sin with linear phase, which
// avoids any quadrature error for arbitrarily coarse meshes.  That exactness
// is what keeps the discrete mass balance of noise loads at roundoff level.

#include <numbers>

#include <Eigen/Dense>

#include "sch/mesh.hpp"

namespace sch {

struct CosMode {
    int l1 = 1, l2 = 1;
    double nu = 1.0; // spectral amplitude

    static constexpr double pi = std::numbers::pi;

    double lambda() const { return pi * pi * static_cast<double>(l1 * l1 + l2 * l2); }
    double eval(Vec2 p) const {
        return std::cos(l1 * pi * (p.x - 1.0)) * std::cos(l2 * pi * (p.y - 1.0));
    }
    Vec2 grad(Vec2 p) const {
        double u = l1 * pi * (p.x - 1.0), v = l2 * pi * (p.y - 1.0);
        return {-l1 * pi * std::sin(u) * std::cos(v), -l2 * pi * std::cos(u) * std::sin(v)};
    }
    double laplacian(Vec2 p) const { return -lambda() * eval(p); }

    double l2_norm() const { return 1.0; }           // on (-1,1)^2
    double grad_norm_sq() const { return lambda(); } // ||grad e||^2 = lambda ||e||^2
    double hminus1_norm() const { return 1.0 / std::sqrt(lambda()); }
};

// b_i = int_D e phi_i dx, exact up to roundoff.
Eigen::VectorXd mode_mass_load(const Mesh& mesh, const CosMode& mode);

// b_i = int_D grad e . grad phi_i dx, exact up to roundoff.
Eigen::VectorXd mode_stiffness_load(const Mesh& mesh, const CosMode& mode);

// int_0^1 t^m cos(w t + phi) dt for m = 0,1; stable for small |w|.
double cos_moment(int m, double w, double phi);

} // namespace sch
