#pragma once

// P1 finite elements on Mesh: assembly of mass/stiffness/weighted-mass forms,
// L2 projection, the discrete negative-order norm through a zero-mean Neumann
// Poisson solve, edge jump indicators, and nodal transfer between nested
// generations.

#include <functional>
#include <memory>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "sch/mesh.hpp"

namespace sch {

// Symmetric bilinear form on nodal coefficients, compressed sparse layout.
using SparseOperator = Eigen::SparseMatrix<double>;

// Nodal coefficients of a P1 function on a particular mesh generation.
struct FeFunction {
    std::int64_t generation = 0;
    Eigen::VectorXd v;

    int size() const { return static_cast<int>(v.size()); }
};

SparseOperator assemble_mass(const Mesh& mesh);
SparseOperator assemble_stiffness(const Mesh& mesh);

// Entries \int map(w(x)) phi_i phi_j dx, quadrature exact to degree 4.
SparseOperator assemble_weighted_mass(const Mesh& mesh, const FeFunction& w,
                                      const std::function<double(double)>& map);

// Load vector \int src(x) phi_i dx, quadrature exact to degree 6.
Eigen::VectorXd assemble_load(const Mesh& mesh, const std::function<double(Vec2)>& src);

// Per interior edge e: h_e * || [grad v . n_e] ||^2_{L2(e)}; the jump of the
// normal derivative is constant along e for P1, so the edge integral is
// h_e * jump^2.  Boundary edges contribute zero.
Eigen::VectorXd edge_jump_indicator(const Mesh& mesh, const FeFunction& v);

// Convex combination of two states bracketing t; endpoints are returned
// exactly.  Both functions must live on the same generation.
FeFunction interpolant_eval(const FeFunction& a, double ta, const FeFunction& b, double tb,
                            double t);

// Nodal values on a refined mesh of a function given on a coarser ancestor:
// created vertices take the average of their creation-edge endpoints, which
// reproduces the same piecewise linear function on the nested mesh.
Eigen::VectorXd prolongate(const Mesh& fine, const Eigen::VectorXd& coarse);
FeFunction prolongate(const Mesh& fine, const FeFunction& coarse);

// Per-mesh assembled forms, factorizations and geometry tables.  Built once
// per generation and shared by schemes, indicators and eigenvalue solves.
// Addresses of mesh and cache must stay stable while in use.
class FemCache {
public:
    explicit FemCache(const Mesh& mesh);

    const Mesh& mesh() const { return *mesh_; }
    const SparseOperator& M() const { return M_; }
    const SparseOperator& K() const { return K_; }
    double area() const { return area_; }
    const Eigen::VectorXd& mass_of_basis() const { return m1_; } // M * ones

    double integral(const Eigen::VectorXd& v) const { return m1_.dot(v); }
    double l2_norm(const Eigen::VectorXd& v) const;
    double h1_seminorm(const Eigen::VectorXd& v) const;

    // Solve M x = b.
    Eigen::VectorXd mass_solve(const Eigen::VectorXd& b) const;

    // Solve K x = b with zero-mean gauge; b must satisfy sum(b) = 0 up to
    // roundoff (the residue is projected out).  Returns x with integral 0.
    Eigen::VectorXd poisson_zero_mean(const Eigen::VectorXd& b) const;

    // || v ||_{-1,h} = sqrt(b^T x), b = M v, K x = b.  Requires the mass-mean
    // of v to vanish to 1e-10 relative, else throws NumericalError.
    double hminus1_norm(const Eigen::VectorXd& v) const;
    // Same norm for a right-hand side given directly as a load vector.
    double hminus1_norm_of_load(const Eigen::VectorXd& load) const;

    // L2 projection from a load vector of inner products against the basis.
    Eigen::VectorXd project_load(const Eigen::VectorXd& load) const;

    // Geometry tables aligned with the active triangle list.
    const std::vector<double>& areas() const { return areas_; }
    const std::vector<double>& diameters() const { return diam_; }
    const std::vector<std::array<Vec2, 3>>& basis_gradients() const { return grads_; }

private:
    const Mesh* mesh_;
    SparseOperator M_, K_;
    Eigen::SimplicialLDLT<SparseOperator> M_ldlt_;
    Eigen::SimplicialLDLT<SparseOperator> K_red_ldlt_; // K with vertex 0 pinned
    Eigen::VectorXd m1_;
    double area_ = 0.0;
    std::vector<double> areas_, diam_;
    std::vector<std::array<Vec2, 3>> grads_;
};

// L2 projection of a smooth source onto the P1 space.
FeFunction l2_project(const Mesh& mesh, const std::function<double(Vec2)>& src);
FeFunction l2_project(const FemCache& cache, const std::function<double(Vec2)>& src);

// Convenience wrapper building a throwaway cache.
double hminus1_norm(const Mesh& mesh, const FeFunction& v);

// Constant-gradient table of one triangle's barycentric basis.
std::array<Vec2, 3> p1_gradients(Vec2 a, Vec2 b, Vec2 c);

} // namespace sch
