#include "sch/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "sch/errors.hpp"
#include "sch/model.hpp"
#include "sch/rng.hpp"

namespace sch {
namespace {

// Locally optimal block preconditioned CG for the smallest eigenpairs of
// (A, B) on the zero-mean subspace.  B is SPD there and applied matrix-free;
// A is symmetric indefinite, which LOBPCG handles as long as the Ritz
// problems use B as the metric.

struct PencilOps {
    const FemCache* cache;
    SparseOperator A;                          // eps K + (1/eps) M_{f'}
    Eigen::SimplicialLDLT<SparseOperator> pre; // A + 1.05 (1/eps) M, SPD
    Eigen::VectorXd m1;                        // M * ones: constraint normal
    double m1_sq;

    void project(Eigen::VectorXd& v) const { v -= (m1.dot(v) / m1_sq) * m1; }
    Eigen::VectorXd apply_a(const Eigen::VectorXd& v) const { return A * v; }
    Eigen::VectorXd apply_b(const Eigen::VectorXd& v) const {
        return cache->M() * cache->poisson_zero_mean(cache->M() * v);
    }
    Eigen::VectorXd precondition(const Eigen::VectorXd& v) const {
        Eigen::VectorXd z = pre.solve(v);
        project(z);
        return z;
    }
};

using Mat = Eigen::MatrixXd;

// B-orthonormalize the columns of V (with AV/BV kept aligned) by the
// Cholesky factor of the small Gram matrix; drops nothing, throws on
// breakdown so the caller can shrink the basis.
void b_orthonormalize(Mat& V, Mat& AV, Mat& BV) {
    Mat G = V.transpose() * BV;
    G = 0.5 * (G + G.transpose()).eval();
    Eigen::LLT<Mat> llt(G);
    if (llt.info() != Eigen::Success) throw NumericalError("eigensolver basis breakdown");
    Mat Linv = llt.matrixL().solve(Mat::Identity(G.rows(), G.cols()));
    Mat R = Linv.transpose();
    V = (V * R).eval();
    AV = (AV * R).eval();
    BV = (BV * R).eval();
}

struct RitzResult {
    Eigen::VectorXd values;
    Mat vectors;
};

// Generalized Rayleigh-Ritz on span(S); Gram matrices are dense and tiny.
RitzResult rayleigh_ritz(const Mat& S, const Mat& AS, const Mat& BS) {
    Mat Ag = S.transpose() * AS;
    Mat Bg = S.transpose() * BS;
    Ag = 0.5 * (Ag + Ag.transpose()).eval();
    Bg = 0.5 * (Bg + Bg.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(Ag, Bg);
    if (es.info() != Eigen::Success) throw NumericalError("dense Ritz solve failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

} // namespace

EigenResult principal_eigenvalue(const FemCache& cache, const FeFunction& u_h, double eps,
                                 const EigenOptions& opts) {
    if (!(eps > 0.0)) throw ConfigError("eps must be positive");
    const Mesh& mesh = cache.mesh();
    if (u_h.generation != mesh.generation || u_h.size() != mesh.num_vertices())
        throw NumericalError("eigenvalue input on wrong mesh generation");
    int n = mesh.num_vertices();
    int b = std::clamp(opts.block, 1, 4);
    b = std::min(b, std::max(1, (n - 1) / 3));

    PencilOps ops;
    ops.cache = &cache;
    SparseOperator W = assemble_weighted_mass(mesh, u_h, double_well_prime);
    ops.A = eps * cache.K() + (1.0 / eps) * W;
    // f' >= -1 pointwise, so A + 1.05/eps M is SPD and preconditions the
    // pencil uniformly in the sign of f'.
    SparseOperator P = ops.A + (1.05 / eps) * cache.M();
    ops.pre.compute(P);
    if (ops.pre.info() != Eigen::Success) throw NumericalError("preconditioner factorization failed");
    ops.m1 = cache.mass_of_basis();
    ops.m1_sq = ops.m1.squaredNorm();

    auto block_apply = [&](const Mat& V, auto&& f) {
        Mat out(n, V.cols());
        for (int j = 0; j < V.cols(); ++j) out.col(j) = f(V.col(j));
        return out;
    };

    Rng rng(0x5eedf00dULL);
    auto random_block = [&](int cols) {
        Mat V(n, cols);
        for (int j = 0; j < cols; ++j) {
            for (int i = 0; i < n; ++i) V(i, j) = rng.gaussian();
            Eigen::VectorXd c = V.col(j);
            ops.project(c);
            V.col(j) = c;
        }
        return V;
    };

    Mat X = random_block(b);
    if (opts.warm_start && opts.warm_start->size() == n) {
        Eigen::VectorXd ws = opts.warm_start->v;
        ops.project(ws);
        // Skip warm starts the mean projection annihilates (e.g. constants).
        if (ws.norm() > 1e-8 * opts.warm_start->v.norm()) X.col(0) = ws;
    }
    Mat AX = block_apply(X, [&](const auto& v) { return ops.apply_a(v); });
    Mat BX = block_apply(X, [&](const auto& v) { return ops.apply_b(v); });
    b_orthonormalize(X, AX, BX);

    Mat Pdir, APdir, BPdir; // LOBPCG conjugate directions, empty initially

    EigenResult best;
    best.rayleigh_residual = std::numeric_limits<double>::infinity();
    double theta = 0.0;
    int stall = 0;

    for (int it = 0; it < opts.max_iter; ++it) {
        // Ritz within X to expose the current leading pair.
        RitzResult rx = rayleigh_ritz(X, AX, BX);
        X = (X * rx.vectors).eval();
        AX = (AX * rx.vectors).eval();
        BX = (BX * rx.vectors).eval();
        theta = rx.values[0];

        Eigen::VectorXd r = AX.col(0) - theta * BX.col(0);
        double scale = AX.col(0).norm() + std::abs(theta) * BX.col(0).norm();
        double res = r.norm() / std::max(scale, 1e-300);

        if (res < best.rayleigh_residual) {
            best.rayleigh_residual = res;
            best.lambda = -theta;
            best.eigvec.generation = mesh.generation;
            best.eigvec.v = X.col(0);
            ops.project(best.eigvec.v); // pin the zero-mean constraint exactly
            stall = 0;
        } else {
            ++stall;
        }
        best.iterations = it + 1;
        if (best.rayleigh_residual <= opts.tol) return best;
        // Residuals plateau for long stretches on clustered spectra while the
        // Ritz value still descends, so stalls trigger a soft restart around
        // the best vector instead of an early return; only exhausting the
        // iteration budget declares stagnation.
        if (stall >= 25) {
            stall = 0;
            X = random_block(b);
            X.col(0) = best.eigvec.v;
            AX = block_apply(X, [&](const auto& v) { return ops.apply_a(v); });
            BX = block_apply(X, [&](const auto& v) { return ops.apply_b(v); });
            b_orthonormalize(X, AX, BX);
            Pdir.resize(n, 0);
            continue;
        }

        // Preconditioned residuals for the whole block.
        Mat R(n, b);
        for (int j = 0; j < b; ++j)
            R.col(j) = AX.col(j) - rx.values[j] * BX.col(j);
        Mat Wd = block_apply(R, [&](const auto& v) { return ops.precondition(v); });
        Mat AW = block_apply(Wd, [&](const auto& v) { return ops.apply_a(v); });
        Mat BW = block_apply(Wd, [&](const auto& v) { return ops.apply_b(v); });

        auto assemble = [&](bool with_p) {
            Eigen::Index pc = with_p ? Pdir.cols() : 0;
            Eigen::Index cols = b + Wd.cols() + pc;
            Mat S(n, cols), AS(n, cols), BS(n, cols);
            S.leftCols(b) = X;
            AS.leftCols(b) = AX;
            BS.leftCols(b) = BX;
            S.middleCols(b, Wd.cols()) = Wd;
            AS.middleCols(b, Wd.cols()) = AW;
            BS.middleCols(b, Wd.cols()) = BW;
            if (pc > 0) {
                S.rightCols(pc) = Pdir;
                AS.rightCols(pc) = APdir;
                BS.rightCols(pc) = BPdir;
            }
            return std::tuple<Mat, Mat, Mat>(std::move(S), std::move(AS), std::move(BS));
        };

        bool with_p = Pdir.cols() > 0;
        Mat S, AS, BS;
        RitzResult rs;
        for (;;) {
            std::tie(S, AS, BS) = assemble(with_p);
            try {
                b_orthonormalize(S, AS, BS);
                rs = rayleigh_ritz(S, AS, BS);
                break;
            } catch (const NumericalError&) {
                if (!with_p) throw; // basis of X and W alone broke down
                with_p = false;     // drop the stale directions and retry
            }
        }

        Mat C = rs.vectors.leftCols(b);
        Mat Xn = S * C, AXn = AS * C, BXn = BS * C;
        // New conjugate directions: the W (and P) components of the update.
        Mat Cp = C.bottomRows(S.cols() - b);
        Pdir = S.rightCols(S.cols() - b) * Cp;
        APdir = AS.rightCols(S.cols() - b) * Cp;
        BPdir = BS.rightCols(S.cols() - b) * Cp;
        X = std::move(Xn);
        AX = std::move(AXn);
        BX = std::move(BXn);
        b_orthonormalize(X, AX, BX);
    }

    best.stagnated = best.rayleigh_residual > opts.tol;
    return best;
}

EigenResult principal_eigenvalue(const Mesh& mesh, const FeFunction& u_h, double eps,
                                 const EigenOptions& opts) {
    FemCache cache(mesh);
    return principal_eigenvalue(cache, u_h, eps, opts);
}

} // namespace sch
