#include "sch/fem.hpp"

#include <cmath>

#include "sch/quadrature.hpp"

namespace sch {

std::array<Vec2, 3> p1_gradients(Vec2 a, Vec2 b, Vec2 c) {
    double twice_area = cross(b - a, c - a);
    // grad of the barycentric function of vertex k is the inward normal of
    // the opposite edge scaled by its length / (2|T|).
    auto perp = [](Vec2 v) { return Vec2{-v.y, v.x}; };
    return {(1.0 / twice_area) * perp(c - b), (1.0 / twice_area) * perp(a - c),
            (1.0 / twice_area) * perp(b - a)};
}

SparseOperator assemble_mass(const Mesh& mesh) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(mesh.num_triangles() * 9);
    for (int i = 0; i < mesh.num_triangles(); ++i) {
        const auto& t = mesh.tri(i);
        double s = mesh.area(i) / 12.0;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                trip.emplace_back(t[r], t[c], r == c ? 2.0 * s : s);
    }
    SparseOperator M(mesh.num_vertices(), mesh.num_vertices());
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
}

SparseOperator assemble_stiffness(const Mesh& mesh) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(mesh.num_triangles() * 9);
    for (int i = 0; i < mesh.num_triangles(); ++i) {
        const auto& t = mesh.tri(i);
        auto g = p1_gradients(mesh.point(t[0]), mesh.point(t[1]), mesh.point(t[2]));
        double a = mesh.area(i);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                trip.emplace_back(t[r], t[c], a * dot(g[r], g[c]));
    }
    SparseOperator K(mesh.num_vertices(), mesh.num_vertices());
    K.setFromTriplets(trip.begin(), trip.end());
    return K;
}

SparseOperator assemble_weighted_mass(const Mesh& mesh, const FeFunction& w,
                                      const std::function<double(double)>& map) {
    if (w.size() != mesh.num_vertices())
        throw NumericalError("weighted mass: coefficient count does not match mesh");
    const TriQuadRule& rule = tri_rule(4);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(mesh.num_triangles() * 9);
    for (int i = 0; i < mesh.num_triangles(); ++i) {
        const auto& t = mesh.tri(i);
        double a = mesh.area(i);
        double loc[3][3] = {};
        for (const auto& q : rule.points) {
            double wq = map(q.bary[0] * w.v[t[0]] + q.bary[1] * w.v[t[1]] + q.bary[2] * w.v[t[2]]);
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c)
                    loc[r][c] += q.w * wq * q.bary[r] * q.bary[c];
        }
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                trip.emplace_back(t[r], t[c], a * loc[r][c]);
    }
    SparseOperator W(mesh.num_vertices(), mesh.num_vertices());
    W.setFromTriplets(trip.begin(), trip.end());
    return W;
}

Eigen::VectorXd assemble_load(const Mesh& mesh, const std::function<double(Vec2)>& src) {
    const TriQuadRule& rule = tri_rule(6);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.num_vertices());
    for (int i = 0; i < mesh.num_triangles(); ++i) {
        const auto& t = mesh.tri(i);
        double a = mesh.area(i);
        for (const auto& q : rule.points) {
            Vec2 p = q.bary[0] * mesh.point(t[0]) + q.bary[1] * mesh.point(t[1]) +
                     q.bary[2] * mesh.point(t[2]);
            double s = a * q.w * src(p);
            for (int k = 0; k < 3; ++k) b[t[k]] += s * q.bary[k];
        }
    }
    return b;
}

Eigen::VectorXd edge_jump_indicator(const Mesh& mesh, const FeFunction& v) {
    if (v.size() != mesh.num_vertices())
        throw NumericalError("edge jumps: coefficient count does not match mesh");
    // Constant gradient per triangle.
    std::vector<Vec2> grad(mesh.num_triangles());
    for (int i = 0; i < mesh.num_triangles(); ++i) {
        const auto& t = mesh.tri(i);
        auto g = p1_gradients(mesh.point(t[0]), mesh.point(t[1]), mesh.point(t[2]));
        grad[i] = v.v[t[0]] * g[0] + v.v[t[1]] * g[1] + v.v[t[2]] * g[2];
    }
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh.edges.size());
    for (std::size_t e = 0; e < mesh.edges.size(); ++e) {
        const auto& ed = mesh.edges[e];
        if (ed.boundary()) continue;
        Vec2 tangent = mesh.point(ed.b) - mesh.point(ed.a);
        double h = norm(tangent);
        Vec2 n{tangent.y / h, -tangent.x / h}; // fixed unit normal; jump sign is irrelevant
        double jump = dot(grad[ed.t0] - grad[ed.t1], n);
        out[e] = h * (jump * jump * h); // h_e * ||jump||^2_{L2(e)}
    }
    return out;
}

FeFunction interpolant_eval(const FeFunction& a, double ta, const FeFunction& b, double tb,
                            double t) {
    if (a.generation != b.generation || a.size() != b.size())
        throw NumericalError("interpolant: states live on different meshes");
    if (tb <= ta) throw NumericalError("interpolant: empty time interval");
    if (t < ta || t > tb) throw NumericalError("interpolant: time outside bracket");
    if (t == ta) return a;
    if (t == tb) return b;
    double s = (t - ta) / (tb - ta);
    FeFunction out;
    out.generation = a.generation;
    out.v = (1.0 - s) * a.v + s * b.v;
    return out;
}

Eigen::VectorXd prolongate(const Mesh& fine, const Eigen::VectorXd& coarse) {
    int n0 = static_cast<int>(coarse.size());
    int n1 = fine.num_vertices();
    if (n0 > n1) throw NumericalError("prolongate: target mesh has fewer vertices");
    Eigen::VectorXd out(n1);
    out.head(n0) = coarse;
    for (int i = n0; i < n1; ++i) {
        auto [a, b] = fine.vertex_parents[i];
        if (a >= i || b >= i) throw NumericalError("prolongate: vertex created before parents");
        out[i] = 0.5 * (out[a] + out[b]);
    }
    return out;
}

FeFunction prolongate(const Mesh& fine, const FeFunction& coarse) {
    FeFunction out;
    out.generation = fine.generation;
    out.v = prolongate(fine, coarse.v);
    return out;
}

FemCache::FemCache(const Mesh& mesh) : mesh_(&mesh) {
    M_ = assemble_mass(mesh);
    K_ = assemble_stiffness(mesh);
    M_ldlt_.compute(M_);
    if (M_ldlt_.info() != Eigen::Success)
        throw NumericalError("fem: mass factorization failed");

    // Pin vertex 0 to fix the Neumann gauge: the reduced stiffness block is
    // positive definite, and for compatible right-hand sides the dropped
    // equation is implied by the others.
    int n = mesh.num_vertices();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(K_.nonZeros());
    for (int c = 0; c < K_.outerSize(); ++c)
        for (SparseOperator::InnerIterator it(K_, c); it; ++it)
            if (it.row() > 0 && it.col() > 0)
                trip.emplace_back(it.row() - 1, it.col() - 1, it.value());
    SparseOperator Kred(n - 1, n - 1);
    Kred.setFromTriplets(trip.begin(), trip.end());
    K_red_ldlt_.compute(Kred);
    if (K_red_ldlt_.info() != Eigen::Success)
        throw NumericalError("fem: stiffness factorization failed");

    m1_ = M_ * Eigen::VectorXd::Ones(n);
    area_ = m1_.sum();

    areas_.resize(mesh.num_triangles());
    diam_.resize(mesh.num_triangles());
    grads_.resize(mesh.num_triangles());
    for (int i = 0; i < mesh.num_triangles(); ++i) {
        areas_[i] = mesh.area(i);
        diam_[i] = mesh.diameter(i);
        const auto& t = mesh.tri(i);
        grads_[i] = p1_gradients(mesh.point(t[0]), mesh.point(t[1]), mesh.point(t[2]));
    }
}

double FemCache::l2_norm(const Eigen::VectorXd& v) const { return std::sqrt(v.dot(M_ * v)); }

double FemCache::h1_seminorm(const Eigen::VectorXd& v) const { return std::sqrt(v.dot(K_ * v)); }

Eigen::VectorXd FemCache::mass_solve(const Eigen::VectorXd& b) const {
    Eigen::VectorXd x = M_ldlt_.solve(b);
    if (M_ldlt_.info() != Eigen::Success) throw NumericalError("fem: mass solve failed");
    return x;
}

Eigen::VectorXd FemCache::poisson_zero_mean(const Eigen::VectorXd& b) const {
    int n = static_cast<int>(b.size());
    // Project out the (roundoff-level) incompatible component.
    Eigen::VectorXd rhs = b.array() - b.sum() / n;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    x.tail(n - 1) = K_red_ldlt_.solve(rhs.tail(n - 1));
    if (K_red_ldlt_.info() != Eigen::Success) throw NumericalError("fem: Poisson solve failed");
    x.array() -= m1_.dot(x) / area_;
    return x;
}

double FemCache::hminus1_norm(const Eigen::VectorXd& v) const {
    Eigen::VectorXd load = M_ * v;
    double mean = load.sum();
    double scale = std::sqrt(area_) * l2_norm(v);
    if (std::abs(mean) > 1e-10 * std::max(scale, 1e-300))
        throw NumericalError("hminus1_norm: argument has nonzero mean");
    return hminus1_norm_of_load(load);
}

double FemCache::hminus1_norm_of_load(const Eigen::VectorXd& load) const {
    Eigen::VectorXd x = poisson_zero_mean(load);
    double sq = load.dot(x);
    return std::sqrt(std::max(sq, 0.0));
}

Eigen::VectorXd FemCache::project_load(const Eigen::VectorXd& load) const {
    return mass_solve(load);
}

FeFunction l2_project(const FemCache& cache, const std::function<double(Vec2)>& src) {
    FeFunction out;
    out.generation = cache.mesh().generation;
    out.v = cache.project_load(assemble_load(cache.mesh(), src));
    return out;
}

FeFunction l2_project(const Mesh& mesh, const std::function<double(Vec2)>& src) {
    FemCache cache(mesh);
    return l2_project(cache, src);
}

double hminus1_norm(const Mesh& mesh, const FeFunction& v) {
    FemCache cache(mesh);
    return cache.hminus1_norm(v.v);
}

} // namespace sch
