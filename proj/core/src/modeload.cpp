#include "sch/modeload.hpp"

#include "sch/fem.hpp"

namespace sch {
namespace {

// Antiderivative building blocks A_m = int_0^1 t^m cos(wt) dt and
// B_m = int_0^1 t^m sin(wt) dt for m = 0,1.  The closed forms cancel
// catastrophically as w -> 0 (w = 0 occurs on every edge parallel to a nodal
// direction and on diagonals when l1 = l2), so small |w| switches to Taylor
// series truncated well below double roundoff for |w| < 1/2.
struct MomentKernels {
    double a0, b0, a1, b1;
};

MomentKernels kernels(double w) {
    MomentKernels k;
    if (std::abs(w) < 0.5) {
        double w2 = w * w;
        k.a0 = 1.0 + w2 * (-1.0 / 6.0 + w2 * (1.0 / 120.0 + w2 * (-1.0 / 5040.0 + w2 * (1.0 / 362880.0 - w2 / 39916800.0))));
        k.b0 = w * (0.5 + w2 * (-1.0 / 24.0 + w2 * (1.0 / 720.0 + w2 * (-1.0 / 40320.0 + w2 / 3628800.0))));
        k.a1 = 0.5 + w2 * (-1.0 / 8.0 + w2 * (1.0 / 144.0 + w2 * (-1.0 / 5760.0 + w2 / 403200.0)));
        k.b1 = w * (1.0 / 3.0 + w2 * (-1.0 / 30.0 + w2 * (1.0 / 840.0 + w2 * (-1.0 / 45360.0 + w2 / 3991680.0))));
    } else {
        double s = std::sin(w), c = std::cos(w);
        k.a0 = s / w;
        k.b0 = (1.0 - c) / w;
        k.a1 = (c - 1.0 + w * s) / (w * w);
        k.b1 = (s - w * c) / (w * w);
    }
    return k;
}

// int_0^1 t^m cos(wt + phi) dt and int_0^1 t^m sin(wt + phi) dt.
struct PhasedMoments {
    double c0, s0, c1, s1;
};

PhasedMoments phased(double w, double phi) {
    MomentKernels k = kernels(w);
    double cp = std::cos(phi), sp = std::sin(phi);
    return {cp * k.a0 - sp * k.b0, sp * k.a0 + cp * k.b0,
            cp * k.a1 - sp * k.b1, sp * k.a1 + cp * k.b1};
}

// Everything about the mode restricted to the segment P -> Q, parametrised by
// t in [0,1].  Writing u = a(x-1) = u0 + du t, v = b(y-1) = v0 + dv t and
// using product-to-sum, e and grad e on the edge are combinations of
// cos/sin(w t + phi) with w = du -+ dv, phi = u0 -+ v0.
struct EdgeMode {
    PhasedMoments mi; // phase u - v
    PhasedMoments pl; // phase u + v
};

EdgeMode edge_mode(const CosMode& mode, Vec2 p, Vec2 q) {
    double a = mode.l1 * CosMode::pi, b = mode.l2 * CosMode::pi;
    double u0 = a * (p.x - 1.0), du = a * (q.x - p.x);
    double v0 = b * (p.y - 1.0), dv = b * (q.y - p.y);
    return {phased(du - dv, u0 - v0), phased(du + dv, u0 + v0)};
}

} // namespace

double cos_moment(int m, double w, double phi) {
    PhasedMoments pm = phased(w, phi);
    return m == 0 ? pm.c0 : pm.c1;
}

// Both loads per triangle reduce to its boundary.  With constant gk = grad
// phi_k on T and -Lap e = lambda e:
//   int_T grad e . grad phi_k = gk . bdry_T e n ds
//   int_T e phi_k = ( gk . bdry_T e n ds - bdry_T (grad e . n) phi_k ds ) / lambda.
// On an edge, e = (cos(w-t+f-) + cos(w+t+f+)) / 2 and
// grad e . n = -(a nx + b ny)/2 sin(w+t+f+) - (a nx - b ny)/2 sin(w-t+f-),
// while phi_k is linear in t, so every term is a 0th or 1st cos/sin moment.
namespace {

void accumulate_tri(const Mesh& mesh, const CosMode& mode, int t,
                    Eigen::VectorXd* mass, Eigen::VectorXd* stiff) {
    const auto& v = mesh.tri(t);
    Vec2 p[3] = {mesh.point(v[0]), mesh.point(v[1]), mesh.point(v[2])};
    double lambda = mode.lambda();
    double a = mode.l1 * CosMode::pi, b = mode.l2 * CosMode::pi;
    std::array<Vec2, 3> g = p1_gradients(p[0], p[1], p[2]);

    Vec2 flux{0.0, 0.0};       // bdry_T e n ds
    double bdry[3] = {0, 0, 0}; // bdry_T (grad e . n) phi_k ds
    for (int k = 0; k < 3; ++k) {
        int i = k, j = (k + 1) % 3; // CCW edge p[i] -> p[j]
        Vec2 d = p[j] - p[i];
        double len = norm(d);
        Vec2 n{d.y / len, -d.x / len}; // outward for CCW orientation
        EdgeMode em = edge_mode(mode, p[i], p[j]);

        double e_int = 0.5 * (em.mi.c0 + em.pl.c0); // int_0^1 e dt
        flux = flux + (len * e_int) * n;

        // grad e . n = ap sin(w+t+f+) + am sin(w-t+f-)
        double ap = -0.5 * (a * n.x + b * n.y);
        double am = -0.5 * (a * n.x - b * n.y);
        // phi_i = 1 - t, phi_j = t on this edge, other basis functions vanish
        double m0 = ap * em.pl.s0 + am * em.mi.s0; // int (grad e . n) dt
        double m1 = ap * em.pl.s1 + am * em.mi.s1; // int (grad e . n) t dt
        bdry[i] += len * (m0 - m1);
        bdry[j] += len * m1;
    }

    for (int k = 0; k < 3; ++k) {
        double grad_term = dot(g[k], flux);
        if (stiff) (*stiff)[v[k]] += grad_term;
        if (mass) (*mass)[v[k]] += (grad_term - bdry[k]) / lambda;
    }
}

} // namespace

Eigen::VectorXd mode_mass_load(const Mesh& mesh, const CosMode& mode) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh.num_vertices());
    for (int t = 0; t < mesh.num_triangles(); ++t) accumulate_tri(mesh, mode, t, &out, nullptr);
    return out;
}

Eigen::VectorXd mode_stiffness_load(const Mesh& mesh, const CosMode& mode) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mesh.num_vertices());
    for (int t = 0; t < mesh.num_triangles(); ++t) accumulate_tri(mesh, mode, t, nullptr, &out);
    return out;
}

} // namespace sch
