#pragma once

// Symmetric Gauss rules on the reference triangle, in barycentric
// coordinates with weights summing to one (scale by the physical area).

#include <array>
#include <vector>

#include "sch/mesh.hpp"

namespace sch {

struct TriQuadRule {
    struct Point {
        std::array<double, 3> bary;
        double w;
    };
    std::vector<Point> points;
    int degree = 0;
};

// Smallest stocked rule exact for polynomials of the given total degree.
const TriQuadRule& tri_rule(int degree);

// Integral over active triangle i of a scalar callback on physical points.
template <class F>
double integrate(const Mesh& mesh, int i, const TriQuadRule& rule, F&& f) {
    const auto& t = mesh.tri(i);
    Vec2 a = mesh.point(t[0]), b = mesh.point(t[1]), c = mesh.point(t[2]);
    double acc = 0.0;
    for (const auto& q : rule.points) {
        Vec2 p = q.bary[0] * a + q.bary[1] * b + q.bary[2] * c;
        acc += q.w * f(p, q.bary);
    }
    return acc * mesh.area(i);
}

} // namespace sch
