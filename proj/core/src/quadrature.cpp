#include "sch/quadrature.hpp"

#include "sch/errors.hpp"

namespace sch {

namespace {

TriQuadRule make_rule(int degree) {
    TriQuadRule r;
    r.degree = degree;
    auto add1 = [&](double w) { r.points.push_back({{1.0 / 3, 1.0 / 3, 1.0 / 3}, w}); };
    auto add3 = [&](double w, double a) {
        double b = 0.5 * (1.0 - a);
        r.points.push_back({{a, b, b}, w});
        r.points.push_back({{b, a, b}, w});
        r.points.push_back({{b, b, a}, w});
    };
    auto add6 = [&](double w, double a, double b) {
        double c = 1.0 - a - b;
        r.points.push_back({{a, b, c}, w});
        r.points.push_back({{a, c, b}, w});
        r.points.push_back({{b, a, c}, w});
        r.points.push_back({{b, c, a}, w});
        r.points.push_back({{c, a, b}, w});
        r.points.push_back({{c, b, a}, w});
    };
    switch (degree) {
    case 2:
        // edge-midpoint rule
        add3(1.0 / 3.0, 0.0);
        break;
    case 4:
        add3(0.223381589678011, 0.108103018168070);
        add3(0.109951743655322, 0.816847572980459);
        break;
    case 6:
        add3(0.116786275726379, 0.501426509658179);
        add3(0.050844906370207, 0.873821971016996);
        add6(0.082851075618374, 0.053145049844817, 0.310352451033784);
        break;
    default:
        throw NumericalError("quadrature: no rule stocked for requested degree");
    }
    return r;
}

} // namespace

const TriQuadRule& tri_rule(int degree) {
    static const TriQuadRule d2 = make_rule(2);
    static const TriQuadRule d4 = make_rule(4);
    static const TriQuadRule d6 = make_rule(6);
    if (degree <= 2) return d2;
    if (degree <= 4) return d4;
    if (degree <= 6) return d6;
    throw NumericalError("quadrature: no rule stocked for requested degree");
}

} // namespace sch
