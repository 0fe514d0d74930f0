#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "sch/errors.hpp"
#include "sch/mesh.hpp"

namespace {

double total_area(const sch::Mesh& m) {
    double a = 0.0;
    for (int i = 0; i < m.num_triangles(); ++i) a += m.area(i);
    return a;
}

sch::MarkSet mark_all(const sch::Mesh& m) {
    sch::MarkSet s;
    for (int i = 0; i < m.num_triangles(); ++i) s.refine.push_back(i);
    return s;
}

} // namespace

TEST_CASE("initial mesh: counts, area, conformity, positive areas") {
    for (int res : {1, 3, 8}) {
        sch::Mesh m = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, res);
        CHECK(m.num_vertices() == (res + 1) * (res + 1));
        CHECK(m.num_triangles() == 2 * res * res);
        CHECK(total_area(m) == doctest::Approx(4.0).epsilon(1e-13));
        for (int i = 0; i < m.num_triangles(); ++i) CHECK(m.area(i) > 0.0);
        m.audit_conformity();
    }
}

TEST_CASE("single-triangle refinement stays conforming and preserves area") {
    sch::Mesh m = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, 4);
    sch::MarkSet s;
    s.refine.push_back(5);
    sch::Mesh r = sch::refine(m, s);
    r.audit_conformity();
    CHECK(r.num_triangles() > m.num_triangles());
    CHECK(total_area(r) == doctest::Approx(4.0).epsilon(1e-13));
    // Input vertex ids stay valid (vertices only appended).
    CHECK(r.num_vertices() >= m.num_vertices());
    for (int v = 0; v < m.num_vertices(); ++v) {
        CHECK(r.point(v).x == m.point(v).x);
        CHECK(r.point(v).y == m.point(v).y);
    }
}

TEST_CASE("mark-all refinement bisects every triangle exactly once") {
    sch::Mesh m = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, 4);
    sch::Mesh r = sch::refine(m, mark_all(m));
    r.audit_conformity();
    CHECK(r.num_triangles() == 2 * m.num_triangles());
}

TEST_CASE("two mark-all passes halve every diameter") {
    sch::Mesh m = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, 4);
    double d0 = 0.0;
    for (int i = 0; i < m.num_triangles(); ++i) d0 = std::max(d0, m.diameter(i));
    sch::Mesh r = sch::refine(m, mark_all(m));
    r = sch::refine(r, mark_all(r));
    r.audit_conformity();
    CHECK(r.num_triangles() == 4 * m.num_triangles());
    double d2 = 0.0;
    for (int i = 0; i < r.num_triangles(); ++i) d2 = std::max(d2, r.diameter(i));
    CHECK(d2 == doctest::Approx(0.5 * d0).epsilon(1e-13));
    // Right isosceles shape is preserved: min angle stays 45 degrees.
    for (int i = 0; i < r.num_triangles(); ++i)
        CHECK(r.min_angle(i) == doctest::Approx(std::numbers::pi / 4).epsilon(1e-12));
}

TEST_CASE("coarsening inverts a refinement") {
    sch::Mesh m = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, 2);
    sch::Mesh r = sch::refine(m, mark_all(m));
    sch::MarkSet back;
    for (int i = 0; i < r.num_triangles(); ++i) back.coarsen.push_back(i);
    sch::CoarsenResult c = sch::coarsen(r, back);
    c.mesh.audit_conformity();
    CHECK(c.mesh.num_triangles() == m.num_triangles());
    CHECK(c.skipped == 0);
    // kept_old maps each coarse vertex to a fine one at the same position.
    REQUIRE(static_cast<int>(c.kept_old.size()) == c.mesh.num_vertices());
    for (int v = 0; v < c.mesh.num_vertices(); ++v) {
        sch::Vec2 a = c.mesh.point(v);
        sch::Vec2 b = r.point(c.kept_old[v]);
        CHECK(a.x == b.x);
        CHECK(a.y == b.y);
    }
}

TEST_CASE("half-marked sibling pairs are skipped, not merged") {
    sch::Mesh m = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, 2);
    sch::Mesh r = sch::refine(m, mark_all(m));
    // Mark a single child; its sibling is unmarked, so nothing may merge it.
    sch::MarkSet back;
    back.coarsen.push_back(0);
    sch::CoarsenResult c = sch::coarsen(r, back);
    c.mesh.audit_conformity();
    CHECK(c.mesh.num_triangles() == r.num_triangles());
    CHECK(c.skipped >= 1);
}

TEST_CASE("coarsen prolongation reproduces coarse nodal values on the fine mesh") {
    sch::Mesh m = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, 2);
    sch::Mesh r = sch::refine(m, mark_all(m));
    sch::MarkSet back;
    for (int i = 0; i < r.num_triangles(); ++i) back.coarsen.push_back(i);
    sch::CoarsenResult c = sch::coarsen(r, back);
    // A linear function is reproduced exactly through the prolongation.
    Eigen::VectorXd coarse(c.mesh.num_vertices());
    for (int v = 0; v < c.mesh.num_vertices(); ++v)
        coarse[v] = 1.5 * c.mesh.point(v).x - 0.25 * c.mesh.point(v).y + 2.0;
    Eigen::VectorXd fine = c.prolongation * coarse;
    REQUIRE(fine.size() == r.num_vertices());
    for (int v = 0; v < r.num_vertices(); ++v)
        CHECK(fine[v] ==
              doctest::Approx(1.5 * r.point(v).x - 0.25 * r.point(v).y + 2.0).epsilon(1e-13));
}

TEST_CASE("locate and barycentric agree on interior points") {
    sch::Mesh m = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, 5);
    for (sch::Vec2 p : {sch::Vec2{0.13, -0.72}, sch::Vec2{-0.99, 0.98}, sch::Vec2{0.0, 0.0}}) {
        int t = m.locate(p);
        REQUIRE(t >= 0);
        auto b = m.barycentric(t, p);
        for (double c : b) CHECK(c >= -1e-12);
        CHECK(b[0] + b[1] + b[2] == doctest::Approx(1.0).epsilon(1e-12));
        // Reconstruct the point from the coordinates.
        const auto& v = m.tri(t);
        sch::Vec2 q = b[0] * m.point(v[0]) + b[1] * m.point(v[1]) + b[2] * m.point(v[2]);
        CHECK(q.x == doctest::Approx(p.x).epsilon(1e-12));
        CHECK(q.y == doctest::Approx(p.y).epsilon(1e-12));
    }
    CHECK(m.locate({1.5, 0.0}) == -1);
    CHECK(m.locate({0.0, -1.0 - 1e-6}) == -1);
}

TEST_CASE("edge table: interior edges have two incident triangles, boundary one") {
    sch::Mesh m = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, 3);
    int boundary = 0;
    for (const auto& e : m.edges) {
        CHECK(e.a < e.b);
        CHECK(e.t0 >= 0);
        if (e.boundary())
            ++boundary;
        else
            CHECK(e.t1 >= 0);
    }
    CHECK(boundary == 4 * 3);
    // Every triangle's edge list is consistent with the edge endpoints.
    for (int i = 0; i < m.num_triangles(); ++i) {
        const auto& v = m.tri(i);
        for (int k = 0; k < 3; ++k) {
            const auto& e = m.edges[m.tri_edges[i][k]];
            // Edge k is opposite vertex k.
            CHECK(e.a != v[k]);
            CHECK(e.b != v[k]);
        }
    }
}

TEST_CASE("vertex parents are older than their children") {
    sch::Mesh m = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, 2);
    sch::Mesh r = sch::refine(m, mark_all(m));
    r = sch::refine(r, mark_all(r));
    for (int v = 0; v < r.num_vertices(); ++v) {
        auto [a, b] = r.vertex_parents[v];
        CHECK(a <= v);
        CHECK(b <= v);
        if (a != v) {
            // Midpoint of the creation edge.
            CHECK(r.point(v).x == doctest::Approx(0.5 * (r.point(a).x + r.point(b).x)));
            CHECK(r.point(v).y == doctest::Approx(0.5 * (r.point(a).y + r.point(b).y)));
        }
    }
}

TEST_CASE("generation increases with every operation") {
    sch::Mesh m = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, 2);
    std::int64_t g0 = m.generation;
    sch::Mesh r = sch::refine(m, mark_all(m));
    CHECK(r.generation > g0);
    sch::MarkSet back;
    for (int i = 0; i < r.num_triangles(); ++i) back.coarsen.push_back(i);
    sch::CoarsenResult c = sch::coarsen(r, back);
    CHECK(c.mesh.generation > r.generation);
}

TEST_CASE("edge patches list edge-sharing neighbours") {
    sch::Mesh m = sch::build_initial_mesh(-1.0, -1.0, 1.0, 1.0, 3);
    auto patches = sch::edge_patches(m);
    REQUIRE(static_cast<int>(patches.size()) == m.num_triangles());
    for (int i = 0; i < m.num_triangles(); ++i) {
        CHECK(patches[i].size() >= 1);
        CHECK(patches[i].size() <= 3);
        for (int j : patches[i]) {
            CHECK(j != i);
            // Symmetry of adjacency.
            CHECK(std::find(patches[j].begin(), patches[j].end(), i) != patches[j].end());
        }
    }
}
