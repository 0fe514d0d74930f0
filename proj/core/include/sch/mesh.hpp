#pragma once

// Conforming triangulations of an axis-aligned square with newest-vertex
// bisection refinement and exact genealogy-inversion coarsening.
//
// A Mesh is a value: refine/coarsen return a new generation and never mutate
// their input.  Triangles live in a bisection forest; the `active` list is
// the current triangulation.  The refinement edge of triangle (v0,v1,v2) is
// the edge v0-v1 (opposite the newest vertex v2); bisection inserts the edge
// midpoint m and produces children (v2,v0,m) and (v1,v2,m), which keeps all
// descendants of the right-isosceles initial triangles right-isosceles.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Sparse>

#include "sch/errors.hpp"

namespace sch {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }

// Triangles to refine / sibling groups to merge, as indices into Mesh::active.
struct MarkSet {
    std::vector<int> refine;
    std::vector<int> coarsen;
};

class Mesh {
public:
    struct Tri {
        std::array<int, 3> v{-1, -1, -1}; // refinement edge is v[0]-v[1]
        int parent = -1;                  // forest index, -1 for roots
        std::array<int, 2> child{-1, -1};
        int level = 0;
        bool alive = true;
    };

    // Undirected edge of the active triangulation; t1 = -1 on the boundary.
    struct Edge {
        int a = -1, b = -1;   // vertex ids, a < b
        int t0 = -1, t1 = -1; // incident active-triangle indices
        bool boundary() const { return t1 < 0; }
    };

    std::vector<Vec2> vertices;
    // Creation record per vertex: the endpoints of the edge whose midpoint it
    // is, or {i,i} for vertices of the initial mesh.  Parents always have
    // smaller indices, so nodal prolongation can run in index order.
    std::vector<std::array<int, 2>> vertex_parents;

    std::vector<Tri> forest;
    std::vector<int> active; // forest indices of the current triangulation
    std::int64_t generation = 0;

    // Topology of the active triangulation, rebuilt after every operation.
    std::vector<Edge> edges;
    std::vector<std::array<int, 3>> tri_edges; // edge ids per active triangle,
                                               // entry k is opposite vertex k

    int num_vertices() const { return static_cast<int>(vertices.size()); }
    int num_triangles() const { return static_cast<int>(active.size()); }

    const std::array<int, 3>& tri(int i) const { return forest[active[i]].v; }
    Vec2 point(int v) const { return vertices[v]; }

    double area(int i) const;     // signed area is kept positive
    double diameter(int i) const; // longest edge length
    double min_angle(int i) const;
    double edge_length(int e) const;

    // Barycentric coordinates of p in active triangle i.
    std::array<double, 3> barycentric(int i, Vec2 p) const;
    // Containing active triangle (tolerance on the barycentric test), or -1.
    int locate(Vec2 p, int hint = -1) const;

    // Throws NumericalError on a conformity violation: an interior edge with
    // more or fewer than two incident triangles, inconsistent orientation,
    // or a hanging vertex lying in the interior of another triangle's edge.
    void audit_conformity() const;

    void rebuild_topology();
};

// Criss-cross square mesh: `resolution` cells per side, each split along a
// diagonal (orientation alternates per cell).  The diagonal is the refinement
// edge of both triangles in a cell.
Mesh build_initial_mesh(double x0, double y0, double x1, double y1, int resolution);

// Bisect the marked triangles, recursively bisecting neighbours as needed to
// keep the triangulation conforming.  Vertices are only appended, so the
// input's vertex ids stay valid in the result.
Mesh refine(const Mesh& mesh, const MarkSet& marks);

struct CoarsenResult {
    Mesh mesh;
    int skipped = 0; // marked sibling groups whose merge would break conformity
    // Nodal prolongation coarse -> fine: values on the input mesh of a P1
    // function given by coefficients on the coarsened mesh.
    Eigen::SparseMatrix<double> prolongation;
    std::vector<int> kept_old; // input-mesh vertex id per coarse vertex
};

// Merge marked sibling pairs back into their parents.  A pair is merged only
// when the midpoint vertex would become unused, i.e. every active triangle
// holding it belongs to a marked pair; other marks are counted in `skipped`.
// Marks covering only half a sibling pair skip that pair.
CoarsenResult coarsen(const Mesh& mesh, const MarkSet& marks);

// Edge-adjacency of active triangles; entry i lists triangles sharing an edge
// with triangle i (size 2 or 3 on a conforming mesh).
std::vector<std::vector<int>> edge_patches(const Mesh& mesh);

} // namespace sch
