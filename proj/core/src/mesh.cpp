#include "sch/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <unordered_set>

namespace sch {

namespace {

inline std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

// Alive triangles incident to an undirected edge; at most two on a
// conforming mesh, kept sorted for determinism.
struct EdgeIncidence {
    std::unordered_map<std::uint64_t, std::array<int, 2>> tris;

    void add(int a, int b, int t) {
        auto& slot = tris.try_emplace(edge_key(a, b), std::array<int, 2>{-1, -1}).first->second;
        if (slot[0] < 0) slot[0] = t;
        else if (slot[1] < 0) slot[1] = t;
        else throw NumericalError("mesh: more than two triangles on one edge");
    }
    void remove(int a, int b, int t) {
        auto it = tris.find(edge_key(a, b));
        if (it == tris.end()) throw NumericalError("mesh: removing unknown edge");
        auto& slot = it->second;
        if (slot[0] == t) slot[0] = slot[1];
        slot[1] = -1;
        if (slot[0] < 0) tris.erase(it);
    }
    int other(int a, int b, int t) const {
        auto it = tris.find(edge_key(a, b));
        if (it == tris.end()) return -1;
        const auto& slot = it->second;
        if (slot[0] == t) return slot[1];
        if (slot[1] == t) return slot[0];
        throw NumericalError("mesh: edge incidence out of sync");
    }
};

inline double tri_area(Vec2 a, Vec2 b, Vec2 c) { return 0.5 * cross(b - a, c - a); }

} // namespace

double Mesh::area(int i) const {
    const auto& t = tri(i);
    return tri_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
}

double Mesh::diameter(int i) const {
    const auto& t = tri(i);
    double d = 0.0;
    for (int k = 0; k < 3; ++k)
        d = std::max(d, norm(vertices[t[(k + 1) % 3]] - vertices[t[k]]));
    return d;
}

double Mesh::min_angle(int i) const {
    const auto& t = tri(i);
    double best = M_PI;
    for (int k = 0; k < 3; ++k) {
        Vec2 u = vertices[t[(k + 1) % 3]] - vertices[t[k]];
        Vec2 v = vertices[t[(k + 2) % 3]] - vertices[t[k]];
        double c = dot(u, v) / (norm(u) * norm(v));
        best = std::min(best, std::acos(std::clamp(c, -1.0, 1.0)));
    }
    return best;
}

double Mesh::edge_length(int e) const {
    return norm(vertices[edges[e].b] - vertices[edges[e].a]);
}

std::array<double, 3> Mesh::barycentric(int i, Vec2 p) const {
    const auto& t = tri(i);
    Vec2 a = vertices[t[0]], b = vertices[t[1]], c = vertices[t[2]];
    double total = tri_area(a, b, c);
    return {tri_area(p, b, c) / total, tri_area(a, p, c) / total, tri_area(a, b, p) / total};
}

int Mesh::locate(Vec2 p, int hint) const {
    auto inside = [&](int i) {
        auto l = barycentric(i, p);
        return l[0] >= -1e-12 && l[1] >= -1e-12 && l[2] >= -1e-12;
    };
    if (hint >= 0 && hint < num_triangles() && inside(hint)) return hint;
    for (int i = 0; i < num_triangles(); ++i)
        if (inside(i)) return i;
    return -1;
}

void Mesh::rebuild_topology() {
    edges.clear();
    tri_edges.assign(active.size(), {-1, -1, -1});
    std::unordered_map<std::uint64_t, int> ids;
    ids.reserve(active.size() * 2);
    for (int i = 0; i < num_triangles(); ++i) {
        const auto& t = tri(i);
        for (int k = 0; k < 3; ++k) {
            int a = t[(k + 1) % 3], b = t[(k + 2) % 3]; // edge opposite vertex k
            auto [it, fresh] = ids.try_emplace(edge_key(a, b), static_cast<int>(edges.size()));
            if (fresh) {
                Edge e;
                e.a = std::min(a, b);
                e.b = std::max(a, b);
                e.t0 = i;
                edges.push_back(e);
            } else {
                Edge& e = edges[it->second];
                if (e.t1 >= 0) throw NumericalError("mesh: nonmanifold edge");
                e.t1 = i;
            }
            tri_edges[i][k] = it->second;
        }
    }
}

void Mesh::audit_conformity() const {
    for (int i = 0; i < num_triangles(); ++i)
        if (area(i) <= 0.0)
            throw NumericalError("mesh: non-positive triangle area");
    for (const auto& e : edges)
        if (e.t0 < 0) throw NumericalError("mesh: edge without triangle");
    // A hanging vertex sits at the midpoint of an unsplit edge of a
    // neighbouring triangle.  Midpoints are formed by the same expression at
    // creation time, so an exact coordinate probe is sufficient.
    std::unordered_map<std::uint64_t, int> coord_map;
    auto coord_key = [](Vec2 p) {
        auto h = std::hash<double>{};
        return h(p.x) * 1000003ull ^ h(p.y);
    };
    coord_map.reserve(vertices.size());
    for (int v = 0; v < num_vertices(); ++v)
        coord_map.emplace(coord_key(vertices[v]), v);
    for (const auto& e : edges) {
        Vec2 m = 0.5 * (vertices[e.a] + vertices[e.b]);
        auto it = coord_map.find(coord_key(m));
        if (it != coord_map.end() && vertices[it->second].x == m.x && vertices[it->second].y == m.y)
            throw NumericalError("mesh: hanging vertex on edge");
    }
}

Mesh build_initial_mesh(double x0, double y0, double x1, double y1, int resolution) {
    if (resolution < 1) throw ConfigError("mesh: resolution must be positive");
    if (!(x1 > x0) || !(y1 > y0)) throw ConfigError("mesh: empty domain");

    Mesh m;
    const int n = resolution;
    m.vertices.reserve((n + 1) * (n + 1));
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i)
            m.vertices.push_back({x0 + (x1 - x0) * i / n, y0 + (y1 - y0) * j / n});
    m.vertex_parents.resize(m.vertices.size());
    for (int v = 0; v < m.num_vertices(); ++v) m.vertex_parents[v] = {v, v};

    auto vid = [n](int i, int j) { return j * (n + 1) + i; };
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
            // Both cell triangles take the diagonal as refinement edge, so a
            // marked cell bisects as a compatible pair.
            Mesh::Tri t1, t2;
            if ((i + j) % 2 == 0) {
                t1.v = {a, c, d};
                t2.v = {c, a, b};
            } else {
                t1.v = {b, d, a};
                t2.v = {d, b, c};
            }
            m.forest.push_back(t1);
            m.forest.push_back(t2);
        }
    }
    m.active.resize(m.forest.size());
    for (std::size_t k = 0; k < m.forest.size(); ++k) m.active[k] = static_cast<int>(k);
    m.rebuild_topology();
    return m;
}

namespace {

// Refinement workspace shared by the recursive bisection.
struct Refiner {
    Mesh& m;
    EdgeIncidence inc;
    std::unordered_map<std::uint64_t, int> midpoint;
    int steps = 0;
    int step_limit = 0;

    explicit Refiner(Mesh& mesh) : m(mesh) {
        for (int f : m.active) {
            const auto& v = m.forest[f].v;
            inc.add(v[0], v[1], f);
            inc.add(v[1], v[2], f);
            inc.add(v[2], v[0], f);
        }
        step_limit = static_cast<int>(m.forest.size()) * 8 + 64;
    }

    int midpoint_of(int a, int b) {
        auto [it, fresh] = midpoint.try_emplace(edge_key(a, b), m.num_vertices());
        if (fresh) {
            m.vertices.push_back(0.5 * (m.vertices[a] + m.vertices[b]));
            m.vertex_parents.push_back({std::min(a, b), std::max(a, b)});
        }
        return it->second;
    }

    // Split a single alive triangle at the midpoint of its refinement edge.
    void split(int f, int mid) {
        Mesh::Tri& t = m.forest[f];
        const auto [a, b, c] = t.v;
        Mesh::Tri c1, c2;
        c1.v = {c, a, mid};
        c2.v = {b, c, mid};
        c1.parent = c2.parent = f;
        c1.level = c2.level = t.level + 1;
        int i1 = static_cast<int>(m.forest.size());
        m.forest.push_back(c1);
        m.forest.push_back(c2);
        Mesh::Tri& tt = m.forest[f]; // reference may have moved
        tt.alive = false;
        tt.child = {i1, i1 + 1};
        inc.remove(a, b, f);
        inc.remove(b, c, f);
        inc.remove(c, a, f);
        inc.add(c, a, i1);
        inc.add(a, mid, i1);
        inc.add(mid, c, i1);
        inc.add(b, c, i1 + 1);
        inc.add(c, mid, i1 + 1);
        inc.add(mid, b, i1 + 1);
    }

    // Bisect triangle f, first making the neighbour across the refinement
    // edge compatible.  Both members of the compatible pair are split so the
    // mesh stays conforming after every call.
    void bisect(int f) {
        if (!m.forest[f].alive) return;
        if (++steps > step_limit)
            throw NumericalError("mesh: bisection closure did not terminate");
        int a = m.forest[f].v[0], b = m.forest[f].v[1];
        int nb = inc.other(a, b, f);
        if (nb >= 0) {
            const auto& nv = m.forest[nb].v;
            bool compatible = edge_key(nv[0], nv[1]) == edge_key(a, b);
            if (!compatible) {
                bisect(nb);
                nb = inc.other(a, b, f);
            }
        }
        int mid = midpoint_of(a, b);
        split(f, mid);
        if (nb >= 0) split(nb, mid);
    }
};

} // namespace

Mesh refine(const Mesh& mesh, const MarkSet& marks) {
    Mesh out = mesh;
    out.generation = mesh.generation + 1;

    std::vector<int> targets;
    targets.reserve(marks.refine.size());
    for (int idx : marks.refine) {
        if (idx < 0 || idx >= mesh.num_triangles())
            throw ConfigError("refine: mark out of range");
        targets.push_back(mesh.active[idx]);
    }

    Refiner r(out);
    for (int f : targets) r.bisect(f); // already-split marks were bisected by closure

    out.active.clear();
    for (std::size_t f = 0; f < out.forest.size(); ++f)
        if (out.forest[f].alive) out.active.push_back(static_cast<int>(f));
    out.rebuild_topology();
    return out;
}

CoarsenResult coarsen(const Mesh& mesh, const MarkSet& marks) {
    std::unordered_set<int> marked; // forest ids
    for (int idx : marks.coarsen) {
        if (idx < 0 || idx >= mesh.num_triangles())
            throw ConfigError("coarsen: mark out of range");
        marked.insert(mesh.active[idx]);
    }

    // Candidate parents: both children alive and marked.  Groups are keyed by
    // the midpoint vertex (the children's shared newest vertex); the vertex is
    // removable only if every alive triangle holding it -- at any vertex slot,
    // deeper descendants carry it inside their refinement edge -- belongs to a
    // candidate, which is exactly the conformity condition for the merge.
    std::vector<int> incident_count(mesh.vertices.size(), 0);
    for (int f : mesh.active)
        for (int v : mesh.forest[f].v) incident_count[v]++;

    std::unordered_map<int, std::vector<int>> groups; // midpoint -> candidate parents
    std::unordered_set<int> touched_parents;          // any group with a mark on it
    int skipped = 0;
    for (int f : marked) {
        const auto& t = mesh.forest[f];
        if (t.parent < 0) {
            ++skipped; // roots have no coarser level
            continue;
        }
        if (touched_parents.count(t.parent)) continue;
        touched_parents.insert(t.parent);
        const auto& p = mesh.forest[t.parent];
        int c0 = p.child[0], c1 = p.child[1];
        bool complete = mesh.forest[c0].alive && mesh.forest[c1].alive &&
                        marked.count(c0) && marked.count(c1);
        if (!complete) {
            ++skipped;
            continue;
        }
        groups[mesh.forest[c0].v[2]].push_back(t.parent);
    }

    std::unordered_set<int> merged_parents;
    std::unordered_set<int> removed_vertices;
    for (const auto& [mid, parents] : groups) {
        int covered = 2 * static_cast<int>(parents.size());
        if (incident_count[mid] != covered) {
            skipped += static_cast<int>(parents.size()); // merge would leave hanging vertex
            continue;
        }
        for (int p : parents) merged_parents.insert(p);
        removed_vertices.insert(mid);
    }

    CoarsenResult res;
    Mesh& out = res.mesh;
    res.skipped = skipped;
    out.generation = mesh.generation + 1;

    // Rebuild the forest keeping records that stay alive or still have alive
    // descendants; merged children are dropped, merged parents revived.
    std::vector<char> alive(mesh.forest.size(), 0);
    for (std::size_t f = 0; f < mesh.forest.size(); ++f) alive[f] = mesh.forest[f].alive;
    for (int p : merged_parents) {
        alive[p] = 1;
        alive[mesh.forest[p].child[0]] = 0;
        alive[mesh.forest[p].child[1]] = 0;
    }
    std::vector<char> needed = alive;
    for (std::size_t f = mesh.forest.size(); f-- > 0;)
        if (needed[f] && mesh.forest[f].parent >= 0) needed[mesh.forest[f].parent] = 1;

    // Vertex compaction.
    std::vector<int> vmap(mesh.vertices.size(), -1);
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        if (removed_vertices.count(v)) continue;
        vmap[v] = out.num_vertices();
        out.vertices.push_back(mesh.vertices[v]);
        auto [pa, pb] = mesh.vertex_parents[v];
        out.vertex_parents.push_back({pa, pb}); // remapped below
    }
    for (auto& pp : out.vertex_parents) {
        int a = vmap[pp[0]], b = vmap[pp[1]];
        if (a < 0 || b < 0) throw NumericalError("coarsen: kept vertex lost a parent");
        pp = {a, b};
    }

    std::vector<int> fmap(mesh.forest.size(), -1);
    for (std::size_t f = 0; f < mesh.forest.size(); ++f) {
        if (!needed[f]) continue;
        fmap[f] = static_cast<int>(out.forest.size());
        out.forest.push_back(mesh.forest[f]);
    }
    for (auto& t : out.forest) {
        for (auto& v : t.v) v = vmap[v];
        t.parent = t.parent >= 0 ? fmap[t.parent] : -1;
        for (auto& c : t.child) c = c >= 0 ? fmap[c] : -1;
    }
    for (std::size_t f = 0; f < mesh.forest.size(); ++f) {
        if (fmap[f] < 0) continue;
        Mesh::Tri& t = out.forest[fmap[f]];
        t.alive = alive[f];
        if (merged_parents.count(static_cast<int>(f))) t.child = {-1, -1};
    }
    for (std::size_t f = 0; f < out.forest.size(); ++f)
        if (out.forest[f].alive) out.active.push_back(static_cast<int>(f));
    out.rebuild_topology();

    // Prolongation coarse -> fine: identity on kept vertices, edge-midpoint
    // average on removed ones.
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(mesh.vertices.size() + removed_vertices.size());
    res.kept_old.resize(out.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        if (vmap[v] >= 0) {
            trip.emplace_back(v, vmap[v], 1.0);
            res.kept_old[vmap[v]] = v;
        } else {
            auto [pa, pb] = mesh.vertex_parents[v];
            if (vmap[pa] < 0 || vmap[pb] < 0)
                throw NumericalError("coarsen: removed vertex lost both parents");
            trip.emplace_back(v, vmap[pa], 0.5);
            trip.emplace_back(v, vmap[pb], 0.5);
        }
    }
    res.prolongation.resize(mesh.num_vertices(), out.num_vertices());
    res.prolongation.setFromTriplets(trip.begin(), trip.end());
    return res;
}

std::vector<std::vector<int>> edge_patches(const Mesh& mesh) {
    std::vector<std::vector<int>> nb(mesh.num_triangles());
    for (const auto& e : mesh.edges) {
        if (e.boundary()) continue;
        nb[e.t0].push_back(e.t1);
        nb[e.t1].push_back(e.t0);
    }
    return nb;
}

} // namespace sch
