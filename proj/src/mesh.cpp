#include "hjbfem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace hjbfem {

namespace {

// Undirected edge key.
inline std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

inline double signed_area2(const Vec2& a, const Vec2& b, const Vec2& c) {
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

} // namespace

bool Rect::on_boundary(const Vec2& p, double tol) const {
    const double sx = std::max(1.0, std::abs(width()));
    const double sy = std::max(1.0, std::abs(height()));
    const bool inside_x = p.x() > x0 - tol * sx && p.x() < x1 + tol * sx;
    const bool inside_y = p.y() > y0 - tol * sy && p.y() < y1 + tol * sy;
    const bool edge_x = std::abs(p.x() - x0) <= tol * sx || std::abs(p.x() - x1) <= tol * sx;
    const bool edge_y = std::abs(p.y() - y0) <= tol * sy || std::abs(p.y() - y1) <= tol * sy;
    return inside_x && inside_y && (edge_x || edge_y);
}

Mesh::Mesh(Rect bbox, std::vector<Vec2> vertices, std::vector<Triangle> triangles)
    : bbox_(bbox), vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
    build_topology();
    validate();
}

std::array<Vec2, 3> Mesh::triangle_vertices(int t) const {
    const auto& tri = triangles_[t];
    return {vertices_[tri.v[0]], vertices_[tri.v[1]], vertices_[tri.v[2]]};
}

double Mesh::area(int t) const {
    const auto p = triangle_vertices(t);
    return 0.5 * signed_area2(p[0], p[1], p[2]);
}

double Mesh::diameter(int t) const {
    const auto p = triangle_vertices(t);
    return std::max({(p[1] - p[0]).norm(), (p[2] - p[1]).norm(), (p[0] - p[2]).norm()});
}

Vec2 Mesh::barycenter(int t) const {
    const auto p = triangle_vertices(t);
    return (p[0] + p[1] + p[2]) / 3.0;
}

double Mesh::min_angle(int t) const {
    const auto p = triangle_vertices(t);
    double worst = M_PI;
    for (int i = 0; i < 3; ++i) {
        const Vec2 u = p[(i + 1) % 3] - p[i];
        const Vec2 w = p[(i + 2) % 3] - p[i];
        const double ang = std::acos(std::clamp(u.dot(w) / (u.norm() * w.norm()), -1.0, 1.0));
        worst = std::min(worst, ang);
    }
    return worst;
}

Vec2 Mesh::point(int t, const Eigen::Vector3d& bary) const {
    const auto p = triangle_vertices(t);
    return bary[0] * p[0] + bary[1] * p[1] + bary[2] * p[2];
}

Eigen::Vector3d Mesh::barycentric(int t, const Vec2& x) const {
    const auto p = triangle_vertices(t);
    const double a2 = signed_area2(p[0], p[1], p[2]);
    Eigen::Vector3d l;
    l[0] = signed_area2(x, p[1], p[2]) / a2;
    l[1] = signed_area2(p[0], x, p[2]) / a2;
    l[2] = 1.0 - l[0] - l[1];
    return l;
}

int Mesh::locate(const Vec2& x, Eigen::Vector3d* bary, double tol) const {
    for (int t = 0; t < num_triangles(); ++t) {
        const Eigen::Vector3d l = barycentric(t, x);
        if (l.minCoeff() >= -tol) {
            if (bary) *bary = l;
            return t;
        }
    }
    return -1;
}

void Mesh::build_topology() {
    interior_faces_.clear();
    boundary_faces_.clear();

    // Discover faces in deterministic order: triangles ascending, local edges
    // (v0,v1), (v1,v2), (v2,v0).  The first owner of a shared edge is the
    // lower element id and becomes tplus.
    struct Owner {
        int count = 0;
        int tri[2] = {-1, -1};
        std::array<int, 2> verts{};
        int order = -1; // discovery index
    };
    std::unordered_map<std::uint64_t, Owner> owners;
    owners.reserve(triangles_.size() * 2);
    std::vector<std::uint64_t> discovery;
    discovery.reserve(triangles_.size() * 2);

    for (int t = 0; t < num_triangles(); ++t) {
        const auto& tri = triangles_[t];
        for (int e = 0; e < 3; ++e) {
            const int a = tri.v[e];
            const int b = tri.v[(e + 1) % 3];
            auto [it, inserted] = owners.try_emplace(edge_key(a, b));
            Owner& o = it->second;
            if (inserted) {
                o.verts = {a, b};
                o.order = static_cast<int>(discovery.size());
                discovery.push_back(it->first);
            }
            if (o.count >= 2)
                throw mesh_error("mesh: edge shared by more than two triangles");
            o.tri[o.count++] = t;
        }
    }

    for (const auto key : discovery) {
        const Owner& o = owners.at(key);
        Face f;
        f.v = o.verts;
        f.tplus = o.tri[0];
        f.tminus = o.count == 2 ? o.tri[1] : -1;
        const Vec2 a = vertices_[f.v[0]];
        const Vec2 b = vertices_[f.v[1]];
        const Vec2 d = b - a;
        f.length = d.norm();
        Vec2 n(d.y(), -d.x());
        n /= f.length;
        // Point out of tplus.
        const Vec2 mid = 0.5 * (a + b);
        if (n.dot(mid - barycenter(f.tplus)) < 0.0) n = -n;
        f.normal = n;
        (f.is_boundary() ? boundary_faces_ : interior_faces_).push_back(f);
    }

    vertex_boundary_.assign(vertices_.size(), 0);
    for (const auto& f : boundary_faces_) {
        vertex_boundary_[f.v[0]] = 1;
        vertex_boundary_[f.v[1]] = 1;
    }

    patches_.assign(vertices_.size(), {});
    for (int t = 0; t < num_triangles(); ++t)
        for (const int v : triangles_[t].v) patches_[v].push_back(t);
}

void Mesh::validate() const {
    if (vertices_.empty() || triangles_.empty())
        throw mesh_error("mesh: empty");
    for (int t = 0; t < num_triangles(); ++t) {
        const auto& tri = triangles_[t];
        for (const int v : tri.v)
            if (v < 0 || v >= num_vertices())
                throw mesh_error("mesh: vertex index out of range");
        if (tri.v[0] == tri.v[1] || tri.v[1] == tri.v[2] || tri.v[0] == tri.v[2])
            throw mesh_error("mesh: degenerate triangle");
        if (area(t) <= 0.0)
            throw mesh_error("mesh: non-positive orientation in element " + std::to_string(t));
    }
    // Conformity: a face with a single owner must lie on the domain boundary;
    // a hanging vertex would leave an interior face with one owner.
    for (const auto& f : boundary_faces_) {
        if (!bbox_.on_boundary(vertices_[f.v[0]], 1e-9) ||
            !bbox_.on_boundary(vertices_[f.v[1]], 1e-9))
            throw mesh_error("mesh: single-owner face not on the domain boundary (hanging vertex?)");
    }
    for (const auto& f : interior_faces_) {
        if (f.tplus >= f.tminus)
            throw mesh_error("mesh: interior face owners out of order");
    }
}

Mesh uniform_rect_mesh(const Rect& bbox, double h0) {
    if (!(h0 > 0.0)) throw std::invalid_argument("uniform_rect_mesh: h0 must be positive");
    const double w = bbox.width(), h = bbox.height();
    if (!(w > 0.0) || !(h > 0.0)) throw std::invalid_argument("uniform_rect_mesh: empty rectangle");
    const auto cells = [h0](double len) {
        const double q = len / h0;
        const long n = std::lround(q);
        if (n < 1 || std::abs(q - static_cast<double>(n)) > 1e-9)
            throw std::invalid_argument("uniform_rect_mesh: h0 must divide both side lengths");
        return static_cast<int>(n);
    };
    const int nx = cells(w);
    const int ny = cells(h);

    std::vector<Vec2> verts;
    verts.reserve(static_cast<size_t>(nx + 1) * (ny + 1));
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
            verts.emplace_back(bbox.x0 + w * i / nx, bbox.y0 + h * j / ny);

    const auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
    std::vector<Triangle> tris;
    tris.reserve(static_cast<size_t>(nx) * ny * 2);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int a = vid(i, j), b = vid(i + 1, j);
            const int c = vid(i + 1, j + 1), d = vid(i, j + 1);
            // Both triangles share the cell diagonal (a,c) as refinement edge.
            tris.push_back({{b, c, a}, -1, 0});
            tris.push_back({{d, a, c}, -1, 0});
        }
    }
    return Mesh(bbox, std::move(verts), std::move(tris));
}

namespace {

// Working state for one bisection pass.
struct BisectWork {
    std::vector<Vec2> verts;
    std::vector<Triangle> tris;
    std::vector<char> alive;
    std::unordered_map<std::uint64_t, int> midpoints;          // edge -> vertex id
    std::unordered_map<std::uint64_t, std::array<int, 2>> own; // edge -> live owners

    void add_owner(std::uint64_t key, int t) {
        auto [it, inserted] = own.try_emplace(key, std::array<int, 2>{-1, -1});
        auto& o = it->second;
        if (o[0] < 0) o[0] = t;
        else if (o[1] < 0) o[1] = t;
        else throw mesh_error("bisect: edge acquired a third owner");
    }
    void remove_owner(std::uint64_t key, int t) {
        auto& o = own.at(key);
        if (o[0] == t) o[0] = o[1];
        o[1] = -1;
    }
    int other_owner(std::uint64_t key, int t) const {
        const auto it = own.find(key);
        if (it == own.end()) return -1;
        const auto& o = it->second;
        return o[0] == t ? o[1] : o[0];
    }

    std::uint64_t ref_edge_key(int t) const { return edge_key(tris[t].v[1], tris[t].v[2]); }

    int midpoint(int a, int b) {
        const auto key = edge_key(a, b);
        const auto it = midpoints.find(key);
        if (it != midpoints.end()) return it->second;
        const int id = static_cast<int>(verts.size());
        verts.push_back(0.5 * (verts[a] + verts[b]));
        midpoints.emplace(key, id);
        return id;
    }

    int append(const Triangle& tri) {
        const int id = static_cast<int>(tris.size());
        tris.push_back(tri);
        alive.push_back(1);
        for (int e = 0; e < 3; ++e)
            add_owner(edge_key(tri.v[e], tri.v[(e + 1) % 3]), id);
        return id;
    }

    // Replace t by its two children across the midpoint m of its refinement
    // edge.  `ancestor` is the id of t in the input mesh (children descend
    // from it even when t itself is an intermediate child of this pass).
    void split(int t, int m, int ancestor) {
        const Triangle tri = tris[t];
        alive[t] = 0;
        for (int e = 0; e < 3; ++e)
            remove_owner(edge_key(tri.v[e], tri.v[(e + 1) % 3]), t);
        append({{m, tri.v[0], tri.v[1]}, ancestor, tri.generation + 1});
        append({{m, tri.v[2], tri.v[0]}, ancestor, tri.generation + 1});
    }
};

} // namespace

Mesh bisect(const Mesh& mesh, const std::vector<int>& marked) {
    BisectWork work;
    work.verts = mesh.vertices();
    work.tris = mesh.triangles();
    work.alive.assign(work.tris.size(), 1);
    for (int t = 0; t < static_cast<int>(work.tris.size()); ++t)
        for (int e = 0; e < 3; ++e)
            work.add_owner(edge_key(work.tris[t].v[e], work.tris[t].v[(e + 1) % 3]), t);

    // Ancestor in the input mesh; extended as children are appended.
    std::vector<int> ancestor(work.tris.size());
    for (size_t t = 0; t < ancestor.size(); ++t) ancestor[t] = static_cast<int>(t);

    // Conforming bisection: if the neighbor across the refinement edge is not
    // compatibly tagged, refine it first; its child adjacent to us then shares
    // our refinement edge and both are bisected with a single new midpoint.
    const auto refine = [&](auto&& self, int t, int depth) -> void {
        if (depth > 1'000'000) throw mesh_error("bisect: completion recursion failed to terminate");
        if (!work.alive[t]) return;
        std::uint64_t key = work.ref_edge_key(t);
        int nb = work.other_owner(key, t);
        while (nb >= 0 && work.ref_edge_key(nb) != key) {
            self(self, nb, depth + 1);
            nb = work.other_owner(key, t);
        }
        const int m = work.midpoint(work.tris[t].v[1], work.tris[t].v[2]);
        const int keep = static_cast<int>(work.tris.size());
        work.split(t, m, ancestor[t]);
        ancestor.resize(work.tris.size(), -1);
        ancestor[keep] = ancestor[keep + 1] = ancestor[t];
        if (nb >= 0) {
            const int keep2 = static_cast<int>(work.tris.size());
            work.split(nb, m, ancestor[nb]);
            ancestor.resize(work.tris.size(), -1);
            ancestor[keep2] = ancestor[keep2 + 1] = ancestor[nb];
        }
    };

    std::vector<int> order(marked);
    std::sort(order.begin(), order.end());
    for (const int t : order) {
        if (t < 0 || t >= mesh.num_triangles())
            throw std::invalid_argument("bisect: marked element id out of range");
        refine(refine, t, 0);
    }

    // Compact live triangles in creation order; record input-mesh ancestry.
    std::vector<Triangle> out;
    out.reserve(work.tris.size());
    for (size_t t = 0; t < work.tris.size(); ++t) {
        if (!work.alive[t]) continue;
        Triangle tri = work.tris[t];
        tri.parent = tri.generation == mesh.triangle(ancestor[t]).generation
                         ? mesh.triangle(ancestor[t]).parent
                         : ancestor[t];
        out.push_back(tri);
    }
    return Mesh(mesh.bbox(), std::move(work.verts), std::move(out));
}

std::vector<int> mark_graded(const Mesh& mesh, double C) {
    if (!(C > 0.0)) throw std::invalid_argument("mark_graded: C must be positive");
    std::vector<int> marked;
    const double nt = static_cast<double>(mesh.num_triangles());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const double d = mesh.barycenter(t).norm() - 0.5;
        if (mesh.area(t) > C * d * d / nt) marked.push_back(t);
    }
    return marked;
}

void Mesh::write_vtk(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_vtk: cannot open " + path);
    out.precision(17);
    out << "# vtk DataFile Version 3.0\n"
        << "triangulation\n"
        << "ASCII\n"
        << "DATASET UNSTRUCTURED_GRID\n"
        << "POINTS " << num_vertices() << " double\n";
    for (const auto& p : vertices_) out << p.x() << " " << p.y() << " 0\n";
    out << "CELLS " << num_triangles() << " " << 4 * num_triangles() << "\n";
    for (const auto& t : triangles_) out << "3 " << t.v[0] << " " << t.v[1] << " " << t.v[2] << "\n";
    out << "CELL_TYPES " << num_triangles() << "\n";
    for (int t = 0; t < num_triangles(); ++t) out << "5\n";
}

void Mesh::write_text(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_text: cannot open " + path);
    out.precision(17);
    out << "hjbfem-mesh 1\n";
    out << "bbox " << bbox_.x0 << " " << bbox_.y0 << " " << bbox_.x1 << " " << bbox_.y1 << "\n";
    out << "vertices " << num_vertices() << "\n";
    for (const auto& p : vertices_) out << p.x() << " " << p.y() << "\n";
    // v[0] is the newest vertex of each triangle; order is significant.
    out << "triangles " << num_triangles() << "\n";
    for (const auto& t : triangles_)
        out << t.v[0] << " " << t.v[1] << " " << t.v[2] << " " << t.parent << " " << t.generation
            << "\n";
}

Mesh Mesh::read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_text: cannot open " + path);
    std::string tag;
    int version = 0;
    in >> tag >> version;
    if (tag != "hjbfem-mesh" || version != 1)
        throw std::runtime_error("read_text: unrecognized mesh header in " + path);
    Rect bbox;
    in >> tag >> bbox.x0 >> bbox.y0 >> bbox.x1 >> bbox.y1;
    if (tag != "bbox") throw std::runtime_error("read_text: expected bbox record");
    int nv = 0;
    in >> tag >> nv;
    if (tag != "vertices" || nv <= 0) throw std::runtime_error("read_text: expected vertices record");
    std::vector<Vec2> verts(nv);
    for (auto& p : verts) in >> p.x() >> p.y();
    int nt = 0;
    in >> tag >> nt;
    if (tag != "triangles" || nt <= 0) throw std::runtime_error("read_text: expected triangles record");
    std::vector<Triangle> tris(nt);
    for (auto& t : tris) in >> t.v[0] >> t.v[1] >> t.v[2] >> t.parent >> t.generation;
    if (!in) throw std::runtime_error("read_text: truncated mesh file " + path);
    return Mesh(bbox, std::move(verts), std::move(tris));
}

} // namespace hjbfem
