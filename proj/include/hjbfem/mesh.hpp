#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "hjbfem/quadrature.hpp"

namespace hjbfem {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Axis-aligned rectangular domain.
struct Rect {
    double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    bool on_boundary(const Vec2& p, double tol = 1e-12) const;
};

/**
 * Triangle of a conforming triangulation.
 *
 * Vertex v[0] is the newest vertex; the refinement edge is (v[1], v[2]).
 * Bisection inserts the midpoint m of the refinement edge and replaces the
 * triangle by (m, v[0], v[1]) and (m, v[2], v[0]), both positively oriented
 * when the parent is.  `parent` is the id of the element in the *input* mesh
 * of the bisection pass this element descends from (-1 for elements of an
 * initial mesh); `generation` counts bisections since the initial mesh.
 */
struct Triangle {
    std::array<int, 3> v{};
    int parent = -1;
    int generation = 0;
};

/**
 * Mesh face (edge).  For interior faces both adjacent elements are recorded
 * with tplus the lower element id, and `normal` is the unit normal pointing
 * out of tplus; this orientation is fixed once at face construction so jump
 * quantities are well defined.  Boundary faces have tminus == -1 and an
 * outward (domain-exterior) normal.
 */
struct Face {
    std::array<int, 2> v{};
    int tplus = -1;
    int tminus = -1;
    Vec2 normal = Vec2::Zero();
    double length = 0.0;

    bool is_boundary() const { return tminus < 0; }
};

/// Thrown when a mesh fails a conformity or orientation check.
class mesh_error : public std::runtime_error {
public:
    explicit mesh_error(const std::string& what) : std::runtime_error(what) {}
};

/**
 * Immutable conforming triangulation of an axis-aligned rectangle.
 * Refinement returns a new mesh; see `bisect`.
 */
class Mesh {
public:
    Mesh() = default;
    /// Build from raw arrays (validates orientation and conformity).
    Mesh(Rect bbox, std::vector<Vec2> vertices, std::vector<Triangle> triangles);

    int num_vertices() const { return static_cast<int>(vertices_.size()); }
    int num_triangles() const { return static_cast<int>(triangles_.size()); }

    const Vec2& vertex(int i) const { return vertices_[i]; }
    const Triangle& triangle(int t) const { return triangles_[t]; }
    const std::vector<Vec2>& vertices() const { return vertices_; }
    const std::vector<Triangle>& triangles() const { return triangles_; }

    std::array<Vec2, 3> triangle_vertices(int t) const;
    double area(int t) const;
    double diameter(int t) const;
    Vec2 barycenter(int t) const;
    /// Smallest interior angle of element t, in radians.
    double min_angle(int t) const;

    const std::vector<Face>& interior_faces() const { return interior_faces_; }
    const std::vector<Face>& boundary_faces() const { return boundary_faces_; }
    bool vertex_on_boundary(int i) const { return vertex_boundary_[i] != 0; }
    /// Elements containing vertex i (ascending element ids).
    const std::vector<int>& vertex_patch(int i) const { return patches_[i]; }

    const Rect& bbox() const { return bbox_; }

    /// Re-run all structural checks; throws mesh_error on failure.
    void validate() const;

    /// Map barycentric coordinates in element t to a physical point.
    Vec2 point(int t, const Eigen::Vector3d& bary) const;
    /// Barycentric coordinates of a physical point with respect to element t.
    Eigen::Vector3d barycentric(int t, const Vec2& x) const;
    /// Brute-force point location; returns element id or -1.
    int locate(const Vec2& x, Eigen::Vector3d* bary = nullptr, double tol = 1e-10) const;

    /// Legacy-ASCII VTK export (triangles as cell type 5).
    void write_vtk(const std::string& path) const;
    /// Plain-text serialization; round-trips through read_text().
    void write_text(const std::string& path) const;
    static Mesh read_text(const std::string& path);

private:
    Rect bbox_;
    std::vector<Vec2> vertices_;
    std::vector<Triangle> triangles_;
    std::vector<Face> interior_faces_;
    std::vector<Face> boundary_faces_;
    std::vector<char> vertex_boundary_;
    std::vector<std::vector<int>> patches_;

    void build_topology();
};

/**
 * Uniform triangulation of `bbox` with grid spacing h0, which must divide
 * both side lengths.  Every grid cell is split along the same diagonal
 * (lower-left to upper-right); the refinement edge of both triangles is that
 * diagonal, so the initial tagging is mutually compatible and newest-vertex
 * bisection terminates.
 */
Mesh uniform_rect_mesh(const Rect& bbox, double h0);

/**
 * Newest-vertex bisection of the marked elements, with recursive completion
 * so the result is conforming.  Marked ids are processed in ascending order;
 * the input mesh is left untouched.
 */
Mesh bisect(const Mesh& mesh, const std::vector<int>& marked);

/**
 * Graded marking toward the circle of radius 1/2 centered at the origin:
 * element T is marked iff |T| > C * (dist of barycenter to radius 1/2)^2 / #T.
 * Pure function of (mesh, C); returns ascending element ids.
 */
std::vector<int> mark_graded(const Mesh& mesh, double C);

} // namespace hjbfem
