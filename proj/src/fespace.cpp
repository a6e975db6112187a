#include "hjbfem/fespace.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace hjbfem {

namespace {

// Monomial basis 1, x, y, x^2, xy, y^2, x^3, x^2 y, x y^2, y^3 and its
// derivatives at a point t.
using Vec10 = Eigen::Matrix<double, 10, 1>;

Vec10 monomials(const Vec2& t) {
    const double x = t.x(), y = t.y();
    Vec10 m;
    m << 1, x, y, x * x, x * y, y * y, x * x * x, x * x * y, x * y * y, y * y * y;
    return m;
}

Vec10 monomials_dx(const Vec2& t) {
    const double x = t.x(), y = t.y();
    Vec10 m;
    m << 0, 1, 0, 2 * x, y, 0, 3 * x * x, 2 * x * y, y * y, 0;
    return m;
}

Vec10 monomials_dy(const Vec2& t) {
    const double x = t.x(), y = t.y();
    Vec10 m;
    m << 0, 0, 1, 0, x, 2 * y, 0, x * x, 2 * x * y, 3 * y * y;
    return m;
}

Vec10 monomials_dxx(const Vec2& t) {
    const double x = t.x(), y = t.y();
    Vec10 m;
    m << 0, 0, 0, 2, 0, 0, 6 * x, 2 * y, 0, 0;
    return m;
}

Vec10 monomials_dxy(const Vec2& t) {
    const double x = t.x(), y = t.y();
    Vec10 m;
    m << 0, 0, 0, 0, 1, 0, 0, 2 * x, 2 * y, 0;
    return m;
}

Vec10 monomials_dyy(const Vec2& t) {
    const double x = t.x(), y = t.y();
    Vec10 m;
    m << 0, 0, 0, 0, 0, 2, 0, 0, 2 * x, 6 * y;
    return m;
}

} // namespace

HermiteSpace::HermiteSpace(const Mesh& mesh) : mesh_(&mesh) {
    const int nv = mesh.num_vertices();
    const int nt = mesh.num_triangles();

    dofs_.reserve(3 * nv + nt);
    for (int v = 0; v < nv; ++v) {
        const bool bdry = mesh.vertex_on_boundary(v);
        dofs_.push_back({DofDescriptor::Kind::VertexValue, v, 0, Vec2::Zero(), bdry});
        dofs_.push_back({DofDescriptor::Kind::VertexGradX, v, 1, Vec2(1, 0), bdry});
        dofs_.push_back({DofDescriptor::Kind::VertexGradY, v, 1, Vec2(0, 1), bdry});
    }
    for (int t = 0; t < nt; ++t)
        dofs_.push_back({DofDescriptor::Kind::CellValue, t, 0, Vec2::Zero(), false});

    // Homogeneous Dirichlet data: zero values and zero tangential derivatives
    // along every boundary face.  Only axis-aligned boundaries are supported,
    // so the tangential constraint fixes an individual Cartesian derivative.
    std::vector<char> constrained(dofs_.size(), 0);
    for (const auto& f : mesh.boundary_faces()) {
        const Vec2 d = mesh.vertex(f.v[1]) - mesh.vertex(f.v[0]);
        const bool horizontal = std::abs(d.y()) <= 1e-12 * f.length;
        const bool vertical = std::abs(d.x()) <= 1e-12 * f.length;
        if (!horizontal && !vertical)
            throw std::invalid_argument("HermiteSpace: boundary faces must be axis-aligned");
        for (const int v : f.v) {
            constrained[3 * v] = 1;
            constrained[3 * v + (horizontal ? 1 : 2)] = 1;
        }
    }

    free_index_.assign(dofs_.size(), -1);
    for (size_t g = 0; g < dofs_.size(); ++g) {
        if (constrained[g]) continue;
        free_index_[g] = static_cast<int>(free_to_global_.size());
        free_to_global_.push_back(static_cast<int>(g));
    }

    // Per-element basis: invert the functional/monomial Vandermonde matrix in
    // centroid-centered, diameter-scaled coordinates (one Newton refinement of
    // the inverse keeps the Kronecker property near machine precision).
    basis_.resize(nt);
    for (int t = 0; t < nt; ++t) {
        const auto p = mesh.triangle_vertices(t);
        ElementBasis& eb = basis_[t];
        eb.center = (p[0] + p[1] + p[2]) / 3.0;
        eb.scale = mesh.diameter(t);
        Eigen::Matrix<double, 10, 10> V;
        for (int i = 0; i < 3; ++i) {
            const Vec2 ti = (p[i] - eb.center) / eb.scale;
            V.row(3 * i) = monomials(ti).transpose();
            V.row(3 * i + 1) = monomials_dx(ti).transpose() / eb.scale;
            V.row(3 * i + 2) = monomials_dy(ti).transpose() / eb.scale;
        }
        V.row(9) = monomials(Vec2::Zero()).transpose(); // centroid
        Eigen::Matrix<double, 10, 10> C = V.partialPivLu().inverse();
        C += C * (Eigen::Matrix<double, 10, 10>::Identity() - V * C);
        eb.coeff = C;
    }
}

std::array<int, 10> HermiteSpace::element_dofs(int t) const {
    const auto& tri = mesh_->triangle(t);
    std::array<int, 10> g;
    for (int i = 0; i < 3; ++i) {
        g[3 * i] = 3 * tri.v[i];
        g[3 * i + 1] = 3 * tri.v[i] + 1;
        g[3 * i + 2] = 3 * tri.v[i] + 2;
    }
    g[9] = 3 * mesh_->num_vertices() + t;
    return g;
}

BasisEval HermiteSpace::eval_basis(int t, const Eigen::Vector3d& bary) const {
    const ElementBasis& eb = basis_[t];
    const Vec2 x = mesh_->point(t, bary);
    const Vec2 tc = (x - eb.center) / eb.scale;
    const double s = eb.scale;

    BasisEval out;
    out.value = eb.coeff.transpose() * monomials(tc);
    out.grad.col(0) = eb.coeff.transpose() * monomials_dx(tc) / s;
    out.grad.col(1) = eb.coeff.transpose() * monomials_dy(tc) / s;
    out.hess.col(0) = eb.coeff.transpose() * monomials_dxx(tc) / (s * s);
    out.hess.col(1) = eb.coeff.transpose() * monomials_dxy(tc) / (s * s);
    out.hess.col(2) = eb.coeff.transpose() * monomials_dyy(tc) / (s * s);
    return out;
}

Eigen::Matrix<double, 10, 1> HermiteSpace::gather(const Eigen::VectorXd& coeffs, int t,
                                                  DofLayout layout) const {
    const auto dofs = element_dofs(t);
    Eigen::Matrix<double, 10, 1> local;
    for (int i = 0; i < 10; ++i) {
        if (layout == DofLayout::Full) {
            local[i] = coeffs[dofs[i]];
        } else {
            const int f = free_index_[dofs[i]];
            local[i] = f >= 0 ? coeffs[f] : 0.0;
        }
    }
    return local;
}

double HermiteSpace::eval_value(const Eigen::VectorXd& coeffs, int t, const Eigen::Vector3d& bary,
                                DofLayout layout) const {
    return eval_basis(t, bary).value.dot(gather(coeffs, t, layout));
}

Vec2 HermiteSpace::eval_gradient(const Eigen::VectorXd& coeffs, int t, const Eigen::Vector3d& bary,
                                 DofLayout layout) const {
    const BasisEval be = eval_basis(t, bary);
    const auto local = gather(coeffs, t, layout);
    return Vec2(be.grad.col(0).dot(local), be.grad.col(1).dot(local));
}

Mat2 HermiteSpace::eval_hessian(const Eigen::VectorXd& coeffs, int t, const Eigen::Vector3d& bary,
                                DofLayout layout) const {
    const BasisEval be = eval_basis(t, bary);
    const auto local = gather(coeffs, t, layout);
    Mat2 h;
    h(0, 0) = be.hess.col(0).dot(local);
    h(0, 1) = h(1, 0) = be.hess.col(1).dot(local);
    h(1, 1) = be.hess.col(2).dot(local);
    return h;
}

Eigen::VectorXd HermiteSpace::interpolate(const std::function<double(const Vec2&)>& f,
                                          const std::function<Vec2(const Vec2&)>& grad,
                                          DofLayout layout) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(layout == DofLayout::Full ? dim_total() : dim_free());
    const auto set = [&](int g, double v) {
        if (layout == DofLayout::Full) {
            out[g] = v;
        } else {
            const int fi = free_index_[g];
            if (fi >= 0) out[fi] = v;
        }
    };
    for (int v = 0; v < mesh_->num_vertices(); ++v) {
        const Vec2 p = mesh_->vertex(v);
        set(3 * v, f(p));
        const Vec2 g = grad(p);
        set(3 * v + 1, g.x());
        set(3 * v + 2, g.y());
    }
    for (int t = 0; t < mesh_->num_triangles(); ++t)
        set(3 * mesh_->num_vertices() + t, f(mesh_->barycenter(t)));
    return out;
}

P1Space::P1Space(const Mesh& mesh) : mesh_(&mesh) {
    vertex_index_.assign(mesh.num_vertices(), -1);
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        if (mesh.vertex_on_boundary(v)) continue;
        vertex_index_[v] = static_cast<int>(free_to_vertex_.size());
        free_to_vertex_.push_back(v);
    }
}

std::array<Vec2, 3> P1Space::barycentric_gradients(int t) const {
    const auto p = mesh_->triangle_vertices(t);
    Mat2 J;
    J.col(0) = p[1] - p[0];
    J.col(1) = p[2] - p[0];
    const Mat2 Jit = J.inverse().transpose();
    const Vec2 g1 = Jit.col(0);
    const Vec2 g2 = Jit.col(1);
    return {-g1 - g2, g1, g2};
}

double P1Space::eval_value(const Eigen::VectorXd& coeffs, int t, const Eigen::Vector3d& bary) const {
    const auto& tri = mesh_->triangle(t);
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
        const int idx = vertex_index_[tri.v[i]];
        if (idx >= 0) s += bary[i] * coeffs[idx];
    }
    return s;
}

Vec2 P1Space::eval_gradient(const Eigen::VectorXd& coeffs, int t) const {
    const auto g = barycentric_gradients(t);
    const auto& tri = mesh_->triangle(t);
    Vec2 s = Vec2::Zero();
    for (int i = 0; i < 3; ++i) {
        const int idx = vertex_index_[tri.v[i]];
        if (idx >= 0) s += coeffs[idx] * g[i];
    }
    return s;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> nodal_interpolation(const HermiteSpace& vh,
                                                                 const P1Space& v0) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(v0.dim_free());
    for (int i = 0; i < v0.dim_free(); ++i) {
        const int v = v0.free_to_vertex(i);
        const int f = vh.free_index(3 * v);
        if (f < 0) throw std::logic_error("nodal_interpolation: interior value DOF is constrained");
        trips.emplace_back(i, f, 1.0);
    }
    Eigen::SparseMatrix<double, Eigen::RowMajor> m(v0.dim_free(), vh.dim_free());
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> transfer(const HermiteSpace& vh, const P1Space& v0) {
    const Mesh& mesh = vh.mesh();
    std::vector<Eigen::Triplet<double>> trips;

    // Boundary faces incident to each element, for the boundary derivative rule.
    std::vector<std::vector<const Face*>> elem_bdry_faces(mesh.num_triangles());
    for (const auto& f : mesh.boundary_faces()) elem_bdry_faces[f.tplus].push_back(&f);

    const auto add_gradient_row = [&](int row, int v, const Vec2& dir) {
        const auto& patch = mesh.vertex_patch(v);
        const double inv_n = 1.0 / static_cast<double>(patch.size());
        for (const int t : patch) {
            // Derivative functional applied to p|_T.  On elements carrying a
            // boundary face at this vertex, sample (grad p . n)(n . dir)
            // averaged over those faces; otherwise the plain directional
            // derivative.
            Vec2 weight_dir = dir;
            if (mesh.vertex_on_boundary(v)) {
                std::vector<const Face*> incident;
                for (const Face* f : elem_bdry_faces[t])
                    if (f->v[0] == v || f->v[1] == v) incident.push_back(f);
                if (!incident.empty()) {
                    Vec2 acc = Vec2::Zero();
                    for (const Face* f : incident) acc += f->normal * (f->normal.dot(dir));
                    weight_dir = acc / static_cast<double>(incident.size());
                }
            }
            const auto g = vh.mesh().triangle(t).v;
            const auto grads = v0.barycentric_gradients(t);
            for (int i = 0; i < 3; ++i) {
                const int col = v0.vertex_index(g[i]);
                if (col >= 0) trips.emplace_back(row, col, inv_n * grads[i].dot(weight_dir));
            }
        }
    };

    for (int fi = 0; fi < vh.dim_free(); ++fi) {
        const int g = vh.free_to_global(fi);
        const DofDescriptor& d = vh.dof(g);
        switch (d.kind) {
        case DofDescriptor::Kind::VertexValue: {
            // p is continuous: averaging over the patch reduces to evaluation.
            const int col = v0.vertex_index(d.location);
            if (col >= 0) trips.emplace_back(fi, col, 1.0);
            break;
        }
        case DofDescriptor::Kind::VertexGradX:
        case DofDescriptor::Kind::VertexGradY:
            add_gradient_row(fi, d.location, d.direction);
            break;
        case DofDescriptor::Kind::CellValue: {
            // Barycenter evaluation on the single owning element.
            const auto& tri = mesh.triangle(d.location);
            for (int i = 0; i < 3; ++i) {
                const int col = v0.vertex_index(tri.v[i]);
                if (col >= 0) trips.emplace_back(fi, col, 1.0 / 3.0);
            }
            break;
        }
        }
    }

    Eigen::SparseMatrix<double, Eigen::RowMajor> m(vh.dim_free(), v0.dim_free());
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

void write_lattice_csv(const HermiteSpace& vh, const Eigen::VectorXd& coeffs, int nx, int ny,
                       const std::string& path) {
    if (nx < 2 || ny < 2) throw std::invalid_argument("write_lattice_csv: need at least a 2x2 lattice");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_lattice_csv: cannot open " + path);
    out.precision(17);
    const Rect& r = vh.mesh().bbox();
    out << "x,y,value\n";
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const Vec2 p(r.x0 + r.width() * i / (nx - 1), r.y0 + r.height() * j / (ny - 1));
            Eigen::Vector3d bary;
            const int t = vh.mesh().locate(p, &bary);
            if (t < 0) continue;
            out << p.x() << "," << p.y() << "," << vh.eval_value(coeffs, t, bary) << "\n";
        }
    }
}

void write_vtk_solution(const HermiteSpace& vh, const Eigen::VectorXd& coeffs,
                        const std::string& path) {
    vh.mesh().write_vtk(path);
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("write_vtk_solution: cannot open " + path);
    out.precision(17);
    out << "POINT_DATA " << vh.mesh().num_vertices() << "\n"
        << "SCALARS value double 1\n"
        << "LOOKUP_TABLE default\n";
    for (int v = 0; v < vh.mesh().num_vertices(); ++v) {
        const int f = vh.free_index(3 * v);
        out << (f >= 0 ? coeffs[f] : 0.0) << "\n";
    }
}

} // namespace hjbfem
