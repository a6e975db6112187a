#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hjbfem/mesh.hpp"

namespace hjbfem {

/// Descriptor of one global degree of freedom of the cubic Hermite space.
struct DofDescriptor {
    enum class Kind { VertexValue, VertexGradX, VertexGradY, CellValue };
    Kind kind;
    int location;     // vertex id for vertex DOFs, element id for cell DOFs
    int order;        // derivative order: 0 or 1
    Vec2 direction;   // derivative direction for order-1 DOFs
    bool on_boundary; // true when the carrying vertex lies on the domain boundary
};

/// Evaluation of all ten local basis functions at one point.
struct BasisEval {
    Eigen::Matrix<double, 10, 1> value;
    Eigen::Matrix<double, 10, 2> grad;  // columns: d/dx, d/dy
    Eigen::Matrix<double, 10, 3> hess;  // columns: dxx, dxy, dyy
};

/// Whether a coefficient vector ranges over free DOFs only (constrained DOFs
/// implicitly zero) or over all DOFs of the space.
enum class DofLayout { Free, Full };

/**
 * Cubic Hermite space on a triangulation: per vertex a value DOF and the two
 * Cartesian first-derivative DOFs, per element a barycenter value DOF.
 * Functions are C^0 on the mesh and C^1 at the vertices.
 *
 * Homogeneous Dirichlet constraints fix, at every boundary vertex, the value
 * DOF and the derivative DOF(s) tangential to each incident boundary face
 * (both derivative DOFs at corners).  Only axis-aligned boundaries are
 * supported; constrained DOFs are eliminated, and assembled operators act on
 * the free DOFs in ascending global order.
 *
 * The local basis on each element is computed once by inverting the 10x10
 * generalized Vandermonde matrix of the DOF functionals against monomials in
 * coordinates centered at the element centroid and scaled by its diameter.
 */
class HermiteSpace {
public:
    explicit HermiteSpace(const Mesh& mesh);

    const Mesh& mesh() const { return *mesh_; }

    int dim_total() const { return static_cast<int>(dofs_.size()); }
    int dim_free() const { return static_cast<int>(free_to_global_.size()); }

    const DofDescriptor& dof(int global) const { return dofs_[global]; }
    /// Free index of a global DOF, or -1 when constrained.
    int free_index(int global) const { return free_index_[global]; }
    int free_to_global(int free) const { return free_to_global_[free]; }

    /// Global DOF ids of element t in local basis order:
    /// (value, d/dx, d/dy) per vertex, then the barycenter value.
    std::array<int, 10> element_dofs(int t) const;

    /// Evaluate the local basis of element t at barycentric coordinates.
    BasisEval eval_basis(int t, const Eigen::Vector3d& bary) const;

    double eval_value(const Eigen::VectorXd& coeffs, int t, const Eigen::Vector3d& bary,
                      DofLayout layout = DofLayout::Free) const;
    Vec2 eval_gradient(const Eigen::VectorXd& coeffs, int t, const Eigen::Vector3d& bary,
                       DofLayout layout = DofLayout::Free) const;
    Mat2 eval_hessian(const Eigen::VectorXd& coeffs, int t, const Eigen::Vector3d& bary,
                      DofLayout layout = DofLayout::Free) const;

    /// Nodal interpolation of a smooth function (value + gradient callables).
    Eigen::VectorXd interpolate(const std::function<double(const Vec2&)>& f,
                                const std::function<Vec2(const Vec2&)>& grad,
                                DofLayout layout = DofLayout::Free) const;

    /// Gather the ten local coefficients of element t from a coefficient vector.
    Eigen::Matrix<double, 10, 1> gather(const Eigen::VectorXd& coeffs, int t,
                                        DofLayout layout = DofLayout::Free) const;

private:
    const Mesh* mesh_;
    std::vector<DofDescriptor> dofs_;
    std::vector<int> free_index_;
    std::vector<int> free_to_global_;

    struct ElementBasis {
        Eigen::Matrix<double, 10, 10> coeff; // basis_j = sum_k coeff(k,j) * monomial_k
        Vec2 center;
        double scale;
    };
    std::vector<ElementBasis> basis_;
};

/**
 * Continuous piecewise-linear space with one DOF per interior vertex
 * (homogeneous Dirichlet boundary).
 */
class P1Space {
public:
    explicit P1Space(const Mesh& mesh);

    const Mesh& mesh() const { return *mesh_; }
    int dim_free() const { return static_cast<int>(free_to_vertex_.size()); }
    /// Free index of a vertex, or -1 on the boundary.
    int vertex_index(int v) const { return vertex_index_[v]; }
    int free_to_vertex(int i) const { return free_to_vertex_[i]; }

    double eval_value(const Eigen::VectorXd& coeffs, int t, const Eigen::Vector3d& bary) const;
    Vec2 eval_gradient(const Eigen::VectorXd& coeffs, int t) const;

    /// Constant gradients of the three barycentric coordinates of element t.
    std::array<Vec2, 3> barycentric_gradients(int t) const;

private:
    const Mesh* mesh_;
    std::vector<int> vertex_index_;
    std::vector<int> free_to_vertex_;
};

/// Finite element function: a coefficient vector tagged with its space.
struct FeFunction {
    enum class Space { Hermite, P1 };
    Space space = Space::Hermite;
    Eigen::VectorXd coeffs;
};

/**
 * Matrix of vertex-value interpolation V_h -> V_0: row per interior vertex,
 * picking the value DOF of that vertex.  Acts on free coefficient vectors.
 */
Eigen::SparseMatrix<double, Eigen::RowMajor> nodal_interpolation(const HermiteSpace& vh,
                                                                 const P1Space& v0);

/**
 * DOF-averaging transfer V_0 -> V_h.  Each free Hermite DOF functional is
 * applied elementwise to the (discontinuous-gradient) P1 function and
 * averaged over the elements of its vertex patch; barycenter DOFs evaluate on
 * their single element.  For first-derivative DOFs at boundary vertices the
 * per-element sample on elements owning an incident boundary face is
 * (grad p . n)(n . t_dof) with n the outward boundary normal, which preserves
 * homogeneous tangential traces along the boundary.
 */
Eigen::SparseMatrix<double, Eigen::RowMajor> transfer(const HermiteSpace& vh, const P1Space& v0);

/// Sample a Hermite function on an nx-by-ny lattice over the mesh bbox as CSV
/// (columns x,y,value); points outside the mesh are skipped.
void write_lattice_csv(const HermiteSpace& vh, const Eigen::VectorXd& coeffs, int nx, int ny,
                       const std::string& path);

/// VTK export with vertex values of a Hermite function as point data.
void write_vtk_solution(const HermiteSpace& vh, const Eigen::VectorXd& coeffs,
                        const std::string& path);

} // namespace hjbfem
