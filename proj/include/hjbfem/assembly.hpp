#pragma once

#include <Eigen/SparseCore>
#include <string>
#include <vector>

#include "hjbfem/coefficients.hpp"
#include "hjbfem/fespace.hpp"

namespace hjbfem {

/// Sparse matrix over the free DOFs of a space, tagged with its symmetry class.
struct SparseOperator {
    enum class Symmetry { Spd, General };

    Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;
    Symmetry symmetry = Symmetry::General;

    int dim() const { return static_cast<int>(matrix.rows()); }
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const { return matrix * v; }
};

/**
 * The three lambda-independent pieces of the energy inner product
 *
 *   (w,v) = sum_T (D^2 w, D^2 v)_T + 2 lambda (grad w, grad v) + lambda^2 (w, v):
 *
 * `hess` + 2 lambda `grad` + lambda^2 `mass`.  Assembled once per mesh and
 * combined per lambda.
 */
struct EnergyParts {
    SparseOperator hess, grad, mass;
    SparseOperator combine(double lambda) const;
};

EnergyParts assemble_energy_parts(const HermiteSpace& vh, int quad_degree = 6,
                                  const std::vector<int>* element_order = nullptr);

/// Energy inner-product operator at a fixed lambda (SPD on the free DOFs).
SparseOperator assemble_energy(const HermiteSpace& vh, double lambda, int quad_degree = 6);

/// Which test functional multiplies the renormalized operator/load:
/// LLambda uses (Laplacian v - lambda v); Delta uses the bare Laplacian.
enum class RhsMode { LLambda, Delta };

/**
 * Nonsymmetric operator of the linearized problem
 *
 *   b(w,v) = sum_T (gamma (A:D^2 w + b . grad w - c w), Lap v - lambda v)_T
 *          - (2 - sqrt(1 - eps)) sum_F <[[grad w]], Lap_T v - lambda v>_F
 *
 * over interior faces F, with [[grad w]] the scalar normal jump and Lap_T the
 * second tangential derivative of the (single-valued) trace.  gamma is
 * computed pointwise from the frozen coefficients via cordes_gamma.
 */
SparseOperator assemble_linearized(const HermiteSpace& vh, const FrozenCoefficients& coeffs,
                                   const std::vector<int>* element_order = nullptr);

/// Load vector sum_T (gamma f, Lap v - lambda v)_T (or bare Laplacian test
/// functional under RhsMode::Delta).
Eigen::VectorXd assemble_load(const HermiteSpace& vh, const FrozenCoefficients& coeffs,
                              RhsMode mode = RhsMode::LLambda);

/// Piecewise-linear stiffness and mass matrices on the interior vertices
/// (exact closed-form element integrals).
struct P1Matrices {
    SparseOperator stiffness, mass;
};
P1Matrices assemble_p1(const P1Space& v0);

/**
 * Relative defect of the elementwise Laplacian identity
 *
 *   sum_T ||Lap v||^2_T = sum_T ||D^2 v||^2_T + 2 sum_F <[[grad v]], Lap_T v>_F
 *
 * for a function v over the free DOFs (zero on the boundary).  Near machine
 * epsilon on conforming meshes; this is the main structural check of the
 * face-jump machinery.
 */
double miranda_talenti_residual(const HermiteSpace& vh, const Eigen::VectorXd& v);

/// Matrix Market (coordinate, real, general) export.
void write_matrix_market(const SparseOperator& op, const std::string& path);

} // namespace hjbfem
