#pragma once

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include "hjbfem/assembly.hpp"

namespace hjbfem {

/**
 * Gauss-Seidel smoother for a sparse operator with nonzero diagonal.  Each
 * application runs `sweeps` full sweeps on A x = r starting from x = 0, so the
 * smoother is a fixed linear operator.  Forward sweeps ascend the free-DOF
 * order; the adjoint runs descending sweeps; the symmetric variant composes
 * the two via
 *
 *   x = R r;  x += R' (r - A x),
 *
 * equivalently I - Rbar A = (I - R' A)(I - R A).
 */
class GsSmoother {
public:
    explicit GsSmoother(const SparseOperator& a, int sweeps = 3);

    int sweeps() const { return sweeps_; }

    /// Forward smoother R.
    Eigen::VectorXd apply(const Eigen::VectorXd& r) const;
    /// Adjoint (backward) smoother R'.
    Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& r) const;
    /// Symmetrized smoother Rbar.
    Eigen::VectorXd apply_symmetric(const Eigen::VectorXd& r) const;

private:
    enum class Direction { Forward, Backward };
    void sweep(Eigen::VectorXd& x, const Eigen::VectorXd& r, Direction dir) const;

    const SparseOperator* a_;
    int sweeps_;
};

/// One Jacobi step: x_i = r_i / A_ii.  Throws on a zero diagonal entry.
Eigen::VectorXd jacobi_apply(const SparseOperator& a, const Eigen::VectorXd& r);

/**
 * Coarse-space smoother on the piecewise-linear space.  With stiffness S and
 * mass M over the interior vertices, one application maps f to
 *
 *   z = (lambda M + S)^{-1} f,   u = (lambda M + S)^{-1} M z,
 *
 * i.e. u = R0 f with R0^{-1} = (lambda M + S) M^{-1} (lambda M + S), which is
 * symmetric positive definite.  The shifted solves use a sparse Cholesky
 * factorization by default, or diagonally preconditioned conjugate gradients
 * with a relative-residual stopping criterion.
 */
class CoarseSmoother {
public:
    enum class InnerSolver { Factorize, DiagonalCg };

    /// Cumulative solver diagnostics across applications.
    struct Stats {
        int applications = 0;
        long iterations = 0;        // CG iterations (zero for factorized solves)
        double max_rel_residual = 0.0;
    };

    CoarseSmoother(const P1Matrices& p1, double lambda,
                   InnerSolver solver = InnerSolver::Factorize, double tol = 1e-8,
                   int max_iterations = 10000);
    CoarseSmoother(const CoarseSmoother&) = delete;
    CoarseSmoother& operator=(const CoarseSmoother&) = delete;

    int dim() const { return static_cast<int>(shifted_.rows()); }
    double lambda() const { return lambda_; }
    const Eigen::SparseMatrix<double>& mass() const { return mass_; }
    /// The shifted operator lambda M + S.
    const Eigen::SparseMatrix<double>& shifted() const { return shifted_; }
    const Stats& stats() const { return stats_; }

    /// Apply R0; throws a runtime error if an inner solve fails to converge.
    Eigen::VectorXd apply(const Eigen::VectorXd& f) const;

private:
    Eigen::VectorXd solve_shifted(const Eigen::VectorXd& rhs) const;

    double lambda_;
    InnerSolver mode_;
    Eigen::SparseMatrix<double> mass_, shifted_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg_;
    mutable Stats stats_;
};

} // namespace hjbfem
