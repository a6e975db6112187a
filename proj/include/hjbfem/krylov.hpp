#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hjbfem/assembly.hpp"
#include "hjbfem/precond.hpp"

namespace hjbfem {

/// Action of a linear operator on a vector.
using LinOp = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct KrylovConfig {
    enum class Residual { Preconditioned, Unpreconditioned };

    double tol = 1e-6;
    int max_iterations = 500;
    int restart = 0; // 0 = full (unrestarted) GMRES
    Residual residual = Residual::Preconditioned;
};

/// Outcome of an iterative solve.  `history[k]` is the relative residual
/// after k iterations (history[0] = 1); non-convergence is reported through
/// `converged`, never thrown.
struct SolveResult {
    Eigen::VectorXd x;
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;
};

/**
 * Left-preconditioned GMRES on P B x = P rhs with zero initial guess, modified
 * Gram-Schmidt Arnoldi and Givens rotations.  Under the (default)
 * preconditioned-residual convention convergence is declared when
 * ||P(rhs - B x)||_2 / ||P rhs||_2 <= tol, which is the norm GMRES minimizes;
 * the unpreconditioned convention tests ||rhs - B x||_2 / ||rhs||_2 instead.
 */
SolveResult gmres(const SparseOperator& b, const LinOp& p, const Eigen::VectorXd& rhs,
                  const KrylovConfig& cfg = {});
SolveResult gmres(const SparseOperator& b, const Preconditioner& p, const Eigen::VectorXd& rhs,
                  const KrylovConfig& cfg = {});

/// Preconditioned conjugate gradients for SPD systems; converges on the true
/// relative residual ||rhs - A x|| / ||rhs|| regardless of cfg.residual.
SolveResult pcg(const SparseOperator& a, const LinOp& m, const Eigen::VectorXd& rhs,
                const KrylovConfig& cfg = {});
SolveResult pcg(const SparseOperator& a, const Preconditioner& m, const Eigen::VectorXd& rhs,
                const KrylovConfig& cfg = {});

/// Extreme-eigenvalue estimate of a preconditioned SPD operator P A.
struct SpectrumEstimate {
    enum class Method { Dense, Lanczos };

    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double kappa = 0.0;
    Method method = Method::Dense;
    int size = 0;       // operator dimension
    int iterations = 0; // Lanczos steps (0 for the dense path)
};

struct ConditionConfig {
    int dense_threshold = 4000; // use the dense eigensolver up to this dimension
    int max_lanczos = 400;
    std::uint64_t seed = 20240817;
};

/**
 * Condition number of P A for SPD P and A.  Small problems form P densely and
 * solve the symmetric eigenproblem of L^T A L with P = L L^T (similar to PA);
 * larger ones run Lanczos on P A in the A-inner product, where it is
 * self-adjoint, with full reorthogonalization against cached A-products and a
 * fixed seed.  Breakdown restarts with a fresh random vector.
 */
SpectrumEstimate estimate_condition(const SparseOperator& a, const Preconditioner& p,
                                    const ConditionConfig& cfg = {});

} // namespace hjbfem
