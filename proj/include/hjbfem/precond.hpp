#pragma once

#include <cstdint>

#include "hjbfem/assembly.hpp"
#include "hjbfem/smoothers.hpp"

namespace hjbfem {

/// Abstract SPD preconditioner: r -> (approximate inverse) r.
class Preconditioner {
public:
    virtual ~Preconditioner() = default;
    virtual Eigen::VectorXd apply(const Eigen::VectorXd& r) const = 0;
    virtual int dim() const = 0;
};

enum class FineSmoother { SymmetricGs, Jacobi };

/**
 * Additive two-level preconditioner
 *
 *   P_a r = Rbar r + omega * Pi0 R0 (Pi0^T r),
 *
 * with Rbar the symmetrized fine smoother (or a Jacobi step), Pi0 the
 * coarse-to-fine transfer matrix, and R0 the coarse smoother.  Passing a null
 * coarse smoother (or omega = 0) drops the coarse branch exactly.  The
 * operator and coarse smoother are referenced, not owned, and must outlive
 * the preconditioner.
 */
class AdditivePreconditioner : public Preconditioner {
public:
    AdditivePreconditioner(const SparseOperator& a,
                           const Eigen::SparseMatrix<double, Eigen::RowMajor>& pi0,
                           const CoarseSmoother* coarse, double omega = 1.0,
                           FineSmoother smoother = FineSmoother::SymmetricGs, int sweeps = 3);

    Eigen::VectorXd apply(const Eigen::VectorXd& r) const override;
    int dim() const override { return a_->dim(); }

private:
    const SparseOperator* a_;
    GsSmoother gs_;
    Eigen::SparseMatrix<double, Eigen::RowMajor> pi0_, pi0t_;
    const CoarseSmoother* coarse_;
    double omega_;
    FineSmoother smoother_;
};

/**
 * Multiplicative two-level preconditioner defined through its error
 * propagator I - P_m A = (I - R A)(I - Pi0 R0 Pi0^T A)(I - R' A): one
 * application runs
 *
 *   x = R' r;  x += Pi0 R0 Pi0^T (r - A x);  x += R (r - A x).
 *
 * A null coarse smoother drops the middle stage, leaving the adjoint-first
 * symmetrized smoother.  P_m is SPD whenever the fine smoother contracts in
 * the energy norm.
 */
class MultiplicativePreconditioner : public Preconditioner {
public:
    MultiplicativePreconditioner(const SparseOperator& a,
                                 const Eigen::SparseMatrix<double, Eigen::RowMajor>& pi0,
                                 const CoarseSmoother* coarse, int sweeps = 3);

    Eigen::VectorXd apply(const Eigen::VectorXd& r) const override;
    int dim() const override { return a_->dim(); }

private:
    const SparseOperator* a_;
    GsSmoother gs_;
    Eigen::SparseMatrix<double, Eigen::RowMajor> pi0_, pi0t_;
    const CoarseSmoother* coarse_;
};

/**
 * Sampled field-of-values constants of the preconditioned operator P B in the
 * P^{-1}-inner product:
 *
 *   lower = min_v (v, P B v)_{P^{-1}} / (v, v)_{P^{-1}},
 *   upper = max_v ||P B v||_{P^{-1}} / ||v||_{P^{-1}},
 *
 * over `samples` random vectors.  By default the P^{-1}-inner products are
 * evaluated exactly through a dense factorization of P (small problems only);
 * passing `surrogate_ip` replaces them by that SPD operator's inner product,
 * which scales to large problems.
 */
struct FovConstants {
    double lower = 0.0;
    double upper = 0.0;
    int samples = 0;
};

FovConstants fov_constants(const Preconditioner& p, const SparseOperator& b, int samples,
                           std::uint64_t seed, const SparseOperator* surrogate_ip = nullptr);

} // namespace hjbfem
