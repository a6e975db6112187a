#include "hjbfem/precond.hpp"

#include <Eigen/Cholesky>
#include <random>
#include <stdexcept>

namespace hjbfem {

namespace {

void check_shapes(const SparseOperator& a, const Eigen::SparseMatrix<double, Eigen::RowMajor>& pi0,
                  const CoarseSmoother* coarse) {
    if (pi0.rows() != a.dim())
        throw std::invalid_argument("preconditioner: transfer rows must match the fine dimension");
    if (coarse && pi0.cols() != coarse->dim())
        throw std::invalid_argument("preconditioner: transfer columns must match the coarse dimension");
}

} // namespace

AdditivePreconditioner::AdditivePreconditioner(
    const SparseOperator& a, const Eigen::SparseMatrix<double, Eigen::RowMajor>& pi0,
    const CoarseSmoother* coarse, double omega, FineSmoother smoother, int sweeps)
    : a_(&a), gs_(a, sweeps), pi0_(pi0), pi0t_(pi0.transpose()), coarse_(coarse), omega_(omega),
      smoother_(smoother) {
    if (omega < 0.0) throw std::invalid_argument("AdditivePreconditioner: omega must be >= 0");
    check_shapes(a, pi0, coarse);
}

Eigen::VectorXd AdditivePreconditioner::apply(const Eigen::VectorXd& r) const {
    Eigen::VectorXd x =
        smoother_ == FineSmoother::SymmetricGs ? gs_.apply_symmetric(r) : jacobi_apply(*a_, r);
    if (coarse_ && omega_ > 0.0) x += omega_ * (pi0_ * coarse_->apply(pi0t_ * r));
    return x;
}

MultiplicativePreconditioner::MultiplicativePreconditioner(
    const SparseOperator& a, const Eigen::SparseMatrix<double, Eigen::RowMajor>& pi0,
    const CoarseSmoother* coarse, int sweeps)
    : a_(&a), gs_(a, sweeps), pi0_(pi0), pi0t_(pi0.transpose()), coarse_(coarse) {
    check_shapes(a, pi0, coarse);
}

Eigen::VectorXd MultiplicativePreconditioner::apply(const Eigen::VectorXd& r) const {
    Eigen::VectorXd x = gs_.apply_adjoint(r);
    if (coarse_) x += pi0_ * coarse_->apply(pi0t_ * (r - a_->matrix * x));
    x += gs_.apply(r - a_->matrix * x);
    return x;
}

FovConstants fov_constants(const Preconditioner& p, const SparseOperator& b, int samples,
                           std::uint64_t seed, const SparseOperator* surrogate_ip) {
    if (b.dim() != p.dim()) throw std::invalid_argument("fov_constants: dimension mismatch");
    if (samples < 1) throw std::invalid_argument("fov_constants: need at least one sample");
    const int n = p.dim();

    Eigen::LLT<Eigen::MatrixXd> p_llt;
    if (!surrogate_ip) {
        Eigen::MatrixXd dense(n, n);
        for (int j = 0; j < n; ++j) dense.col(j) = p.apply(Eigen::VectorXd::Unit(n, j));
        p_llt.compute(0.5 * (dense + dense.transpose()));
        if (p_llt.info() != Eigen::Success)
            throw std::runtime_error("fov_constants: preconditioner is not positive definite");
    } else if (surrogate_ip->dim() != n) {
        throw std::invalid_argument("fov_constants: surrogate inner product dimension mismatch");
    }

    std::mt19937_64 eng(seed);
    const auto symmetric = [&eng] { return 2.0 * ((eng() >> 11) * 0x1.0p-53) - 1.0; };
    FovConstants out;
    out.samples = samples;
    for (int k = 0; k < samples; ++k) {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v(i) = symmetric();
        const Eigen::VectorXd bv = b.apply(v);
        const Eigen::VectorXd pbv = p.apply(bv);
        double denom, num_low, num_up;
        if (surrogate_ip) {
            denom = v.dot(surrogate_ip->apply(v));
            num_low = v.dot(surrogate_ip->apply(pbv));
            num_up = pbv.dot(surrogate_ip->apply(pbv));
        } else {
            // (v, PBv)_{P^{-1}} = v^T B v and ||PBv||^2_{P^{-1}} = (Bv)^T P (Bv).
            denom = v.dot(p_llt.solve(v));
            num_low = v.dot(bv);
            num_up = bv.dot(pbv);
        }
        const double low = num_low / denom;
        const double up = std::sqrt(std::max(num_up, 0.0) / denom);
        if (k == 0) {
            out.lower = low;
            out.upper = up;
        } else {
            out.lower = std::min(out.lower, low);
            out.upper = std::max(out.upper, up);
        }
    }
    return out;
}

} // namespace hjbfem
