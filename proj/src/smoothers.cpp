#include "hjbfem/smoothers.hpp"

#include <sstream>
#include <stdexcept>

namespace hjbfem {

namespace {

void check_diagonal(const SparseOperator& a) {
    const Eigen::VectorXd d = a.matrix.diagonal();
    for (int i = 0; i < d.size(); ++i)
        if (d(i) == 0.0)
            throw std::runtime_error("smoother: zero diagonal entry at row " + std::to_string(i));
}

} // namespace

GsSmoother::GsSmoother(const SparseOperator& a, int sweeps) : a_(&a), sweeps_(sweeps) {
    if (sweeps < 1) throw std::invalid_argument("GsSmoother: sweep count must be at least 1");
    check_diagonal(a);
}

void GsSmoother::sweep(Eigen::VectorXd& x, const Eigen::VectorXd& r, Direction dir) const {
    const auto& m = a_->matrix;
    const int n = static_cast<int>(m.rows());
    for (int k = 0; k < n; ++k) {
        const int i = dir == Direction::Forward ? k : n - 1 - k;
        double sum = r(i);
        double diag = 0.0;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(m, i); it; ++it) {
            if (it.col() == i)
                diag = it.value();
            else
                sum -= it.value() * x(it.col());
        }
        x(i) = sum / diag;
    }
}

Eigen::VectorXd GsSmoother::apply(const Eigen::VectorXd& r) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(r.size());
    for (int s = 0; s < sweeps_; ++s) sweep(x, r, Direction::Forward);
    return x;
}

Eigen::VectorXd GsSmoother::apply_adjoint(const Eigen::VectorXd& r) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(r.size());
    for (int s = 0; s < sweeps_; ++s) sweep(x, r, Direction::Backward);
    return x;
}

Eigen::VectorXd GsSmoother::apply_symmetric(const Eigen::VectorXd& r) const {
    Eigen::VectorXd x = apply(r);
    x += apply_adjoint(r - a_->matrix * x);
    return x;
}

Eigen::VectorXd jacobi_apply(const SparseOperator& a, const Eigen::VectorXd& r) {
    check_diagonal(a);
    return r.cwiseQuotient(a.matrix.diagonal());
}

CoarseSmoother::CoarseSmoother(const P1Matrices& p1, double lambda, InnerSolver solver, double tol,
                               int max_iterations)
    : lambda_(lambda), mode_(solver) {
    if (!(lambda > 0.0)) throw std::invalid_argument("CoarseSmoother: lambda must be positive");
    mass_ = Eigen::SparseMatrix<double>(p1.mass.matrix);
    shifted_ = lambda * mass_ + Eigen::SparseMatrix<double>(p1.stiffness.matrix);
    shifted_.makeCompressed();
    if (mode_ == InnerSolver::Factorize) {
        ldlt_.compute(shifted_);
        if (ldlt_.info() != Eigen::Success)
            throw std::runtime_error("CoarseSmoother: Cholesky factorization failed");
    } else {
        cg_.setTolerance(tol);
        cg_.setMaxIterations(max_iterations);
        cg_.compute(shifted_);
    }
}

Eigen::VectorXd CoarseSmoother::solve_shifted(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x;
    if (mode_ == InnerSolver::Factorize) {
        x = ldlt_.solve(rhs);
    } else {
        x = cg_.solve(rhs);
        stats_.iterations += cg_.iterations();
        if (cg_.info() != Eigen::Success) {
            std::ostringstream msg;
            msg << "CoarseSmoother: inner solve stalled at relative residual " << cg_.error()
                << " after " << cg_.iterations() << " iterations";
            throw std::runtime_error(msg.str());
        }
    }
    const double scale = rhs.norm();
    if (scale > 0.0)
        stats_.max_rel_residual =
            std::max(stats_.max_rel_residual, (rhs - shifted_ * x).norm() / scale);
    return x;
}

Eigen::VectorXd CoarseSmoother::apply(const Eigen::VectorXd& f) const {
    if (f.size() != shifted_.rows())
        throw std::invalid_argument("CoarseSmoother: dimension mismatch");
    ++stats_.applications;
    const Eigen::VectorXd z = solve_shifted(f);
    return solve_shifted(mass_ * z);
}

} // namespace hjbfem
