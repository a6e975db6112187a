#include "hjbfem/krylov.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace hjbfem {

namespace {

void check_config(const KrylovConfig& cfg) {
    if (!(cfg.tol > 0.0 && cfg.tol < 1.0)) {
        throw std::invalid_argument("krylov: tolerance must lie in (0, 1)");
    }
    if (cfg.max_iterations < 1) {
        throw std::invalid_argument("krylov: max_iterations must be at least 1");
    }
    if (cfg.restart < 0) {
        throw std::invalid_argument("krylov: restart must be non-negative");
    }
}

void check_rhs(const SparseOperator& op, const Eigen::VectorXd& rhs) {
    if (rhs.size() != op.dim()) {
        throw std::invalid_argument("krylov: right-hand side size does not match the operator");
    }
}

struct GivensRotation {
    double c = 1.0;
    double s = 0.0;
};

Eigen::VectorXd solve_projected(const Eigen::MatrixXd& h, const Eigen::VectorXd& g, int k) {
    for (int i = 0; i < k; ++i) {
        if (h(i, i) == 0.0) throw std::runtime_error("gmres: singular projected system");
    }
    return h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
}

} // namespace

SolveResult gmres(const SparseOperator& b, const LinOp& p, const Eigen::VectorXd& rhs,
                  const KrylovConfig& cfg) {
    check_config(cfg);
    check_rhs(b, rhs);
    const bool precond_norm = cfg.residual == KrylovConfig::Residual::Preconditioned;

    SolveResult out;
    out.x = Eigen::VectorXd::Zero(b.dim());

    const double rhs_norm = rhs.norm();
    const double prhs_norm = p(rhs).norm();
    const double ref = precond_norm ? prhs_norm : rhs_norm;
    if (ref == 0.0) {
        out.converged = true;
        out.history = {0.0};
        return out;
    }
    out.history = {1.0};

    const int cycle_cap = cfg.restart > 0 ? cfg.restart : cfg.max_iterations;
    int total = 0;
    while (total < cfg.max_iterations && !out.converged) {
        Eigen::VectorXd r = p(rhs - b.apply(out.x));
        const double beta = r.norm();
        if (beta == 0.0) {
            out.converged = true;
            break;
        }

        const int m = std::min(cycle_cap, cfg.max_iterations - total);
        std::vector<Eigen::VectorXd> v;
        v.reserve(m + 1);
        v.push_back(r / beta);
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m + 1, m);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(m + 1);
        g(0) = beta;
        std::vector<GivensRotation> rotations;
        rotations.reserve(m);

        for (int j = 0; j < m; ++j) {
            // modified Gram-Schmidt Arnoldi step
            Eigen::VectorXd w = p(b.apply(v[j]));
            for (int i = 0; i <= j; ++i) {
                h(i, j) = w.dot(v[i]);
                w -= h(i, j) * v[i];
            }
            const double wnorm = w.norm();
            h(j + 1, j) = wnorm;
            if (wnorm > 0.0) v.push_back(w / wnorm);

            for (int i = 0; i < j; ++i) {
                const double t = rotations[i].c * h(i, j) + rotations[i].s * h(i + 1, j);
                h(i + 1, j) = -rotations[i].s * h(i, j) + rotations[i].c * h(i + 1, j);
                h(i, j) = t;
            }
            const double denom = std::hypot(h(j, j), h(j + 1, j));
            GivensRotation rot;
            if (denom > 0.0) {
                rot.c = h(j, j) / denom;
                rot.s = h(j + 1, j) / denom;
            }
            rotations.push_back(rot);
            h(j, j) = denom;
            h(j + 1, j) = 0.0;
            g(j + 1) = -rot.s * g(j);
            g(j) = rot.c * g(j);

            ++total;
            const int k = j + 1;
            double rel;
            Eigen::VectorXd candidate;
            if (precond_norm) {
                // |g(k)| is the preconditioned residual norm of the best
                // iterate in the current Krylov space
                rel = std::abs(g(k)) / prhs_norm;
            } else {
                Eigen::VectorXd y = solve_projected(h, g, k);
                candidate = out.x;
                for (int i = 0; i < k; ++i) candidate += y(i) * v[i];
                rel = (rhs - b.apply(candidate)).norm() / rhs_norm;
            }
            out.history.push_back(rel);
            out.iterations = total;
            if (rel <= cfg.tol) out.converged = true;

            if (out.converged || wnorm == 0.0 || j == m - 1 || total == cfg.max_iterations) {
                if (precond_norm || candidate.size() == 0) {
                    Eigen::VectorXd y = solve_projected(h, g, k);
                    candidate = out.x;
                    for (int i = 0; i < k; ++i) candidate += y(i) * v[i];
                }
                out.x = candidate;
                break; // end of cycle: converged, breakdown, or restart in the outer loop
            }
        }
    }
    return out;
}

SolveResult gmres(const SparseOperator& b, const Preconditioner& p, const Eigen::VectorXd& rhs,
                  const KrylovConfig& cfg) {
    if (p.dim() != b.dim()) {
        throw std::invalid_argument("gmres: preconditioner dimension does not match the operator");
    }
    return gmres(b, LinOp([&p](const Eigen::VectorXd& r) { return p.apply(r); }), rhs, cfg);
}

SolveResult pcg(const SparseOperator& a, const LinOp& m, const Eigen::VectorXd& rhs,
                const KrylovConfig& cfg) {
    check_config(cfg);
    check_rhs(a, rhs);

    SolveResult out;
    out.x = Eigen::VectorXd::Zero(a.dim());
    const double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) {
        out.converged = true;
        out.history = {0.0};
        return out;
    }
    out.history = {1.0};

    Eigen::VectorXd r = rhs;
    Eigen::VectorXd z = m(r);
    Eigen::VectorXd d = z;
    double rz = r.dot(z);
    for (int it = 1; it <= cfg.max_iterations; ++it) {
        const Eigen::VectorXd ad = a.apply(d);
        const double dad = d.dot(ad);
        if (dad <= 0.0) throw std::runtime_error("pcg: operator is not positive definite");
        const double alpha = rz / dad;
        out.x += alpha * d;
        r -= alpha * ad;

        const double rel = r.norm() / rhs_norm;
        out.history.push_back(rel);
        out.iterations = it;
        if (rel <= cfg.tol) {
            out.converged = true;
            break;
        }

        z = m(r);
        const double rz_next = r.dot(z);
        if (rz_next <= 0.0) break; // indefinite preconditioner: report non-convergence
        d = z + (rz_next / rz) * d;
        rz = rz_next;
    }
    return out;
}

SolveResult pcg(const SparseOperator& a, const Preconditioner& m, const Eigen::VectorXd& rhs,
                const KrylovConfig& cfg) {
    if (m.dim() != a.dim()) {
        throw std::invalid_argument("pcg: preconditioner dimension does not match the operator");
    }
    return pcg(a, LinOp([&m](const Eigen::VectorXd& r) { return m.apply(r); }), rhs, cfg);
}

namespace {

SpectrumEstimate dense_condition(const SparseOperator& a, const Preconditioner& p) {
    const int n = a.dim();
    Eigen::MatrixXd pd(n, n);
    Eigen::VectorXd unit = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        unit(i) = 1.0;
        pd.col(i) = p.apply(unit);
        unit(i) = 0.0;
    }
    pd = 0.5 * (pd + pd.transpose()).eval();
    Eigen::LLT<Eigen::MatrixXd> llt(pd);
    if (llt.info() != Eigen::Success) {
        throw std::runtime_error("estimate_condition: preconditioner is not positive definite");
    }
    // PA is similar to L^T A L with P = L L^T, which is symmetric
    Eigen::MatrixXd ad = a.matrix.toDense();
    ad = 0.5 * (ad + ad.transpose()).eval();
    const Eigen::MatrixXd l = llt.matrixL();
    Eigen::MatrixXd sym = l.transpose() * ad * l;
    sym = 0.5 * (sym + sym.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
        throw std::runtime_error("estimate_condition: dense eigensolver failed");
    }

    SpectrumEstimate est;
    est.lambda_min = es.eigenvalues()(0);
    est.lambda_max = es.eigenvalues()(n - 1);
    if (est.lambda_min <= 0.0) {
        throw std::runtime_error("estimate_condition: operator is not positive definite");
    }
    est.kappa = est.lambda_max / est.lambda_min;
    est.method = SpectrumEstimate::Method::Dense;
    est.size = n;
    return est;
}

struct RitzExtremes {
    double min = 0.0;
    double max = 0.0;
};

RitzExtremes tridiagonal_extremes(const std::vector<double>& alpha, const std::vector<double>& beta) {
    const int k = static_cast<int>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        t(i, i) = alpha[i];
        if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
    return {es.eigenvalues()(0), es.eigenvalues()(k - 1)};
}

SpectrumEstimate lanczos_condition(const SparseOperator& a, const Preconditioner& p,
                                   const ConditionConfig& cfg) {
    const int n = a.dim();
    std::mt19937_64 eng(cfg.seed);
    const auto uniform = [&eng] { return static_cast<double>(eng() >> 11) * 0x1.0p-53; };

    constexpr int max_attempts = 5;
    constexpr int min_accept = 10;   // breakdown this deep means an invariant subspace was found
    constexpr double ritz_rtol = 1e-7;

    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v(i) = uniform() - 0.5;
        Eigen::VectorXd av = a.apply(v);
        const double nrm2 = v.dot(av);
        if (nrm2 <= 0.0) throw std::runtime_error("estimate_condition: operator is not positive definite");
        const double nrm = std::sqrt(nrm2);
        v /= nrm;
        av /= nrm;

        std::vector<Eigen::VectorXd> basis{v};
        std::vector<Eigen::VectorXd> a_basis{av};
        std::vector<double> alpha;
        std::vector<double> beta;
        RitzExtremes prev{0.0, 0.0};
        int stable = 0;
        bool restart = false;

        const int steps = std::min(cfg.max_lanczos, n);
        for (int j = 0; j < steps; ++j) {
            Eigen::VectorXd w = p.apply(a_basis[j]);
            alpha.push_back(w.dot(a_basis[j]));
            w -= alpha[j] * basis[j];
            if (j > 0) w -= beta[j - 1] * basis[j - 1];
            // full reorthogonalization in the A-inner product
            for (int i = 0; i <= j; ++i) w -= w.dot(a_basis[i]) * basis[i];

            const RitzExtremes cur = tridiagonal_extremes(alpha, beta);
            const bool settled = j >= 15 && cur.max > 0.0 &&
                                 std::abs(cur.max - prev.max) <= ritz_rtol * cur.max &&
                                 std::abs(cur.min - prev.min) <= ritz_rtol * cur.max;
            stable = settled ? stable + 1 : 0;
            prev = cur;

            Eigen::VectorXd aw = a.apply(w);
            const double b2 = w.dot(aw);
            const bool breakdown = !(b2 > 0.0) || std::sqrt(b2) <= 1e-14 * std::abs(alpha[0]);
            if (breakdown && j + 1 < min_accept && j + 1 < n && attempt + 1 < max_attempts) {
                // shallow invariant subspace: retry from a fresh random start;
                // the final attempt accepts it (exact Ritz values for the
                // subspace the start vector reaches)
                restart = true;
                break;
            }
            if (breakdown || stable >= 3 || j + 1 == steps) {
                if (cur.min <= 0.0) {
                    throw std::runtime_error("estimate_condition: operator is not positive definite");
                }
                SpectrumEstimate est;
                est.lambda_min = cur.min;
                est.lambda_max = cur.max;
                est.kappa = cur.max / cur.min;
                est.method = SpectrumEstimate::Method::Lanczos;
                est.size = n;
                est.iterations = j + 1;
                return est;
            }
            const double b = std::sqrt(b2);
            beta.push_back(b);
            basis.push_back(w / b);
            a_basis.push_back(aw / b);
        }
        if (!restart) break;
    }
    throw std::runtime_error("estimate_condition: Lanczos failed to build a Krylov space");
}

} // namespace

SpectrumEstimate estimate_condition(const SparseOperator& a, const Preconditioner& p,
                                    const ConditionConfig& cfg) {
    if (p.dim() != a.dim()) {
        throw std::invalid_argument("estimate_condition: preconditioner dimension does not match the operator");
    }
    if (cfg.max_lanczos < 1) {
        throw std::invalid_argument("estimate_condition: max_lanczos must be at least 1");
    }
    if (a.dim() <= cfg.dense_threshold) return dense_condition(a, p);
    return lanczos_condition(a, p, cfg);
}

} // namespace hjbfem
