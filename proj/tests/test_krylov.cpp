#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

#include "hjbfem/assembly.hpp"
#include "hjbfem/fespace.hpp"
#include "hjbfem/krylov.hpp"
#include "hjbfem/mesh.hpp"
#include "hjbfem/precond.hpp"
#include "hjbfem/smoothers.hpp"

using namespace hjbfem;

namespace {

struct Rng {
    std::mt19937_64 eng;
    explicit Rng(std::uint64_t seed) : eng(seed) {}
    double uniform() { return (eng() >> 11) * 0x1.0p-53; }
    double symmetric() { return 2.0 * uniform() - 1.0; }
};

Eigen::VectorXd random_vector(int n, Rng& rng) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.symmetric();
    return v;
}

SparseOperator sparse_of(const Eigen::MatrixXd& m, SparseOperator::Symmetry sym) {
    SparseOperator op;
    op.matrix = m.sparseView();
    op.symmetry = sym;
    return op;
}

SparseOperator sparse_identity(int n) {
    Eigen::SparseMatrix<double, Eigen::RowMajor> id(n, n);
    id.setIdentity();
    return {id, SparseOperator::Symmetry::Spd};
}

const LinOp identity_op = [](const Eigen::VectorXd& r) { return r; };

/// Fine space, coarse space, energy operator, transfer, and coarse smoother
/// assembled together on one mesh.
struct Stack {
    Mesh mesh;
    HermiteSpace vh;
    P1Space v0;
    SparseOperator a;
    P1Matrices p1;
    Eigen::SparseMatrix<double, Eigen::RowMajor> pi0;
    CoarseSmoother coarse;

    Stack(Mesh m, double lambda)
        : mesh(std::move(m)), vh(mesh), v0(mesh), a(assemble_energy(vh, lambda)),
          p1(assemble_p1(v0)), pi0(transfer(vh, v0)), coarse(p1, lambda) {}
};

/// Smooth non-polynomial data exercising all coefficient slots.
FrozenCoefficients smooth_coeffs(double lambda) {
    FrozenCoefficients c;
    c.eval = [](int, int, const Vec2& x) {
        CoefficientSample s;
        const double m = 0.25 * std::sin(x(0) + 2.0 * x(1));
        s.A << 2.0 + 0.5 * std::cos(x(0)), m, m, 2.0 + 0.5 * std::sin(x(1));
        s.b = Vec2(0.3 * x(1), -0.2 * x(0));
        s.c = 1.0 + x.squaredNorm();
        s.f = std::exp(x(0)) * (1.0 - x(1));
        return s;
    };
    c.lambda = lambda;
    c.eps = 0.25;
    return c;
}

/// Exact-inverse preconditioner (test fixture).
class DirectPreconditioner : public Preconditioner {
public:
    explicit DirectPreconditioner(const SparseOperator& a) : dim_(a.dim()) {
        solver_.compute(Eigen::SparseMatrix<double>(a.matrix));
        REQUIRE(solver_.info() == Eigen::Success);
    }
    Eigen::VectorXd apply(const Eigen::VectorXd& r) const override { return solver_.solve(r); }
    int dim() const override { return dim_; }

private:
    int dim_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver_;
};

/// Preconditioner given by an explicit dense SPD matrix (test fixture).
class DenseMatrixPreconditioner : public Preconditioner {
public:
    explicit DenseMatrixPreconditioner(Eigen::MatrixXd m) : m_(std::move(m)) {}
    Eigen::VectorXd apply(const Eigen::VectorXd& r) const override { return m_ * r; }
    int dim() const override { return static_cast<int>(m_.rows()); }

private:
    Eigen::MatrixXd m_;
};

double true_residual(const SparseOperator& b, const Eigen::VectorXd& rhs,
                     const Eigen::VectorXd& x) {
    return (rhs - b.apply(x)).norm() / rhs.norm();
}

} // namespace

TEST_SUITE("krylov") {

TEST_CASE("identity system converges in one iteration") {
    Rng rng(3);
    const int n = 17;
    const SparseOperator b = sparse_identity(n);
    const Eigen::VectorXd rhs = random_vector(n, rng);

    const SolveResult g = gmres(b, identity_op, rhs);
    CHECK(g.converged);
    CHECK(g.iterations == 1);
    CHECK(g.history.size() == 2);
    CHECK((g.x - rhs).norm() <= 1e-12 * rhs.norm());

    const SolveResult c = pcg(b, identity_op, rhs);
    CHECK(c.converged);
    CHECK(c.iterations == 1);
    CHECK((c.x - rhs).norm() <= 1e-12 * rhs.norm());
}

TEST_CASE("zero right-hand side returns the zero solution immediately") {
    const SparseOperator b = sparse_identity(5);
    const Eigen::VectorXd rhs = Eigen::VectorXd::Zero(5);
    const SolveResult g = gmres(b, identity_op, rhs);
    CHECK(g.converged);
    CHECK(g.iterations == 0);
    CHECK(g.x.norm() == 0.0);
    const SolveResult c = pcg(b, identity_op, rhs);
    CHECK(c.converged);
    CHECK(c.x.norm() == 0.0);
}

TEST_CASE("a small nonsymmetric system is solved exactly within its dimension") {
    Eigen::MatrixXd m(3, 3);
    m << 2, 1, 0, //
        0, 3, 1,  //
        1, 0, 4;
    const SparseOperator b = sparse_of(m, SparseOperator::Symmetry::General);
    Eigen::VectorXd exact(3);
    exact << 1, 2, 3;
    const Eigen::VectorXd rhs = m * exact;

    KrylovConfig cfg;
    cfg.tol = 1e-13;
    const SolveResult g = gmres(b, identity_op, rhs, cfg);
    CHECK(g.converged);
    CHECK(g.iterations <= 3);
    CHECK((g.x - exact).norm() <= 1e-10 * exact.norm());
}

TEST_CASE("preconditioned residual history is monotone on the renormalized operator") {
    Stack s(uniform_rect_mesh({0, 0, 1, 1}, 0.25), 1.0);
    const SparseOperator b = assemble_linearized(s.vh, smooth_coeffs(1.0));
    const MultiplicativePreconditioner pm(s.a, s.pi0, &s.coarse);
    Rng rng(5);
    const Eigen::VectorXd rhs = random_vector(b.dim(), rng);

    KrylovConfig cfg;
    cfg.tol = 1e-10;
    const SolveResult g = gmres(b, pm, rhs, cfg);
    CHECK(g.converged);
    REQUIRE(g.history.size() >= 2);
    for (std::size_t k = 1; k < g.history.size(); ++k) {
        CHECK(g.history[k] <= g.history[k - 1] * (1.0 + 1e-12) + 1e-15);
    }
    CHECK(g.history.back() <= cfg.tol);

    // The reported history entry is the preconditioned relative residual.
    const Eigen::VectorXd pr = pm.apply(rhs - b.apply(g.x));
    const double recomputed = pr.norm() / pm.apply(rhs).norm();
    CHECK(recomputed <= cfg.tol * (1.0 + 1e-6));
}

TEST_CASE("the unpreconditioned convention controls the true residual") {
    Stack s(uniform_rect_mesh({0, 0, 1, 1}, 0.25), 1.0);
    const SparseOperator b = assemble_linearized(s.vh, smooth_coeffs(1.0));
    const MultiplicativePreconditioner pm(s.a, s.pi0, &s.coarse);
    Rng rng(7);
    const Eigen::VectorXd rhs = random_vector(b.dim(), rng);

    KrylovConfig cfg;
    cfg.tol = 1e-8;
    cfg.residual = KrylovConfig::Residual::Unpreconditioned;
    const SolveResult g = gmres(b, pm, rhs, cfg);
    CHECK(g.converged);
    CHECK(true_residual(b, rhs, g.x) <= cfg.tol * (1.0 + 1e-6));
    CHECK(g.history.back() == doctest::Approx(true_residual(b, rhs, g.x)).epsilon(1e-6));
}

TEST_CASE("restarted cycles reach the same solution as the full method") {
    Stack s(uniform_rect_mesh({0, 0, 1, 1}, 0.25), 1.0);
    const SparseOperator b = assemble_linearized(s.vh, smooth_coeffs(1.0));
    const MultiplicativePreconditioner pm(s.a, s.pi0, &s.coarse);
    Rng rng(9);
    const Eigen::VectorXd rhs = random_vector(b.dim(), rng);

    KrylovConfig cfg;
    cfg.tol = 1e-11;
    const SolveResult full = gmres(b, pm, rhs, cfg);

    cfg.restart = 4;
    const SolveResult restarted = gmres(b, pm, rhs, cfg);
    CHECK(restarted.converged);
    CHECK(restarted.iterations > cfg.restart); // at least one restart happened
    CHECK(restarted.iterations >= full.iterations);
    CHECK((restarted.x - full.x).norm() <= 1e-8 * full.x.norm());
}

TEST_CASE("hitting the iteration cap reports instead of throwing") {
    Stack s(uniform_rect_mesh({0, 0, 1, 1}, 0.25), 1.0);
    const SparseOperator b = assemble_linearized(s.vh, smooth_coeffs(1.0));
    Rng rng(13);
    const Eigen::VectorXd rhs = random_vector(b.dim(), rng);

    KrylovConfig cfg;
    cfg.tol = 1e-15;
    cfg.max_iterations = 3;
    const SolveResult g = gmres(b, identity_op, rhs, cfg);
    CHECK_FALSE(g.converged);
    CHECK(g.iterations == 3);
    CHECK(g.history.size() == 4);
    CHECK(g.x.allFinite());
    // The returned iterate is still the residual minimizer over the space built.
    CHECK(true_residual(b, rhs, g.x) < 1.0);

    cfg.max_iterations = 2;
    const SolveResult c = pcg(s.a, identity_op, rhs, cfg);
    CHECK_FALSE(c.converged);
    CHECK(c.iterations == 2);
}

TEST_CASE("conjugate gradients with an exact diagonal preconditioner needs one step") {
    Rng rng(17);
    const int n = 23;
    Eigen::VectorXd d(n);
    for (int i = 0; i < n; ++i) d[i] = 1.0 + 10.0 * rng.uniform();
    const SparseOperator a = sparse_of(d.asDiagonal(), SparseOperator::Symmetry::Spd);
    const LinOp m = [&d](const Eigen::VectorXd& r) { return (r.array() / d.array()).matrix().eval(); };
    const Eigen::VectorXd rhs = random_vector(n, rng);

    KrylovConfig cfg;
    cfg.tol = 1e-12;
    const SolveResult c = pcg(a, m, rhs, cfg);
    CHECK(c.converged);
    CHECK(c.iterations == 1);
    CHECK((d.asDiagonal() * c.x - rhs).norm() <= 1e-10 * rhs.norm());
}

TEST_CASE("conjugate gradients matches a direct solve of the energy system") {
    Stack s(uniform_rect_mesh({0, 0, 1, 1}, 0.25), 1.0);
    const AdditivePreconditioner pa(s.a, s.pi0, &s.coarse, 0.1);
    Rng rng(19);
    const Eigen::VectorXd rhs = random_vector(s.a.dim(), rng);

    KrylovConfig cfg;
    cfg.tol = 1e-12;
    cfg.max_iterations = 2000;
    const SolveResult c = pcg(s.a, pa, rhs, cfg);
    CHECK(c.converged);

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> direct(
        Eigen::SparseMatrix<double>(s.a.matrix));
    REQUIRE(direct.info() == Eigen::Success);
    const Eigen::VectorXd exact = direct.solve(rhs);
    CHECK((c.x - exact).lpNorm<Eigen::Infinity>() <=
          1e-7 * std::max(1.0, exact.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("gmres and conjugate gradients take similar counts on an SPD system") {
    Stack s(uniform_rect_mesh({0, 0, 1, 1}, 0.25), 1.0);
    const MultiplicativePreconditioner pm(s.a, s.pi0, &s.coarse);
    Rng rng(23);
    const Eigen::VectorXd rhs = random_vector(s.a.dim(), rng);

    KrylovConfig cfg;
    cfg.tol = 1e-8;
    const SolveResult c = pcg(s.a, pm, rhs, cfg);
    KrylovConfig gcfg = cfg;
    gcfg.residual = KrylovConfig::Residual::Unpreconditioned;
    const SolveResult g = gmres(s.a, pm, rhs, gcfg);
    CHECK(c.converged);
    CHECK(g.converged);
    CHECK(std::abs(c.iterations - g.iterations) <= 5);
}

TEST_CASE("an exact inverse has unit condition number") {
    Stack s(uniform_rect_mesh({0, 0, 1, 1}, 0.25), 1.0);
    const DirectPreconditioner exact(s.a);
    const SpectrumEstimate est = estimate_condition(s.a, exact);
    CHECK(est.method == SpectrumEstimate::Method::Dense);
    CHECK(est.size == s.a.dim());
    CHECK(est.iterations == 0);
    CHECK(est.kappa == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(est.lambda_min == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(est.lambda_max == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("hand-checkable two by two pencil") {
    Eigen::MatrixXd a(2, 2);
    a << 4, 1, 1, 3;
    const SparseOperator op = sparse_of(a, SparseOperator::Symmetry::Spd);
    Eigen::MatrixXd pinv = Eigen::MatrixXd::Zero(2, 2);
    pinv(0, 0) = 0.25;
    pinv(1, 1) = 1.0 / 3.0;
    const DenseMatrixPreconditioner p(pinv);

    // Eigenvalues of diag(1/4,1/3) * [[4,1],[1,3]] solve (1-mu)^2 = 1/12.
    const double spread = 1.0 / std::sqrt(12.0);
    const SpectrumEstimate est = estimate_condition(op, p);
    CHECK(est.lambda_min == doctest::Approx(1.0 - spread).epsilon(1e-12));
    CHECK(est.lambda_max == doctest::Approx(1.0 + spread).epsilon(1e-12));
    CHECK(est.kappa == doctest::Approx((1.0 + spread) / (1.0 - spread)).epsilon(1e-12));
}

TEST_CASE("lanczos path agrees with the dense eigensolver") {
    Stack s(uniform_rect_mesh({-1, -1, 1, 1}, 0.25), 1.0);
    const MultiplicativePreconditioner pm(s.a, s.pi0, &s.coarse);

    const SpectrumEstimate dense = estimate_condition(s.a, pm);
    REQUIRE(dense.method == SpectrumEstimate::Method::Dense);

    ConditionConfig cfg;
    cfg.dense_threshold = 0; // force the iterative path
    const SpectrumEstimate lanczos = estimate_condition(s.a, pm, cfg);
    CHECK(lanczos.method == SpectrumEstimate::Method::Lanczos);
    CHECK(lanczos.iterations > 0);
    CHECK(lanczos.iterations < s.a.dim());
    CHECK(std::abs(lanczos.kappa - dense.kappa) <= 0.05 * dense.kappa);
    CHECK(std::abs(lanczos.lambda_max - dense.lambda_max) <= 0.05 * dense.lambda_max);
    CHECK(std::abs(lanczos.lambda_min - dense.lambda_min) <= 0.05 * dense.lambda_min);

    // The iterative path is deterministic: its seed is fixed in the config.
    const SpectrumEstimate again = estimate_condition(s.a, pm, cfg);
    CHECK(again.kappa == lanczos.kappa);
    CHECK(again.iterations == lanczos.iterations);
}

TEST_CASE("the preconditioned operator is self-adjoint in the operator inner product") {
    Stack s(uniform_rect_mesh({0, 0, 1, 1}, 0.25), 1.0);
    const MultiplicativePreconditioner pm(s.a, s.pi0, &s.coarse);
    Rng rng(29);
    for (int k = 0; k < 10; ++k) {
        const Eigen::VectorXd u = random_vector(s.a.dim(), rng);
        const Eigen::VectorXd v = random_vector(s.a.dim(), rng);
        const Eigen::VectorXd tu = pm.apply(s.a.apply(u));
        const Eigen::VectorXd tv = pm.apply(s.a.apply(v));
        const double lhs = tu.dot(s.a.apply(v));
        const double rhs = u.dot(s.a.apply(tv));
        const double nu = std::sqrt(u.dot(s.a.apply(u)));
        const double nv = std::sqrt(v.dot(s.a.apply(v)));
        CHECK(std::abs(lhs - rhs) <= 1e-8 * nu * nv);
    }
}

TEST_CASE("the estimate is invariant under orthogonal similarity") {
    Rng rng(31);
    const int n = 40;
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = rng.symmetric();
    const Eigen::MatrixXd a1 = m * m.transpose() + double(n) * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd p1 = a1.diagonal().cwiseInverse().asDiagonal();

    Eigen::MatrixXd g(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g(i, j) = rng.symmetric();
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
    const Eigen::MatrixXd a2 = q * a1 * q.transpose();
    const Eigen::MatrixXd p2 = q * p1 * q.transpose();

    const SpectrumEstimate e1 = estimate_condition(sparse_of(a1, SparseOperator::Symmetry::Spd),
                                                   DenseMatrixPreconditioner(p1));
    const SpectrumEstimate e2 = estimate_condition(sparse_of(a2, SparseOperator::Symmetry::Spd),
                                                   DenseMatrixPreconditioner(p2));
    CHECK(e1.kappa == doctest::Approx(e2.kappa).epsilon(1e-8));
    CHECK(e1.lambda_min == doctest::Approx(e2.lambda_min).epsilon(1e-8));
    CHECK(e1.lambda_max == doctest::Approx(e2.lambda_max).epsilon(1e-8));
}

TEST_CASE("invalid configurations and shapes are rejected") {
    const SparseOperator b = sparse_identity(4);
    const Eigen::VectorXd rhs = Eigen::VectorXd::Ones(4);

    KrylovConfig cfg;
    cfg.tol = 0.0;
    CHECK_THROWS_AS(gmres(b, identity_op, rhs, cfg), std::invalid_argument);
    cfg.tol = 1.0;
    CHECK_THROWS_AS(pcg(b, identity_op, rhs, cfg), std::invalid_argument);
    cfg = {};
    cfg.max_iterations = 0;
    CHECK_THROWS_AS(gmres(b, identity_op, rhs, cfg), std::invalid_argument);
    cfg = {};
    cfg.restart = -1;
    CHECK_THROWS_AS(gmres(b, identity_op, rhs, cfg), std::invalid_argument);

    const Eigen::VectorXd short_rhs = Eigen::VectorXd::Ones(3);
    CHECK_THROWS_AS(gmres(b, identity_op, short_rhs, {}), std::invalid_argument);
    CHECK_THROWS_AS(pcg(b, identity_op, short_rhs, {}), std::invalid_argument);

    const DenseMatrixPreconditioner wrong_dim(Eigen::MatrixXd::Identity(3, 3));
    CHECK_THROWS_AS(gmres(b, wrong_dim, rhs, {}), std::invalid_argument);
    CHECK_THROWS_AS(pcg(b, wrong_dim, rhs, {}), std::invalid_argument);
    CHECK_THROWS_AS(estimate_condition(b, wrong_dim), std::invalid_argument);

    ConditionConfig ccfg;
    ccfg.max_lanczos = 0;
    const DenseMatrixPreconditioner ok(Eigen::MatrixXd::Identity(4, 4));
    CHECK_THROWS_AS(estimate_condition(b, ok, ccfg), std::invalid_argument);
}

} // TEST_SUITE
