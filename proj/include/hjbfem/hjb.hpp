#pragma once

#include <functional>
#include <vector>

#include "hjbfem/assembly.hpp"
#include "hjbfem/krylov.hpp"
#include "hjbfem/mesh.hpp"
#include "hjbfem/precond.hpp"

namespace hjbfem {

/// Finite family of control-indexed coefficient data (A, b, c, f).
struct ControlSet {
    /// Per-control data at a point; `f` carries only the control-specific part
    /// of the source term.
    std::function<CoefficientSample(int alpha, const Vec2& x)> eval;
    /// Optional control-independent addition to every source term.  Kept apart
    /// so the maximizer search can skip it (a common shift never changes an
    /// argmax) and so calibrated sources are evaluated once per point.
    std::function<double(const Vec2&)> f_shared;
    int size = 0;

    /// Full sample with the shared source folded in.
    CoefficientSample sample(int alpha, const Vec2& x) const;
};

/// Exact solution with analytic derivatives, for error studies and
/// manufactured sources.  Missing callables are treated as identically zero.
struct ExactSolution {
    std::function<double(const Vec2&)> value;
    std::function<Vec2(const Vec2&)> gradient;
    std::function<Mat2(const Vec2&)> hessian;
    bool available() const { return static_cast<bool>(value); }
};

/// Fully-discrete Bellman problem: control family, scaling, ellipticity
/// margin, domain, and (optionally) the exact solution.
struct HJBProblem {
    ControlSet controls;
    double lambda = 1.0;
    double eps = 1.0;
    Rect domain;
    ExactSolution exact;
};

/// Outcome of checking the ellipticity-margin quotient
///
///   (|A|^2 + |b|^2/(2 lambda) + (c/lambda)^2) / (tr A + c/lambda)^2
///
/// over sample points and controls.  `ok` means the worst quotient stays
/// within 1/(2 + eps) (plus 1e-12 slack) for the problem's declared margin;
/// `implied_eps` is the largest admissible margin (clamped to 1), and the
/// worst (point, control) pair identifies any violation.
struct CordesReport {
    bool ok = false;
    double worst_quotient = 0.0;
    double implied_eps = 0.0;
    int worst_control = -1;
    Vec2 worst_point = Vec2::Zero();
};

CordesReport verify_cordes(const HJBProblem& p, const std::vector<Vec2>& samples);

/// Convenience overload sampling all volume quadrature points of a mesh.
CordesReport verify_cordes(const HJBProblem& p, const Mesh& mesh, int quad_degree = 8);

/**
 * Per-quadrature-point maximizing control index for the current iterate:
 * argmax over alpha of A^a : D^2 v + b^a . grad v - c^a v - f^a, ties broken
 * by the lowest index.  Entry t * nq + q belongs to point q of element t for
 * the triangle rule of the given degree.  The shared source part is skipped
 * (it shifts every objective equally).
 */
std::vector<int> select_maximizer(const HJBProblem& p, const HermiteSpace& vh,
                                  const Eigen::VectorXd& u, DofLayout layout = DofLayout::Free,
                                  int quad_degree = 8);

/// Freeze a maximizer selection into per-point coefficients ready for
/// assembly; the selection layout must match the same quadrature degree.
FrozenCoefficients freeze_selection(const HJBProblem& p, const std::vector<int>& selection,
                                    const Mesh& mesh, int quad_degree = 8, int face_degree = 6);

/// Sparse-LU solve of a single-control (linear) problem.
Eigen::VectorXd solve_linear_direct(const HJBProblem& p, const HermiteSpace& vh,
                                    RhsMode mode = RhsMode::LLambda, int quad_degree = 8,
                                    int face_degree = 6);

/// Preconditioned-GMRES solve of a single-control (linear) problem.
struct LinearRun {
    Eigen::VectorXd u;
    SolveResult stats;
};
LinearRun solve_linear(const HJBProblem& p, const HermiteSpace& vh, const Preconditioner& pre,
                       const KrylovConfig& cfg, RhsMode mode = RhsMode::LLambda,
                       int quad_degree = 8, int face_degree = 6);

struct NewtonConfig {
    KrylovConfig inner;
    int max_steps = 50;
    double increment_tol = 1e-6; // on the L2 norm of the step increment
    int quad_degree = 8;
    int face_degree = 6;
    RhsMode rhs_mode = RhsMode::LLambda;

    NewtonConfig() {
        inner.tol = 1e-4;
        inner.max_iterations = 400;
    }
};

/// Per-step diagnostics of the semi-smooth Newton iteration.
struct NewtonStep {
    int inner_iterations = 0;
    double inner_residual = 0.0;
    double increment_l2 = 0.0;
    int changed_points = 0; // selection churn after the update
};

struct NewtonResult {
    Eigen::VectorXd u;          // free-layout coefficients
    std::vector<int> selection; // final per-point control indices
    std::vector<NewtonStep> steps;
    bool converged = false;
    double avg_inner_iterations = 0.0;

    int newton_steps() const { return static_cast<int>(steps.size()); }
};

/**
 * Semi-smooth Newton iteration from u = 0: select maximizing controls at the
 * quadrature points, freeze them, assemble the linearized system, solve it by
 * preconditioned GMRES, and repeat until the step increment drops below the
 * tolerance.  Inner-solver failure or the step cap is reported through
 * `converged`, with the per-step history retained.
 */
NewtonResult newton_solve(const HJBProblem& p, const HermiteSpace& vh, const Preconditioner& pre,
                          const NewtonConfig& cfg = {});

/// Quadrature-evaluated norms of u_h minus the exact solution: L2, gradient
/// seminorm, broken Hessian seminorm, and the lambda-scaled energy norm
/// (h2^2 + 2 lambda h1^2 + lambda^2 l2^2)^(1/2).
struct ErrorNorms {
    double l2 = 0.0;
    double h1 = 0.0;
    double h2_broken = 0.0;
    double energy = 0.0;
};

ErrorNorms error_norms(const HermiteSpace& vh, const Eigen::VectorXd& u, DofLayout layout,
                       const ExactSolution& exact, double lambda, int quad_degree = 12);

/**
 * Linear non-divergence benchmark on (-1,1)^2: diffusion [[2, s],[s, 2]] with
 * s the checkerboard sign of x1 x2, drift sqrt(theta) x, reaction 3 theta,
 * lambda = theta, margin eps = 9/20.  The exact solution is the product
 * (x1 e^{1-|x1|} - x1)(x2 e^{1-|x2|} - x2) and the source is computed from its
 * analytic derivatives.
 */
HJBProblem checkerboard_problem(double theta);

/**
 * Bellman benchmark on (0,1)^2: diffusions (1/2) R^T M M^T R over a uniform
 * grid of anisotropy angles theta in [0, pi/3] (M = [[1, sin theta],[0,
 * cos theta]]) and rotations R in [0, 2pi), zero drift, reaction pi^2,
 * lambda = pi^2, margin eps = 2/15.  The exact solution is
 * exp(x1 x2) sin(pi x1) sin(pi x2); its source is calibrated by maximizing
 * over the same control grid, so the discrete problem is internally
 * consistent.
 */
HJBProblem rotation_control_problem(int theta_samples = 17, int rotation_samples = 64);

} // namespace hjbfem
