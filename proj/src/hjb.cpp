#include "hjbfem/hjb.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/SparseLU>

#include "hjbfem/quadrature.hpp"

namespace hjbfem {

namespace {

void check_controls(const ControlSet& c) {
    if (c.size < 1) throw std::invalid_argument("hjb: control set is empty");
    if (!c.eval) throw std::invalid_argument("hjb: control set has no evaluator");
}

double maximizer_objective(const CoefficientSample& s, const Mat2& hess, const Vec2& grad,
                           double value) {
    return (s.A.array() * hess.array()).sum() + s.b.dot(grad) - s.c * value - s.f;
}

} // namespace

CoefficientSample ControlSet::sample(int alpha, const Vec2& x) const {
    if (alpha < 0 || alpha >= size) throw std::out_of_range("hjb: control index out of range");
    CoefficientSample s = eval(alpha, x);
    if (f_shared) s.f += f_shared(x);
    return s;
}

CordesReport verify_cordes(const HJBProblem& p, const std::vector<Vec2>& samples) {
    check_controls(p.controls);
    if (samples.empty()) throw std::invalid_argument("hjb: no sample points to verify");
    if (p.lambda <= 0.0) throw std::invalid_argument("hjb: scaling parameter must be positive");

    CordesReport rep;
    for (const Vec2& x : samples) {
        for (int a = 0; a < p.controls.size; ++a) {
            const CoefficientSample s = p.controls.eval(a, x);
            const double shift = s.c / p.lambda;
            const double den = s.A.trace() + shift;
            const double num =
                s.A.squaredNorm() + s.b.squaredNorm() / (2.0 * p.lambda) + shift * shift;
            const double quotient =
                den > 0.0 ? num / (den * den) : std::numeric_limits<double>::infinity();
            if (quotient > rep.worst_quotient) {
                rep.worst_quotient = quotient;
                rep.worst_control = a;
                rep.worst_point = x;
            }
        }
    }
    rep.implied_eps = std::min(1.0, 1.0 / rep.worst_quotient - 2.0);
    rep.ok = rep.worst_quotient <= 1.0 / (2.0 + p.eps) + 1e-12;
    return rep;
}

CordesReport verify_cordes(const HJBProblem& p, const Mesh& mesh, int quad_degree) {
    const QuadratureRule rule = quadrature(QuadDomain::Triangle, quad_degree);
    std::vector<Vec2> samples;
    samples.reserve(static_cast<std::size_t>(mesh.num_triangles()) * rule.size());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        for (int q = 0; q < rule.size(); ++q) samples.push_back(mesh.point(t, rule.points[q]));
    }
    return verify_cordes(p, samples);
}

std::vector<int> select_maximizer(const HJBProblem& p, const HermiteSpace& vh,
                                  const Eigen::VectorXd& u, DofLayout layout, int quad_degree) {
    check_controls(p.controls);
    const Mesh& mesh = vh.mesh();
    const QuadratureRule rule = quadrature(QuadDomain::Triangle, quad_degree);
    const int nq = rule.size();
    std::vector<int> selection(static_cast<std::size_t>(mesh.num_triangles()) * nq, 0);
    if (p.controls.size == 1) return selection;

    for (int t = 0; t < mesh.num_triangles(); ++t) {
        for (int q = 0; q < nq; ++q) {
            const Vec2 x = mesh.point(t, rule.points[q]);
            const double value = vh.eval_value(u, t, rule.points[q], layout);
            const Vec2 grad = vh.eval_gradient(u, t, rule.points[q], layout);
            const Mat2 hess = vh.eval_hessian(u, t, rule.points[q], layout);

            int best = 0;
            double best_objective = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < p.controls.size; ++a) {
                const double objective =
                    maximizer_objective(p.controls.eval(a, x), hess, grad, value);
                if (objective > best_objective) {
                    best_objective = objective;
                    best = a;
                }
            }
            selection[static_cast<std::size_t>(t) * nq + q] = best;
        }
    }
    return selection;
}

FrozenCoefficients freeze_selection(const HJBProblem& p, const std::vector<int>& selection,
                                    const Mesh& mesh, int quad_degree, int face_degree) {
    check_controls(p.controls);
    const QuadratureRule rule = quadrature(QuadDomain::Triangle, quad_degree);
    const int nq = rule.size();
    if (selection.size() != static_cast<std::size_t>(mesh.num_triangles()) * nq) {
        throw std::invalid_argument("hjb: selection size does not match the quadrature layout");
    }
    for (const int a : selection) {
        if (a < 0 || a >= p.controls.size) {
            throw std::invalid_argument("hjb: selection refers to a control outside the set");
        }
    }

    FrozenCoefficients fc;
    fc.lambda = p.lambda;
    fc.eps = p.eps;
    fc.volume_degree = quad_degree;
    fc.face_degree = face_degree;
    fc.eval = [controls = p.controls, selection, nq](int t, int q, const Vec2& x) {
        return controls.sample(selection[static_cast<std::size_t>(t) * nq + q], x);
    };
    return fc;
}

namespace {

FrozenCoefficients freeze_single_control(const HJBProblem& p, const Mesh& mesh, int quad_degree,
                                         int face_degree) {
    if (p.controls.size != 1) {
        throw std::invalid_argument("hjb: linear drivers require a single-control problem");
    }
    const QuadratureRule rule = quadrature(QuadDomain::Triangle, quad_degree);
    const std::vector<int> selection(
        static_cast<std::size_t>(mesh.num_triangles()) * rule.size(), 0);
    return freeze_selection(p, selection, mesh, quad_degree, face_degree);
}

} // namespace

Eigen::VectorXd solve_linear_direct(const HJBProblem& p, const HermiteSpace& vh, RhsMode mode,
                                    int quad_degree, int face_degree) {
    const FrozenCoefficients fc = freeze_single_control(p, vh.mesh(), quad_degree, face_degree);
    const SparseOperator b = assemble_linearized(vh, fc);
    const Eigen::VectorXd rhs = assemble_load(vh, fc, mode);

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(Eigen::SparseMatrix<double>(b.matrix));
    if (lu.info() != Eigen::Success) {
        throw std::runtime_error("hjb: sparse factorization of the linearized operator failed");
    }
    return lu.solve(rhs);
}

LinearRun solve_linear(const HJBProblem& p, const HermiteSpace& vh, const Preconditioner& pre,
                       const KrylovConfig& cfg, RhsMode mode, int quad_degree, int face_degree) {
    const FrozenCoefficients fc = freeze_single_control(p, vh.mesh(), quad_degree, face_degree);
    const SparseOperator b = assemble_linearized(vh, fc);
    const Eigen::VectorXd rhs = assemble_load(vh, fc, mode);
    LinearRun run;
    run.stats = gmres(b, pre, rhs, cfg);
    run.u = run.stats.x;
    return run;
}

NewtonResult newton_solve(const HJBProblem& p, const HermiteSpace& vh, const Preconditioner& pre,
                          const NewtonConfig& cfg) {
    check_controls(p.controls);
    if (pre.dim() != vh.dim_free()) {
        throw std::invalid_argument("hjb: preconditioner dimension does not match the space");
    }
    if (cfg.max_steps < 1) throw std::invalid_argument("hjb: max_steps must be at least 1");
    if (cfg.increment_tol <= 0.0) {
        throw std::invalid_argument("hjb: increment tolerance must be positive");
    }

    // mass matrix for the L2 norm of step increments
    const SparseOperator mass = assemble_energy_parts(vh).mass;

    NewtonResult result;
    result.u = Eigen::VectorXd::Zero(vh.dim_free());
    result.selection = select_maximizer(p, vh, result.u, DofLayout::Free, cfg.quad_degree);

    long total_inner = 0;
    for (int step = 0; step < cfg.max_steps; ++step) {
        const FrozenCoefficients fc =
            freeze_selection(p, result.selection, vh.mesh(), cfg.quad_degree, cfg.face_degree);
        const SparseOperator b = assemble_linearized(vh, fc);
        const Eigen::VectorXd rhs = assemble_load(vh, fc, cfg.rhs_mode);
        const SolveResult inner = gmres(b, pre, rhs, cfg.inner);

        NewtonStep diag;
        diag.inner_iterations = inner.iterations;
        diag.inner_residual = inner.history.back();
        const Eigen::VectorXd increment = inner.x - result.u;
        diag.increment_l2 = std::sqrt(increment.dot(mass.apply(increment)));
        result.u = inner.x;
        total_inner += inner.iterations;

        if (!inner.converged) {
            result.steps.push_back(diag);
            break; // inner-solver failure: report with the history so far
        }

        const std::vector<int> next =
            select_maximizer(p, vh, result.u, DofLayout::Free, cfg.quad_degree);
        for (std::size_t i = 0; i < next.size(); ++i) {
            if (next[i] != result.selection[i]) ++diag.changed_points;
        }
        result.selection = next;
        result.steps.push_back(diag);

        if (diag.increment_l2 < cfg.increment_tol) {
            result.converged = true;
            break;
        }
    }
    result.avg_inner_iterations =
        result.steps.empty() ? 0.0 : static_cast<double>(total_inner) / result.steps.size();
    return result;
}

ErrorNorms error_norms(const HermiteSpace& vh, const Eigen::VectorXd& u, DofLayout layout,
                       const ExactSolution& exact, double lambda, int quad_degree) {
    if (lambda <= 0.0) throw std::invalid_argument("hjb: scaling parameter must be positive");
    const Mesh& mesh = vh.mesh();
    const QuadratureRule rule = quadrature(QuadDomain::Triangle, quad_degree);

    double l2 = 0.0, h1 = 0.0, h2 = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const double scale = 2.0 * mesh.area(t);
        for (int q = 0; q < rule.size(); ++q) {
            const Vec2 x = mesh.point(t, rule.points[q]);
            const double value = vh.eval_value(u, t, rule.points[q], layout) -
                                 (exact.value ? exact.value(x) : 0.0);
            const Vec2 grad = vh.eval_gradient(u, t, rule.points[q], layout) -
                              (exact.gradient ? exact.gradient(x) : Vec2::Zero().eval());
            const Mat2 hess = vh.eval_hessian(u, t, rule.points[q], layout) -
                              (exact.hessian ? exact.hessian(x) : Mat2::Zero().eval());
            const double w = scale * rule.weights[q];
            l2 += w * value * value;
            h1 += w * grad.squaredNorm();
            h2 += w * hess.squaredNorm();
        }
    }

    ErrorNorms norms;
    norms.l2 = std::sqrt(l2);
    norms.h1 = std::sqrt(h1);
    norms.h2_broken = std::sqrt(h2);
    norms.energy = std::sqrt(h2 + 2.0 * lambda * h1 + lambda * lambda * l2);
    return norms;
}

namespace {

// factor g of the checkerboard problem's product solution and its derivatives
double product_factor(double s) { return s * std::exp(1.0 - std::abs(s)) - s; }

double product_factor_d1(double s) {
    const double e = std::exp(1.0 - std::abs(s));
    return e * (1.0 - std::abs(s)) - 1.0;
}

double product_factor_d2(double s) {
    if (s == 0.0) return 0.0; // jump point; never sampled by interior quadrature
    const double e = std::exp(1.0 - std::abs(s));
    return s > 0.0 ? e * (s - 2.0) : e * (s + 2.0);
}

double checkerboard_sign(double s) {
    constexpr double tol = 1e-14;
    if (s > tol) return 1.0;
    if (s < -tol) return -1.0;
    return 0.0;
}

} // namespace

HJBProblem checkerboard_problem(double theta) {
    if (theta <= 0.0) throw std::invalid_argument("hjb: theta must be positive");

    HJBProblem p;
    p.lambda = theta;
    p.eps = 0.45;
    p.domain = {-1.0, -1.0, 1.0, 1.0};

    const double sqrt_theta = std::sqrt(theta);
    p.controls.size = 1;
    p.controls.eval = [theta, sqrt_theta](int, const Vec2& x) {
        const double sign = checkerboard_sign(x(0) * x(1));
        const double g0 = product_factor(x(0)), g1 = product_factor(x(1));
        const double d0 = product_factor_d1(x(0)), d1 = product_factor_d1(x(1));
        const double s0 = product_factor_d2(x(0)), s1 = product_factor_d2(x(1));

        CoefficientSample s;
        s.A << 2.0, sign, sign, 2.0;
        s.b = sqrt_theta * x;
        s.c = 3.0 * theta;
        // apply the operator to the exact solution analytically
        s.f = 2.0 * s0 * g1 + 2.0 * sign * d0 * d1 + 2.0 * g0 * s1 +
              sqrt_theta * (x(0) * d0 * g1 + x(1) * g0 * d1) - 3.0 * theta * g0 * g1;
        return s;
    };

    p.exact.value = [](const Vec2& x) { return product_factor(x(0)) * product_factor(x(1)); };
    p.exact.gradient = [](const Vec2& x) {
        return Vec2(product_factor_d1(x(0)) * product_factor(x(1)),
                    product_factor(x(0)) * product_factor_d1(x(1)));
    };
    p.exact.hessian = [](const Vec2& x) {
        Mat2 h;
        h(0, 0) = product_factor_d2(x(0)) * product_factor(x(1));
        h(0, 1) = h(1, 0) = product_factor_d1(x(0)) * product_factor_d1(x(1));
        h(1, 1) = product_factor(x(0)) * product_factor_d2(x(1));
        return h;
    };
    return p;
}

namespace {

struct RotationExact {
    static double value(const Vec2& x) {
        return std::exp(x(0) * x(1)) * std::sin(std::numbers::pi * x(0)) *
               std::sin(std::numbers::pi * x(1));
    }
    static Vec2 gradient(const Vec2& x) {
        const double pi = std::numbers::pi;
        const double e = std::exp(x(0) * x(1));
        const double s1 = std::sin(pi * x(0)), c1 = std::cos(pi * x(0));
        const double s2 = std::sin(pi * x(1)), c2 = std::cos(pi * x(1));
        return Vec2(e * (x(1) * s1 + pi * c1) * s2, e * s1 * (x(0) * s2 + pi * c2));
    }
    static Mat2 hessian(const Vec2& x) {
        const double pi = std::numbers::pi;
        const double e = std::exp(x(0) * x(1));
        const double s1 = std::sin(pi * x(0)), c1 = std::cos(pi * x(0));
        const double s2 = std::sin(pi * x(1)), c2 = std::cos(pi * x(1));
        Mat2 h;
        h(0, 0) = e * s2 * (x(1) * x(1) * s1 + 2.0 * pi * x(1) * c1 - pi * pi * s1);
        h(1, 1) = e * s1 * (x(0) * x(0) * s2 + 2.0 * pi * x(0) * c2 - pi * pi * s2);
        h(0, 1) = h(1, 0) = e * ((x(0) * x(1) + 1.0) * s1 * s2 + pi * x(0) * c1 * s2 +
                                 pi * x(1) * s1 * c2 + pi * pi * c1 * c2);
        return h;
    }
};

} // namespace

HJBProblem rotation_control_problem(int theta_samples, int rotation_samples) {
    if (theta_samples < 1 || rotation_samples < 1) {
        throw std::invalid_argument("hjb: control grids need at least one sample each");
    }
    const double pi = std::numbers::pi;

    // tabulate the x-independent diffusion (1/2) R^T M M^T R and the
    // control-specific source part per grid point, theta-major
    const int size = theta_samples * rotation_samples;
    std::vector<Mat2> diffusion(size);
    std::vector<double> f_control(size);
    for (int i = 0; i < theta_samples; ++i) {
        const double theta =
            theta_samples == 1 ? 0.0 : (pi / 3.0) * i / static_cast<double>(theta_samples - 1);
        const double st = std::sin(theta), ct = std::cos(theta);
        Mat2 mmt;
        mmt << 1.0 + st * st, st * ct, st * ct, ct * ct;
        for (int j = 0; j < rotation_samples; ++j) {
            const double phi = 2.0 * pi * j / static_cast<double>(rotation_samples);
            Mat2 rot;
            rot << std::cos(phi), -std::sin(phi), std::sin(phi), std::cos(phi);
            const int a = i * rotation_samples + j;
            diffusion[a] = 0.5 * rot.transpose() * mmt * rot;
            f_control[a] = std::sqrt(3.0) * st * st / (pi * pi);
        }
    }

    HJBProblem p;
    p.lambda = pi * pi;
    p.eps = 2.0 / 15.0;
    p.domain = {0.0, 0.0, 1.0, 1.0};

    p.controls.size = size;
    p.controls.eval = [diffusion, f_control, pi](int a, const Vec2&) {
        CoefficientSample s;
        s.A = diffusion[a];
        s.c = pi * pi;
        s.f = f_control[a];
        return s;
    };
    // calibrated source: the exact solution maximizes to zero over this grid
    p.controls.f_shared = [diffusion, f_control, pi](const Vec2& x) {
        const Mat2 hess = RotationExact::hessian(x);
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < diffusion.size(); ++a) {
            best = std::max(best, (diffusion[a].array() * hess.array()).sum() - f_control[a]);
        }
        return best - pi * pi * RotationExact::value(x);
    };

    p.exact.value = RotationExact::value;
    p.exact.gradient = RotationExact::gradient;
    p.exact.hessian = RotationExact::hessian;
    return p;
}

} // namespace hjbfem
