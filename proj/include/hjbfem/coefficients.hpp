#pragma once

#include <functional>

#include "hjbfem/mesh.hpp"

namespace hjbfem {

/// Pointwise operator data A : D^2 u + b . grad u - c u and load f.
struct CoefficientSample {
    Mat2 A = Mat2::Identity();
    Vec2 b = Vec2::Zero();
    double c = 0.0;
    double f = 0.0;
};

/**
 * Coefficients frozen for one linear solve.  `eval` may key on the element and
 * quadrature-point index (used when a control has been selected per quadrature
 * point) or only on the physical point.  `volume_degree`/`face_degree` are the
 * quadrature degrees the evaluation grid is laid out on; assembly uses exactly
 * these so that (element, q) indices mean the same thing everywhere.
 */
struct FrozenCoefficients {
    std::function<CoefficientSample(int elem, int q, const Vec2& x)> eval;
    double lambda = 1.0;
    double eps = 1.0;
    int volume_degree = 8;
    int face_degree = 6;
};

/**
 * Pointwise renormalization factor
 *
 *   gamma = (tr A + c/lambda) / (|A|_F^2 + |b|^2/(2 lambda) + (c/lambda)^2),
 *
 * which maps the operator data into the coercive range of the discrete
 * bilinear form.  Requires lambda > 0 and a positive denominator.
 */
double cordes_gamma(const Mat2& A, const Vec2& b, double c, double lambda);

} // namespace hjbfem
