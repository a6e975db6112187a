#pragma once

#include <Eigen/Dense>
#include <vector>

namespace hjbfem {

enum class QuadDomain { Triangle, Edge };

/**
 * Quadrature rule on the reference triangle conv{(0,0),(1,0),(0,1)} or the
 * reference edge [0,1].
 *
 * Points are stored as barycentric coordinates (l0, l1, l2); edge rules use
 * (1-t, t, 0) where t parametrizes the edge from its first to its second
 * endpoint.  Weights sum to the reference element measure (1/2 for the
 * triangle, 1 for the edge), so that for an affine image T of the reference
 * triangle
 *
 *     integral_T f dx  ~=  2*|T| * sum_q w_q f(x_q),
 *
 * and for an edge F of length |F|
 *
 *     integral_F f ds  ~=  |F| * sum_q w_q f(x_q).
 *
 * Triangle rules are constructed by collapsing a tensor Gauss-Legendre grid
 * (Duffy transform), so they are exact to machine precision for polynomials
 * of the requested total degree.
 */
struct QuadratureRule {
    QuadDomain domain;
    int degree;
    std::vector<Eigen::Vector3d> points; // barycentric
    std::vector<double> weights;

    int size() const { return static_cast<int>(points.size()); }
};

/// Gauss-Legendre nodes/weights on [0,1]; exact for polynomials of degree 2n-1.
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// Build a rule exact for polynomials of total degree `degree` (1 <= degree <= 30).
/// Throws std::invalid_argument outside that range.
QuadratureRule quadrature(QuadDomain domain, int degree);

} // namespace hjbfem
