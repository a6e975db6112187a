#include "hjbfem/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace hjbfem {

namespace {

// Legendre polynomial P_n and derivative at x via the three-term recurrence.
void legendre(int n, double x, double& p, double& dp) {
    double p0 = 1.0, p1 = x;
    if (n == 0) { p = p0; dp = 0.0; return; }
    for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    p = p1;
    dp = n * (x * p1 - p0) / (x * x - 1.0);
}

} // namespace

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        // Chebyshev initial guess, then Newton on P_n.
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double p = 0.0, dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            legendre(n, x, p, dp);
            const double dx = -p / dp;
            x += dx;
            if (std::abs(dx) < 1e-15) break;
        }
        legendre(n, x, p, dp);
        // Map [-1,1] -> [0,1].
        nodes[i] = 0.5 * (x + 1.0);
        weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    // Ascending order is convenient for reproducibility.
    for (int i = 0; i < n / 2; ++i) {
        std::swap(nodes[i], nodes[n - 1 - i]);
        std::swap(weights[i], weights[n - 1 - i]);
    }
}

QuadratureRule quadrature(QuadDomain domain, int degree) {
    if (degree < 1 || degree > 30)
        throw std::invalid_argument("quadrature: degree must be in [1, 30]");

    QuadratureRule rule;
    rule.domain = domain;
    rule.degree = degree;

    if (domain == QuadDomain::Edge) {
        const int n = (degree + 2) / 2; // exact through degree 2n-1 >= degree
        std::vector<double> t, w;
        gauss_legendre(n, t, w);
        for (int i = 0; i < n; ++i) {
            rule.points.emplace_back(1.0 - t[i], t[i], 0.0);
            rule.weights.push_back(w[i]);
        }
        return rule;
    }

    // Duffy transform: (u,v) in [0,1]^2 -> (x,y) = (u, v(1-u)) with Jacobian
    // (1-u).  The extra factor raises the u-degree by one.
    const int nu = (degree + 3) / 2;
    const int nv = (degree + 2) / 2;
    std::vector<double> u, wu, v, wv;
    gauss_legendre(nu, u, wu);
    gauss_legendre(nv, v, wv);
    for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nv; ++j) {
            const double x = u[i];
            const double y = v[j] * (1.0 - u[i]);
            rule.points.emplace_back(1.0 - x - y, x, y);
            rule.weights.push_back(wu[i] * wv[j] * (1.0 - u[i]));
        }
    }
    return rule;
}

} // namespace hjbfem
