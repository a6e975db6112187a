#include "hjbfem/assembly.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hjbfem {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;
using Local10 = Eigen::Matrix<double, 10, 10>;

std::vector<int> element_ids(const Mesh& mesh, const std::vector<int>* order) {
    std::vector<int> ids(static_cast<std::size_t>(mesh.num_triangles()));
    std::iota(ids.begin(), ids.end(), 0);
    if (order) {
        if (order->size() != ids.size())
            throw std::invalid_argument("assembly: element order must list every element once");
        ids = *order;
    }
    return ids;
}

/// Scatter a local (test x trial) block into free-DOF triplets.
void scatter(const HermiteSpace& vh, int t_row, int t_col, const Local10& local, Triplets& out) {
    const std::array<int, 10> rows = vh.element_dofs(t_row);
    const std::array<int, 10> cols = vh.element_dofs(t_col);
    for (int i = 0; i < 10; ++i) {
        const int fi = vh.free_index(rows[i]);
        if (fi < 0) continue;
        for (int j = 0; j < 10; ++j) {
            const int fj = vh.free_index(cols[j]);
            if (fj < 0) continue;
            if (local(i, j) != 0.0) out.emplace_back(fi, fj, local(i, j));
        }
    }
}

SparseOperator from_triplets(int dim, const Triplets& trip, SparseOperator::Symmetry sym) {
    SparseOperator op;
    op.symmetry = sym;
    op.matrix.resize(dim, dim);
    op.matrix.setFromTriplets(trip.begin(), trip.end());
    op.matrix.makeCompressed();
    return op;
}

/// Evaluate the frozen coefficients and reject non-finite or non-symmetric data.
CoefficientSample checked_sample(const FrozenCoefficients& coeffs, int t, int q, const Vec2& x) {
    const CoefficientSample s = coeffs.eval(t, q, x);
    const bool finite = s.A.allFinite() && s.b.allFinite() && std::isfinite(s.c) && std::isfinite(s.f);
    const double scale = 1.0 + s.A.cwiseAbs().maxCoeff();
    if (!finite || std::abs(s.A(0, 1) - s.A(1, 0)) > 1e-12 * scale) {
        std::ostringstream msg;
        msg << "assembly: invalid coefficient sample on element " << t << " at point (" << x(0)
            << ", " << x(1) << ")";
        throw std::runtime_error(msg.str());
    }
    return s;
}

double second_tangential(const BasisEval& e, int i, const Vec2& tang) {
    return tang(0) * tang(0) * e.hess(i, 0) + 2.0 * tang(0) * tang(1) * e.hess(i, 1) +
           tang(1) * tang(1) * e.hess(i, 2);
}

} // namespace

double cordes_gamma(const Mat2& A, const Vec2& b, double c, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("cordes_gamma: lambda must be positive");
    const double cl = c / lambda;
    const double den = A.squaredNorm() + 0.5 * b.squaredNorm() / lambda + cl * cl;
    if (!(den > 0.0)) throw std::invalid_argument("cordes_gamma: vanishing denominator");
    return (A.trace() + cl) / den;
}

SparseOperator EnergyParts::combine(double lambda) const {
    if (!(lambda > 0.0)) throw std::invalid_argument("EnergyParts::combine: lambda must be positive");
    SparseOperator op;
    op.symmetry = SparseOperator::Symmetry::Spd;
    op.matrix = hess.matrix + 2.0 * lambda * grad.matrix + lambda * lambda * mass.matrix;
    op.matrix.makeCompressed();
    return op;
}

EnergyParts assemble_energy_parts(const HermiteSpace& vh, int quad_degree,
                                  const std::vector<int>* element_order) {
    const Mesh& mesh = vh.mesh();
    const QuadratureRule rule = quadrature(QuadDomain::Triangle, quad_degree);
    Triplets th, tg, tm;
    for (int t : element_ids(mesh, element_order)) {
        Local10 lh = Local10::Zero(), lg = Local10::Zero(), lm = Local10::Zero();
        const double two_area = 2.0 * mesh.area(t);
        for (int q = 0; q < rule.size(); ++q) {
            const BasisEval e = vh.eval_basis(t, rule.points[q]);
            const double w = two_area * rule.weights[q];
            // Frobenius product of symmetric Hessians: xx*xx + 2*xy*xy + yy*yy.
            lh += w * (e.hess.col(0) * e.hess.col(0).transpose() +
                       2.0 * e.hess.col(1) * e.hess.col(1).transpose() +
                       e.hess.col(2) * e.hess.col(2).transpose());
            lg += w * e.grad * e.grad.transpose();
            lm += w * e.value * e.value.transpose();
        }
        scatter(vh, t, t, lh, th);
        scatter(vh, t, t, lg, tg);
        scatter(vh, t, t, lm, tm);
    }
    EnergyParts parts;
    parts.hess = from_triplets(vh.dim_free(), th, SparseOperator::Symmetry::Spd);
    parts.grad = from_triplets(vh.dim_free(), tg, SparseOperator::Symmetry::Spd);
    parts.mass = from_triplets(vh.dim_free(), tm, SparseOperator::Symmetry::Spd);
    return parts;
}

SparseOperator assemble_energy(const HermiteSpace& vh, double lambda, int quad_degree) {
    return assemble_energy_parts(vh, quad_degree).combine(lambda);
}

SparseOperator assemble_linearized(const HermiteSpace& vh, const FrozenCoefficients& coeffs,
                                   const std::vector<int>* element_order) {
    const Mesh& mesh = vh.mesh();
    const double lambda = coeffs.lambda;
    if (!(coeffs.eps > 0.0 && coeffs.eps <= 1.0))
        throw std::invalid_argument("assemble_linearized: eps must lie in (0, 1]");
    const double face_factor = 2.0 - std::sqrt(1.0 - coeffs.eps);
    const QuadratureRule vol = quadrature(QuadDomain::Triangle, coeffs.volume_degree);
    const QuadratureRule edge = quadrature(QuadDomain::Edge, coeffs.face_degree);
    Triplets trip;

    for (int t : element_ids(mesh, element_order)) {
        Local10 local = Local10::Zero();
        const double two_area = 2.0 * mesh.area(t);
        for (int q = 0; q < vol.size(); ++q) {
            const Vec2 x = mesh.point(t, vol.points[q]);
            const CoefficientSample s = checked_sample(coeffs, t, q, x);
            const double gamma = cordes_gamma(s.A, s.b, s.c, lambda);
            const BasisEval e = vh.eval_basis(t, vol.points[q]);
            const double w = two_area * vol.weights[q] * gamma;
            Eigen::Matrix<double, 10, 1> lw, test;
            for (int k = 0; k < 10; ++k) {
                lw(k) = s.A(0, 0) * e.hess(k, 0) + 2.0 * s.A(0, 1) * e.hess(k, 1) +
                        s.A(1, 1) * e.hess(k, 2) + s.b.dot(e.grad.row(k)) - s.c * e.value(k);
                test(k) = e.hess(k, 0) + e.hess(k, 2) - lambda * e.value(k);
            }
            local += w * test * lw.transpose();
        }
        scatter(vh, t, t, local, trip);
    }

    for (const Face& f : mesh.interior_faces()) {
        const Vec2 p0 = mesh.vertex(f.v[0]);
        const Vec2 p1 = mesh.vertex(f.v[1]);
        const Vec2 tang = (p1 - p0) / f.length;
        Local10 plus = Local10::Zero(), minus = Local10::Zero();
        for (int q = 0; q < edge.size(); ++q) {
            const double sq = edge.points[q](1);
            const Vec2 x = (1.0 - sq) * p0 + sq * p1;
            const BasisEval ep = vh.eval_basis(f.tplus, mesh.barycentric(f.tplus, x));
            const BasisEval em = vh.eval_basis(f.tminus, mesh.barycentric(f.tminus, x));
            const double w = f.length * edge.weights[q];
            for (int i = 0; i < 10; ++i) {
                // Trace quantities are single-valued; evaluate the test side on tplus.
                const double test = second_tangential(ep, i, tang) - lambda * ep.value(i);
                const double c = -face_factor * w * test;
                for (int j = 0; j < 10; ++j) {
                    plus(i, j) += c * ep.grad.row(j).dot(f.normal);
                    minus(i, j) -= c * em.grad.row(j).dot(f.normal);
                }
            }
        }
        scatter(vh, f.tplus, f.tplus, plus, trip);
        scatter(vh, f.tplus, f.tminus, minus, trip);
    }

    return from_triplets(vh.dim_free(), trip, SparseOperator::Symmetry::General);
}

Eigen::VectorXd assemble_load(const HermiteSpace& vh, const FrozenCoefficients& coeffs,
                              RhsMode mode) {
    const Mesh& mesh = vh.mesh();
    const double lambda_test = mode == RhsMode::LLambda ? coeffs.lambda : 0.0;
    const QuadratureRule vol = quadrature(QuadDomain::Triangle, coeffs.volume_degree);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(vh.dim_free());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const std::array<int, 10> dofs = vh.element_dofs(t);
        const double two_area = 2.0 * mesh.area(t);
        for (int q = 0; q < vol.size(); ++q) {
            const Vec2 x = mesh.point(t, vol.points[q]);
            const CoefficientSample s = checked_sample(coeffs, t, q, x);
            const double gamma = cordes_gamma(s.A, s.b, s.c, coeffs.lambda);
            const BasisEval e = vh.eval_basis(t, vol.points[q]);
            const double w = two_area * vol.weights[q] * gamma * s.f;
            for (int i = 0; i < 10; ++i) {
                const int fi = vh.free_index(dofs[i]);
                if (fi < 0) continue;
                rhs(fi) += w * (e.hess(i, 0) + e.hess(i, 2) - lambda_test * e.value(i));
            }
        }
    }
    return rhs;
}

P1Matrices assemble_p1(const P1Space& v0) {
    const Mesh& mesh = v0.mesh();
    Triplets ks, ms;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const std::array<Vec2, 3> g = v0.barycentric_gradients(t);
        const double a = mesh.area(t);
        const Triangle& tri = mesh.triangle(t);
        for (int i = 0; i < 3; ++i) {
            const int fi = v0.vertex_index(tri.v[i]);
            if (fi < 0) continue;
            for (int j = 0; j < 3; ++j) {
                const int fj = v0.vertex_index(tri.v[j]);
                if (fj < 0) continue;
                // Exact element integrals of linear shape functions.
                ks.emplace_back(fi, fj, a * g[i].dot(g[j]));
                ms.emplace_back(fi, fj, a / 12.0 * (i == j ? 2.0 : 1.0));
            }
        }
    }
    P1Matrices out;
    out.stiffness = from_triplets(v0.dim_free(), ks, SparseOperator::Symmetry::Spd);
    out.mass = from_triplets(v0.dim_free(), ms, SparseOperator::Symmetry::Spd);
    return out;
}

double miranda_talenti_residual(const HermiteSpace& vh, const Eigen::VectorXd& v) {
    if (v.size() != vh.dim_free())
        throw std::invalid_argument("miranda_talenti_residual: expected a free coefficient vector");
    const Mesh& mesh = vh.mesh();
    const QuadratureRule vol = quadrature(QuadDomain::Triangle, 6);
    const QuadratureRule edge = quadrature(QuadDomain::Edge, 6);

    double lap2 = 0.0, hess2 = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const double two_area = 2.0 * mesh.area(t);
        for (int q = 0; q < vol.size(); ++q) {
            const Mat2 h = vh.eval_hessian(v, t, vol.points[q]);
            const double w = two_area * vol.weights[q];
            lap2 += w * h.trace() * h.trace();
            hess2 += w * h.squaredNorm();
        }
    }

    double face = 0.0;
    for (const Face& f : mesh.interior_faces()) {
        const Vec2 p0 = mesh.vertex(f.v[0]);
        const Vec2 p1 = mesh.vertex(f.v[1]);
        const Vec2 tang = (p1 - p0) / f.length;
        for (int q = 0; q < edge.size(); ++q) {
            const double sq = edge.points[q](1);
            const Vec2 x = (1.0 - sq) * p0 + sq * p1;
            const Eigen::Vector3d bp = mesh.barycentric(f.tplus, x);
            const double jump = (vh.eval_gradient(v, f.tplus, bp) -
                                 vh.eval_gradient(v, f.tminus, mesh.barycentric(f.tminus, x)))
                                    .dot(f.normal);
            const Mat2 h = vh.eval_hessian(v, f.tplus, bp);
            face += f.length * edge.weights[q] * jump * (tang.dot(h * tang));
        }
    }

    const double rhs = hess2 + 2.0 * face;
    return std::abs(lap2 - rhs) / std::max({lap2, std::abs(rhs), 1e-30});
}

void write_matrix_market(const SparseOperator& op, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_matrix_market: cannot open " + path);
    out.precision(17);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << op.matrix.rows() << ' ' << op.matrix.cols() << ' ' << op.matrix.nonZeros() << '\n';
    for (int k = 0; k < op.matrix.outerSize(); ++k)
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(op.matrix, k); it; ++it)
            out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
    if (!out) throw std::runtime_error("write_matrix_market: write failed for " + path);
}

} // namespace hjbfem
