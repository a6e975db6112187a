// Acceptance suite: one self-contained check per quantitative claim the
// library is built around, printed as a single [PASS]/[FAIL] line each.  The
// exit code is the number of failed checks.  All tolerances are pinned here,
// next to the check they gate.

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "hjbfem/assembly.hpp"
#include "hjbfem/experiments.hpp"
#include "hjbfem/fespace.hpp"
#include "hjbfem/hjb.hpp"
#include "hjbfem/krylov.hpp"
#include "hjbfem/mesh.hpp"
#include "hjbfem/precond.hpp"
#include "hjbfem/quadrature.hpp"
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

/// The graded-bisection lineage used throughout: start from h = 1/8 on
/// (-1,1)^2 and refine toward the circle |x| = 1/2.
Mesh graded_mesh(int rounds, double h0 = 0.125, double grading = 1000.0) {
    Mesh m = uniform_rect_mesh({-1, -1, 1, 1}, h0);
    for (int l = 0; l < rounds; ++l) m = bisect(m, mark_graded(m, grading));
    return m;
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[768];
    std::va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

template <class Apply>
Eigen::MatrixXd dense_of(int n, Apply&& apply) {
    Eigen::MatrixXd m(n, n);
    for (int j = 0; j < n; ++j) m.col(j) = apply(Eigen::VectorXd::Unit(n, j));
    return m;
}

/// sum_T (h_T^-2 + lambda)^2 ||v||^2_{L2(T)}, the scaled elementwise norm of
/// the fine component in the two-level splitting.
double scaled_elementwise_norm2(const HermiteSpace& vh, const Eigen::VectorXd& v, double lambda,
                                const QuadratureRule& rule) {
    const Mesh& m = vh.mesh();
    double total = 0.0;
    for (int t = 0; t < m.num_triangles(); ++t) {
        const double factor = 1.0 / (m.diameter(t) * m.diameter(t)) + lambda;
        double l2t = 0.0;
        for (int q = 0; q < rule.size(); ++q) {
            const double u = vh.eval_value(v, t, rule.points[q]);
            l2t += 2.0 * m.area(t) * rule.weights[q] * u * u;
        }
        total += factor * factor * l2t;
    }
    return total;
}

const GridTable& find_table(const ExperimentResult& r, const std::string& name) {
    for (const GridTable& t : r.tables)
        if (t.name == name) return t;
    throw std::runtime_error("missing result table: " + name);
}

int find_column(const GridTable& t, const std::string& label) {
    for (std::size_t c = 0; c < t.col_labels.size(); ++c)
        if (t.col_labels[c] == label) return static_cast<int>(c);
    throw std::runtime_error("missing column '" + label + "' in table " + t.name);
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------------------
// 1. Elementwise Laplacian identity.

Outcome check_laplacian_identity() {
    constexpr double kBound = 1e-10;
    constexpr int kVectorsPerMesh = 100;
    std::vector<Mesh> meshes;
    meshes.push_back(uniform_rect_mesh({0, 0, 1, 1}, 0.25));
    meshes.push_back(uniform_rect_mesh({-1, -1, 1, 1}, 0.25));
    meshes.push_back(uniform_rect_mesh({-1, -1, 1, 1}, 0.125));
    meshes.push_back(graded_mesh(1));
    meshes.push_back(graded_mesh(3));

    Rng rng(101);
    double worst = 0.0;
    for (const Mesh& m : meshes) {
        const HermiteSpace vh(m);
        for (int k = 0; k < kVectorsPerMesh; ++k) {
            const Eigen::VectorXd v = random_vector(vh.dim_free(), rng);
            worst = std::max(worst, miranda_talenti_residual(vh, v));
        }
    }
    return {worst <= kBound,
            fmt("max relative defect %.2e over %zu meshes x %d vectors (bound %.0e)", worst,
                meshes.size(), kVectorsPerMesh, kBound)};
}

// ---------------------------------------------------------------------------
// 2. Coercivity of the linearized operator in the scaled energy norm.

Outcome check_coercivity() {
    constexpr int kVectorsPerCase = 50; // x2 meshes = 100 vectors per lambda
    const std::vector<Mesh> meshes = {uniform_rect_mesh({-1, -1, 1, 1}, 0.25), graded_mesh(2)};
    Rng rng(202);
    double bound = 1.0;
    double worst_margin = std::numeric_limits<double>::infinity();
    for (const double theta : {1e-3, 1.0, 1e3}) {
        const HJBProblem p = checkerboard_problem(theta);
        bound = 1.0 - std::sqrt(1.0 - p.eps);
        for (const Mesh& m : meshes) {
            const HermiteSpace vh(m);
            const std::vector<int> sel =
                select_maximizer(p, vh, Eigen::VectorXd::Zero(vh.dim_free()));
            const SparseOperator b = assemble_linearized(vh, freeze_selection(p, sel, m));
            const SparseOperator a = assemble_energy(vh, p.lambda);
            for (int k = 0; k < kVectorsPerCase; ++k) {
                const Eigen::VectorXd v = random_vector(vh.dim_free(), rng);
                worst_margin = std::min(worst_margin, v.dot(b.apply(v)) / v.dot(a.apply(v)));
            }
        }
    }
    return {worst_margin >= bound,
            fmt("min <Bv,v>/||v||^2 = %.4f over 3 scalings x 100 vectors (bound %.4f)",
                worst_margin, bound)};
}

// ---------------------------------------------------------------------------
// 3. Scaling-uniform spectral equivalence of the coarse smoother.

Outcome check_coarse_equivalence() {
    constexpr double kSpreadBound = 5.0;
    constexpr int kMaxCoarseDim = 2000;
    // Recorded window for the scaling-independent eigenvalue interval itself;
    // measured [0.29, 23.3] on these meshes and stable under refinement.
    constexpr double kMuLow = 0.25, kMuHigh = 40.0;
    // The ratio spread is meaningful only while lambda stays below the
    // elementwise h_T^-2 everywhere: once lambda dominates, both operators are
    // mass-dominated, the smoother approaches an exact solve, and the ratio at
    // large lambda drops toward 1 — an improvement the spread would misread as
    // drift.  The two finest lineage meshes whose coarse spaces fit the dense
    // eigensolve budget sit safely inside that regime.
    const std::vector<Mesh> meshes = {graded_mesh(6), graded_mesh(7)};

    double worst_spread = 0.0;
    double mu_lo = std::numeric_limits<double>::infinity();
    double mu_hi = 0.0;
    for (const Mesh& m : meshes) {
        const HermiteSpace vh(m);
        const P1Space v0(m);
        if (v0.dim_free() > kMaxCoarseDim)
            throw std::runtime_error(fmt("coarse space too large for the dense check (%d > %d)",
                                         v0.dim_free(), kMaxCoarseDim));
        const Eigen::SparseMatrix<double, Eigen::RowMajor> pi0 = transfer(vh, v0);
        const EnergyParts parts = assemble_energy_parts(vh);
        const P1Matrices p1 = assemble_p1(v0);

        std::vector<double> kappas;
        for (const double lambda : {1e-3, 1.0, 1e3}) {
            const SparseOperator a = parts.combine(lambda);
            const CoarseSmoother r0(p1, lambda);
            const Eigen::MatrixXd r0_dense =
                dense_of(v0.dim_free(), [&](const Eigen::VectorXd& f) { return r0.apply(f); });
            const Eigen::MatrixXd a0_dense =
                dense_of(v0.dim_free(), [&](const Eigen::VectorXd& c) {
                    return Eigen::VectorXd(pi0.transpose() * a.apply(pi0 * c));
                });
            Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (r0_dense + r0_dense.transpose()));
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("coarse smoother matrix is not SPD");
            const Eigen::MatrixXd l = llt.matrixL();
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(l.transpose() * a0_dense * l);
            if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0)
                throw std::runtime_error("generalized spectrum is not positive");
            const double lo = eig.eigenvalues().minCoeff();
            const double hi = eig.eigenvalues().maxCoeff();
            mu_lo = std::min(mu_lo, lo);
            mu_hi = std::max(mu_hi, hi);
            kappas.push_back(hi / lo);
        }
        worst_spread = std::max(
            worst_spread, *std::max_element(kappas.begin(), kappas.end()) /
                              *std::min_element(kappas.begin(), kappas.end()));
    }
    const bool in_window = mu_lo >= kMuLow && mu_hi <= kMuHigh;
    return {worst_spread < kSpreadBound && in_window,
            fmt("eigenvalues in [%.3f, %.2f] (window [%.2f, %.0f]); worst ratio spread over "
                "scalings %.2f (bound %.1f)",
                mu_lo, mu_hi, kMuLow, kMuHigh, worst_spread, kSpreadBound)};
}

// ---------------------------------------------------------------------------
// 4./5. Conditioning grid over the graded lineage (shared run).

const ExperimentResult& conditioning_grid() {
    static const ExperimentResult result = [] {
        ExperimentConfig cfg; // defaults: graded rounds 4..8, seven scalings
        cfg.workers = 1;
        return run_cond(cfg);
    }();
    return result;
}

Outcome check_multiplicative_uniformity() {
    constexpr double kLow = 3.0, kHigh = 12.0;
    constexpr double kSpreadBound = 2.5;
    constexpr double kCrossCheckTol = 0.05;
    const double kDofTargets[] = {3147, 4467, 6587, 10027, 15927};

    const GridTable& t = find_table(conditioning_grid(), "cond_multiplicative");
    if (t.row_labels.size() != 5)
        throw std::runtime_error("unexpected row count in cond_multiplicative");
    for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
        const double dof = std::stod(t.row_labels[r]);
        if (std::abs(dof - kDofTargets[r]) > 0.10 * kDofTargets[r])
            return {false, fmt("lineage drifted: row %zu has %g DOFs, expected about %g", r, dof,
                               kDofTargets[r])};
    }

    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t r = 0; r < t.row_labels.size(); ++r)
        for (std::size_t c = 0; c < t.col_labels.size(); ++c) {
            const GridTable::Cell& cell = t.at(static_cast<int>(r), static_cast<int>(c));
            if (!cell.ok) return {false, fmt("cell (%zu,%zu) failed: %s", r, c, cell.note.c_str())};
            lo = std::min(lo, cell.value);
            hi = std::max(hi, cell.value);
        }
    const bool in_band = lo >= kLow && hi <= kHigh;
    const double spread = hi / lo;

    // Dense cross-check of the iterative estimate at the smallest level.
    const ExperimentConfig defaults;
    const double lambda = defaults.lambdas.front();
    const Mesh m = graded_mesh(4);
    const HermiteSpace vh(m);
    if (vh.dim_free() != static_cast<int>(std::stod(t.row_labels.front())))
        throw std::runtime_error("cross-check mesh does not match the first table row");
    const P1Space v0(m);
    const SparseOperator a = assemble_energy(vh, lambda);
    const P1Matrices p1 = assemble_p1(v0);
    const Eigen::SparseMatrix<double, Eigen::RowMajor> pi0 = transfer(vh, v0);
    const CoarseSmoother coarse(p1, lambda);
    const MultiplicativePreconditioner pm(a, pi0, &coarse, defaults.sweeps);
    ConditionConfig cc;
    cc.dense_threshold = vh.dim_free();
    cc.seed = defaults.seed;
    const SpectrumEstimate dense = estimate_condition(a, pm, cc);
    if (dense.method != SpectrumEstimate::Method::Dense)
        throw std::runtime_error("cross-check did not take the dense path");
    const double iterative = t.at(0, 0).value;
    const double rel = std::abs(iterative - dense.kappa) / dense.kappa;

    const bool pass = in_band && spread < kSpreadBound && rel <= kCrossCheckTol;
    return {pass, fmt("kappa in [%.2f, %.2f] (band [%.0f, %.0f]), spread %.2f (bound %.1f); "
                      "dense cross-check at %d DOFs: %.3f vs %.3f (%.1f%%, tol 5%%)",
                      lo, hi, kLow, kHigh, spread, kSpreadBound, vh.dim_free(), iterative,
                      dense.kappa, 100.0 * rel)};
}

Outcome check_additive_bound() {
    constexpr double kBound = 330.0;
    const GridTable& t = find_table(conditioning_grid(), "cond_additive");
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t r = 0; r < t.row_labels.size(); ++r)
        for (std::size_t c = 0; c < t.col_labels.size(); ++c) {
            const GridTable::Cell& cell = t.at(static_cast<int>(r), static_cast<int>(c));
            if (!cell.ok) return {false, fmt("cell (%zu,%zu) failed: %s", r, c, cell.note.c_str())};
            if (!std::isfinite(cell.value))
                return {false, fmt("cell (%zu,%zu) is not finite", r, c)};
            lo = std::min(lo, cell.value);
            hi = std::max(hi, cell.value);
        }
    return {hi <= kBound, fmt("kappa in [%.2f, %.2f] over the full grid, all finite (bound %.0f)",
                              lo, hi, kBound)};
}

// ---------------------------------------------------------------------------
// 6. Iteration counts on the linear benchmark at two sizes.

Outcome check_linear_iterations() {
    constexpr double kMulBound = 40.0;
    constexpr double kAddBound = 250.0;
    constexpr double kMulSpreadBound = 1.6;
    const int kDofs[] = {5055, 20351};

    ExperimentConfig cfg;
    cfg.levels = {4, 5}; // h = 1/16 and 1/32
    cfg.workers = 1;
    cfg.precond = PrecondVariant::Multiplicative;
    const ExperimentResult mul = run_linear(cfg);
    cfg.precond = PrecondVariant::Additive;
    const ExperimentResult add = run_linear(cfg);

    const GridTable& tm = find_table(mul, "linear_iterations");
    const GridTable& ta = find_table(add, "linear_iterations");
    for (std::size_t r = 0; r < 2; ++r) {
        if (std::stoi(tm.row_labels.at(r)) != kDofs[r])
            return {false, fmt("unexpected problem size %s (expected %d)",
                               tm.row_labels.at(r).c_str(), kDofs[r])};
    }

    double mul_hi = 0.0, add_hi = 0.0, worst_spread = 0.0;
    for (std::size_t r = 0; r < tm.row_labels.size(); ++r) {
        double row_lo = std::numeric_limits<double>::infinity(), row_hi = 0.0;
        for (std::size_t c = 0; c < tm.col_labels.size(); ++c) {
            const GridTable::Cell& cm = tm.at(static_cast<int>(r), static_cast<int>(c));
            const GridTable::Cell& ca = ta.at(static_cast<int>(r), static_cast<int>(c));
            if (!cm.ok || !ca.ok)
                return {false, fmt("solve failed at row %zu col %zu (%s / %s)", r, c,
                                   cm.note.c_str(), ca.note.c_str())};
            row_lo = std::min(row_lo, cm.value);
            row_hi = std::max(row_hi, cm.value);
            mul_hi = std::max(mul_hi, cm.value);
            add_hi = std::max(add_hi, ca.value);
        }
        worst_spread = std::max(worst_spread, row_hi / row_lo);
    }
    const bool pass = mul_hi <= kMulBound && add_hi <= kAddBound && worst_spread < kMulSpreadBound;
    return {pass,
            fmt("multiplicative max %g (bound %.0f), spread across scalings %.2fx (bound %.1fx); "
                "additive max %g (bound %.0f)",
                mul_hi, kMulBound, worst_spread, kMulSpreadBound, add_hi, kAddBound)};
}

// ---------------------------------------------------------------------------
// 7. Semi-smooth Newton on the Bellman benchmark.

Outcome check_newton_convergence() {
    constexpr double kStepBound = 10.0;
    constexpr double kAvgInnerBound = 30.0;
    constexpr int kCoarsestDof = 71;

    ExperimentConfig cfg;
    cfg.levels = {2, 3, 4, 5}; // h = 1/4 .. 1/32
    cfg.workers = 1;
    const ExperimentResult r = run_hjb(cfg);
    const GridTable& t = find_table(r, "hjb_newton");
    const int cdof = find_column(t, "dof");
    const int csteps = find_column(t, "newton_steps");
    const int cavg = find_column(t, "avg_pgmres");

    if (static_cast<int>(t.at(0, cdof).value) != kCoarsestDof)
        return {false, fmt("coarsest level has %g DOFs, expected exactly %d", t.at(0, cdof).value,
                           kCoarsestDof)};
    double steps_hi = 0.0, avg_hi = 0.0;
    for (std::size_t row = 0; row < t.row_labels.size(); ++row) {
        const GridTable::Cell& steps = t.at(static_cast<int>(row), csteps);
        const GridTable::Cell& avg = t.at(static_cast<int>(row), cavg);
        if (!steps.ok || !avg.ok)
            return {false, fmt("no convergence at h = %s (%s)", t.row_labels[row].c_str(),
                               steps.note.c_str())};
        steps_hi = std::max(steps_hi, steps.value);
        avg_hi = std::max(avg_hi, avg.value);
    }
    const bool pass = steps_hi <= kStepBound && avg_hi <= kAvgInnerBound;
    return {pass, fmt("all 4 levels converged: max %g Newton steps (bound %.0f), "
                      "max avg inner iterations %.2f (bound %.0f), %d DOFs at the coarsest level",
                      steps_hi, kStepBound, avg_hi, kAvgInnerBound, kCoarsestDof)};
}

// ---------------------------------------------------------------------------
// 8. Agreement of the iterative and dense condition-number estimators.

Outcome check_estimator_agreement() {
    constexpr double kRelTol = 0.05;
    constexpr int kMaxDim = 1500;
    const ExperimentConfig defaults;

    struct Case {
        Mesh mesh;
        PrecondVariant variant;
        double lambda;
    };
    std::vector<Case> cases;
    cases.push_back({uniform_rect_mesh({0, 0, 1, 1}, 0.25), PrecondVariant::Additive, 1e3});
    cases.push_back({uniform_rect_mesh({0, 0, 1, 1}, 0.125), PrecondVariant::Multiplicative, 1.0});
    cases.push_back({uniform_rect_mesh({0, 0, 1, 1}, 0.0625), PrecondVariant::Additive, 1e-3});

    double worst = 0.0;
    std::string sizes;
    for (const Case& c : cases) {
        const HermiteSpace vh(c.mesh);
        if (vh.dim_free() > kMaxDim)
            throw std::runtime_error(fmt("case too large: %d free DOFs", vh.dim_free()));
        const P1Space v0(c.mesh);
        const SparseOperator a = assemble_energy(vh, c.lambda);
        const P1Matrices p1 = assemble_p1(v0);
        const Eigen::SparseMatrix<double, Eigen::RowMajor> pi0 = transfer(vh, v0);
        const CoarseSmoother coarse(p1, c.lambda);

        const AdditivePreconditioner pa(a, pi0, &coarse, defaults.omega,
                                        FineSmoother::SymmetricGs, defaults.sweeps);
        const MultiplicativePreconditioner pm(a, pi0, &coarse, defaults.sweeps);
        const Preconditioner& p = (c.variant == PrecondVariant::Additive)
                                      ? static_cast<const Preconditioner&>(pa)
                                      : static_cast<const Preconditioner&>(pm);

        ConditionConfig cc;
        cc.seed = defaults.seed;
        cc.dense_threshold = 0; // force the iterative path
        const SpectrumEstimate lanczos = estimate_condition(a, p, cc);
        cc.dense_threshold = vh.dim_free();
        const SpectrumEstimate dense = estimate_condition(a, p, cc);
        if (lanczos.method != SpectrumEstimate::Method::Lanczos ||
            dense.method != SpectrumEstimate::Method::Dense)
            throw std::runtime_error("estimator did not take the requested path");
        worst = std::max(worst, std::abs(lanczos.kappa - dense.kappa) / dense.kappa);
        sizes += fmt("%s%d", sizes.empty() ? "" : "/", vh.dim_free());
    }
    return {worst <= kRelTol, fmt("max relative disagreement %.2f%% over problems of %s free DOFs "
                                  "(tol %.0f%%)",
                                  100.0 * worst, sizes.c_str(), 100.0 * kRelTol)};
}

// ---------------------------------------------------------------------------
// 9. Two-level splitting energy ratio.

Outcome check_splitting_ratio() {
    constexpr double kSpreadBound = 10.0;
    constexpr int kVectors = 20;
    const QuadratureRule rule = quadrature(QuadDomain::Triangle, 6);
    Rng rng(909);

    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const int rounds : {1, 3}) {
        const Mesh m = graded_mesh(rounds);
        const HermiteSpace vh(m);
        const P1Space v0(m);
        const Eigen::SparseMatrix<double, Eigen::RowMajor> pi0 = transfer(vh, v0);
        const Eigen::SparseMatrix<double, Eigen::RowMajor> ih = nodal_interpolation(vh, v0);
        const EnergyParts parts = assemble_energy_parts(vh);
        const P1Matrices p1 = assemble_p1(v0);
        const Eigen::SparseMatrix<double> mass(p1.mass.matrix);
        const Eigen::SparseMatrix<double> stiffness(p1.stiffness.matrix);
        Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> mass_llt(mass);
        if (mass_llt.info() != Eigen::Success)
            throw std::runtime_error("coarse mass factorization failed");

        for (const double lambda : {1e-3, 1.0, 1e3}) {
            const SparseOperator a = parts.combine(lambda);
            const Eigen::SparseMatrix<double> shifted = lambda * mass + stiffness;
            for (int k = 0; k < kVectors; ++k) {
                const Eigen::VectorXd v = random_vector(vh.dim_free(), rng);
                const Eigen::VectorXd vc = ih * v;       // coarse part: vertex values
                const Eigen::VectorXd vf = v - pi0 * vc; // fine remainder
                const Eigen::VectorXd w = shifted * vc;
                const double split_energy = scaled_elementwise_norm2(vh, vf, lambda, rule) +
                                            w.dot(mass_llt.solve(w));
                const double ratio = split_energy / v.dot(a.apply(v));
                lo = std::min(lo, ratio);
                hi = std::max(hi, ratio);
            }
        }
    }
    return {hi / lo < kSpreadBound,
            fmt("splitting/energy ratio in [%.3f, %.3f] over 2 meshes x 3 scalings x %d vectors; "
                "spread %.2f (bound %.0f)",
                lo, hi, kVectors, hi / lo, kSpreadBound)};
}

// ---------------------------------------------------------------------------
// 10. Manufactured-solution convergence under uniform refinement.

Outcome check_error_convergence() {
    ExperimentConfig cfg;
    cfg.lambdas = {1.0};
    cfg.levels = {1, 2, 3, 4}; // h = 1/2 .. 1/16
    cfg.workers = 1;
    const ExperimentResult r = run_linear(cfg);
    const GridTable& iters = find_table(r, "linear_iterations");
    for (std::size_t row = 0; row < iters.row_labels.size(); ++row)
        if (!iters.at(static_cast<int>(row), 0).ok)
            return {false, fmt("solve failed at row %zu", row)};

    const GridTable& errs = find_table(r, "linear_errors");
    const int ch2 = find_column(errs, "h2_broken");
    std::vector<double> h2;
    for (std::size_t row = 0; row < errs.row_labels.size(); ++row) {
        const GridTable::Cell& cell = errs.at(static_cast<int>(row), ch2);
        if (!cell.ok) return {false, fmt("missing error entry at row %zu", row)};
        h2.push_back(cell.value);
    }
    if (h2.size() != 4) throw std::runtime_error("expected four refinement levels");
    bool monotone = true;
    std::string chain;
    for (std::size_t i = 0; i < h2.size(); ++i) {
        if (i > 0 && h2[i] >= h2[i - 1]) monotone = false;
        chain += fmt("%s%.3e", i == 0 ? "" : " > ", h2[i]);
    }
    return {monotone, fmt("broken-H2 error %s %s over 3 uniform refinements", chain.c_str(),
                          monotone ? "decreases monotonically" : "IS NOT monotone")};
}

} // namespace

int main() {
    struct Entry {
        int id;
        const char* title;
        Outcome (*run)();
    };
    const Entry entries[] = {
        {1, "elementwise Laplacian identity on uniform and graded meshes", check_laplacian_identity},
        {2, "coercivity of the linearized operator in the scaled energy norm", check_coercivity},
        {3, "scaling-uniform spectral equivalence of the coarse smoother", check_coarse_equivalence},
        {4, "uniform conditioning of the multiplicative preconditioner", check_multiplicative_uniformity},
        {5, "bounded conditioning of the additive preconditioner", check_additive_bound},
        {6, "iteration counts on the linear benchmark", check_linear_iterations},
        {7, "semi-smooth Newton convergence on the Bellman benchmark", check_newton_convergence},
        {8, "agreement of the iterative and dense condition estimators", check_estimator_agreement},
        {9, "bounded two-level splitting energy ratio", check_splitting_ratio},
        {10, "manufactured-solution convergence under uniform refinement", check_error_convergence},
    };

    std::printf("acceptance suite, revision %s\n", revision().c_str());
    int failures = 0;
    for (const Entry& e : entries) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = e.run();
        } catch (const std::exception& ex) {
            o = {false, std::string("exception: ") + ex.what()};
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", e.id, e.title,
                    o.detail.c_str(), seconds);
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(entries)) - failures,
                std::size(entries));
    return failures;
}
