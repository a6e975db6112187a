#include "hjbfem/experiments.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <functional>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "hjbfem/fespace.hpp"
#include "hjbfem/hjb.hpp"
#include "hjbfem/krylov.hpp"
#include "hjbfem/mesh.hpp"
#include "hjbfem/precond.hpp"
#include "hjbfem/smoothers.hpp"

#ifndef HJBFEM_REVISION
#define HJBFEM_REVISION "untracked"
#endif

namespace hjbfem {

namespace {

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

std::string num_exact(double v) { return fmt("%.17g", v); } // round-trip precision
std::string num_short(double v) { return fmt("%.5g", v); }
std::string num_label(double v) { return fmt("%g", v); }

template <class T, class F>
std::string join(const std::vector<T>& v, F f) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out += ',';
        out += f(v[i]);
    }
    return out;
}

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> items;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        items.push_back(trim(s.substr(start, pos - start)));
        if (pos == std::string::npos) return items;
        start = pos + 1;
    }
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw std::invalid_argument("malformed value for config key '" + key + "': " + value);
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (trim(value.substr(pos)).empty()) return v;
    } catch (const std::exception&) {
    }
    bad_value(key, value);
}

long long parse_int(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (trim(value.substr(pos)).empty()) return v;
    } catch (const std::exception&) {
    }
    bad_value(key, value);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    // stoull accepts a leading minus and wraps; reject signs explicitly.
    if (!value.empty() && (value[0] == '-' || value[0] == '+')) bad_value(key, value);
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (trim(value.substr(pos)).empty()) return v;
    } catch (const std::exception&) {
    }
    bad_value(key, value);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
    if (value == "0" || value == "false" || value == "no" || value == "off") return false;
    bad_value(key, value);
}

const char* precond_name(PrecondVariant v) {
    return v == PrecondVariant::Additive ? "add" : "mul";
}

const char* rhs_name(RhsMode m) { return m == RhsMode::LLambda ? "l_lambda" : "delta"; }

/// Full effective configuration in config-file vocabulary, plus the revision.
std::vector<std::pair<std::string, std::string>> config_echo(const ExperimentConfig& cfg,
                                                             const std::string& experiment,
                                                             const std::vector<int>& levels) {
    std::vector<std::pair<std::string, std::string>> md;
    md.emplace_back("experiment", experiment);
    md.emplace_back("revision", revision());
    md.emplace_back("lambda", join(cfg.lambdas, [](double v) { return num_label(v); }));
    md.emplace_back("levels", join(levels, [](int v) { return std::to_string(v); }));
    md.emplace_back("precond", precond_name(cfg.precond));
    md.emplace_back("omega", num_label(cfg.omega));
    md.emplace_back("tol", num_label(cfg.tol));
    md.emplace_back("newton_tol", num_label(cfg.newton_tol));
    md.emplace_back("inner_tol", num_label(cfg.inner_tol));
    md.emplace_back("rhs_mode", rhs_name(cfg.rhs_mode));
    md.emplace_back("seed", std::to_string(cfg.seed));
    md.emplace_back("out", cfg.out_dir);
    md.emplace_back("full", cfg.full ? "true" : "false");
    md.emplace_back("sweeps", std::to_string(cfg.sweeps));
    md.emplace_back("max_iterations", std::to_string(cfg.max_iterations));
    md.emplace_back("max_newton_steps", std::to_string(cfg.max_newton_steps));
    md.emplace_back("theta_samples", std::to_string(cfg.theta_samples));
    md.emplace_back("rotation_samples", std::to_string(cfg.rotation_samples));
    md.emplace_back("workers", std::to_string(cfg.workers));
    return md;
}

/// Run body(0..n-1) on up to `workers` threads; cell order of side effects is
/// made irrelevant by writing into preallocated per-index slots.
void parallel_for(int n, int workers, const std::function<void(int)>& body) {
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex err_mutex;
    std::exception_ptr err;
    auto work = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(err_mutex);
                if (!err) err = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

/// Everything lambda-independent a level contributes: mesh, spaces, energy
/// parts, coarse matrices, and the coarse-to-fine transfer.  Not movable
/// (members hold references into the mesh), so it lives behind unique_ptr.
struct LevelContext {
    Mesh mesh;
    HermiteSpace vh;
    P1Space v0;
    EnergyParts parts;
    P1Matrices p1;
    Eigen::SparseMatrix<double, Eigen::RowMajor> pi0;

    explicit LevelContext(Mesh m)
        : mesh(std::move(m)),
          vh(mesh),
          v0(mesh),
          parts(assemble_energy_parts(vh)),
          p1(assemble_p1(v0)),
          pi0(transfer(vh, v0)) {}
};

using ContextPtr = std::unique_ptr<LevelContext>;

std::unique_ptr<Preconditioner> make_preconditioner(PrecondVariant variant,
                                                    const SparseOperator& a,
                                                    const LevelContext& ctx,
                                                    const CoarseSmoother& coarse,
                                                    const ExperimentConfig& cfg) {
    if (variant == PrecondVariant::Additive)
        return std::make_unique<AdditivePreconditioner>(a, ctx.pi0, &coarse, cfg.omega,
                                                        FineSmoother::SymmetricGs, cfg.sweeps);
    return std::make_unique<MultiplicativePreconditioner>(a, ctx.pi0, &coarse, cfg.sweeps);
}

/// Meshes of the graded lineage (h0 = 1/8 on (-1,1)^2, marking constant 1000)
/// at the requested bisection rounds, in the requested order.
std::vector<Mesh> graded_lineage(const std::vector<int>& levels) {
    const int top = *std::max_element(levels.begin(), levels.end());
    std::vector<Mesh> by_level;
    by_level.reserve(top + 1);
    by_level.push_back(uniform_rect_mesh({-1.0, -1.0, 1.0, 1.0}, 0.125));
    for (int l = 1; l <= top; ++l)
        by_level.push_back(bisect(by_level.back(), mark_graded(by_level.back(), 1000.0)));
    std::vector<Mesh> out;
    out.reserve(levels.size());
    for (const int l : levels) out.push_back(by_level[l]);
    return out;
}

std::vector<ContextPtr> build_contexts(std::vector<Mesh> meshes, int workers) {
    std::vector<ContextPtr> contexts(meshes.size());
    parallel_for(static_cast<int>(meshes.size()), workers,
                 [&](int i) { contexts[i] = std::make_unique<LevelContext>(std::move(meshes[i])); });
    return contexts;
}

std::vector<int> effective_levels(const ExperimentConfig& cfg, std::vector<int> defaults) {
    return cfg.levels.empty() ? std::move(defaults) : cfg.levels;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        out += c;
        if (c == '"') out += '"';
    }
    out += '"';
    return out;
}

std::string md_field(const std::string& s) {
    std::string out;
    for (const char c : s) {
        if (c == '|') out += '\\';
        out += c;
    }
    return out;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
    out.close();
    if (!out) throw std::runtime_error("write failed: " + path);
}

/// Dyadic mesh size label: "1/8" for k = 3.
std::string h_label(int k) {
    return k == 0 ? std::string("1") : "1/" + std::to_string(1 << k);
}

GridTable::Cell failed_cell(const std::string& why) { return {0.0, false, why}; }

} // namespace

std::string revision() { return HJBFEM_REVISION; }

void validate(const ExperimentConfig& cfg) {
    if (cfg.lambdas.empty()) throw std::invalid_argument("lambda list must not be empty");
    for (const double l : cfg.lambdas)
        if (!(l > 0.0) || !std::isfinite(l))
            throw std::invalid_argument("lambda values must be positive and finite");
    for (const int l : cfg.levels)
        if (l < 0 || l > 14) throw std::invalid_argument("levels must lie in [0, 14]");
    if (!(cfg.omega > 0.0) || !(cfg.omega <= 2.0))
        throw std::invalid_argument("omega must lie in (0, 2]");
    if (!(cfg.tol > 0.0) || !(cfg.tol < 1.0)) throw std::invalid_argument("tol must lie in (0, 1)");
    if (!(cfg.newton_tol > 0.0) || !(cfg.newton_tol < 1.0))
        throw std::invalid_argument("newton_tol must lie in (0, 1)");
    if (!(cfg.inner_tol > 0.0) || !(cfg.inner_tol < 1.0))
        throw std::invalid_argument("inner_tol must lie in (0, 1)");
    if (cfg.out_dir.empty()) throw std::invalid_argument("output directory must not be empty");
    if (cfg.sweeps < 1) throw std::invalid_argument("sweeps must be at least 1");
    if (cfg.max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
    if (cfg.max_newton_steps < 1)
        throw std::invalid_argument("max_newton_steps must be at least 1");
    if (cfg.theta_samples < 1 || cfg.rotation_samples < 1)
        throw std::invalid_argument("control-grid resolutions must be at least 1");
    if (cfg.workers < 1 || cfg.workers > 256)
        throw std::invalid_argument("workers must lie in [1, 256]");
}

void set_option(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "lambda") {
        cfg.lambdas.clear();
        for (const auto& item : split(value, ','))
            cfg.lambdas.push_back(parse_double(key, item));
    } else if (key == "levels") {
        cfg.levels.clear();
        for (const auto& item : split(value, ','))
            cfg.levels.push_back(static_cast<int>(parse_int(key, item)));
    } else if (key == "precond") {
        if (value == "add") cfg.precond = PrecondVariant::Additive;
        else if (value == "mul") cfg.precond = PrecondVariant::Multiplicative;
        else bad_value(key, value);
    } else if (key == "omega") {
        cfg.omega = parse_double(key, value);
    } else if (key == "tol") {
        cfg.tol = parse_double(key, value);
    } else if (key == "newton_tol") {
        cfg.newton_tol = parse_double(key, value);
    } else if (key == "inner_tol") {
        cfg.inner_tol = parse_double(key, value);
    } else if (key == "rhs_mode") {
        if (value == "l_lambda") cfg.rhs_mode = RhsMode::LLambda;
        else if (value == "delta") cfg.rhs_mode = RhsMode::Delta;
        else bad_value(key, value);
    } else if (key == "seed") {
        cfg.seed = parse_u64(key, value);
    } else if (key == "out") {
        if (value.empty()) bad_value(key, value);
        cfg.out_dir = value;
    } else if (key == "full") {
        cfg.full = parse_bool(key, value);
    } else if (key == "sweeps") {
        cfg.sweeps = static_cast<int>(parse_int(key, value));
    } else if (key == "max_iterations") {
        cfg.max_iterations = static_cast<int>(parse_int(key, value));
    } else if (key == "max_newton_steps") {
        cfg.max_newton_steps = static_cast<int>(parse_int(key, value));
    } else if (key == "theta_samples") {
        cfg.theta_samples = static_cast<int>(parse_int(key, value));
    } else if (key == "rotation_samples") {
        cfg.rotation_samples = static_cast<int>(parse_int(key, value));
    } else if (key == "workers") {
        cfg.workers = static_cast<int>(parse_int(key, value));
    } else {
        throw std::invalid_argument("unknown config key: " + key);
    }
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                        ": expected key=value, got: " + line);
        set_option(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

GridTable::Cell& GridTable::at(int r, int c) {
    return cells[static_cast<std::size_t>(r) * col_labels.size() + c];
}

const GridTable::Cell& GridTable::at(int r, int c) const {
    return cells[static_cast<std::size_t>(r) * col_labels.size() + c];
}

bool GridTable::complete() const {
    return std::all_of(cells.begin(), cells.end(), [](const Cell& c) { return c.ok; });
}

bool ExperimentResult::complete() const {
    return std::all_of(tables.begin(), tables.end(),
                       [](const GridTable& t) { return t.complete(); });
}

std::string to_csv(const GridTable& t) {
    std::string out;
    for (const auto& [k, v] : t.metadata) out += "# " + k + " = " + v + "\n";
    out += "row,col,value,ok,note\n";
    for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
        for (std::size_t c = 0; c < t.col_labels.size(); ++c) {
            const auto& cell = t.at(static_cast<int>(r), static_cast<int>(c));
            out += csv_field(t.row_labels[r]) + "," + csv_field(t.col_labels[c]) + "," +
                   num_exact(cell.value) + "," + (cell.ok ? "1" : "0") + "," +
                   csv_field(cell.note) + "\n";
        }
    }
    return out;
}

std::string to_markdown(const GridTable& t) {
    std::string out = "# " + t.name + "\n\n";
    for (const auto& [k, v] : t.metadata) out += "- " + k + " = " + md_field(v) + "\n";
    out += "\n| " + md_field(t.row_axis) + " \\ " + md_field(t.col_axis) + " |";
    for (const auto& c : t.col_labels) out += " " + md_field(c) + " |";
    out += "\n|";
    for (std::size_t c = 0; c <= t.col_labels.size(); ++c) out += " --- |";
    out += "\n";
    for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
        out += "| " + md_field(t.row_labels[r]) + " |";
        for (std::size_t c = 0; c < t.col_labels.size(); ++c) {
            const auto& cell = t.at(static_cast<int>(r), static_cast<int>(c));
            out += cell.ok ? " " + num_short(cell.value) + " |"
                           : " failed (" + md_field(cell.note) + ") |";
        }
        out += "\n";
    }
    return out;
}

std::string to_csv(const RecordTable& t) {
    std::string out;
    for (const auto& [k, v] : t.metadata) out += "# " + k + " = " + v + "\n";
    out += join(t.columns, [](const std::string& c) { return csv_field(c); }) + "\n";
    for (const auto& row : t.rows)
        out += join(row, [](const std::string& c) { return csv_field(c); }) + "\n";
    return out;
}

ExperimentResult run_cond(const ExperimentConfig& cfg) {
    validate(cfg);
    const std::vector<int> levels = effective_levels(cfg, {4, 5, 6, 7, 8});
    const auto contexts = build_contexts(graded_lineage(levels), cfg.workers);
    const int nl = static_cast<int>(levels.size());
    const int nc = static_cast<int>(cfg.lambdas.size());

    struct CellOut {
        GridTable::Cell cell;
        bool have_est = false;
        SpectrumEstimate est;
    };
    std::vector<CellOut> outs(static_cast<std::size_t>(2) * nl * nc);

    parallel_for(2 * nl * nc, cfg.workers, [&](int task) {
        const PrecondVariant variant =
            task < nl * nc ? PrecondVariant::Additive : PrecondVariant::Multiplicative;
        const int li = (task % (nl * nc)) / nc;
        const int ci = task % nc;
        const LevelContext& ctx = *contexts[li];
        const double lambda = cfg.lambdas[ci];
        CellOut& slot = outs[task];
        try {
            const SparseOperator a = ctx.parts.combine(lambda);
            const CoarseSmoother coarse(ctx.p1, lambda);
            const auto p = make_preconditioner(variant, a, ctx, coarse, cfg);
            ConditionConfig cc;
            cc.dense_threshold = 0; // one estimator across all sizes
            cc.seed = cfg.seed;
            slot.est = estimate_condition(a, *p, cc);
            slot.have_est = true;
            slot.cell = {slot.est.kappa, true, "lanczos k=" + std::to_string(slot.est.iterations)};
        } catch (const std::exception& e) {
            slot.cell = failed_cell(e.what());
        }
    });

    const auto echo = config_echo(cfg, "cond", levels);
    auto make_table = [&](PrecondVariant variant, int base) {
        GridTable t;
        t.name = variant == PrecondVariant::Additive ? "cond_additive" : "cond_multiplicative";
        t.row_axis = "dof";
        t.col_axis = "lambda";
        for (int li = 0; li < nl; ++li)
            t.row_labels.push_back(std::to_string(contexts[li]->vh.dim_free()));
        for (const double l : cfg.lambdas) t.col_labels.push_back(num_label(l));
        t.cells.resize(static_cast<std::size_t>(nl) * nc);
        for (int li = 0; li < nl; ++li)
            for (int ci = 0; ci < nc; ++ci) t.at(li, ci) = outs[base + li * nc + ci].cell;
        t.metadata = echo;
        t.metadata.emplace_back("value", "condition number of the preconditioned operator");
        t.metadata.emplace_back("variant", precond_name(variant));
        t.metadata.emplace_back("domain", "(-1,1)^2, graded lineage h0=1/8, C=1000");
        t.metadata.emplace_back("estimator",
                                "lanczos in the energy inner product; full reorthogonalization");
        t.metadata.emplace_back("smoother", "symmetric Gauss-Seidel, " +
                                                std::to_string(cfg.sweeps) + " sweeps");
        t.metadata.emplace_back("coarse_solver", "sparse Cholesky");
        t.metadata.emplace_back("cell_order", "level-major");
        return t;
    };

    ExperimentResult result;
    result.tables.push_back(make_table(PrecondVariant::Additive, 0));
    result.tables.push_back(make_table(PrecondVariant::Multiplicative, nl * nc));

    RecordTable spectra;
    spectra.name = "cond_spectra";
    spectra.columns = {"variant", "dof",   "level",      "lambda", "lambda_min",
                       "lambda_max", "kappa", "iterations", "method"};
    spectra.metadata = echo;
    for (int v = 0; v < 2; ++v) {
        for (int li = 0; li < nl; ++li) {
            for (int ci = 0; ci < nc; ++ci) {
                const CellOut& slot = outs[v * nl * nc + li * nc + ci];
                if (!slot.have_est) continue;
                spectra.rows.push_back(
                    {v == 0 ? "add" : "mul", std::to_string(contexts[li]->vh.dim_free()),
                     std::to_string(levels[li]), num_label(cfg.lambdas[ci]),
                     num_exact(slot.est.lambda_min), num_exact(slot.est.lambda_max),
                     num_exact(slot.est.kappa), std::to_string(slot.est.iterations),
                     slot.est.method == SpectrumEstimate::Method::Dense ? "dense" : "lanczos"});
            }
        }
    }
    result.records.push_back(std::move(spectra));
    return result;
}

ExperimentResult run_linear(const ExperimentConfig& cfg) {
    validate(cfg);
    std::vector<int> levels = effective_levels(cfg, {4, 5, 6, 7});
    bool capped = false;
    if (!cfg.full) {
        // Desk-scale cap: h = 2^-6 on (-1,1)^2 is the largest default problem.
        const auto end = std::remove_if(levels.begin(), levels.end(), [](int k) { return k > 6; });
        capped = end != levels.end();
        levels.erase(end, levels.end());
        if (levels.empty())
            throw std::invalid_argument(
                "all requested levels exceed the desk-scale cap; set full=true to lift it");
    }

    std::vector<Mesh> meshes;
    meshes.reserve(levels.size());
    for (const int k : levels)
        meshes.push_back(uniform_rect_mesh({-1.0, -1.0, 1.0, 1.0}, std::ldexp(1.0, -k)));
    const auto contexts = build_contexts(std::move(meshes), cfg.workers);
    const int nl = static_cast<int>(levels.size());
    const int nc = static_cast<int>(cfg.lambdas.size());

    // The ellipticity margin of the coefficient family is scale-invariant;
    // probe it once at the domain corners and center.
    const CordesReport cordes = verify_cordes(
        checkerboard_problem(1.0),
        std::vector<Vec2>{{1, 1}, {-1, 1}, {1, -1}, {-1, -1}, {0.5, 0.5}});

    struct CellOut {
        GridTable::Cell cell;
        std::vector<double> history;
        bool have_errors = false;
        ErrorNorms errors;
    };
    std::vector<CellOut> outs(static_cast<std::size_t>(nl) * nc);

    parallel_for(nl * nc, cfg.workers, [&](int task) {
        const int li = task / nc;
        const int ci = task % nc;
        const LevelContext& ctx = *contexts[li];
        const double lambda = cfg.lambdas[ci];
        CellOut& slot = outs[task];
        try {
            const HJBProblem problem = checkerboard_problem(lambda);
            const SparseOperator a = ctx.parts.combine(lambda);
            const CoarseSmoother coarse(ctx.p1, lambda);
            const auto p = make_preconditioner(cfg.precond, a, ctx, coarse, cfg);
            KrylovConfig kc;
            kc.tol = cfg.tol;
            kc.max_iterations = cfg.max_iterations;
            const LinearRun run = solve_linear(problem, ctx.vh, *p, kc, cfg.rhs_mode);
            slot.cell = {static_cast<double>(run.stats.iterations), run.stats.converged,
                         run.stats.converged ? "" : "no convergence"};
            slot.history = run.stats.history;
            if (lambda == 1.0 && !slot.have_errors) {
                slot.errors = error_norms(ctx.vh, run.u, DofLayout::Free, problem.exact, lambda);
                slot.have_errors = true;
            }
        } catch (const std::exception& e) {
            slot.cell = failed_cell(e.what());
        }
    });

    auto echo = config_echo(cfg, "linear", levels);
    echo.emplace_back("domain", "(-1,1)^2, uniform; levels are dyadic exponents of h");
    echo.emplace_back("coefficients", "sign-alternating diffusion, scaled by lambda");
    echo.emplace_back("residual_convention", "preconditioned");
    echo.emplace_back("cordes_worst_quotient", num_short(cordes.worst_quotient));
    echo.emplace_back("cordes_implied_margin", num_short(cordes.implied_eps));
    if (capped) echo.emplace_back("desk_cap", "levels above 6 skipped; set full=true to lift");

    GridTable iters;
    iters.name = "linear_iterations";
    iters.row_axis = "dof";
    iters.col_axis = "lambda";
    for (int li = 0; li < nl; ++li)
        iters.row_labels.push_back(std::to_string(contexts[li]->vh.dim_free()));
    for (const double l : cfg.lambdas) iters.col_labels.push_back(num_label(l));
    iters.cells.resize(static_cast<std::size_t>(nl) * nc);
    for (int li = 0; li < nl; ++li)
        for (int ci = 0; ci < nc; ++ci) iters.at(li, ci) = outs[li * nc + ci].cell;
    iters.metadata = echo;
    iters.metadata.emplace_back("value", "preconditioned GMRES iterations to tol");

    ExperimentResult result;
    result.tables.push_back(std::move(iters));

    const bool any_errors =
        std::any_of(outs.begin(), outs.end(), [](const CellOut& o) { return o.have_errors; });
    if (any_errors) {
        GridTable errors;
        errors.name = "linear_errors";
        errors.row_axis = "dof";
        errors.col_axis = "norm";
        errors.col_labels = {"l2", "h1", "h2_broken", "energy"};
        for (int li = 0; li < nl; ++li)
            errors.row_labels.push_back(std::to_string(contexts[li]->vh.dim_free()));
        errors.cells.resize(static_cast<std::size_t>(nl) * 4);
        for (int li = 0; li < nl; ++li) {
            const CellOut* found = nullptr;
            for (int ci = 0; ci < nc && !found; ++ci)
                if (outs[li * nc + ci].have_errors) found = &outs[li * nc + ci];
            if (found) {
                const double vals[] = {found->errors.l2, found->errors.h1,
                                       found->errors.h2_broken, found->errors.energy};
                for (int c = 0; c < 4; ++c) errors.at(li, c) = {vals[c], found->cell.ok, ""};
            } else {
                for (int c = 0; c < 4; ++c) errors.at(li, c) = failed_cell("no solve at lambda=1");
            }
        }
        errors.metadata = echo;
        errors.metadata.emplace_back("value", "norm of (discrete - exact) at lambda = 1");
        result.tables.push_back(std::move(errors));
    }

    RecordTable residuals;
    residuals.name = "linear_residuals";
    residuals.columns = {"dof", "lambda", "iteration", "residual"};
    residuals.metadata = echo;
    for (int li = 0; li < nl; ++li) {
        const std::string dof = std::to_string(contexts[li]->vh.dim_free());
        for (int ci = 0; ci < nc; ++ci) {
            const auto& hist = outs[li * nc + ci].history;
            for (std::size_t k = 0; k < hist.size(); ++k)
                residuals.rows.push_back({dof, num_label(cfg.lambdas[ci]),
                                          std::to_string(k), num_exact(hist[k])});
        }
    }
    result.records.push_back(std::move(residuals));
    return result;
}

ExperimentResult run_hjb(const ExperimentConfig& cfg) {
    validate(cfg);
    const std::vector<int> levels = effective_levels(cfg, {2, 3, 4, 5, 6});
    const HJBProblem problem = rotation_control_problem(cfg.theta_samples, cfg.rotation_samples);
    const CordesReport cordes = verify_cordes(
        problem,
        std::vector<Vec2>{{0.25, 0.25}, {0.5, 0.5}, {0.75, 0.5}, {0.3, 0.7}, {0.9, 0.1}});

    std::vector<Mesh> meshes;
    meshes.reserve(levels.size());
    for (const int k : levels)
        meshes.push_back(uniform_rect_mesh({0.0, 0.0, 1.0, 1.0}, std::ldexp(1.0, -k)));
    const auto contexts = build_contexts(std::move(meshes), cfg.workers);
    const int nl = static_cast<int>(levels.size());

    struct RowOut {
        std::array<GridTable::Cell, 4> cells; // dof, h, newton_steps, avg_pgmres
        std::vector<NewtonStep> steps;
    };
    std::vector<RowOut> outs(nl);

    parallel_for(nl, cfg.workers, [&](int li) {
        const LevelContext& ctx = *contexts[li];
        RowOut& slot = outs[li];
        const double h = std::ldexp(1.0, -levels[li]);
        try {
            const SparseOperator a = ctx.parts.combine(problem.lambda);
            const CoarseSmoother coarse(ctx.p1, problem.lambda);
            const auto p = make_preconditioner(cfg.precond, a, ctx, coarse, cfg);
            NewtonConfig nc;
            nc.inner.tol = cfg.inner_tol;
            nc.inner.max_iterations = cfg.max_iterations;
            nc.max_steps = cfg.max_newton_steps;
            nc.increment_tol = cfg.newton_tol;
            nc.rhs_mode = cfg.rhs_mode;
            const NewtonResult res = newton_solve(problem, ctx.vh, *p, nc);
            const std::string note = res.converged ? "" : "no convergence";
            slot.cells[0] = {static_cast<double>(ctx.vh.dim_free()), true, ""};
            slot.cells[1] = {h, true, ""};
            slot.cells[2] = {static_cast<double>(res.newton_steps()), res.converged, note};
            slot.cells[3] = {res.avg_inner_iterations, res.converged, note};
            slot.steps = res.steps;
        } catch (const std::exception& e) {
            for (auto& c : slot.cells) c = failed_cell(e.what());
        }
    });

    auto echo = config_echo(cfg, "hjb", levels);
    echo.emplace_back("domain", "(0,1)^2, uniform; levels are dyadic exponents of h");
    echo.emplace_back("controls",
                      std::to_string(cfg.theta_samples) + " x " +
                          std::to_string(cfg.rotation_samples) + " = " +
                          std::to_string(problem.controls.size));
    echo.emplace_back("cordes_worst_quotient", num_short(cordes.worst_quotient));
    echo.emplace_back("cordes_implied_margin", num_short(cordes.implied_eps));
    echo.emplace_back("cordes_ok", cordes.ok ? "true" : "false");

    GridTable table;
    table.name = "hjb_newton";
    table.row_axis = "h";
    table.col_axis = "quantity";
    table.col_labels = {"dof", "h", "newton_steps", "avg_pgmres"};
    for (int li = 0; li < nl; ++li) table.row_labels.push_back(h_label(levels[li]));
    table.cells.resize(static_cast<std::size_t>(nl) * 4);
    for (int li = 0; li < nl; ++li)
        for (int c = 0; c < 4; ++c) table.at(li, c) = outs[li].cells[c];
    table.metadata = echo;
    table.metadata.emplace_back("value", "per-level Newton run summary");

    RecordTable steps;
    steps.name = "hjb_steps";
    steps.columns = {"h",          "dof",          "step",          "inner_iterations",
                     "inner_residual", "increment_l2", "changed_points"};
    steps.metadata = echo;
    for (int li = 0; li < nl; ++li) {
        const std::string h = h_label(levels[li]);
        const std::string dof = std::to_string(contexts[li]->vh.dim_free());
        for (std::size_t s = 0; s < outs[li].steps.size(); ++s) {
            const NewtonStep& st = outs[li].steps[s];
            steps.rows.push_back({h, dof, std::to_string(s + 1),
                                  std::to_string(st.inner_iterations),
                                  num_exact(st.inner_residual), num_exact(st.increment_l2),
                                  std::to_string(st.changed_points)});
        }
    }

    ExperimentResult result;
    result.tables.push_back(std::move(table));
    result.records.push_back(std::move(steps));
    return result;
}

ExperimentResult run_mesh(const ExperimentConfig& cfg) {
    validate(cfg);
    const std::vector<int> levels = effective_levels(cfg, {3, 4, 5, 6, 7, 8});
    const std::vector<Mesh> meshes = graded_lineage(levels);
    std::filesystem::create_directories(cfg.out_dir);

    GridTable table;
    table.name = "mesh_summary";
    table.row_axis = "level";
    table.col_axis = "quantity";
    table.col_labels = {"dof", "vertices", "triangles"};
    table.cells.resize(levels.size() * 3);

    ExperimentResult result;
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const Mesh& mesh = meshes[i];
        const int dof = HermiteSpace(mesh).dim_free();
        table.row_labels.push_back(std::to_string(levels[i]));
        const std::string base = cfg.out_dir + "/graded_level" + std::to_string(levels[i]) +
                                 "_dof" + std::to_string(dof);
        std::string note = "reload validated";
        bool ok = true;
        try {
            mesh.write_vtk(base + ".vtk");
            mesh.write_text(base + ".txt");
            result.files.push_back(base + ".vtk");
            result.files.push_back(base + ".txt");
            const Mesh back = Mesh::read_text(base + ".txt");
            back.validate();
            if (HermiteSpace(back).dim_free() != dof)
                throw std::runtime_error("reload changed the DOF count");
        } catch (const std::exception& e) {
            ok = false;
            note = e.what();
        }
        const int r = static_cast<int>(i);
        table.at(r, 0) = {static_cast<double>(dof), ok, note};
        table.at(r, 1) = {static_cast<double>(mesh.num_vertices()), ok, ""};
        table.at(r, 2) = {static_cast<double>(mesh.num_triangles()), ok, ""};
    }
    table.metadata = config_echo(cfg, "mesh", levels);
    table.metadata.emplace_back("value", "graded lineage summary; meshes written as VTK + text");
    table.metadata.emplace_back("domain", "(-1,1)^2, graded lineage h0=1/8, C=1000");
    result.tables.push_back(std::move(table));
    return result;
}

std::vector<std::string> write_artifacts(const ExperimentResult& r, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> written;
    for (const auto& t : r.tables) {
        const std::string csv = out_dir + "/" + t.name + ".csv";
        const std::string md = out_dir + "/" + t.name + ".md";
        write_file(csv, to_csv(t));
        write_file(md, to_markdown(t));
        written.push_back(csv);
        written.push_back(md);
    }
    for (const auto& rec : r.records) {
        const std::string csv = out_dir + "/" + rec.name + ".csv";
        write_file(csv, to_csv(rec));
        written.push_back(csv);
    }
    written.insert(written.end(), r.files.begin(), r.files.end());
    return written;
}

} // namespace hjbfem
