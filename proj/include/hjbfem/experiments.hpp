#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hjbfem/assembly.hpp"

namespace hjbfem {

/// Code revision baked in at configure time ("untracked" outside a checkout).
std::string revision();

enum class PrecondVariant { Additive, Multiplicative };

/**
 * Full parameter set of one experiment run.  Every field can be set from a
 * `key=value` config file or a command-line override; the defaults reproduce
 * the desk-scale study.  `levels` is interpreted per experiment: the number
 * of graded-bisection rounds for the conditioning and mesh experiments, and
 * the dyadic exponent k of the mesh size h = 2^-k for the uniform-mesh
 * experiments.  An empty list selects the per-experiment default.
 */
struct ExperimentConfig {
    std::vector<double> lambdas = {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3};
    std::vector<int> levels;
    PrecondVariant precond = PrecondVariant::Multiplicative;
    double omega = 0.1;       // coarse-branch weight of the additive variant
    double tol = 1e-6;        // linear-solver relative residual
    double newton_tol = 1e-6; // Newton increment threshold (L2 norm)
    double inner_tol = 1e-4;  // GMRES tolerance inside the Newton loop
    RhsMode rhs_mode = RhsMode::LLambda;
    std::uint64_t seed = 20240817;
    std::string out_dir = "out";
    bool full = false; // lift the desk-scale size cap
    int sweeps = 4;    // fine-smoother GS sweeps; calibrated to the acceptance bands
    int max_iterations = 500;
    int max_newton_steps = 50;
    int theta_samples = 17;   // control-grid resolution (slope)
    int rotation_samples = 64; // control-grid resolution (rotation)
    int workers = 1;           // concurrent table cells
};

/// Throws std::invalid_argument when a field is out of range.
void validate(const ExperimentConfig& cfg);

/// Set one config field by its documented key (the config-file vocabulary);
/// throws std::invalid_argument for unknown keys or malformed values.
void set_option(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Parse a config file of `key = value` lines ('#' comments and blank lines
/// allowed) on top of `base`; throws std::runtime_error if unreadable.
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});

/**
 * Rectangular result table.  Cells are scalar measurements with a per-cell
 * success flag and a free-form diagnostic note; the metadata block echoes the
 * full effective configuration and the code revision so a run can be
 * reproduced from its artifact alone.
 */
struct GridTable {
    struct Cell {
        double value = 0.0;
        bool ok = false;
        std::string note;
    };

    std::string name; // artifact basename
    std::string row_axis = "row";
    std::string col_axis = "col";
    std::vector<std::string> row_labels, col_labels;
    std::vector<Cell> cells; // row-major, row_labels.size() * col_labels.size()
    std::vector<std::pair<std::string, std::string>> metadata;

    Cell& at(int r, int c);
    const Cell& at(int r, int c) const;
    bool complete() const; // every cell ok
};

/// Long-format companion artifact (per-iteration residual histories,
/// per-step Newton logs, spectrum estimates); rows are preformatted strings.
struct RecordTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::pair<std::string, std::string>> metadata;
};

struct ExperimentResult {
    std::vector<GridTable> tables;
    std::vector<RecordTable> records;
    std::vector<std::string> files; // artifacts written directly by the run

    bool complete() const;
};

/// CSV serialization: `#`-prefixed metadata header, then the fixed columns
/// `row,col,value,ok,note` in row-major cell order.
std::string to_csv(const GridTable& t);
/// Markdown rendering of the same data (grid layout, metadata list).
std::string to_markdown(const GridTable& t);
/// CSV serialization of a long-format record.
std::string to_csv(const RecordTable& t);

/**
 * Condition numbers of the preconditioned energy operator over the graded
 * lineage (level rows) times the lambda grid (columns), for both the additive
 * and the multiplicative variant.  Estimates use the Lanczos path with a
 * fixed seed; failures are reported per cell.  Returns the two grids plus a
 * record of every spectrum estimate.
 */
ExperimentResult run_cond(const ExperimentConfig& cfg);

/**
 * Preconditioned-GMRES iteration counts for the linear problem with
 * sign-alternating coefficients on uniform meshes, one column per lambda
 * (which also scales the coefficients).  Emits the iteration grid, per-cell
 * residual histories, and, when lambda = 1 is in the grid, error norms
 * against the exact solution per level.  Without `full`, levels beyond
 * h = 2^-6 are skipped.
 */
ExperimentResult run_linear(const ExperimentConfig& cfg);

/**
 * Semi-smooth Newton runs for the fully nonlinear problem with the rotating
 * control family on uniform meshes of (0,1)^2: one row per mesh size with
 * DOF count, Newton steps, and average inner GMRES iterations, plus a
 * per-step diagnostic record.
 */
ExperimentResult run_hjb(const ExperimentConfig& cfg);

/**
 * Writes the graded mesh lineage to VTK and plain-text files (DOF counts in
 * the filenames) under cfg.out_dir, re-reads each text file, and validates
 * conformity; returns a summary grid plus the written file list.
 */
ExperimentResult run_mesh(const ExperimentConfig& cfg);

/// Write every grid (CSV + Markdown) and record (CSV) into `out_dir`,
/// creating it if needed; returns the paths written plus `r.files`.
std::vector<std::string> write_artifacts(const ExperimentResult& r, const std::string& out_dir);

} // namespace hjbfem
