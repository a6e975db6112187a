#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hjbfem/experiments.hpp"

namespace {

/// Raw command-line values; only options the user actually passed override
/// the config-file / default values.
struct SharedOptions {
    std::string config;
    std::vector<double> lambdas;
    std::vector<int> levels;
    double omega = 0.0;
    double tol = 0.0;
    std::string precond;
    std::string rhs_mode;
    std::string out;
    std::uint64_t seed = 0;
    bool full = false;
    int workers = 0;
};

void add_shared_options(CLI::App* sub, SharedOptions& sh) {
    sub->add_option("--config", sh.config, "key=value config file (applied before flag overrides)")
        ->check(CLI::ExistingFile);
    sub->add_option("--lambda", sh.lambdas, "lambda grid (comma separated)")->delimiter(',');
    sub->add_option("--levels", sh.levels, "mesh levels (comma separated)")->delimiter(',');
    sub->add_option("--omega", sh.omega, "coarse-branch weight of the additive preconditioner");
    sub->add_option("--precond", sh.precond, "preconditioner variant")
        ->check(CLI::IsMember({"add", "mul"}));
    sub->add_option("--tol", sh.tol, "linear-solver relative residual tolerance");
    sub->add_option("--rhs-mode", sh.rhs_mode, "right-hand-side convention")
        ->check(CLI::IsMember({"l_lambda", "delta"}));
    sub->add_option("--out", sh.out, "output directory for artifacts");
    sub->add_option("--seed", sh.seed, "random seed for spectrum estimation");
    sub->add_flag("--full", sh.full, "lift the desk-scale size cap");
    sub->add_option("--workers", sh.workers, "concurrent table cells");
}

hjbfem::ExperimentConfig build_config(const CLI::App* sub, const SharedOptions& sh) {
    hjbfem::ExperimentConfig cfg;
    if (sub->count("--config")) cfg = hjbfem::load_config(sh.config, cfg);
    if (sub->count("--lambda")) cfg.lambdas = sh.lambdas;
    if (sub->count("--levels")) cfg.levels = sh.levels;
    if (sub->count("--omega")) cfg.omega = sh.omega;
    if (sub->count("--precond")) hjbfem::set_option(cfg, "precond", sh.precond);
    if (sub->count("--tol")) cfg.tol = sh.tol;
    if (sub->count("--rhs-mode")) hjbfem::set_option(cfg, "rhs_mode", sh.rhs_mode);
    if (sub->count("--out")) cfg.out_dir = sh.out;
    if (sub->count("--seed")) cfg.seed = sh.seed;
    if (sub->count("--full")) cfg.full = true;
    if (sub->count("--workers")) cfg.workers = sh.workers;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Experiment driver for the auxiliary-space preconditioner library (revision " +
                 hjbfem::revision() + ")"};
    app.require_subcommand(1);
    SharedOptions sh;

    CLI::App* cond = app.add_subcommand(
        "cond", "Condition numbers of the preconditioned energy operator on graded meshes");
    CLI::App* linear = app.add_subcommand(
        "linear", "GMRES iteration counts for the linear sign-alternating-coefficient problem");
    CLI::App* hjb = app.add_subcommand(
        "hjb", "Semi-smooth Newton runs for the fully nonlinear control problem");
    CLI::App* mesh =
        app.add_subcommand("mesh", "Export and validate the graded mesh lineage");
    for (CLI::App* sub : {cond, linear, hjb, mesh}) add_shared_options(sub, sh);

    CLI11_PARSE(app, argc, argv);
    const CLI::App* sub = app.get_subcommands().front();

    try {
        const hjbfem::ExperimentConfig cfg = build_config(sub, sh);
        hjbfem::ExperimentResult result;
        if (sub == cond) result = hjbfem::run_cond(cfg);
        else if (sub == linear) result = hjbfem::run_linear(cfg);
        else if (sub == hjb) result = hjbfem::run_hjb(cfg);
        else result = hjbfem::run_mesh(cfg);

        const auto written = hjbfem::write_artifacts(result, cfg.out_dir);
        for (const auto& t : result.tables) std::cout << hjbfem::to_markdown(t) << "\n";
        for (const auto& path : written) std::cout << "wrote " << path << "\n";
        if (!result.complete()) {
            std::cerr << "some cells failed; see the notes in the artifacts\n";
            return 1;
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
