#include <iostream>
#include <string>

#include <omp.h>

#include <CLI11.hpp>

#include "sgdyn/commands.hpp"
#include "sgdyn/errors.hpp"

using namespace sgdyn;

int main(int argc, char** argv) {
    CLI::App app{"Time iteration over sparse-grid and DDSG policy approximations for the IRBC model"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    int threads = 0;
    std::int64_t seed = -1;
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--out", out_dir, "Output directory (overrides output.directory)");
    app.add_option("--threads", threads, "Worker threads (default: OpenMP setting)")->check(CLI::NonNegativeNumber);
    app.add_option("--seed", seed, "Random seed for simulation and sampling")->check(CLI::NonNegativeNumber);

    auto* solve = app.add_subcommand("solve", "Run time iteration and write the solved policy");
    std::string artifact = "";
    auto* errors = app.add_subcommand("errors", "Euler-error statistics of a solved policy");
    errors->add_option("--artifact", artifact, "Solved policy (default: <out>/policy.json)");
    auto* simulate = app.add_subcommand("simulate", "Simulate a solved policy and write the path");
    simulate->add_option("--artifact", artifact, "Solved policy (default: <out>/policy.json)");
    auto* gridinfo = app.add_subcommand("gridinfo", "Sparse vs full grid point counts");
    std::size_t dim = 1;
    int depth = 0;
    gridinfo->add_option("--dim", dim, "Dimension")->required();
    gridinfo->add_option("--depth", depth, "Grid depth")->required();
    auto* testfn = app.add_subcommand("testfn", "SG vs DDSG interpolation error on the analytic test function");

    CLI11_PARSE(app, argc, argv);

    if (threads > 0) omp_set_num_threads(threads);

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (seed >= 0) {
            cfg.evaluation.seed = static_cast<std::uint64_t>(seed);
            cfg.testfn.seed = static_cast<std::uint64_t>(seed);
        }
        if (artifact.empty()) artifact = cfg.output_dir + "/policy.json";

        if (*solve) return cli::cmd_solve(cfg, std::cout);
        if (*errors) return cli::cmd_errors(cfg, artifact, std::cout);
        if (*simulate) return cli::cmd_simulate(cfg, artifact, std::cout);
        if (*gridinfo) return cli::cmd_gridinfo(dim, depth, std::cout);
        if (*testfn) return cli::cmd_testfn(cfg, std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return cli::kExitConfig;
    } catch (const PointSolveError& e) {
        std::cerr << "error: " << e.what() << " at state [";
        for (std::size_t i = 0; i < e.state().size(); ++i) std::cerr << (i ? ", " : "") << e.state()[i];
        std::cerr << "]\n";
        return cli::kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return cli::kExitFailure;
    }
    return cli::kExitFailure;
}
