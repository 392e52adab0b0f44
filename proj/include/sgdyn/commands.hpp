#pragma once

#include <cstdint>
#include <ostream>
#include <string>

#include <json.hpp>

#include "sgdyn/approximator.hpp"
#include "sgdyn/config.hpp"
#include "sgdyn/evaluation.hpp"
#include "sgdyn/time_iteration.hpp"

namespace sgdyn::cli {

inline constexpr int kExitConverged = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitEarlyStopped = 3;
inline constexpr int kExitMaxIters = 4;

int exit_code(StopReason r);

/// Solved policy together with the configuration that produced it.
struct Artifact {
    RunConfig config;
    PolicyApproximator policy;
    TiReport report;
};

nlohmann::json artifact_to_json(const Artifact& a);
Artifact artifact_from_json(const nlohmann::json& j);
Artifact load_artifact(const std::string& path);

/// One row of the accuracy table.
struct ErrorsRow {
    std::size_t dims = 0;
    std::string level;  // grid depth for SG, "k=<k_max>" for DDSG
    std::size_t points = 0;
    ErrorStats stats;
    double sec_per_step = 0.0;
    std::size_t saturated_periods = 0;
};

ErrorsRow compute_errors(const Artifact& a, const EvaluationConfig& eval);
std::string errors_csv_header();
std::string errors_csv_row(const ErrorsRow& r);

/// Policy callback over a solved approximator, clamping into the box.
PolicyFunction policy_function(const Artifact& a);

/// Full tensor grid count as text: exact below 1e18, otherwise "~10^x".
std::string full_grid_count(std::uint64_t points_per_dim, std::size_t dim);

// Subcommands. Each returns the process exit code.
int cmd_solve(const RunConfig& cfg, std::ostream& out);
int cmd_errors(const RunConfig& cfg, const std::string& artifact_path, std::ostream& out);
int cmd_simulate(const RunConfig& cfg, const std::string& artifact_path, std::ostream& out);
int cmd_gridinfo(std::size_t dim, int depth, std::ostream& out);
int cmd_testfn(const RunConfig& cfg, std::ostream& out);

}  // namespace sgdyn::cli
