#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgdyn/irbc.hpp"

namespace sgdyn {

/// Retained (post burn-in) segment of a simulated trajectory.
struct SimulationPath {
    std::size_t N = 0;
    std::vector<double> states;    // periods x 2N
    std::vector<double> policies;  // periods x (N+1)
    std::size_t saturation_count = 0;     // clamped coordinates over the whole run
    std::size_t saturated_periods = 0;    // periods with at least one clamp
    std::size_t total_periods = 0;        // including burn-in
    std::uint64_t seed = 0;

    std::size_t periods() const noexcept { return N == 0 ? 0 : states.size() / (2 * N); }
    std::span<const double> state(std::size_t t) const { return {states.data() + t * 2 * N, 2 * N}; }
};

/// Simulates T periods from the steady state and keeps the last T - burn_in.
/// Innovation i of period t is normal(seed, t, i).
SimulationPath simulate(const PolicyFunction& policy, const IrbcParams& p, std::size_t T,
                        std::size_t burn_in, std::uint64_t seed);

struct ErrorStats {
    double mean_log10 = 0.0;
    double p999_log10 = 0.0;
    std::size_t count = 0;
};

/// Nearest-rank percentile (q in (0, 1]) of the values.
double nearest_rank_percentile(std::vector<double> values, double q);

/// Summary of log10 values (mean and nearest-rank 99.9th percentile).
ErrorStats summarize_log10(std::span<const double> log10_errors);

/// log10 |Euler error| for every retained period and country, in order.
std::vector<double> path_log10_errors(const SimulationPath& path, const PolicyFunction& policy,
                                      const ShockRule& rule, const IrbcParams& p);

ErrorStats error_stats(const SimulationPath& path, const PolicyFunction& policy, const ShockRule& rule,
                       const IrbcParams& p);

/// (sum_j sin x_j)^c.
double test_function(std::span<const double> x, int c);

struct InterpErrorRow {
    std::string method;  // "SG" or "DDSG k=<k>"
    int k_max = 0;       // 0 for SG
    int depth = 0;
    std::size_t points = 0;
    double relative_error = 0.0;
};

struct InterpErrorOptions {
    std::size_t dim = 20;
    int c = 1;
    std::vector<int> depths{1, 2, 3, 4, 5};
    std::vector<int> k_max{1};
    bool include_sg = true;
    std::size_t samples = 1000;
    std::uint64_t seed = 1;
};

/// Fits the test function on [0,1]^dim with SG and DDSG (anchor at the box
/// center) and reports mean|f_hat - f| / mean|f| over uniform samples.
std::vector<InterpErrorRow> interp_error_experiment(const InterpErrorOptions& opts);

std::string path_csv(const SimulationPath& path);
std::string interp_error_csv(const std::vector<InterpErrorRow>& rows);
nlohmann::json to_json(const ErrorStats& s);

}  // namespace sgdyn
