#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgdyn/approximator.hpp"
#include "sgdyn/irbc.hpp"

namespace sgdyn {

enum class Metric { mse, sup };
enum class GuessKind { constant, linear };
enum class StopReason { converged, early_stopped, max_iters };

Metric parse_metric(const std::string& name);
GuessKind parse_guess_kind(const std::string& name);
std::string to_string(Metric m);
std::string to_string(GuessKind g);
std::string to_string(StopReason r);

struct TiConfig {
    double tol_ti = 1e-7;
    int max_iters = 1000;
    double polUpdateWeight = 1.0;
    int gridDepth = 3;
    int maxRef = 0;
    double surplThreshold = 1e-3;
    int refine_level_limit = 10;  // deepest 1D level refinement may create
    ApproximatorKind approximator = ApproximatorKind::sg;
    int k_max = 1;
    Metric metric = Metric::mse;
    int patience = 10;
    ShockRuleKind shock_rule = ShockRuleKind::monomial;
    int shock_level = 3;  // points per dimension for the Gauss-Hermite rule
    std::vector<double> anchor;  // DDSG anchor; empty means the steady state

    /// Throws PreconditionError describing the first invalid field.
    void validate() const;
};

struct TiReport {
    int iterations = 0;
    std::vector<double> metric_history;
    StopReason stop_reason = StopReason::max_iters;
    std::vector<double> wall_time_per_step;  // seconds
    std::vector<std::size_t> points_per_step;
    long newton_iterations = 0;
    int fallbacks = 0;

    double mean_step_seconds() const;
    nlohmann::json to_json() const;
};

struct NewtonOptions {
    double tol = 1e-9;
    int max_iters = 50;
    int max_halvings = 30;
};

struct PointSolveStats {
    int newton_iterations = 0;
    bool used_fallback = false;
};

/// Solves the N+1 equilibrium conditions at `state` against the frozen
/// next-period policy. Throws PointSolveError when both the guess and the
/// steady-state restart fail.
std::vector<double> solve_point(const IrbcParams& p, std::span<const double> state,
                                std::span<const double> guess, const PolicyFunction& prev_policy,
                                const ShockRule& rule, const NewtonOptions& opts = {},
                                PointSolveStats* stats = nullptr);

/// k'_j = 1 and lambda = 1 at every collocation point.
std::vector<double> initial_guess_constant(const IrbcParams& p, std::size_t num_points);

/// Empty approximator of the configured kind on the model box. DDSG uses
/// cfg.anchor, or the steady state when it is empty.
PolicyApproximator make_approximator(const TiConfig& cfg, const IrbcParams& p);

struct TiResult {
    PolicyApproximator policy;
    TiReport report;
};

/// Optional per-iteration observer (iteration number, metric).
using TiObserver = std::function<void(int, double)>;

/// Time iteration from the chosen initial guess.
TiResult run(const TiConfig& cfg, const IrbcParams& p, GuessKind guess, const TiObserver& observer = {});

/// Time iteration continuing from an already fitted approximator (its
/// node_values() are the first iterate).
TiResult run_from(const TiConfig& cfg, const IrbcParams& p, PolicyApproximator start,
                  const TiObserver& observer = {});

/// Metric between two equally sized node-value sets, ordered summation.
double convergence_metric(Metric m, std::span<const double> a, std::span<const double> b);

}  // namespace sgdyn
