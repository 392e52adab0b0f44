#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "sgdyn/evaluation.hpp"
#include "sgdyn/irbc.hpp"
#include "sgdyn/time_iteration.hpp"

namespace sgdyn {

enum class AnchorMode { steady_state, sampled };

struct EvaluationConfig {
    std::size_t T = 10000;  // simulated periods, burn-in included
    std::size_t burn_in = 1000;
    std::uint64_t seed = 1;
    ShockRuleKind shock_rule = ShockRuleKind::monomial;
    int shock_level = 3;
};

/// Everything a CLI run needs. Field names in JSON follow the solver's
/// hyperparameter vocabulary (gridDepth, maxRef, surplThreshold, tol_ti,
/// polUpdateWeight, k_max).
struct RunConfig {
    IrbcParams params = IrbcParams::make(2);
    TiConfig ti;
    GuessKind guess = GuessKind::linear;
    AnchorMode anchor = AnchorMode::steady_state;
    EvaluationConfig evaluation;
    std::string output_dir = "out";
    InterpErrorOptions testfn;

    /// Parses and validates. Unknown keys and bad values throw ConfigError
    /// naming the offending field path (e.g. "approximator.gridDept").
    static RunConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;

    /// Resolves the anchor mode into ti.anchor (sampled mode uses the linear
    /// policy as the function whose mean is matched).
    void resolve_anchor();
};

RunConfig load_config(const std::string& path);

}  // namespace sgdyn
