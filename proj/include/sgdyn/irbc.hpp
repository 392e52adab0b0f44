#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sgdyn/function.hpp"
#include "sgdyn/sparse_grid.hpp"

namespace sgdyn {

/// N-country real business cycle model with capital adjustment costs.
///
/// State layout: (a_1..a_N, k_1..k_N). Policy layout: (k'_1..k'_N, lambda).
struct IrbcParams {
    int N = 1;
    double kappa = 0.36;
    double beta = 0.99;
    double delta = 0.01;
    double phi = 0.5;
    double rho = 0.95;
    double sigE = 0.01;
    double A = 0.0;
    std::vector<double> gamma;
    std::vector<double> tau;

    // Bounds of the approximation box.
    double k_min = 0.8;
    double k_max = 1.2;
    double a_band = 0.8;  // a_j lies within +-a_band * sigE / (1 - rho)

    /// Default parameterization for N countries.
    static IrbcParams make(int N);

    /// Recomputes A, then tau from gamma. Call after editing kappa/beta/delta/gamma.
    void update_derived();
    /// Replaces the elasticities (size N) and refreshes tau.
    void set_gamma(std::vector<double> g);

    std::size_t state_dim() const noexcept { return 2 * static_cast<std::size_t>(N); }
    std::size_t policy_dim() const noexcept { return static_cast<std::size_t>(N) + 1; }
    double a_bound() const noexcept { return a_band * sigE / (1.0 - rho); }
    Domain domain() const;
};

/// exp(a) * A * k^kappa. Throws ModelDomainError for k <= 0.
double production(double a, double k, const IrbcParams& p);

/// Next log-productivities a'_j = rho a_j + sigE (e + e_j); innovations = (e, e_1..e_N).
void transition(const IrbcParams& p, std::span<const double> state, std::span<const double> innovations,
                std::span<double> a_next);

struct SteadyState {
    std::vector<double> state;
    std::vector<double> policy;
};

/// a = 0, k = 1, lambda from the aggregate resource constraint (bisection).
SteadyState steady_state(const IrbcParams& p);

/// Discrete approximation of the (N+1)-variate standard normal innovation.
struct ShockRule {
    std::size_t dim = 0;          // N + 1
    std::vector<double> nodes;    // size() x dim, row-major
    std::vector<double> weights;  // sum to 1

    std::size_t size() const noexcept { return weights.size(); }
    std::span<const double> node(std::size_t q) const { return {nodes.data() + q * dim, dim}; }
};

enum class ShockRuleKind { monomial, gauss_hermite };

ShockRuleKind parse_shock_rule_kind(const std::string& name);
std::string to_string(ShockRuleKind kind);

/// Monomial: 2(N+1) nodes at +-sqrt(N+1) e_i, degree 3. Gauss-Hermite: tensor
/// product of `level`-point rules, only for N+1 <= 6.
ShockRule make_shock_rule(int N, ShockRuleKind kind, int level = 3);
/// Single node at zero with weight one.
ShockRule zero_shock_rule(int N);
/// Probabilist's Gauss-Hermite nodes and weights (weights sum to 1).
void gauss_hermite_1d(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// Policy evaluated at an arbitrary in-box state.
using PolicyFunction = VectorFunction;

/// Policy callback wrapped so states are clamped to the box before lookup.
PolicyFunction clamped(const IrbcParams& p, PolicyFunction policy);

/// Next-period policies at the clamped next states for every shock node
/// (size() x (N+1), row-major). Depends on the policy only through k'.
void next_policies(const IrbcParams& p, std::span<const double> state, std::span<const double> policy,
                   const PolicyFunction& next_policy, const ShockRule& rule, std::span<double> out);

/// Equilibrium residuals given precomputed next-period policies (N Euler
/// equations, then the resource constraint).
void residuals_given_next(const IrbcParams& p, std::span<const double> state,
                          std::span<const double> policy, const ShockRule& rule,
                          std::span<const double> next, std::span<double> out);

/// Equilibrium residuals. Throws ModelDomainError for non-positive k' or lambda.
void residuals(const IrbcParams& p, std::span<const double> state, std::span<const double> policy,
               const PolicyFunction& next_policy, const ShockRule& rule, std::span<double> out);
std::vector<double> residuals(const IrbcParams& p, std::span<const double> state,
                              std::span<const double> policy, const PolicyFunction& next_policy,
                              const ShockRule& rule);

/// Unit-free Euler errors per country: beta E[RHS] / LHS - 1, with the policy
/// applied both today and tomorrow.
std::vector<double> euler_errors(const IrbcParams& p, std::span<const double> state,
                                 const PolicyFunction& policy, const ShockRule& rule);

/// log10 |e| floored at -16.
double log10_error(double e);

}  // namespace sgdyn
