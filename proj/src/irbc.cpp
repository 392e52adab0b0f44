#include "sgdyn/irbc.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "sgdyn/errors.hpp"

namespace sgdyn {

IrbcParams IrbcParams::make(int N) {
    if (N < 1) throw PreconditionError("IRBC: N must be >= 1");
    IrbcParams p;
    p.N = N;
    std::vector<double> g(static_cast<std::size_t>(N));
    for (int j = 0; j < N; ++j) g[static_cast<std::size_t>(j)] = N == 1 ? 0.25 : 0.25 + j * (1.0 - 0.25) / (N - 1);
    p.gamma = std::move(g);
    p.update_derived();
    return p;
}

void IrbcParams::update_derived() {
    A = (1.0 - beta * (1.0 - delta)) / (kappa * beta);
    tau.resize(gamma.size());
    for (std::size_t j = 0; j < gamma.size(); ++j) tau[j] = std::pow(A, 1.0 / gamma[j]);
}

void IrbcParams::set_gamma(std::vector<double> g) {
    if (g.size() != static_cast<std::size_t>(N)) throw PreconditionError("IRBC: gamma must have N entries");
    for (double v : g) {
        if (!(v > 0.0)) throw PreconditionError("IRBC: gamma entries must be positive");
    }
    gamma = std::move(g);
    update_derived();
}

Domain IrbcParams::domain() const {
    const std::size_t n = static_cast<std::size_t>(N);
    std::vector<double> lo(2 * n), hi(2 * n);
    const double ab = a_bound();
    for (std::size_t j = 0; j < n; ++j) {
        lo[j] = -ab;
        hi[j] = ab;
        lo[n + j] = k_min;
        hi[n + j] = k_max;
    }
    return Domain(std::move(lo), std::move(hi));
}

double production(double a, double k, const IrbcParams& p) {
    if (!(k > 0.0)) throw ModelDomainError("production: capital must be positive");
    return std::exp(a) * p.A * std::pow(k, p.kappa);
}

void transition(const IrbcParams& p, std::span<const double> state, std::span<const double> innovations,
                std::span<double> a_next) {
    const std::size_t n = static_cast<std::size_t>(p.N);
    for (std::size_t j = 0; j < n; ++j) {
        a_next[j] = p.rho * state[j] + p.sigE * (innovations[0] + innovations[j + 1]);
    }
}

SteadyState steady_state(const IrbcParams& p) {
    const std::size_t n = static_cast<std::size_t>(p.N);
    const double target = p.N * (1.0 - p.delta / p.A);
    if (!(target > 0.0)) throw ModelDomainError("steady state: delta >= A, no positive consumption");
    auto excess = [&](double lam) {
        double s = 0.0;
        for (double g : p.gamma) s += std::pow(lam, -g);
        return s - target;  // decreasing in lambda
    };
    double lo = 1.0, hi = 1.0;
    for (int i = 0; i < 200 && excess(lo) < 0.0; ++i) lo *= 0.5;
    for (int i = 0; i < 200 && excess(hi) > 0.0; ++i) hi *= 2.0;
    if (excess(lo) < 0.0 || excess(hi) > 0.0) throw ModelDomainError("steady state: bisection bracket failed");
    while (hi - lo > 1e-12 * std::max(1.0, lo)) {
        const double mid = 0.5 * (lo + hi);
        if (excess(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    SteadyState ss;
    ss.state.assign(2 * n, 0.0);
    std::fill(ss.state.begin() + static_cast<std::ptrdiff_t>(n), ss.state.end(), 1.0);
    ss.policy.assign(n + 1, 1.0);
    ss.policy[n] = 0.5 * (lo + hi);
    return ss;
}

ShockRuleKind parse_shock_rule_kind(const std::string& name) {
    if (name == "monomial") return ShockRuleKind::monomial;
    if (name == "gauss_hermite" || name == "gauss-hermite") return ShockRuleKind::gauss_hermite;
    throw PreconditionError("unknown shock rule '" + name + "' (expected monomial or gauss_hermite)");
}

std::string to_string(ShockRuleKind kind) {
    return kind == ShockRuleKind::monomial ? "monomial" : "gauss_hermite";
}

void gauss_hermite_1d(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    if (n < 1) throw PreconditionError("gauss_hermite_1d: n must be >= 1");
    // Golub-Welsch on the Jacobi matrix of the probabilist's Hermite polynomials.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) J(i, i - 1) = J(i - 1, i) = std::sqrt(static_cast<double>(i));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    nodes.resize(static_cast<std::size_t>(n));
    weights.resize(static_cast<std::size_t>(n));
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        nodes[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
        const double v = es.eigenvectors()(0, i);
        weights[static_cast<std::size_t>(i)] = v * v;
        total += v * v;
    }
    for (auto& w : weights) w /= total;
    // Symmetrize so odd moments vanish to rounding.
    for (int i = 0; i < n / 2; ++i) {
        const auto a = static_cast<std::size_t>(i);
        const auto b = static_cast<std::size_t>(n - 1 - i);
        const double x = 0.5 * (nodes[b] - nodes[a]);
        const double w = 0.5 * (weights[a] + weights[b]);
        nodes[a] = -x;
        nodes[b] = x;
        weights[a] = weights[b] = w;
    }
    if (n % 2 == 1) nodes[static_cast<std::size_t>(n / 2)] = 0.0;
}

ShockRule make_shock_rule(int N, ShockRuleKind kind, int level) {
    if (N < 1) throw PreconditionError("shock rule: N must be >= 1");
    ShockRule r;
    r.dim = static_cast<std::size_t>(N) + 1;
    if (kind == ShockRuleKind::monomial) {
        const double s = std::sqrt(static_cast<double>(r.dim));
        for (std::size_t i = 0; i < r.dim; ++i) {
            for (double sign : {1.0, -1.0}) {
                std::vector<double> node(r.dim, 0.0);
                node[i] = sign * s;
                r.nodes.insert(r.nodes.end(), node.begin(), node.end());
                r.weights.push_back(1.0 / (2.0 * static_cast<double>(r.dim)));
            }
        }
        return r;
    }
    if (r.dim > 6) {
        throw PreconditionError("gauss_hermite tensor rule supports N+1 <= 6; use the monomial rule");
    }
    if (level < 1) throw PreconditionError("gauss_hermite: level must be >= 1");
    std::vector<double> x, w;
    gauss_hermite_1d(level, x, w);
    std::size_t count = 1;
    for (std::size_t i = 0; i < r.dim; ++i) count *= static_cast<std::size_t>(level);
    std::vector<std::size_t> digit(r.dim, 0);
    for (std::size_t c = 0; c < count; ++c) {
        double weight = 1.0;
        for (std::size_t i = 0; i < r.dim; ++i) {
            r.nodes.push_back(x[digit[i]]);
            weight *= w[digit[i]];
        }
        r.weights.push_back(weight);
        for (std::size_t i = 0; i < r.dim; ++i) {
            if (++digit[i] < static_cast<std::size_t>(level)) break;
            digit[i] = 0;
        }
    }
    return r;
}

ShockRule zero_shock_rule(int N) {
    ShockRule r;
    r.dim = static_cast<std::size_t>(N) + 1;
    r.nodes.assign(r.dim, 0.0);
    r.weights = {1.0};
    return r;
}

PolicyFunction clamped(const IrbcParams& p, PolicyFunction policy) {
    return [dom = p.domain(), policy = std::move(policy)](std::span<const double> x, std::span<double> out) {
        std::vector<double> y(x.begin(), x.end());
        dom.clamp(y);
        policy(y, out);
    };
}

namespace {

void check_policy(std::span<const double> policy) {
    for (double v : policy) {
        if (!(v > 0.0)) throw ModelDomainError("policy must be strictly positive");
    }
}

}  // namespace

void next_policies(const IrbcParams& p, std::span<const double> state, std::span<const double> policy,
                   const PolicyFunction& next_policy, const ShockRule& rule, std::span<double> out) {
    const std::size_t n = static_cast<std::size_t>(p.N);
    const std::size_t m = n + 1;
    const Domain dom = p.domain();
    std::vector<double> next(2 * n);
    for (std::size_t q = 0; q < rule.size(); ++q) {
        transition(p, state, rule.node(q), std::span<double>(next.data(), n));
        std::copy(policy.begin(), policy.begin() + static_cast<std::ptrdiff_t>(n), next.begin() + static_cast<std::ptrdiff_t>(n));
        dom.clamp(next);
        next_policy(next, out.subspan(q * m, m));
    }
}

void residuals_given_next(const IrbcParams& p, std::span<const double> state,
                          std::span<const double> policy, const ShockRule& rule,
                          std::span<const double> next, std::span<double> out) {
    check_policy(policy);
    const std::size_t n = static_cast<std::size_t>(p.N);
    const std::size_t m = n + 1;
    const double lam = policy[n];
    std::vector<double> a_next(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
        transition(p, state, rule.node(q), a_next);
        const double* np = next.data() + q * m;
        const double lam_next = np[n];
        for (std::size_t j = 0; j < n; ++j) {
            const double kp = policy[j];
            const double ratio = np[j] / kp;
            const double ret = std::exp(a_next[j]) * p.kappa * p.A * std::pow(kp, p.kappa - 1.0) + 1.0 - p.delta +
                               0.5 * p.phi * (ratio - 1.0) * (ratio + 1.0);
            out[j] += rule.weights[q] * lam_next * ret;
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        const double lhs = lam * (1.0 + p.phi * (policy[j] / state[n + j] - 1.0));
        out[j] = lhs - p.beta * out[j];
    }
    double output = 0.0, use = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double k = state[n + j];
        const double kp = policy[j];
        const double g = kp / k - 1.0;
        output += production(state[j], k, p);
        use += std::pow(lam / p.tau[j], -p.gamma[j]) + kp - (1.0 - p.delta) * k + 0.5 * p.phi * k * g * g;
    }
    out[n] = output - use;
}

void residuals(const IrbcParams& p, std::span<const double> state, std::span<const double> policy,
               const PolicyFunction& next_policy, const ShockRule& rule, std::span<double> out) {
    check_policy(policy);
    std::vector<double> next(rule.size() * p.policy_dim());
    next_policies(p, state, policy, next_policy, rule, next);
    residuals_given_next(p, state, policy, rule, next, out);
}

std::vector<double> residuals(const IrbcParams& p, std::span<const double> state,
                              std::span<const double> policy, const PolicyFunction& next_policy,
                              const ShockRule& rule) {
    std::vector<double> out(p.policy_dim());
    residuals(p, state, policy, next_policy, rule, out);
    return out;
}

std::vector<double> euler_errors(const IrbcParams& p, std::span<const double> state,
                                 const PolicyFunction& policy, const ShockRule& rule) {
    const std::size_t n = static_cast<std::size_t>(p.N);
    std::vector<double> pol(n + 1);
    policy(state, pol);
    std::vector<double> res(n + 1);
    residuals(p, state, pol, policy, rule, res);
    std::vector<double> err(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double lhs = pol[n] * (1.0 + p.phi * (pol[j] / state[n + j] - 1.0));
        // residual = lhs - beta E[RHS], so beta E[RHS] / lhs - 1 = -residual / lhs
        err[j] = -res[j] / lhs;
    }
    return err;
}

double log10_error(double e) {
    const double a = std::abs(e);
    if (!(a > 1e-16)) return -16.0;
    return std::log10(a);
}

}  // namespace sgdyn
