#include "sgdyn/time_iteration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "sgdyn/errors.hpp"
#include "sgdyn/parallel.hpp"
#include "sgdyn/perturbation.hpp"

namespace sgdyn {

Metric parse_metric(const std::string& name) {
    if (name == "mse") return Metric::mse;
    if (name == "sup") return Metric::sup;
    throw PreconditionError("unknown metric '" + name + "' (expected mse or sup)");
}

GuessKind parse_guess_kind(const std::string& name) {
    if (name == "constant") return GuessKind::constant;
    if (name == "linear") return GuessKind::linear;
    throw PreconditionError("unknown guess '" + name + "' (expected constant or linear)");
}

std::string to_string(Metric m) { return m == Metric::mse ? "mse" : "sup"; }
std::string to_string(GuessKind g) { return g == GuessKind::constant ? "constant" : "linear"; }

std::string to_string(StopReason r) {
    switch (r) {
        case StopReason::converged: return "converged";
        case StopReason::early_stopped: return "early_stopped";
        case StopReason::max_iters: return "max_iters";
    }
    return "unknown";
}

void TiConfig::validate() const {
    if (!(tol_ti > 0.0)) throw PreconditionError("tol_ti must be > 0");
    if (max_iters < 1) throw PreconditionError("max_iters must be >= 1");
    if (!(polUpdateWeight > 0.0 && polUpdateWeight <= 1.0)) throw PreconditionError("polUpdateWeight must lie in (0, 1]");
    if (gridDepth < 0 || gridDepth > kMaxLevel) throw PreconditionError("gridDepth must lie in [0, 15]");
    if (maxRef < 0) throw PreconditionError("maxRef must be >= 0");
    if (!(surplThreshold >= 0.0)) throw PreconditionError("surplThreshold must be >= 0");
    if (refine_level_limit < 1 || refine_level_limit > kMaxLevel) {
        throw PreconditionError("refine_level_limit must lie in [1, 15]");
    }
    if (k_max < 0) throw PreconditionError("k_max must be >= 0");
    if (patience < 1) throw PreconditionError("patience must be >= 1");
    if (shock_level < 1) throw PreconditionError("shock_level must be >= 1");
}

double TiReport::mean_step_seconds() const {
    if (wall_time_per_step.empty()) return 0.0;
    double s = 0.0;
    for (double t : wall_time_per_step) s += t;
    return s / static_cast<double>(wall_time_per_step.size());
}

nlohmann::json TiReport::to_json() const {
    return {{"iterations", iterations},
            {"stop_reason", to_string(stop_reason)},
            {"metric_history", metric_history},
            {"wall_time_per_step", wall_time_per_step},
            {"points_per_step", points_per_step},
            {"newton_iterations", newton_iterations},
            {"fallbacks", fallbacks}};
}

double convergence_metric(Metric m, std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw PreconditionError("convergence_metric: size mismatch");
    if (a.empty()) return 0.0;
    if (m == Metric::sup) {
        double mx = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) mx = std::max(mx, std::abs(a[i] - b[i]));
        return mx;
    }
    // Kahan summation in index order, independent of worker count.
    double sum = 0.0, comp = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        const double y = d * d - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum / static_cast<double>(a.size());
}

// ---------------------------------------------------------------------------

namespace {

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

struct NewtonOutcome {
    bool ok = false;
    Eigen::VectorXd z;
    double residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

NewtonOutcome newton(const IrbcParams& p, std::span<const double> state, Eigen::VectorXd z,
                     const PolicyFunction& prev, const ShockRule& rule, const NewtonOptions& opts) {
    const int m = p.N + 1;
    const int n = p.N;
    const std::size_t nq = rule.size() * static_cast<std::size_t>(m);
    std::vector<double> next(nq), next_trial(nq), res(static_cast<std::size_t>(m));
    NewtonOutcome out;

    // Residual at z; fills `nx` with next-period policies. False when z leaves the model domain.
    auto eval = [&](const Eigen::VectorXd& zz, std::vector<double>& nx, Eigen::VectorXd& F) {
        if (!zz.allFinite() || zz.minCoeff() <= 0.0) return false;
        const std::span<const double> zs(zz.data(), static_cast<std::size_t>(m));
        try {
            next_policies(p, state, zs, prev, rule, nx);
            residuals_given_next(p, state, zs, rule, nx, res);
        } catch (const ModelDomainError&) {
            return false;
        }
        F = Eigen::Map<const Eigen::VectorXd>(res.data(), m);
        return F.allFinite();
    };

    Eigen::VectorXd F(m), Ft(m), Fc(m);
    if (!eval(z, next, F)) return out;
    double norm = inf_norm(F);
    Eigen::MatrixXd J(m, m);
    for (int it = 0; it <= opts.max_iters; ++it) {
        out.iterations = it;
        if (norm <= opts.tol) {
            out.ok = true;
            out.z = z;
            out.residual = norm;
            return out;
        }
        if (it == opts.max_iters) break;
        // Forward-difference Jacobian. Next-period policies depend only on k',
        // so the lambda column reuses them.
        for (int c = 0; c < m; ++c) {
            Eigen::VectorXd zc = z;
            const double h = 1e-7 * (1.0 + std::abs(z(c)));
            zc(c) += h;
            bool ok;
            if (c == n) {
                ok = zc.minCoeff() > 0.0;
                if (ok) {
                    residuals_given_next(p, state, std::span<const double>(zc.data(), static_cast<std::size_t>(m)),
                                         rule, next, res);
                    Fc = Eigen::Map<const Eigen::VectorXd>(res.data(), m);
                }
            } else {
                ok = eval(zc, next_trial, Fc);
            }
            if (!ok) return out;
            J.col(c) = (Fc - F) / h;
        }
        const auto lu = J.fullPivLu();
        if (!lu.isInvertible()) break;
        const Eigen::VectorXd dz = lu.solve(-F);
        double t = 1.0;
        bool accepted = false;
        for (int h = 0; h <= opts.max_halvings; ++h, t *= 0.5) {
            const Eigen::VectorXd zt = z + t * dz;
            if (!eval(zt, next_trial, Ft)) continue;
            const double nt = inf_norm(Ft);
            if (nt < norm || nt <= opts.tol) {
                z = zt;
                F = Ft;
                norm = nt;
                std::swap(next, next_trial);
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
    }
    out.z = z;
    out.residual = norm;
    return out;
}

}  // namespace

std::vector<double> solve_point(const IrbcParams& p, std::span<const double> state,
                                std::span<const double> guess, const PolicyFunction& prev_policy,
                                const ShockRule& rule, const NewtonOptions& opts, PointSolveStats* stats) {
    const int m = p.N + 1;
    if (guess.size() != static_cast<std::size_t>(m)) throw PreconditionError("solve_point: guess size mismatch");
    Eigen::VectorXd z0 = Eigen::Map<const Eigen::VectorXd>(guess.data(), m);
    NewtonOutcome r = newton(p, state, z0, prev_policy, rule, opts);
    int iters = r.iterations;
    bool fallback = false;
    if (!r.ok) {
        const SteadyState ss = steady_state(p);
        fallback = true;
        const double first = r.residual;
        r = newton(p, state, Eigen::Map<const Eigen::VectorXd>(ss.policy.data(), m), prev_policy, rule, opts);
        iters += r.iterations;
        if (!r.ok) {
            throw PointSolveError("point solve failed (residual " + std::to_string(std::min(first, r.residual)) + ")",
                                  std::vector<double>(state.begin(), state.end()), std::min(first, r.residual));
        }
    }
    if (stats != nullptr) {
        stats->newton_iterations = iters;
        stats->used_fallback = fallback;
    }
    return {r.z.data(), r.z.data() + m};
}

std::vector<double> initial_guess_constant(const IrbcParams& p, std::size_t num_points) {
    return std::vector<double>(num_points * p.policy_dim(), 1.0);
}

PolicyApproximator make_approximator(const TiConfig& cfg, const IrbcParams& p) {
    const Domain dom = p.domain();
    if (cfg.approximator == ApproximatorKind::sg) {
        return PolicyApproximator(HierarchicalGrid::make_regular(p.state_dim(), cfg.gridDepth, p.policy_dim(), dom));
    }
    if (static_cast<std::size_t>(cfg.k_max) > p.state_dim()) {
        throw PreconditionError("k_max exceeds the state dimension");
    }
    std::vector<double> anchor = cfg.anchor.empty() ? steady_state(p).state : cfg.anchor;
    return PolicyApproximator(DdsgModel::make_structure(p.policy_dim(), dom, cfg.k_max, cfg.gridDepth, std::move(anchor)));
}

TiResult run(const TiConfig& cfg, const IrbcParams& p, GuessKind guess, const TiObserver& observer) {
    cfg.validate();
    const std::size_t m = p.policy_dim();
    const std::size_t d = p.state_dim();
    PolicyApproximator approx = make_approximator(cfg, p);
    const std::vector<double> points = approx.collocation_points();
    const std::size_t n_pts = approx.num_collocation_points();

    std::vector<double> values;
    if (guess == GuessKind::constant) {
        values = initial_guess_constant(p, n_pts);
    } else {
        const LinearPolicy lin = initial_guess_linear(p);
        values.resize(n_pts * m);
        for (std::size_t i = 0; i < n_pts; ++i) {
            lin.evaluate(std::span<const double>(points.data() + i * d, d), std::span<double>(values.data() + i * m, m));
        }
    }
    approx.fit(values);
    return run_from(cfg, p, std::move(approx), observer);
}

TiResult run_from(const TiConfig& cfg, const IrbcParams& p, PolicyApproximator approx, const TiObserver& observer) {
    cfg.validate();
    const std::size_t m = p.policy_dim();
    const std::size_t d = p.state_dim();
    if (approx.dim() != d || approx.num_outputs() != m) throw PreconditionError("run_from: approximator shape mismatch");
    if (approx.node_values().size() != approx.num_collocation_points() * m) {
        throw PreconditionError("run_from: approximator has no fitted values");
    }
    const ShockRule rule = make_shock_rule(p.N, cfg.shock_rule, cfg.shock_level);
    std::vector<double> points = approx.collocation_points();
    std::size_t n_pts = approx.num_collocation_points();

    TiResult result;
    TiReport& report = result.report;
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;
    const double w = cfg.polUpdateWeight;

    for (int it = 1; it <= cfg.max_iters; ++it) {
        const auto t0 = std::chrono::steady_clock::now();
        const PolicyApproximator frozen = approx;
        const PolicyFunction prev = [&frozen](std::span<const double> x, std::span<double> out) {
            frozen.evaluate(x, out);
        };
        const std::vector<double> old = approx.node_values();
        std::vector<double> fresh(n_pts * m);
        std::vector<PointSolveStats> stats(n_pts);
        parallel_for(n_pts, [&](std::size_t i) {
            const auto sol = solve_point(p, std::span<const double>(points.data() + i * d, d),
                                         std::span<const double>(old.data() + i * m, m), prev, rule, {}, &stats[i]);
            std::copy(sol.begin(), sol.end(), fresh.begin() + static_cast<std::ptrdiff_t>(i * m));
        });
        for (const auto& s : stats) {
            report.newton_iterations += s.newton_iterations;
            report.fallbacks += s.used_fallback ? 1 : 0;
        }
        for (std::size_t i = 0; i < fresh.size(); ++i) fresh[i] = w * fresh[i] + (1.0 - w) * old[i];
        const double metric = convergence_metric(cfg.metric, fresh, old);
        approx.fit(fresh);

        for (int r = 0; r < cfg.maxRef; ++r) {
            const std::size_t before = approx.num_collocation_points();
            if (approx.refine(cfg.surplThreshold, cfg.refine_level_limit) == 0) break;
            points = approx.collocation_points();
            n_pts = approx.num_collocation_points();
            std::vector<double> all = approx.node_values();
            parallel_for(n_pts - before, [&](std::size_t k) {
                const std::size_t i = before + k;
                const std::span<const double> x(points.data() + i * d, d);
                std::vector<double> g(m);
                frozen.evaluate(x, g);
                const auto sol = solve_point(p, x, g, prev, rule);
                std::copy(sol.begin(), sol.end(), all.begin() + static_cast<std::ptrdiff_t>(i * m));
            });
            approx.fit(all);
        }

        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.iterations = it;
        report.metric_history.push_back(metric);
        report.wall_time_per_step.push_back(secs);
        report.points_per_step.push_back(approx.num_points());
        if (observer) observer(it, metric);

        if (metric < cfg.tol_ti) {
            report.stop_reason = StopReason::converged;
            break;
        }
        if (metric < best * 0.99) {
            best = metric;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            report.stop_reason = StopReason::early_stopped;
            break;
        }
        report.stop_reason = StopReason::max_iters;
    }
    result.policy = std::move(approx);
    return result;
}

}  // namespace sgdyn
