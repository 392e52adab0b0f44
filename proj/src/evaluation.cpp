#include "sgdyn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sgdyn/errors.hpp"
#include "sgdyn/hdmr.hpp"
#include "sgdyn/parallel.hpp"
#include "sgdyn/rng.hpp"
#include "sgdyn/sparse_grid.hpp"

namespace sgdyn {

SimulationPath simulate(const PolicyFunction& policy, const IrbcParams& p, std::size_t T,
                        std::size_t burn_in, std::uint64_t seed) {
    if (T <= burn_in) throw PreconditionError("simulate: T must exceed burn_in");
    const std::size_t n = static_cast<std::size_t>(p.N);
    SimulationPath path;
    path.N = n;
    path.seed = seed;
    path.total_periods = T;
    path.states.reserve((T - burn_in) * 2 * n);
    path.policies.reserve((T - burn_in) * (n + 1));

    std::vector<double> x = steady_state(p).state;
    std::vector<double> pol(n + 1), eps(n + 1), next(2 * n);
    for (std::size_t t = 0; t < T; ++t) {
        policy(x, pol);
        if (t >= burn_in) {
            path.states.insert(path.states.end(), x.begin(), x.end());
            path.policies.insert(path.policies.end(), pol.begin(), pol.end());
        }
        for (std::size_t i = 0; i <= n; ++i) eps[i] = rng::normal(seed, t, i);
        transition(p, x, eps, std::span<double>(next.data(), n));
        std::copy(pol.begin(), pol.begin() + static_cast<std::ptrdiff_t>(n), next.begin() + static_cast<std::ptrdiff_t>(n));
        // Clamp against the model bounds directly; with sigE = 0 the a-band is a point.
        std::size_t clamped = 0;
        for (std::size_t j = 0; j < 2 * n; ++j) {
            const double lo = j < n ? -p.a_bound() : p.k_min;
            const double hi = j < n ? p.a_bound() : p.k_max;
            const double v = std::clamp(next[j], lo, hi);
            clamped += v != next[j] ? 1 : 0;
            next[j] = v;
        }
        path.saturation_count += clamped;
        path.saturated_periods += clamped > 0 ? 1 : 0;
        x = next;
    }
    return path;
}

double nearest_rank_percentile(std::vector<double> values, double q) {
    if (values.empty()) throw PreconditionError("percentile of an empty set");
    if (!(q > 0.0 && q <= 1.0)) throw PreconditionError("percentile rank must lie in (0, 1]");
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

ErrorStats summarize_log10(std::span<const double> log10_errors) {
    if (log10_errors.empty()) throw PreconditionError("error statistics need at least one value");
    ErrorStats s;
    s.count = log10_errors.size();
    double sum = 0.0;
    for (double v : log10_errors) sum += v;
    s.mean_log10 = sum / static_cast<double>(s.count);
    s.p999_log10 = nearest_rank_percentile({log10_errors.begin(), log10_errors.end()}, 0.999);
    return s;
}

std::vector<double> path_log10_errors(const SimulationPath& path, const PolicyFunction& policy,
                                      const ShockRule& rule, const IrbcParams& p) {
    const std::size_t n = path.N;
    const std::size_t T = path.periods();
    std::vector<double> out(T * n);
    parallel_for(T, [&](std::size_t t) {
        const auto err = euler_errors(p, path.state(t), policy, rule);
        for (std::size_t j = 0; j < n; ++j) out[t * n + j] = log10_error(err[j]);
    }, 64);
    return out;
}

ErrorStats error_stats(const SimulationPath& path, const PolicyFunction& policy, const ShockRule& rule,
                       const IrbcParams& p) {
    const auto e = path_log10_errors(path, policy, rule, p);
    return summarize_log10(e);
}

double test_function(std::span<const double> x, int c) {
    if (c < 1) throw PreconditionError("test_function: c must be >= 1");
    double s = 0.0;
    for (double v : x) s += std::sin(v);
    return std::pow(s, c);
}

std::vector<InterpErrorRow> interp_error_experiment(const InterpErrorOptions& opts) {
    const std::size_t d = opts.dim;
    const Domain dom = Domain::unit(d);
    const int c = opts.c;

    std::vector<double> samples(opts.samples * d);
    for (std::size_t s = 0; s < opts.samples; ++s) {
        for (std::size_t j = 0; j < d; ++j) samples[s * d + j] = rng::uniform(opts.seed, s, j);
    }
    std::vector<double> exact(opts.samples);
    double mean_abs = 0.0;
    for (std::size_t s = 0; s < opts.samples; ++s) {
        exact[s] = test_function(std::span<const double>(samples.data() + s * d, d), c);
        mean_abs += std::abs(exact[s]);
    }
    mean_abs /= static_cast<double>(opts.samples);

    auto relative_error = [&](const auto& eval) {
        std::vector<double> err(opts.samples);
        parallel_for(opts.samples, [&](std::size_t s) {
            err[s] = std::abs(eval(std::span<const double>(samples.data() + s * d, d)) - exact[s]);
        }, 16);
        double sum = 0.0;
        for (double e : err) sum += e;
        return sum / static_cast<double>(opts.samples) / mean_abs;
    };

    const VectorFunction f = [c](std::span<const double> x, std::span<double> out) { out[0] = test_function(x, c); };
    std::vector<InterpErrorRow> rows;
    for (int depth : opts.depths) {
        if (opts.include_sg) {
            HierarchicalGrid g = HierarchicalGrid::make_regular(d, depth, 1, dom);
            std::vector<double> values(g.size());
            parallel_for(g.size(), [&](std::size_t p) {
                std::vector<double> x(d);
                g.coordinates(p, x);
                values[p] = test_function(x, c);
            }, 256);
            g.hierarchize(values);
            const double e = relative_error([&](std::span<const double> x) {
                double v;
                g.interpolate(x, std::span<double>(&v, 1));
                return v;
            });
            rows.push_back({"SG", 0, depth, g.size(), e});
        }
        for (int k : opts.k_max) {
            const DdsgModel m = DdsgModel::build(f, 1, dom, k, depth, {}, std::vector<double>(d, 0.5));
            const double e = relative_error([&](std::span<const double> x) {
                double v;
                m.evaluate(x, std::span<double>(&v, 1));
                return v;
            });
            rows.push_back({"DDSG k=" + std::to_string(k), k, depth, m.num_points(), e});
        }
    }
    return rows;
}

std::string path_csv(const SimulationPath& path) {
    const std::size_t n = path.N;
    std::ostringstream os;
    os.precision(17);
    os << "period";
    for (std::size_t j = 1; j <= n; ++j) os << ",a_" << j;
    for (std::size_t j = 1; j <= n; ++j) os << ",k_" << j;
    for (std::size_t j = 1; j <= n; ++j) os << ",kprime_" << j;
    os << ",lambda\n";
    const std::size_t first = path.total_periods - path.periods();
    for (std::size_t t = 0; t < path.periods(); ++t) {
        os << first + t;
        for (std::size_t i = 0; i < 2 * n; ++i) os << ',' << path.states[t * 2 * n + i];
        for (std::size_t i = 0; i <= n; ++i) os << ',' << path.policies[t * (n + 1) + i];
        os << '\n';
    }
    return os.str();
}

std::string interp_error_csv(const std::vector<InterpErrorRow>& rows) {
    std::ostringstream os;
    os.precision(10);
    os << "method,k_max,depth,points,relative_error\n";
    for (const auto& r : rows) {
        os << r.method << ',' << r.k_max << ',' << r.depth << ',' << r.points << ',' << r.relative_error << '\n';
    }
    return os.str();
}

nlohmann::json to_json(const ErrorStats& s) {
    return {{"mean_log10", s.mean_log10}, {"p999_log10", s.p999_log10}, {"count", s.count}};
}

}  // namespace sgdyn
