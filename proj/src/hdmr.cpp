#include "sgdyn/hdmr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sgdyn/errors.hpp"
#include "sgdyn/parallel.hpp"
#include "sgdyn/rng.hpp"

namespace sgdyn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double l2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Calls visit(subset, |u| - |subset|) for every subset of u.
template <class Visit>
void for_each_subset(const ComponentIndex& u, Visit&& visit) {
    const std::size_t k = u.size();
    ComponentIndex v;
    v.reserve(k);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
        v.clear();
        for (std::size_t b = 0; b < k; ++b) {
            if (mask & (std::uint64_t{1} << b)) v.push_back(u[b]);
        }
        visit(v, static_cast<int>(k - v.size()));
    }
}

void validate_inputs(std::size_t num_outputs, const Domain& domain, int k_max, int depth,
                     const std::vector<double>& anchor) {
    if (num_outputs == 0) throw PreconditionError("DDSG: num_outputs must be >= 1");
    if (domain.dim() == 0) throw PreconditionError("DDSG: domain must have dim >= 1");
    if (k_max < 0 || static_cast<std::size_t>(k_max) > domain.dim()) {
        throw PreconditionError("DDSG: k_max must lie in [0, d]");
    }
    if (depth < 0) throw PreconditionError("DDSG: depth must be >= 0");
    if (anchor.size() != domain.dim() || !domain.contains(anchor)) {
        throw PreconditionError("DDSG: anchor must lie inside the domain");
    }
}

}  // namespace

std::uint64_t component_count(std::size_t d, int k) {
    std::uint64_t total = 0;
    std::uint64_t binom = 1;  // C(d, j)
    for (int j = 0; j <= k && static_cast<std::size_t>(j) <= d; ++j) {
        total += binom;
        binom = binom * (d - static_cast<std::size_t>(j)) / static_cast<std::uint64_t>(j + 1);
    }
    return total;
}

// ---------------------------------------------------------------------------

void DdsgModel::index_components() {
    lookup_.clear();
    for (std::size_t i = 0; i < components_.size(); ++i) lookup_[components_[i].u] = i;
}

bool DdsgModel::is_active(const ComponentIndex& u) const { return lookup_.contains(u); }

void DdsgModel::add_component(ComponentIndex u) {
    DdsgComponent c;
    c.grid = HierarchicalGrid::make_regular(u.size(), depth_, num_outputs_, domain_.restrict_to(u));
    c.u = std::move(u);
    c.cut_integral.assign(num_outputs_, 0.0);
    c.integral.assign(num_outputs_, 0.0);
    lookup_[c.u] = components_.size();
    components_.push_back(std::move(c));
}

void DdsgModel::compute_coefficients() {
    for (auto& c : components_) c.coefficient = 0.0;
    for (const auto& c : components_) {
        for_each_subset(c.u, [&](const ComponentIndex& v, int gap) {
            components_[lookup_.at(v)].coefficient += (gap % 2 == 0) ? 1.0 : -1.0;
        });
    }
}

void DdsgModel::refresh_integrals() {
    const double vol = domain_.volume();
    auto& root = components_[0];
    for (std::size_t r = 0; r < num_outputs_; ++r) root.cut_integral[r] = vol * anchor_value_[r];
    for (std::size_t i = 1; i < components_.size(); ++i) {
        auto& c = components_[i];
        c.cut_integral = c.grid.integrate();
        const double scale = vol / c.grid.domain().volume();
        for (auto& v : c.cut_integral) v *= scale;
    }
    for (auto& c : components_) {
        std::fill(c.integral.begin(), c.integral.end(), 0.0);
        for_each_subset(c.u, [&](const ComponentIndex& v, int gap) {
            const auto& g = components_[lookup_.at(v)].cut_integral;
            const double sign = (gap % 2 == 0) ? 1.0 : -1.0;
            for (std::size_t r = 0; r < num_outputs_; ++r) c.integral[r] += sign * g[r];
        });
    }
}

DdsgModel DdsgModel::make_structure(std::size_t num_outputs, const Domain& domain, int k_max,
                                    int depth, std::vector<double> anchor) {
    validate_inputs(num_outputs, domain, k_max, depth, anchor);
    DdsgModel m;
    m.num_outputs_ = num_outputs;
    m.k_max_ = k_max;
    m.depth_ = depth;
    m.domain_ = domain;
    m.anchor_ = std::move(anchor);
    m.anchor_value_.assign(num_outputs, std::numeric_limits<double>::quiet_NaN());
    m.components_.push_back(DdsgComponent{{}, {}, std::vector<double>(num_outputs, 0.0),
                                          std::vector<double>(num_outputs, 0.0), 0.0});
    m.lookup_[{}] = 0;
    m.expansion_ratios_.push_back(0.0);
    m.candidates_.push_back(1);

    const int d = static_cast<int>(domain.dim());
    std::vector<ComponentIndex> previous{{}};
    for (int k = 1; k <= k_max; ++k) {
        std::vector<ComponentIndex> current;
        for (const auto& u : previous) {
            for (int j = u.empty() ? 0 : u.back() + 1; j < d; ++j) {
                auto v = u;
                v.push_back(j);
                current.push_back(std::move(v));
            }
        }
        m.candidates_.push_back(current.size());
        for (const auto& u : current) m.add_component(u);
        m.expansion_ratios_.push_back(std::numeric_limits<double>::quiet_NaN());
        previous = std::move(current);
    }
    m.compute_coefficients();
    return m;
}

DdsgModel DdsgModel::build(const VectorFunction& f, std::size_t num_outputs, const Domain& domain,
                           int k_max, int depth, DdsgThresholds thresholds,
                           std::vector<double> anchor) {
    validate_inputs(num_outputs, domain, k_max, depth, anchor);
    DdsgModel m;
    m.num_outputs_ = num_outputs;
    m.k_max_ = k_max;
    m.depth_ = depth;
    m.domain_ = domain;
    m.thresholds_ = thresholds;
    m.anchor_ = std::move(anchor);
    m.anchor_value_.assign(num_outputs, 0.0);
    f(m.anchor_, m.anchor_value_);

    const std::size_t mo = num_outputs;
    const double vol = domain.volume();
    DdsgComponent root{{}, {}, std::vector<double>(mo), std::vector<double>(mo), 0.0};
    for (std::size_t r = 0; r < mo; ++r) root.cut_integral[r] = root.integral[r] = vol * m.anchor_value_[r];
    m.components_.push_back(std::move(root));
    m.lookup_[{}] = 0;
    m.expansion_ratios_.push_back(0.0);
    m.candidates_.push_back(1);

    std::vector<double> total = m.components_[0].integral;  // sum over retained orders so far
    const int d = static_cast<int>(domain.dim());

    for (int k = 1; k <= k_max; ++k) {
        // Candidates: extend each active (k-1)-index by a larger dimension and
        // keep it when every (k-1)-subset survived.
        std::vector<ComponentIndex> candidates;
        for (const auto& c : m.components_) {
            if (static_cast<int>(c.u.size()) != k - 1) continue;
            for (int j = c.u.empty() ? 0 : c.u.back() + 1; j < d; ++j) {
                auto v = c.u;
                v.push_back(j);
                bool ok = true;
                for (std::size_t drop = 0; drop + 1 < v.size() && ok; ++drop) {
                    auto w = v;
                    w.erase(w.begin() + static_cast<std::ptrdiff_t>(drop));
                    ok = m.is_active(w);
                }
                if (ok) candidates.push_back(std::move(v));
            }
        }
        m.candidates_.push_back(candidates.size());
        if (candidates.empty()) break;

        std::vector<DdsgComponent> fitted(candidates.size());
        parallel_for(candidates.size(), [&](std::size_t i) {
            const auto& u = candidates[i];
            DdsgComponent c;
            c.u = u;
            c.grid = HierarchicalGrid::make_regular(u.size(), depth, mo, domain.restrict_to(u));
            std::vector<double> state = m.anchor_;
            std::vector<double> node(u.size());
            std::vector<double> values(c.grid.size() * mo);
            for (std::size_t p = 0; p < c.grid.size(); ++p) {
                c.grid.coordinates(p, node);
                for (std::size_t t = 0; t < u.size(); ++t) state[static_cast<std::size_t>(u[t])] = node[t];
                f(state, std::span<double>(values.data() + p * mo, mo));
            }
            c.grid.hierarchize(values);
            c.cut_integral = c.grid.integrate();
            const double scale = vol / c.grid.domain().volume();
            for (auto& v : c.cut_integral) v *= scale;
            fitted[i] = std::move(c);
        });

        const double denom = l2(total);
        if (denom == 0.0) {
            m.diagnostics_.push_back("order " + std::to_string(k) +
                                     ": cumulative integral has zero norm; ratios treated as +inf");
        }
        std::vector<double> next_total = total;
        std::size_t kept = 0;
        for (auto& c : fitted) {
            c.integral.assign(mo, 0.0);
            for_each_subset(c.u, [&](const ComponentIndex& v, int gap) {
                const auto& g = (gap == 0) ? c.cut_integral : m.components_[m.lookup_.at(v)].cut_integral;
                const double sign = (gap % 2 == 0) ? 1.0 : -1.0;
                for (std::size_t r = 0; r < mo; ++r) c.integral[r] += sign * g[r];
            });
            const double eta = denom == 0.0 ? kInf : l2(c.integral) / denom;
            if (eta < thresholds.active_dimension) {
                m.discarded_.push_back(c.u);
                continue;
            }
            for (std::size_t r = 0; r < mo; ++r) next_total[r] += c.integral[r];
            m.lookup_[c.u] = m.components_.size();
            m.components_.push_back(std::move(c));
            ++kept;
        }

        std::vector<double> increment(mo);
        for (std::size_t r = 0; r < mo; ++r) increment[r] = next_total[r] - total[r];
        const double rho = denom == 0.0 ? kInf : l2(increment) / denom;
        m.expansion_ratios_.push_back(rho);
        total = std::move(next_total);
        if (kept == 0 || rho < thresholds.expansion) break;
    }
    m.compute_coefficients();
    return m;
}

std::size_t DdsgModel::num_points() const {
    std::size_t n = 0;
    for (std::size_t i = 1; i < components_.size(); ++i) n += components_[i].grid.size();
    return n == 0 ? 1 : n;
}

void DdsgModel::evaluate(std::span<const double> x, std::span<double> out) const {
    const std::size_t d = dim();
    if (x.size() != d || out.size() != num_outputs_) throw PreconditionError("DDSG evaluate: size mismatch");
    constexpr std::size_t kStack = 128;
    std::vector<double> heap;
    double stack_unit[kStack];
    double* unit = stack_unit;
    if (d > kStack) {
        heap.resize(d);
        unit = heap.data();
    }
    domain_.to_unit(x, std::span<double>(unit, d));

    const std::size_t mo = num_outputs_;
    double stack_tmp[16];
    std::vector<double> heap_tmp;
    double* tmp = stack_tmp;
    if (mo > 16) {
        heap_tmp.resize(mo);
        tmp = heap_tmp.data();
    }
    double gathered[kStack];

    const double c0 = components_[0].coefficient;
    for (std::size_t r = 0; r < mo; ++r) out[r] = c0 * anchor_value_[r];
    for (std::size_t i = 1; i < components_.size(); ++i) {
        const auto& c = components_[i];
        if (c.coefficient == 0.0) continue;
        const std::size_t k = c.u.size();
        for (std::size_t t = 0; t < k; ++t) gathered[t] = unit[c.u[t]];
        c.grid.interpolate_unit(std::span<const double>(gathered, k), std::span<double>(tmp, mo));
        for (std::size_t r = 0; r < mo; ++r) out[r] += c.coefficient * tmp[r];
    }
}

std::vector<double> DdsgModel::evaluate(std::span<const double> x) const {
    std::vector<double> out(num_outputs_);
    evaluate(x, out);
    return out;
}

std::vector<double> DdsgModel::integrate() const {
    std::vector<double> total(num_outputs_, 0.0);
    for (const auto& c : components_) {
        for (std::size_t r = 0; r < num_outputs_; ++r) total[r] += c.integral[r];
    }
    return total;
}

std::size_t DdsgModel::num_collocation_points() const {
    std::size_t n = 1;
    for (std::size_t i = 1; i < components_.size(); ++i) n += components_[i].grid.size();
    return n;
}

std::vector<double> DdsgModel::collocation_points() const {
    const std::size_t d = dim();
    std::vector<double> pts;
    pts.reserve(num_collocation_points() * d);
    pts.insert(pts.end(), anchor_.begin(), anchor_.end());
    std::vector<double> node;
    for (std::size_t i = 1; i < components_.size(); ++i) {
        const auto& c = components_[i];
        node.resize(c.u.size());
        for (std::size_t p = 0; p < c.grid.size(); ++p) {
            c.grid.coordinates(p, node);
            const std::size_t base = pts.size();
            pts.insert(pts.end(), anchor_.begin(), anchor_.end());
            for (std::size_t t = 0; t < c.u.size(); ++t) pts[base + static_cast<std::size_t>(c.u[t])] = node[t];
        }
    }
    return pts;
}

void DdsgModel::fit(std::span<const double> values) {
    const std::size_t mo = num_outputs_;
    if (values.size() != num_collocation_points() * mo) throw PreconditionError("DDSG fit: value count mismatch");
    std::copy(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mo), anchor_value_.begin());
    std::size_t offset = mo;
    for (std::size_t i = 1; i < components_.size(); ++i) {
        auto& g = components_[i].grid;
        const std::size_t len = g.size() * mo;
        g.hierarchize(values.subspan(offset, len));
        offset += len;
    }
    refresh_integrals();
}

// ---------------------------------------------------------------------------

nlohmann::json DdsgModel::to_json() const {
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : components_) {
        comps.push_back({{"u", c.u},
                         {"grid", c.u.empty() ? nlohmann::json(nullptr) : c.grid.to_json()},
                         {"integral", c.integral},
                         {"cut_integral", c.cut_integral}});
    }
    nlohmann::json ratios = nlohmann::json::array();
    for (double r : expansion_ratios_) {
        if (std::isfinite(r)) {
            ratios.push_back(r);
        } else {
            ratios.push_back(nullptr);
        }
    }
    return {{"dim", dim()},
            {"num_outputs", num_outputs_},
            {"k_max", k_max_},
            {"depth", depth_},
            {"anchor", anchor_},
            {"anchor_value", anchor_value_},
            {"domain", {{"lower", domain_.lower()}, {"upper", domain_.upper()}}},
            {"thresholds",
             {{"active_dimension", thresholds_.active_dimension}, {"expansion", thresholds_.expansion}}},
            {"expansion_ratios", std::move(ratios)},
            {"components", std::move(comps)}};
}

DdsgModel DdsgModel::from_json(const nlohmann::json& j) {
    DdsgModel m;
    m.num_outputs_ = j.at("num_outputs").get<std::size_t>();
    m.k_max_ = j.at("k_max").get<int>();
    m.depth_ = j.at("depth").get<int>();
    m.domain_ = Domain(j.at("domain").at("lower").get<std::vector<double>>(),
                       j.at("domain").at("upper").get<std::vector<double>>());
    if (j.at("dim").get<std::size_t>() != m.domain_.dim()) throw PreconditionError("DDSG json: dim mismatch");
    m.anchor_ = j.at("anchor").get<std::vector<double>>();
    m.anchor_value_ = j.at("anchor_value").get<std::vector<double>>();
    if (j.contains("thresholds")) {
        m.thresholds_.active_dimension = j["thresholds"].value("active_dimension", 0.0);
        m.thresholds_.expansion = j["thresholds"].value("expansion", 0.0);
    }
    if (j.contains("expansion_ratios")) {
        for (const auto& r : j["expansion_ratios"]) {
            m.expansion_ratios_.push_back(r.is_null() ? kInf : r.get<double>());
        }
    }
    for (const auto& jc : j.at("components")) {
        DdsgComponent c;
        c.u = jc.at("u").get<ComponentIndex>();
        if (!c.u.empty()) c.grid = HierarchicalGrid::from_json(jc.at("grid"));
        c.integral = jc.at("integral").get<std::vector<double>>();
        c.cut_integral = jc.at("cut_integral").get<std::vector<double>>();
        m.components_.push_back(std::move(c));
    }
    if (m.components_.empty() || !m.components_[0].u.empty()) {
        throw PreconditionError("DDSG json: first component must be the constant term");
    }
    m.index_components();
    for (const auto& c : m.components_) {
        for_each_subset(c.u, [&](const ComponentIndex& v, int) {
            if (!m.lookup_.contains(v)) throw PreconditionError("DDSG json: active set not downward closed");
        });
    }
    m.compute_coefficients();
    return m;
}

std::vector<double> select_anchor(const VectorFunction& f, std::size_t num_outputs,
                                  const Domain& domain, std::size_t num_samples, std::uint64_t seed) {
    if (num_samples == 0) throw PreconditionError("select_anchor: num_samples must be >= 1");
    const std::size_t d = domain.dim();
    std::vector<double> points(num_samples * d);
    std::vector<double> values(num_samples * num_outputs);
    for (std::size_t s = 0; s < num_samples; ++s) {
        std::vector<double> unit(d);
        for (std::size_t j = 0; j < d; ++j) unit[j] = rng::uniform(seed, s, j);
        domain.from_unit(unit, std::span<double>(points.data() + s * d, d));
    }
    parallel_for(num_samples, [&](std::size_t s) {
        f(std::span<const double>(points.data() + s * d, d),
          std::span<double>(values.data() + s * num_outputs, num_outputs));
    }, 64);
    std::vector<double> mean(num_outputs, 0.0);
    for (std::size_t s = 0; s < num_samples; ++s) {
        for (std::size_t r = 0; r < num_outputs; ++r) mean[r] += values[s * num_outputs + r];
    }
    for (auto& v : mean) v /= static_cast<double>(num_samples);
    std::size_t best = 0;
    double best_dist = kInf;
    for (std::size_t s = 0; s < num_samples; ++s) {
        double dist = 0.0;
        for (std::size_t r = 0; r < num_outputs; ++r) dist += std::abs(values[s * num_outputs + r] - mean[r]);
        if (dist < best_dist) {
            best_dist = dist;
            best = s;
        }
    }
    return {points.begin() + static_cast<std::ptrdiff_t>(best * d),
            points.begin() + static_cast<std::ptrdiff_t>((best + 1) * d)};
}

}  // namespace sgdyn
