#include "sgdyn/config.hpp"

#include <fstream>
#include <set>

#include "sgdyn/errors.hpp"
#include "sgdyn/hdmr.hpp"
#include "sgdyn/perturbation.hpp"

namespace sgdyn {

namespace {

using nlohmann::json;

// Reads one object section, remembering which keys were consumed so the rest
// can be rejected as unknown.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    template <class T>
    void read(const std::string& key, T& out) {
        if (!has(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(field(key) + ": " + e.what());
        }
    }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    std::string where() const { return path_.empty() ? "<root>" : path_; }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.contains(key)) throw ConfigError("unknown key '" + field(key) + "'");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& msg) {
    if (!ok) throw ConfigError(field + ": " + msg);
}

template <class Parse>
auto parse_enum(Section& s, const std::string& key, Parse parse, decltype(parse(std::string{})) fallback) {
    std::string name;
    s.read(key, name);
    if (name.empty()) return fallback;
    try {
        return parse(name);
    } catch (const PreconditionError& e) {
        throw ConfigError(s.field(key) + ": " + e.what());
    }
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    Section root(j, "");

    if (root.has("model")) {
        Section m(root.raw("model"), "model");
        int N = 2;
        m.read("N", N);
        require(N >= 1, m.field("N"), "must be >= 1");
        IrbcParams p = IrbcParams::make(N);
        m.read("kappa", p.kappa);
        m.read("beta", p.beta);
        m.read("delta", p.delta);
        m.read("phi", p.phi);
        m.read("rho", p.rho);
        m.read("sigE", p.sigE);
        m.read("k_lower", p.k_min);
        m.read("k_upper", p.k_max);
        m.read("a_band", p.a_band);
        std::vector<double> gamma;
        m.read("gamma", gamma);
        m.finish();
        require(p.kappa > 0.0 && p.kappa < 1.0, m.field("kappa"), "must lie in (0, 1)");
        require(p.beta > 0.0 && p.beta < 1.0, m.field("beta"), "must lie in (0, 1)");
        require(p.delta >= 0.0 && p.delta < 1.0, m.field("delta"), "must lie in [0, 1)");
        require(p.phi >= 0.0, m.field("phi"), "must be >= 0");
        require(p.rho >= 0.0 && p.rho < 1.0, m.field("rho"), "must lie in [0, 1)");
        require(p.sigE >= 0.0, m.field("sigE"), "must be >= 0");
        require(p.k_min > 0.0 && p.k_min < p.k_max, m.field("k_lower"), "need 0 < k_lower < k_upper");
        require(p.a_band > 0.0, m.field("a_band"), "must be > 0");
        require(p.sigE > 0.0, m.field("sigE"), "must be > 0 (the productivity box has zero width otherwise)");
        if (!gamma.empty()) {
            require(gamma.size() == static_cast<std::size_t>(N), m.field("gamma"), "needs N entries");
            for (double g : gamma) require(g > 0.0, m.field("gamma"), "entries must be > 0");
            p.gamma = gamma;
        }
        p.update_derived();
        c.params = p;
    }

    if (root.has("approximator")) {
        Section a(root.raw("approximator"), "approximator");
        c.ti.approximator = parse_enum(a, "kind", parse_approximator_kind, ApproximatorKind::sg);
        a.read("gridDepth", c.ti.gridDepth);
        a.read("maxRef", c.ti.maxRef);
        a.read("surplThreshold", c.ti.surplThreshold);
        a.read("refine_level_limit", c.ti.refine_level_limit);
        a.read("k_max", c.ti.k_max);
        std::string anchor;
        a.read("anchor", anchor);
        if (anchor == "sampled") {
            c.anchor = AnchorMode::sampled;
        } else {
            require(anchor.empty() || anchor == "steady_state", a.field("anchor"),
                    "expected steady_state or sampled");
        }
        a.finish();
        require(c.ti.gridDepth >= 0 && c.ti.gridDepth <= kMaxLevel, a.field("gridDepth"), "must lie in [0, 15]");
        require(c.ti.maxRef >= 0, a.field("maxRef"), "must be >= 0");
        require(c.ti.surplThreshold >= 0.0, a.field("surplThreshold"), "must be >= 0");
        require(c.ti.refine_level_limit >= 1 && c.ti.refine_level_limit <= kMaxLevel, a.field("refine_level_limit"),
                "must lie in [1, 15]");
        require(c.ti.k_max >= 0 && static_cast<std::size_t>(c.ti.k_max) <= c.params.state_dim(), a.field("k_max"),
                "must lie in [0, 2N]");
    }

    if (root.has("solver")) {
        Section s(root.raw("solver"), "solver");
        s.read("tol_ti", c.ti.tol_ti);
        s.read("max_iters", c.ti.max_iters);
        s.read("polUpdateWeight", c.ti.polUpdateWeight);
        c.ti.metric = parse_enum(s, "metric", parse_metric, Metric::mse);
        s.read("patience", c.ti.patience);
        c.guess = parse_enum(s, "guess", parse_guess_kind, GuessKind::linear);
        c.ti.shock_rule = parse_enum(s, "shock_rule", parse_shock_rule_kind, ShockRuleKind::monomial);
        s.read("shock_level", c.ti.shock_level);
        s.finish();
        require(c.ti.tol_ti > 0.0, s.field("tol_ti"), "must be > 0");
        require(c.ti.max_iters >= 1, s.field("max_iters"), "must be >= 1");
        require(c.ti.polUpdateWeight > 0.0 && c.ti.polUpdateWeight <= 1.0, s.field("polUpdateWeight"),
                "must lie in (0, 1]");
        require(c.ti.patience >= 1, s.field("patience"), "must be >= 1");
        require(c.ti.shock_level >= 1, s.field("shock_level"), "must be >= 1");
        require(c.ti.shock_rule == ShockRuleKind::monomial || c.params.N + 1 <= 6, s.field("shock_rule"),
                "gauss_hermite supports N <= 5; use monomial");
    }

    if (root.has("evaluation")) {
        Section e(root.raw("evaluation"), "evaluation");
        e.read("T", c.evaluation.T);
        e.read("burn_in", c.evaluation.burn_in);
        e.read("seed", c.evaluation.seed);
        c.evaluation.shock_rule = parse_enum(e, "shock_rule", parse_shock_rule_kind, ShockRuleKind::monomial);
        e.read("shock_level", c.evaluation.shock_level);
        e.finish();
        require(c.evaluation.T > c.evaluation.burn_in, e.field("T"), "must exceed burn_in");
        require(c.evaluation.shock_level >= 1, e.field("shock_level"), "must be >= 1");
        require(c.evaluation.shock_rule == ShockRuleKind::monomial || c.params.N + 1 <= 6, e.field("shock_rule"),
                "gauss_hermite supports N <= 5; use monomial");
    }

    if (root.has("output")) {
        Section o(root.raw("output"), "output");
        o.read("directory", c.output_dir);
        o.finish();
        require(!c.output_dir.empty(), o.field("directory"), "must not be empty");
    }

    if (root.has("testfn")) {
        Section t(root.raw("testfn"), "testfn");
        t.read("dim", c.testfn.dim);
        t.read("c", c.testfn.c);
        t.read("depths", c.testfn.depths);
        t.read("k_max", c.testfn.k_max);
        t.read("include_sg", c.testfn.include_sg);
        t.read("samples", c.testfn.samples);
        t.read("seed", c.testfn.seed);
        t.finish();
        require(c.testfn.dim >= 1, t.field("dim"), "must be >= 1");
        require(c.testfn.c >= 1, t.field("c"), "must be >= 1");
        require(c.testfn.samples >= 1, t.field("samples"), "must be >= 1");
        for (int d : c.testfn.depths) require(d >= 0 && d <= kMaxLevel, t.field("depths"), "entries must lie in [0, 15]");
        for (int k : c.testfn.k_max) {
            require(k >= 0 && static_cast<std::size_t>(k) <= c.testfn.dim, t.field("k_max"), "entries must lie in [0, dim]");
        }
    }

    root.finish();
    if (c.ti.approximator == ApproximatorKind::ddsg) {
        require(static_cast<std::size_t>(c.ti.k_max) <= c.params.state_dim(), "approximator.k_max", "must lie in [0, 2N]");
    }
    return c;
}

json RunConfig::to_json() const {
    const IrbcParams& p = params;
    json j;
    j["model"] = {{"N", p.N},         {"kappa", p.kappa},   {"beta", p.beta},     {"delta", p.delta},
                  {"phi", p.phi},     {"rho", p.rho},       {"sigE", p.sigE},     {"k_lower", p.k_min},
                  {"k_upper", p.k_max}, {"a_band", p.a_band}, {"gamma", p.gamma}};
    j["approximator"] = {{"kind", to_string(ti.approximator)},
                         {"gridDepth", ti.gridDepth},
                         {"maxRef", ti.maxRef},
                         {"surplThreshold", ti.surplThreshold},
                         {"refine_level_limit", ti.refine_level_limit},
                         {"k_max", ti.k_max},
                         {"anchor", anchor == AnchorMode::sampled ? "sampled" : "steady_state"}};
    j["solver"] = {{"tol_ti", ti.tol_ti},
                   {"max_iters", ti.max_iters},
                   {"polUpdateWeight", ti.polUpdateWeight},
                   {"metric", to_string(ti.metric)},
                   {"patience", ti.patience},
                   {"guess", to_string(guess)},
                   {"shock_rule", to_string(ti.shock_rule)},
                   {"shock_level", ti.shock_level}};
    j["evaluation"] = {{"T", evaluation.T},
                       {"burn_in", evaluation.burn_in},
                       {"seed", evaluation.seed},
                       {"shock_rule", to_string(evaluation.shock_rule)},
                       {"shock_level", evaluation.shock_level}};
    j["output"] = {{"directory", output_dir}};
    j["testfn"] = {{"dim", testfn.dim},         {"c", testfn.c},
                   {"depths", testfn.depths},   {"k_max", testfn.k_max},
                   {"include_sg", testfn.include_sg}, {"samples", testfn.samples},
                   {"seed", testfn.seed}};
    return j;
}

void RunConfig::resolve_anchor() {
    if (anchor == AnchorMode::steady_state) {
        ti.anchor.clear();
        return;
    }
    const LinearPolicy lin = initial_guess_linear(params);
    const VectorFunction f = [&lin](std::span<const double> x, std::span<double> out) { lin.evaluate(x, out); };
    ti.anchor = select_anchor(f, params.policy_dim(), params.domain(), 1000, evaluation.seed);
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return RunConfig::from_json(j);
}

}  // namespace sgdyn
