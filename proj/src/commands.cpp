#include "sgdyn/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "sgdyn/errors.hpp"

namespace sgdyn::cli {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
    f << text;
}

std::string metric_history_csv(const TiReport& r) {
    std::ostringstream os;
    os.precision(17);
    os << "iteration,metric,seconds,points\n";
    for (std::size_t i = 0; i < r.metric_history.size(); ++i) {
        os << i + 1 << ',' << r.metric_history[i] << ',' << r.wall_time_per_step[i] << ',' << r.points_per_step[i]
           << '\n';
    }
    return os.str();
}

}  // namespace

int exit_code(StopReason r) {
    switch (r) {
        case StopReason::converged: return kExitConverged;
        case StopReason::early_stopped: return kExitEarlyStopped;
        case StopReason::max_iters: return kExitMaxIters;
    }
    return kExitFailure;
}

nlohmann::json artifact_to_json(const Artifact& a) {
    return {{"config", a.config.to_json()}, {"policy", a.policy.to_json()}, {"report", a.report.to_json()}};
}

Artifact artifact_from_json(const nlohmann::json& j) {
    Artifact a;
    a.config = RunConfig::from_json(j.at("config"));
    a.policy = PolicyApproximator::from_json(j.at("policy"));
    const auto& r = j.at("report");
    a.report.iterations = r.at("iterations").get<int>();
    const std::string stop = r.at("stop_reason").get<std::string>();
    a.report.stop_reason = stop == "converged"       ? StopReason::converged
                           : stop == "early_stopped" ? StopReason::early_stopped
                                                     : StopReason::max_iters;
    a.report.metric_history = r.at("metric_history").get<std::vector<double>>();
    a.report.wall_time_per_step = r.at("wall_time_per_step").get<std::vector<double>>();
    a.report.points_per_step = r.at("points_per_step").get<std::vector<std::size_t>>();
    a.report.newton_iterations = r.value("newton_iterations", 0L);
    a.report.fallbacks = r.value("fallbacks", 0);
    return a;
}

Artifact load_artifact(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open artifact '" + path + "'");
    return artifact_from_json(nlohmann::json::parse(in));
}

PolicyFunction policy_function(const Artifact& a) {
    const PolicyApproximator* pol = &a.policy;
    return clamped(a.config.params, [pol](std::span<const double> x, std::span<double> out) { pol->evaluate(x, out); });
}

ErrorsRow compute_errors(const Artifact& a, const EvaluationConfig& eval) {
    const IrbcParams& p = a.config.params;
    const PolicyFunction f = policy_function(a);
    const SimulationPath path = simulate(f, p, eval.T, eval.burn_in, eval.seed);
    const ShockRule rule = make_shock_rule(p.N, eval.shock_rule, eval.shock_level);
    ErrorsRow row;
    row.dims = p.state_dim();
    row.level = a.policy.kind() == ApproximatorKind::sg ? std::to_string(a.config.ti.gridDepth)
                                                        : "k=" + std::to_string(a.config.ti.k_max);
    row.points = a.policy.num_points();
    row.stats = error_stats(path, f, rule, p);
    row.sec_per_step = a.report.mean_step_seconds();
    row.saturated_periods = path.saturated_periods;
    return row;
}

std::string errors_csv_header() { return "dims,level,points,avg_log10,p999_log10,sec_per_step\n"; }

std::string errors_csv_row(const ErrorsRow& r) {
    std::ostringstream os;
    os << r.dims << ',' << r.level << ',' << r.points << ',' << std::fixed << std::setprecision(4)
       << r.stats.mean_log10 << ',' << r.stats.p999_log10 << ',' << std::setprecision(6) << r.sec_per_step << '\n';
    return os.str();
}

std::string full_grid_count(std::uint64_t points_per_dim, std::size_t dim) {
    const double lg = static_cast<double>(dim) * std::log10(static_cast<double>(points_per_dim));
    if (lg >= 18.0) {
        std::ostringstream os;
        os << "~10^" << std::fixed << std::setprecision(2) << lg;
        return os.str();
    }
    std::uint64_t v = 1;
    for (std::size_t i = 0; i < dim; ++i) v *= points_per_dim;
    return std::to_string(v);
}

int cmd_solve(const RunConfig& cfg_in, std::ostream& out) {
    RunConfig cfg = cfg_in;
    cfg.resolve_anchor();
    TiResult res = run(cfg.ti, cfg.params, cfg.guess, [&out](int it, double metric) {
        out << "iteration " << it << " metric " << std::scientific << std::setprecision(6) << metric
            << std::defaultfloat << '\n';
    });
    Artifact a{cfg, std::move(res.policy), std::move(res.report)};
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    write_file(dir / "policy.json", artifact_to_json(a).dump());
    write_file(dir / "report.json", a.report.to_json().dump(2));
    write_file(dir / "metric_history.csv", metric_history_csv(a.report));
    out << "stop_reason " << to_string(a.report.stop_reason) << " iterations " << a.report.iterations << " points "
        << a.policy.num_points() << '\n';
    return exit_code(a.report.stop_reason);
}

int cmd_errors(const RunConfig& cfg, const std::string& artifact_path, std::ostream& out) {
    const Artifact a = load_artifact(artifact_path);
    const ErrorsRow row = compute_errors(a, cfg.evaluation);
    const std::string csv = errors_csv_header() + errors_csv_row(row);
    out << csv;
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    write_file(dir / "errors.csv", csv);
    nlohmann::json j = to_json(row.stats);
    j["dims"] = row.dims;
    j["level"] = row.level;
    j["points"] = row.points;
    j["sec_per_step"] = row.sec_per_step;
    j["saturated_periods"] = row.saturated_periods;
    write_file(dir / "errors.json", j.dump(2));
    return kExitConverged;
}

int cmd_simulate(const RunConfig& cfg, const std::string& artifact_path, std::ostream& out) {
    const Artifact a = load_artifact(artifact_path);
    const SimulationPath path =
        simulate(policy_function(a), a.config.params, cfg.evaluation.T, cfg.evaluation.burn_in, cfg.evaluation.seed);
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    write_file(dir / "path.csv", path_csv(path));
    out << "periods " << path.periods() << " saturations " << path.saturation_count << " saturated_periods "
        << path.saturated_periods << '\n';
    return kExitConverged;
}

int cmd_gridinfo(std::size_t dim, int depth, std::ostream& out) {
    if (dim < 1) throw PreconditionError("gridinfo: dim must be >= 1");
    if (depth < 0 || depth > 62) throw PreconditionError("gridinfo: depth must lie in [0, 62]");
    const std::uint64_t sparse = regular_point_count(dim, depth);
    const std::uint64_t points_1d = (std::uint64_t{1} << depth) + 1;
    const std::uint64_t nested_1d = depth == 0 ? 1 : points_1d;
    out << "dim,depth,sparse,full_2^l+1,full_nested\n";
    out << dim << ',' << depth << ','
        << (sparse == UINT64_MAX ? std::string(">=2^64") : std::to_string(sparse)) << ','
        << full_grid_count(points_1d, dim) << ',' << full_grid_count(nested_1d, dim) << '\n';
    return kExitConverged;
}

int cmd_testfn(const RunConfig& cfg, std::ostream& out) {
    const auto rows = interp_error_experiment(cfg.testfn);
    const std::string csv = interp_error_csv(rows);
    out << csv;
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    write_file(dir / "testfn.csv", csv);
    return kExitConverged;
}

}  // namespace sgdyn::cli
