#include "sgdyn/approximator.hpp"

#include <cmath>
#include <limits>

#include "sgdyn/errors.hpp"

namespace sgdyn {

ApproximatorKind parse_approximator_kind(const std::string& name) {
    if (name == "SG" || name == "sg") return ApproximatorKind::sg;
    if (name == "DDSG" || name == "ddsg") return ApproximatorKind::ddsg;
    throw PreconditionError("unknown approximator '" + name + "' (expected SG or DDSG)");
}

std::string to_string(ApproximatorKind kind) { return kind == ApproximatorKind::sg ? "SG" : "DDSG"; }

PolicyApproximator::PolicyApproximator(HierarchicalGrid grid) : impl_(std::move(grid)) {}
PolicyApproximator::PolicyApproximator(DdsgModel model) : impl_(std::move(model)) {}

ApproximatorKind PolicyApproximator::kind() const noexcept {
    return impl_.index() == 0 ? ApproximatorKind::sg : ApproximatorKind::ddsg;
}

std::size_t PolicyApproximator::dim() const {
    return std::visit([](const auto& a) { return a.dim(); }, impl_);
}

std::size_t PolicyApproximator::num_outputs() const {
    return std::visit([](const auto& a) { return a.num_outputs(); }, impl_);
}

const Domain& PolicyApproximator::domain() const {
    return std::visit([](const auto& a) -> const Domain& { return a.domain(); }, impl_);
}

std::size_t PolicyApproximator::num_points() const {
    if (const auto* g = grid()) return g->size();
    return ddsg()->num_points();
}

std::vector<double> PolicyApproximator::collocation_points() const {
    if (const auto* g = grid()) return g->all_coordinates();
    return ddsg()->collocation_points();
}

std::size_t PolicyApproximator::num_collocation_points() const {
    if (const auto* g = grid()) return g->size();
    return ddsg()->num_collocation_points();
}

void PolicyApproximator::fit(std::span<const double> values) {
    if (values.size() != num_collocation_points() * num_outputs()) {
        throw PreconditionError("approximator fit: value count mismatch");
    }
    if (auto* g = std::get_if<HierarchicalGrid>(&impl_)) {
        g->hierarchize(values);
    } else {
        std::get<DdsgModel>(impl_).fit(values);
    }
    values_.assign(values.begin(), values.end());
}

void PolicyApproximator::evaluate(std::span<const double> x, std::span<double> out) const {
    if (const auto* g = grid()) {
        g->interpolate(x, out);
    } else {
        ddsg()->evaluate(x, out);
    }
}

std::vector<double> PolicyApproximator::evaluate(std::span<const double> x) const {
    std::vector<double> out(num_outputs());
    evaluate(x, out);
    return out;
}

std::size_t PolicyApproximator::refine(double threshold, int level_limit) {
    auto* g = std::get_if<HierarchicalGrid>(&impl_);
    if (g == nullptr) return 0;
    const std::size_t added = g->refine(threshold, {}, level_limit);
    values_.resize(g->size() * g->num_outputs(), std::numeric_limits<double>::quiet_NaN());
    return added;
}

nlohmann::json PolicyApproximator::to_json() const {
    nlohmann::json j;
    j["kind"] = to_string(kind());
    if (const auto* g = grid()) {
        j["grid"] = g->to_json();
    } else {
        j["ddsg"] = ddsg()->to_json();
    }
    j["node_values"] = values_;
    return j;
}

PolicyApproximator PolicyApproximator::from_json(const nlohmann::json& j) {
    PolicyApproximator a;
    if (parse_approximator_kind(j.at("kind").get<std::string>()) == ApproximatorKind::sg) {
        a.impl_ = HierarchicalGrid::from_json(j.at("grid"));
    } else {
        a.impl_ = DdsgModel::from_json(j.at("ddsg"));
    }
    if (j.contains("node_values")) {
        for (const auto& v : j["node_values"]) {
            a.values_.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
        }
    }
    return a;
}

}  // namespace sgdyn
