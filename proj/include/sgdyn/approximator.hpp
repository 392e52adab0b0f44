#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "sgdyn/hdmr.hpp"
#include "sgdyn/sparse_grid.hpp"

namespace sgdyn {

enum class ApproximatorKind { sg, ddsg };

ApproximatorKind parse_approximator_kind(const std::string& name);
std::string to_string(ApproximatorKind kind);

/// Policy interpolant over either a sparse grid or a DDSG model, seen through
/// the collocation points whose values determine it.
class PolicyApproximator {
public:
    PolicyApproximator() = default;
    explicit PolicyApproximator(HierarchicalGrid grid);
    explicit PolicyApproximator(DdsgModel model);

    ApproximatorKind kind() const noexcept;
    std::size_t dim() const;
    std::size_t num_outputs() const;
    const Domain& domain() const;
    /// Reported point count: grid size, or the sum of cut sizes for DDSG.
    std::size_t num_points() const;

    /// States whose values define the interpolant, row-major. Indices stay
    /// stable across SG refinement (new points are appended).
    std::vector<double> collocation_points() const;
    std::size_t num_collocation_points() const;
    /// Values last installed by fit(), laid out like collocation_points().
    const std::vector<double>& node_values() const noexcept { return values_; }

    void fit(std::span<const double> values);

    void evaluate(std::span<const double> x, std::span<double> out) const;
    std::vector<double> evaluate(std::span<const double> x) const;

    /// Surplus-driven refinement (SG only; DDSG returns 0). New points have
    /// no values until the next fit().
    std::size_t refine(double threshold, int level_limit);

    const HierarchicalGrid* grid() const noexcept { return std::get_if<HierarchicalGrid>(&impl_); }
    const DdsgModel* ddsg() const noexcept { return std::get_if<DdsgModel>(&impl_); }

    nlohmann::json to_json() const;
    static PolicyApproximator from_json(const nlohmann::json& j);

private:
    std::variant<HierarchicalGrid, DdsgModel> impl_;
    std::vector<double> values_;
};

}  // namespace sgdyn
