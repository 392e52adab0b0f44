#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgdyn/function.hpp"
#include "sgdyn/sparse_grid.hpp"

namespace sgdyn {

/// Sorted, strictly increasing set of 0-based dimension indices. Empty is the
/// constant term.
using ComponentIndex = std::vector<int>;

struct DdsgThresholds {
    double active_dimension = 0.0;  // discard u when its relative integral falls below this
    double expansion = 0.0;         // stop adding orders once the relative increment falls below this
};

/// One retained term of the anchored decomposition.
///
/// `grid` interpolates the raw cut g_u(x_u) = f(anchor with x_u substituted);
/// the combination into f_u happens through `coefficient` at evaluation time.
struct DdsgComponent {
    ComponentIndex u;
    HierarchicalGrid grid;              // unused for the empty index
    std::vector<double> cut_integral;   // integral of g_u over the full domain
    std::vector<double> integral;       // integral of f_u over the full domain
    double coefficient = 0.0;
};

/// Dimension-decomposed sparse grid: anchored cut-HDMR whose component
/// functions are regular sparse grids of a common depth.
class DdsgModel {
public:
    DdsgModel() = default;

    /// Adaptive construction in ascending order with active-dimension pruning
    /// and the expansion stopping rule. `f` is called concurrently.
    static DdsgModel build(const VectorFunction& f, std::size_t num_outputs, const Domain& domain,
                           int k_max, int depth, DdsgThresholds thresholds,
                           std::vector<double> anchor);

    /// All components up to order k_max with unset values, for callers that
    /// supply values themselves (time iteration).
    static DdsgModel make_structure(std::size_t num_outputs, const Domain& domain, int k_max,
                                    int depth, std::vector<double> anchor);

    std::size_t dim() const noexcept { return domain_.dim(); }
    std::size_t num_outputs() const noexcept { return num_outputs_; }
    int k_max() const noexcept { return k_max_; }
    int depth() const noexcept { return depth_; }
    const Domain& domain() const noexcept { return domain_; }
    const std::vector<double>& anchor() const noexcept { return anchor_; }
    const std::vector<double>& anchor_value() const noexcept { return anchor_value_; }
    const DdsgThresholds& thresholds() const noexcept { return thresholds_; }
    const std::vector<DdsgComponent>& components() const noexcept { return components_; }

    bool is_active(const ComponentIndex& u) const;
    /// Sum of cut-grid sizes over the non-constant components (1 when only the
    /// constant term is retained).
    std::size_t num_points() const;

    void evaluate(std::span<const double> x, std::span<double> out) const;
    std::vector<double> evaluate(std::span<const double> x) const;
    std::vector<double> integrate() const;

    /// Full-dimensional states at which values are needed: the anchor, then
    /// every cut node (components in order, nodes in grid order), row-major.
    std::vector<double> collocation_points() const;
    std::size_t num_collocation_points() const;
    /// Installs values laid out like collocation_points() and refits every cut.
    void fit(std::span<const double> values);

    /// Relative integral increment recorded per order (index 0 unused).
    const std::vector<double>& expansion_ratios() const noexcept { return expansion_ratios_; }
    /// Number of candidate components examined per order, before pruning.
    const std::vector<std::size_t>& candidates_per_order() const noexcept { return candidates_; }
    const std::vector<ComponentIndex>& discarded() const noexcept { return discarded_; }
    const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

    nlohmann::json to_json() const;
    static DdsgModel from_json(const nlohmann::json& j);

private:
    void add_component(ComponentIndex u);
    void refresh_integrals();
    void compute_coefficients();
    void index_components();

    std::size_t num_outputs_ = 0;
    int k_max_ = 0;
    int depth_ = 0;
    Domain domain_;
    DdsgThresholds thresholds_;
    std::vector<double> anchor_;
    std::vector<double> anchor_value_;
    std::vector<DdsgComponent> components_;  // components_[0] is the empty index
    std::map<ComponentIndex, std::size_t> lookup_;
    std::vector<double> expansion_ratios_;
    std::vector<std::size_t> candidates_;
    std::vector<ComponentIndex> discarded_;
    std::vector<std::string> diagnostics_;
};

/// Sampled point whose value is L1-nearest to the sampled mean of f.
std::vector<double> select_anchor(const VectorFunction& f, std::size_t num_outputs,
                                  const Domain& domain, std::size_t num_samples, std::uint64_t seed);

/// Number of components of order <= k in d dimensions: sum_j C(d, j).
std::uint64_t component_count(std::size_t d, int k);

}  // namespace sgdyn
