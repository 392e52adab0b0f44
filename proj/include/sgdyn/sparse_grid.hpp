#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

namespace sgdyn {

/// Deepest 1D level a grid may hold. Packed 1D node ids must fit in 16 bits.
inline constexpr int kMaxLevel = 15;

/// One 1D node of the nested piecewise-linear hierarchy.
///
/// Level 0 is the single center node 0.5 carrying the constant basis. Level 1
/// holds the two boundary nodes 0 and 1 with half-width hats. Level l >= 2
/// holds the odd positions i * 2^-l. Every basis function vanishes at all
/// nodes of lower level, which is what makes one-pass hierarchization work.
bool valid_node_1d(int level, int index) noexcept;
double coordinate_1d(int level, int index);
double basis_value(int level, int index, double x);

/// Integral of the 1D basis over [0,1].
double basis_integral_1d(int level);

/// Number of 1D nodes that sit exactly at `level` (1, 2, 2, 4, 8, ...).
std::uint64_t level_node_count(int level);

/// Multi-index node identity: one (level, position) pair per dimension.
struct NodeId {
    std::vector<int> level;
    std::vector<int> index;

    std::size_t dim() const noexcept { return level.size(); }
    bool valid() const noexcept;
    int level_sum() const noexcept;
    friend bool operator==(const NodeId&, const NodeId&) = default;
};

/// Axis-aligned box with an affine map to and from [0,1]^d.
class Domain {
public:
    Domain() = default;
    Domain(std::vector<double> lower, std::vector<double> upper);

    static Domain unit(std::size_t dim);

    std::size_t dim() const noexcept { return lower_.size(); }
    const std::vector<double>& lower() const noexcept { return lower_; }
    const std::vector<double>& upper() const noexcept { return upper_; }
    double volume() const noexcept;

    bool contains(std::span<const double> x) const noexcept;
    /// Throws OutOfDomainError for points outside the box.
    void to_unit(std::span<const double> x, std::span<double> unit) const;
    void from_unit(std::span<const double> unit, std::span<double> x) const;
    /// Componentwise clamp into the box. Returns the number of clamped coordinates.
    std::size_t clamp(std::span<double> x) const noexcept;
    /// Sub-box over the given dimensions (in the given order).
    Domain restrict_to(std::span<const int> dims) const;

    friend bool operator==(const Domain&, const Domain&) = default;

private:
    std::vector<double> lower_;
    std::vector<double> upper_;
};

/// Adaptive sparse grid with hierarchical piecewise-linear basis and
/// m outputs per node.
///
/// Nodes are kept ancestor-closed: each node's 1D parent in every dimension
/// is present. Insertion order is preserved, so node indices are stable
/// across refinement (new nodes are appended).
class HierarchicalGrid {
public:
    HierarchicalGrid() = default;
    HierarchicalGrid(std::size_t dim, std::size_t num_outputs, Domain domain);

    /// All nodes with level sum <= depth, surpluses zero, values unset.
    static HierarchicalGrid make_regular(std::size_t dim, int depth, std::size_t num_outputs,
                                         const Domain& domain);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t num_outputs() const noexcept { return num_outputs_; }
    std::size_t size() const noexcept { return dim_ == 0 ? 0 : ids_.size() / dim_; }
    int max_level() const noexcept { return max_level_; }
    const Domain& domain() const noexcept { return domain_; }

    NodeId node(std::size_t p) const;
    int level(std::size_t p, std::size_t j) const;
    int level_sum(std::size_t p) const;
    std::optional<std::size_t> find(const NodeId& id) const;

    /// Inserts the node and any missing ancestors. Returns the node's index.
    std::size_t insert(const NodeId& id);

    void unit_coordinates(std::size_t p, std::span<double> out) const;
    void coordinates(std::size_t p, std::span<double> out) const;
    std::vector<double> coordinates(std::size_t p) const;
    /// Row-major n x d matrix of domain coordinates.
    std::vector<double> all_coordinates() const;

    /// Product of 1D basis values of node p at a unit-cube point.
    double basis_product(std::size_t p, std::span<const double> unit_x) const;
    /// Product of 1D basis integrals of node p (unit cube).
    double basis_integral(std::size_t p) const;

    std::span<const double> values(std::size_t p) const;
    std::span<const double> surpluses(std::size_t p) const;
    const std::vector<double>& all_values() const noexcept { return values_; }
    const std::vector<double>& all_surpluses() const noexcept { return surpluses_; }
    void set_values(std::size_t p, std::span<const double> v);
    void set_all_values(std::span<const double> flat);
    bool has_unset_values() const noexcept;
    /// Installs surpluses computed elsewhere (reference kernels, deserialization).
    void set_all_surpluses(std::span<const double> flat);

    /// Recomputes surpluses from the stored node values so the interpolant
    /// reproduces every node value. Throws PreconditionError on unset values.
    void hierarchize();
    void hierarchize(std::span<const double> flat_values);

    /// Interpolant at a domain point. Throws OutOfDomainError outside the box.
    void interpolate(std::span<const double> x, std::span<double> out) const;
    std::vector<double> interpolate(std::span<const double> x) const;
    /// Same, for a point already mapped to the unit cube.
    void interpolate_unit(std::span<const double> unit_x, std::span<double> out) const;
    /// Row-major batch evaluation, parallel over points.
    void interpolate_batch(std::span<const double> xs, std::span<double> out) const;

    /// Integral of the interpolant over the domain (per output).
    std::vector<double> integrate() const;

    /// Per-output max |node value|, with zeros replaced by 1.
    std::vector<double> default_refinement_scale() const;

    /// Adds all 1D children (every dimension) of nodes whose scaled surplus
    /// max_k |alpha_k| / scale_k exceeds `threshold`, plus missing ancestors.
    /// New nodes carry unset values. Returns the number of nodes added.
    std::size_t refine(double threshold, std::span<const double> scale = {},
                       int level_limit = kMaxLevel);

    /// True when every node's 1D parent in every dimension is present.
    bool is_ancestor_closed() const;

    nlohmann::json to_json() const;
    static HierarchicalGrid from_json(const nlohmann::json& j);

private:
    std::span<const std::uint16_t> key(std::size_t p) const {
        return {ids_.data() + p * dim_, dim_};
    }
    std::size_t hash_key(std::span<const std::uint16_t> k) const noexcept;
    std::optional<std::size_t> find_key(std::span<const std::uint16_t> k) const;
    std::size_t insert_key(std::vector<std::uint16_t> k);
    void table_insert(std::size_t p);
    void rehash(std::size_t slots);
    void accumulate(std::int32_t node, std::size_t j, double weight, const double* unit_x,
                    double* out) const;
    void hierarchize_dimension(std::size_t j, const std::vector<double>& in,
                               std::vector<double>& out) const;

    std::size_t dim_ = 0;
    std::size_t num_outputs_ = 0;
    int max_level_ = 0;
    Domain domain_;
    std::vector<std::uint16_t> ids_;       // n x d packed 1D node ids
    std::vector<std::int32_t> children_;   // n x d x 2, -1 when absent
    std::vector<double> values_;           // n x m, NaN when unset
    std::vector<double> surpluses_;        // n x m
    std::vector<std::int32_t> table_;      // open addressing, -1 empty
};

/// Count of a regular grid without building it. Saturates at UINT64_MAX.
std::uint64_t regular_point_count(std::size_t dim, int depth);

namespace detail {
// Packed 1D id: 0 center, 1-2 boundaries, then level l >= 2 at 2^(l-1)+1+(i-1)/2.
std::uint16_t pack_1d(int level, int index);
int level_of(std::uint16_t id) noexcept;
int index_of(std::uint16_t id) noexcept;
}  // namespace detail

}  // namespace sgdyn
