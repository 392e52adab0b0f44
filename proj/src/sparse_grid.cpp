#include "sgdyn/sparse_grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "sgdyn/errors.hpp"

namespace sgdyn {

namespace {

constexpr std::size_t kNumIds = (std::size_t{1} << kMaxLevel) + 1;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Table1d {
    std::vector<double> center;
    std::vector<double> inv_h;  // 0 for the constant level-0 basis
    std::vector<double> integral;
    std::vector<std::uint8_t> level;

    Table1d() : center(kNumIds), inv_h(kNumIds), integral(kNumIds), level(kNumIds) {
        for (std::size_t id = 0; id < kNumIds; ++id) {
            const auto u = static_cast<std::uint16_t>(id);
            const int l = detail::level_of(u);
            const int i = detail::index_of(u);
            level[id] = static_cast<std::uint8_t>(l);
            center[id] = coordinate_1d(l, i);
            inv_h[id] = l == 0 ? 0.0 : (l == 1 ? 2.0 : std::ldexp(1.0, l));
            integral[id] = basis_integral_1d(l);
        }
    }
};

const Table1d& table() {
    static const Table1d t;
    return t;
}

inline double hat(std::uint16_t id, double x, const Table1d& t) noexcept {
    return std::max(1.0 - std::abs(x - t.center[id]) * t.inv_h[id], 0.0);
}

std::uint16_t parent_1d(std::uint16_t id) {
    const int l = detail::level_of(id);
    const int i = detail::index_of(id);
    if (l == 1) return detail::pack_1d(0, 0);
    if (l == 2) return detail::pack_1d(1, i == 1 ? 0 : 1);
    const int a = (i - 1) / 2;
    return detail::pack_1d(l - 1, (a % 2 == 1) ? a : a + 1);
}

// Slot in the parent's child pair that `child` occupies.
int child_side(std::uint16_t parent, std::uint16_t child) {
    const int lp = detail::level_of(parent);
    if (lp == 0) return detail::index_of(child);
    if (lp == 1) return 0;
    return detail::index_of(child) < 2 * detail::index_of(parent) ? 0 : 1;
}

std::vector<std::uint16_t> children_1d(std::uint16_t id) {
    const int l = detail::level_of(id);
    const int i = detail::index_of(id);
    if (l == 0) return {detail::pack_1d(1, 0), detail::pack_1d(1, 1)};
    if (l == 1) return {detail::pack_1d(2, i == 0 ? 1 : 3)};
    if (l >= kMaxLevel) return {};
    return {detail::pack_1d(l + 1, 2 * i - 1), detail::pack_1d(l + 1, 2 * i + 1)};
}

}  // namespace

namespace detail {

std::uint16_t pack_1d(int level, int index) {
    if (!valid_node_1d(level, index)) {
        throw PreconditionError("invalid 1D node (level " + std::to_string(level) + ", index " +
                                std::to_string(index) + ")");
    }
    if (level == 0) return 0;
    if (level == 1) return static_cast<std::uint16_t>(1 + index);
    return static_cast<std::uint16_t>((1u << (level - 1)) + 1u + static_cast<unsigned>(index - 1) / 2u);
}

int level_of(std::uint16_t id) noexcept {
    if (id == 0) return 0;
    if (id <= 2) return 1;
    // ids of level l >= 2 occupy [2^(l-1)+1, 2^l]
    return std::bit_width(static_cast<unsigned>(id - 1)) ;
}

int index_of(std::uint16_t id) noexcept {
    if (id == 0) return 0;
    if (id <= 2) return id - 1;
    const int l = level_of(id);
    return 2 * static_cast<int>(id - (1u << (l - 1)) - 1u) + 1;
}

}  // namespace detail

bool valid_node_1d(int level, int index) noexcept {
    if (level < 0 || level > kMaxLevel) return false;
    if (level == 0) return index == 0;
    if (level == 1) return index == 0 || index == 1;
    return index % 2 == 1 && index >= 1 && index <= (1 << level) - 1;
}

double coordinate_1d(int level, int index) {
    if (!valid_node_1d(level, index)) throw PreconditionError("invalid 1D node");
    if (level == 0) return 0.5;
    if (level == 1) return static_cast<double>(index);
    return std::ldexp(static_cast<double>(index), -level);
}

double basis_value(int level, int index, double x) {
    if (!valid_node_1d(level, index)) {
        throw PreconditionError("basis_value: invalid (level " + std::to_string(level) +
                                ", index " + std::to_string(index) + ")");
    }
    if (!(x >= 0.0 && x <= 1.0)) throw PreconditionError("basis_value: x outside [0,1]");
    if (level == 0) return 1.0;
    if (level == 1) return index == 0 ? std::max(1.0 - 2.0 * x, 0.0) : std::max(2.0 * x - 1.0, 0.0);
    const double h = std::ldexp(1.0, -level);
    return std::max(1.0 - std::abs(x - index * h) / h, 0.0);
}

double basis_integral_1d(int level) {
    if (level < 0) throw PreconditionError("negative level");
    if (level == 0) return 1.0;
    if (level == 1) return 0.25;
    return std::ldexp(1.0, -level);
}

std::uint64_t level_node_count(int level) {
    if (level < 0) return 0;
    if (level == 0) return 1;
    if (level == 1) return 2;
    return std::uint64_t{1} << (level - 1);
}

bool NodeId::valid() const noexcept {
    if (level.size() != index.size()) return false;
    for (std::size_t j = 0; j < level.size(); ++j) {
        if (!valid_node_1d(level[j], index[j])) return false;
    }
    return true;
}

int NodeId::level_sum() const noexcept { return std::accumulate(level.begin(), level.end(), 0); }

// ---------------------------------------------------------------------------
// Domain

Domain::Domain(std::vector<double> lower, std::vector<double> upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() != upper_.size()) throw PreconditionError("Domain: bound sizes differ");
    for (std::size_t j = 0; j < lower_.size(); ++j) {
        if (!(lower_[j] < upper_[j])) {
            throw PreconditionError("Domain: lower bound must be below upper bound in dimension " +
                                    std::to_string(j));
        }
    }
}

Domain Domain::unit(std::size_t dim) {
    return Domain(std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0));
}

double Domain::volume() const noexcept {
    double v = 1.0;
    for (std::size_t j = 0; j < lower_.size(); ++j) v *= upper_[j] - lower_[j];
    return v;
}

bool Domain::contains(std::span<const double> x) const noexcept {
    if (x.size() != lower_.size()) return false;
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (!(x[j] >= lower_[j] && x[j] <= upper_[j])) return false;
    }
    return true;
}

void Domain::to_unit(std::span<const double> x, std::span<double> unit) const {
    if (x.size() != lower_.size() || unit.size() != lower_.size()) {
        throw PreconditionError("Domain::to_unit: dimension mismatch");
    }
    constexpr double slack = 1e-12;
    for (std::size_t j = 0; j < x.size(); ++j) {
        double u = (x[j] - lower_[j]) / (upper_[j] - lower_[j]);
        if (!(u >= -slack && u <= 1.0 + slack)) {
            throw OutOfDomainError("point outside domain in dimension " + std::to_string(j) +
                                   ": " + std::to_string(x[j]) + " not in [" +
                                   std::to_string(lower_[j]) + ", " + std::to_string(upper_[j]) +
                                   "]");
        }
        unit[j] = std::clamp(u, 0.0, 1.0);
    }
}

void Domain::from_unit(std::span<const double> unit, std::span<double> x) const {
    for (std::size_t j = 0; j < lower_.size(); ++j) {
        x[j] = lower_[j] + unit[j] * (upper_[j] - lower_[j]);
    }
}

std::size_t Domain::clamp(std::span<double> x) const noexcept {
    std::size_t n = 0;
    for (std::size_t j = 0; j < lower_.size(); ++j) {
        if (x[j] < lower_[j]) {
            x[j] = lower_[j];
            ++n;
        } else if (x[j] > upper_[j]) {
            x[j] = upper_[j];
            ++n;
        }
    }
    return n;
}

Domain Domain::restrict_to(std::span<const int> dims) const {
    std::vector<double> lo, hi;
    lo.reserve(dims.size());
    hi.reserve(dims.size());
    for (int j : dims) {
        lo.push_back(lower_.at(static_cast<std::size_t>(j)));
        hi.push_back(upper_.at(static_cast<std::size_t>(j)));
    }
    return Domain(std::move(lo), std::move(hi));
}

// ---------------------------------------------------------------------------
// HierarchicalGrid: storage and lookup

HierarchicalGrid::HierarchicalGrid(std::size_t dim, std::size_t num_outputs, Domain domain)
    : dim_(dim), num_outputs_(num_outputs), domain_(std::move(domain)) {
    if (dim_ == 0) throw PreconditionError("HierarchicalGrid: dim must be >= 1");
    if (domain_.dim() != dim_) throw PreconditionError("HierarchicalGrid: domain dimension mismatch");
    rehash(64);
}

std::size_t HierarchicalGrid::hash_key(std::span<const std::uint16_t> k) const noexcept {
    std::uint64_t h = 0x9E3779B97F4A7C15ull;
    for (auto v : k) {
        h ^= v + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
    }
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    return static_cast<std::size_t>(h);
}

std::optional<std::size_t> HierarchicalGrid::find_key(std::span<const std::uint16_t> k) const {
    const std::size_t mask = table_.size() - 1;
    std::size_t s = hash_key(k) & mask;
    while (true) {
        const std::int32_t p = table_[s];
        if (p < 0) return std::nullopt;
        const auto stored = key(static_cast<std::size_t>(p));
        if (std::equal(stored.begin(), stored.end(), k.begin())) return static_cast<std::size_t>(p);
        s = (s + 1) & mask;
    }
}

void HierarchicalGrid::table_insert(std::size_t p) {
    const std::size_t mask = table_.size() - 1;
    std::size_t s = hash_key(key(p)) & mask;
    while (table_[s] >= 0) s = (s + 1) & mask;
    table_[s] = static_cast<std::int32_t>(p);
}

void HierarchicalGrid::rehash(std::size_t slots) {
    table_.assign(std::bit_ceil(slots), -1);
    for (std::size_t p = 0; p < size(); ++p) table_insert(p);
}

std::size_t HierarchicalGrid::insert_key(std::vector<std::uint16_t> k) {
    if (auto found = find_key(k)) return *found;
    for (std::size_t j = 0; j < dim_; ++j) {
        if (k[j] == 0) continue;
        auto parent = k;
        parent[j] = parent_1d(k[j]);
        insert_key(std::move(parent));
    }
    const std::size_t p = size();
    if (p >= static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
        throw PreconditionError("HierarchicalGrid: too many nodes");
    }
    ids_.insert(ids_.end(), k.begin(), k.end());
    children_.resize(children_.size() + 2 * dim_, -1);
    values_.resize(values_.size() + num_outputs_, kNaN);
    surpluses_.resize(surpluses_.size() + num_outputs_, 0.0);
    if (2 * (p + 1) > table_.size()) {
        rehash(4 * (p + 1));
    } else {
        table_insert(p);
    }
    int lsum = 0;
    for (std::size_t j = 0; j < dim_; ++j) {
        lsum += detail::level_of(k[j]);
        if (k[j] == 0) continue;
        auto parent = k;
        parent[j] = parent_1d(k[j]);
        const std::size_t q = *find_key(parent);
        children_[(q * dim_ + j) * 2 + child_side(parent[j], k[j])] = static_cast<std::int32_t>(p);
    }
    max_level_ = std::max(max_level_, lsum);
    return p;
}

std::size_t HierarchicalGrid::insert(const NodeId& id) {
    if (id.dim() != dim_ || !id.valid()) throw PreconditionError("insert: invalid NodeId");
    std::vector<std::uint16_t> k(dim_);
    for (std::size_t j = 0; j < dim_; ++j) k[j] = detail::pack_1d(id.level[j], id.index[j]);
    return insert_key(std::move(k));
}

HierarchicalGrid HierarchicalGrid::make_regular(std::size_t dim, int depth, std::size_t num_outputs,
                                                const Domain& domain) {
    if (dim == 0) throw PreconditionError("make_regular: dim must be >= 1");
    if (depth < 0) throw PreconditionError("make_regular: depth must be >= 0");
    if (depth > kMaxLevel) throw PreconditionError("make_regular: depth exceeds kMaxLevel");
    const std::uint64_t count = regular_point_count(dim, depth);
    if (count > static_cast<std::uint64_t>(std::numeric_limits<std::int32_t>::max() / 2)) {
        throw PreconditionError("make_regular: grid too large");
    }
    HierarchicalGrid g(dim, num_outputs, domain);
    g.rehash(2 * count + 2);
    g.ids_.reserve(count * dim);
    g.children_.reserve(count * dim * 2);

    // Nodes go in ascending level-sum order so each node's parents precede it.
    std::vector<int> levels(dim, 0);
    std::vector<std::uint16_t> k(dim);
    std::vector<std::vector<std::uint16_t>> per_level(depth + 1);
    for (int l = 0; l <= depth; ++l) {
        for (std::uint16_t id = 0; id < kNumIds; ++id) {
            if (detail::level_of(id) == l) per_level[l].push_back(id);
            if (detail::level_of(id) > l) break;
        }
    }
    for (int total = 0; total <= depth; ++total) {
        // enumerate level multi-indices with sum == total
        std::fill(levels.begin(), levels.end(), 0);
        auto emit_positions = [&](auto&& self, std::size_t j) -> void {
            if (j == dim) {
                g.insert_key(k);
                return;
            }
            for (auto id : per_level[levels[j]]) {
                k[j] = id;
                self(self, j + 1);
            }
        };
        auto emit_levels = [&](auto&& self, std::size_t j, int remaining) -> void {
            if (j + 1 == dim) {
                levels[j] = remaining;
                emit_positions(emit_positions, 0);
                return;
            }
            for (int l = 0; l <= remaining; ++l) {
                levels[j] = l;
                self(self, j + 1, remaining - l);
            }
        };
        emit_levels(emit_levels, 0, total);
    }
    g.max_level_ = depth;
    return g;
}

std::uint64_t regular_point_count(std::size_t dim, int depth) {
    if (depth < 0) return 0;
    // Polynomial power of sum_l delta(l) t^l, truncated at degree depth.
    constexpr std::uint64_t cap = std::numeric_limits<std::uint64_t>::max();
    auto sat_mul = [](std::uint64_t a, std::uint64_t b) -> std::uint64_t {
        if (a == 0 || b == 0) return 0;
        return a > cap / b ? cap : a * b;
    };
    auto sat_add = [](std::uint64_t a, std::uint64_t b) -> std::uint64_t {
        return a > cap - b ? cap : a + b;
    };
    std::vector<std::uint64_t> poly(depth + 1, 0);
    poly[0] = 1;
    for (std::size_t d = 0; d < dim; ++d) {
        std::vector<std::uint64_t> next(depth + 1, 0);
        for (int a = 0; a <= depth; ++a) {
            if (poly[a] == 0) continue;
            for (int b = 0; a + b <= depth; ++b) {
                next[a + b] = sat_add(next[a + b], sat_mul(poly[a], level_node_count(b)));
            }
        }
        poly = std::move(next);
    }
    std::uint64_t total = 0;
    for (auto c : poly) total = sat_add(total, c);
    return total;
}

NodeId HierarchicalGrid::node(std::size_t p) const {
    NodeId id;
    id.level.resize(dim_);
    id.index.resize(dim_);
    const auto k = key(p);
    for (std::size_t j = 0; j < dim_; ++j) {
        id.level[j] = detail::level_of(k[j]);
        id.index[j] = detail::index_of(k[j]);
    }
    return id;
}

int HierarchicalGrid::level(std::size_t p, std::size_t j) const {
    return detail::level_of(ids_[p * dim_ + j]);
}

int HierarchicalGrid::level_sum(std::size_t p) const {
    int s = 0;
    for (std::size_t j = 0; j < dim_; ++j) s += level(p, j);
    return s;
}

std::optional<std::size_t> HierarchicalGrid::find(const NodeId& id) const {
    if (id.dim() != dim_ || !id.valid()) return std::nullopt;
    std::vector<std::uint16_t> k(dim_);
    for (std::size_t j = 0; j < dim_; ++j) k[j] = detail::pack_1d(id.level[j], id.index[j]);
    return find_key(k);
}

void HierarchicalGrid::unit_coordinates(std::size_t p, std::span<double> out) const {
    const auto& t = table();
    const auto k = key(p);
    for (std::size_t j = 0; j < dim_; ++j) out[j] = t.center[k[j]];
}

void HierarchicalGrid::coordinates(std::size_t p, std::span<double> out) const {
    unit_coordinates(p, out);
    domain_.from_unit(out, out);
}

std::vector<double> HierarchicalGrid::coordinates(std::size_t p) const {
    std::vector<double> x(dim_);
    coordinates(p, x);
    return x;
}

std::vector<double> HierarchicalGrid::all_coordinates() const {
    std::vector<double> xs(size() * dim_);
    for (std::size_t p = 0; p < size(); ++p) {
        coordinates(p, std::span<double>(xs.data() + p * dim_, dim_));
    }
    return xs;
}

double HierarchicalGrid::basis_product(std::size_t p, std::span<const double> unit_x) const {
    const auto& t = table();
    const auto k = key(p);
    double v = 1.0;
    for (std::size_t j = 0; j < dim_ && v != 0.0; ++j) v *= hat(k[j], unit_x[j], t);
    return v;
}

double HierarchicalGrid::basis_integral(std::size_t p) const {
    const auto& t = table();
    const auto k = key(p);
    double v = 1.0;
    for (std::size_t j = 0; j < dim_; ++j) v *= t.integral[k[j]];
    return v;
}

std::span<const double> HierarchicalGrid::values(std::size_t p) const {
    return {values_.data() + p * num_outputs_, num_outputs_};
}

std::span<const double> HierarchicalGrid::surpluses(std::size_t p) const {
    return {surpluses_.data() + p * num_outputs_, num_outputs_};
}

void HierarchicalGrid::set_values(std::size_t p, std::span<const double> v) {
    if (p >= size() || v.size() != num_outputs_) throw PreconditionError("set_values: bad node or width");
    std::copy(v.begin(), v.end(), values_.begin() + static_cast<std::ptrdiff_t>(p * num_outputs_));
}

void HierarchicalGrid::set_all_values(std::span<const double> flat) {
    if (flat.size() != values_.size()) {
        throw PreconditionError("set_all_values: expected " + std::to_string(values_.size()) +
                                " entries, got " + std::to_string(flat.size()));
    }
    std::copy(flat.begin(), flat.end(), values_.begin());
}

void HierarchicalGrid::set_all_surpluses(std::span<const double> flat) {
    if (flat.size() != surpluses_.size()) throw PreconditionError("set_all_surpluses: size mismatch");
    std::copy(flat.begin(), flat.end(), surpluses_.begin());
}

bool HierarchicalGrid::has_unset_values() const noexcept {
    return std::any_of(values_.begin(), values_.end(), [](double v) { return std::isnan(v); });
}

// ---------------------------------------------------------------------------
// Hierarchization: unidirectional sweeps along 1D poles, no hashing.

void HierarchicalGrid::hierarchize_dimension(std::size_t j, const std::vector<double>& in,
                                             std::vector<double>& out) const {
    const std::size_t m = num_outputs_;
    const std::size_t n = size();
    const auto* kids = children_.data();

    auto child = [&](std::int32_t p, int side) { return kids[(static_cast<std::size_t>(p) * dim_ + j) * 2 + side]; };
    auto subtract_mean = [&](std::int32_t c, std::int32_t lo, std::int32_t hi) {
        for (std::size_t r = 0; r < m; ++r) {
            out[c * m + r] = in[c * m + r] - 0.5 * (in[lo * m + r] + in[hi * m + r]);
        }
    };
    auto descend = [&](auto&& self, std::int32_t c, std::int32_t lo, std::int32_t hi) -> void {
        if (c < 0) return;
        subtract_mean(c, lo, hi);
        self(self, child(c, 0), lo, c);
        self(self, child(c, 1), c, hi);
    };

#pragma omp parallel for schedule(dynamic, 64)
    for (std::int64_t ps = 0; ps < static_cast<std::int64_t>(n); ++ps) {
        const auto p = static_cast<std::int32_t>(ps);
        if (ids_[static_cast<std::size_t>(p) * dim_ + j] != 0) continue;  // not a pole root
        for (std::size_t r = 0; r < m; ++r) out[p * m + r] = in[p * m + r];
        for (int side = 0; side < 2; ++side) {
            const std::int32_t b = child(p, side);
            if (b < 0) continue;
            for (std::size_t r = 0; r < m; ++r) out[b * m + r] = in[b * m + r] - in[p * m + r];
            const std::int32_t c = child(b, 0);
            if (side == 0) {
                descend(descend, c, b, p);
            } else {
                descend(descend, c, p, b);
            }
        }
    }
}

void HierarchicalGrid::hierarchize() {
    if (has_unset_values()) throw PreconditionError("hierarchize: missing values for some nodes");
    std::vector<double> a = values_;
    std::vector<double> b(a.size());
    for (std::size_t j = 0; j < dim_; ++j) {
        hierarchize_dimension(j, a, b);
        a.swap(b);
    }
    surpluses_ = std::move(a);
}

void HierarchicalGrid::hierarchize(std::span<const double> flat_values) {
    set_all_values(flat_values);
    hierarchize();
}

// ---------------------------------------------------------------------------
// Evaluation: walk each dimension's 1D chain of supports containing x.

void HierarchicalGrid::accumulate(std::int32_t node, std::size_t j, double weight,
                                  const double* unit_x, double* out) const {
    const auto& t = table();
    const double xj = unit_x[j];
    const bool last = j + 1 == dim_;
    std::int32_t cur = node;
    while (cur >= 0) {
        const std::uint16_t id = ids_[static_cast<std::size_t>(cur) * dim_ + j];
        const double phi = hat(id, xj, t);
        if (phi == 0.0) break;
        const double w = weight * phi;
        if (last) {
            const double* a = surpluses_.data() + static_cast<std::size_t>(cur) * num_outputs_;
            for (std::size_t r = 0; r < num_outputs_; ++r) out[r] += w * a[r];
        } else {
            accumulate(cur, j + 1, w, unit_x, out);
        }
        const int side = (t.level[id] == 1) ? 0 : (xj < t.center[id] ? 0 : 1);
        cur = children_[(static_cast<std::size_t>(cur) * dim_ + j) * 2 + side];
    }
}

void HierarchicalGrid::interpolate_unit(std::span<const double> unit_x, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    if (size() == 0) return;
    accumulate(0, 0, 1.0, unit_x.data(), out.data());
}

void HierarchicalGrid::interpolate(std::span<const double> x, std::span<double> out) const {
    if (x.size() != dim_ || out.size() != num_outputs_) throw PreconditionError("interpolate: size mismatch");
    constexpr std::size_t kStack = 64;
    if (dim_ <= kStack) {
        double u[kStack];
        domain_.to_unit(x, std::span<double>(u, dim_));
        interpolate_unit(std::span<const double>(u, dim_), out);
    } else {
        std::vector<double> u(dim_);
        domain_.to_unit(x, u);
        interpolate_unit(u, out);
    }
}

std::vector<double> HierarchicalGrid::interpolate(std::span<const double> x) const {
    std::vector<double> out(num_outputs_);
    interpolate(x, out);
    return out;
}

void HierarchicalGrid::interpolate_batch(std::span<const double> xs, std::span<double> out) const {
    if (xs.size() % dim_ != 0) throw PreconditionError("interpolate_batch: ragged input");
    const std::size_t n = xs.size() / dim_;
    if (out.size() != n * num_outputs_) throw PreconditionError("interpolate_batch: output size");
    // Validate serially so errors are not thrown from inside the parallel region.
    for (std::size_t p = 0; p < n; ++p) {
        std::vector<double> u(dim_);
        domain_.to_unit(xs.subspan(p * dim_, dim_), u);
    }
#pragma omp parallel
    {
        std::vector<double> u(dim_);
#pragma omp for schedule(static)
        for (std::int64_t ps = 0; ps < static_cast<std::int64_t>(n); ++ps) {
            const auto p = static_cast<std::size_t>(ps);
            domain_.to_unit(xs.subspan(p * dim_, dim_), u);
            interpolate_unit(u, out.subspan(p * num_outputs_, num_outputs_));
        }
    }
}

std::vector<double> HierarchicalGrid::integrate() const {
    std::vector<double> total(num_outputs_, 0.0);
    for (std::size_t p = 0; p < size(); ++p) {
        const double w = basis_integral(p);
        for (std::size_t r = 0; r < num_outputs_; ++r) total[r] += w * surpluses_[p * num_outputs_ + r];
    }
    const double vol = domain_.volume();
    for (auto& v : total) v *= vol;
    return total;
}

// ---------------------------------------------------------------------------
// Refinement

std::vector<double> HierarchicalGrid::default_refinement_scale() const {
    std::vector<double> scale(num_outputs_, 0.0);
    for (std::size_t p = 0; p < size(); ++p) {
        for (std::size_t r = 0; r < num_outputs_; ++r) {
            const double v = values_[p * num_outputs_ + r];
            if (!std::isnan(v)) scale[r] = std::max(scale[r], std::abs(v));
        }
    }
    for (auto& s : scale) {
        if (s == 0.0) s = 1.0;
    }
    return scale;
}

std::size_t HierarchicalGrid::refine(double threshold, std::span<const double> scale, int level_limit) {
    if (threshold < 0.0) throw PreconditionError("refine: threshold must be >= 0");
    std::vector<double> sc;
    if (scale.empty()) {
        sc = default_refinement_scale();
    } else {
        if (scale.size() != num_outputs_) throw PreconditionError("refine: scale width");
        sc.assign(scale.begin(), scale.end());
    }
    level_limit = std::min(level_limit, kMaxLevel);

    const std::size_t n0 = size();
    std::vector<std::size_t> marked;
    for (std::size_t p = 0; p < n0; ++p) {
        double g = 0.0;
        for (std::size_t r = 0; r < num_outputs_; ++r) {
            g = std::max(g, std::abs(surpluses_[p * num_outputs_ + r]) / sc[r]);
        }
        if (g > threshold) marked.push_back(p);
    }
    for (std::size_t p : marked) {
        for (std::size_t j = 0; j < dim_; ++j) {
            for (auto c : children_1d(ids_[p * dim_ + j])) {
                if (detail::level_of(c) > level_limit) continue;
                std::vector<std::uint16_t> k(key(p).begin(), key(p).end());
                k[j] = c;
                insert_key(std::move(k));
            }
        }
    }
    return size() - n0;
}

bool HierarchicalGrid::is_ancestor_closed() const {
    std::vector<std::uint16_t> k(dim_);
    for (std::size_t p = 0; p < size(); ++p) {
        for (std::size_t j = 0; j < dim_; ++j) {
            if (ids_[p * dim_ + j] == 0) continue;
            std::copy(key(p).begin(), key(p).end(), k.begin());
            k[j] = parent_1d(k[j]);
            if (!find_key(k)) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json HierarchicalGrid::to_json() const {
    nlohmann::json nodes = nlohmann::json::array();
    nlohmann::json surpl = nlohmann::json::array();
    nlohmann::json vals = nlohmann::json::array();
    for (std::size_t p = 0; p < size(); ++p) {
        const NodeId id = node(p);
        nodes.push_back({id.level, id.index});
        surpl.push_back(std::vector<double>(surpluses(p).begin(), surpluses(p).end()));
        nlohmann::json row = nlohmann::json::array();
        for (double v : values(p)) {
            if (std::isnan(v)) {
                row.push_back(nullptr);
            } else {
                row.push_back(v);
            }
        }
        vals.push_back(std::move(row));
    }
    return {{"dim", dim_},
            {"num_outputs", num_outputs_},
            {"max_level", max_level_},
            {"domain", {{"lower", domain_.lower()}, {"upper", domain_.upper()}}},
            {"nodes", std::move(nodes)},
            {"surpluses", std::move(surpl)},
            {"values", std::move(vals)}};
}

HierarchicalGrid HierarchicalGrid::from_json(const nlohmann::json& j) {
    const auto dim = j.at("dim").get<std::size_t>();
    const auto m = j.at("num_outputs").get<std::size_t>();
    Domain dom(j.at("domain").at("lower").get<std::vector<double>>(),
               j.at("domain").at("upper").get<std::vector<double>>());
    HierarchicalGrid g(dim, m, std::move(dom));
    const auto& nodes = j.at("nodes");
    const auto& surpl = j.at("surpluses");
    if (surpl.size() != nodes.size()) throw PreconditionError("grid json: surpluses/nodes length mismatch");
    g.rehash(2 * nodes.size() + 2);
    for (std::size_t p = 0; p < nodes.size(); ++p) {
        NodeId id{nodes[p].at(0).get<std::vector<int>>(), nodes[p].at(1).get<std::vector<int>>()};
        const std::size_t q = g.insert(id);
        if (q != p) throw PreconditionError("grid json: nodes not stored in ancestor-first order");
        const auto a = surpl[p].get<std::vector<double>>();
        if (a.size() != m) throw PreconditionError("grid json: surplus width");
        std::copy(a.begin(), a.end(), g.surpluses_.begin() + static_cast<std::ptrdiff_t>(p * m));
        if (j.contains("values")) {
            const auto& row = j["values"].at(p);
            for (std::size_t r = 0; r < m; ++r) {
                g.values_[p * m + r] = row.at(r).is_null() ? kNaN : row.at(r).get<double>();
            }
        }
    }
    if (j.contains("max_level")) g.max_level_ = j["max_level"].get<int>();
    return g;
}

}  // namespace sgdyn
