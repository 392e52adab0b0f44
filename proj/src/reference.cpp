#include "sgdyn/reference.hpp"

#include <algorithm>
#include <numeric>

#include "sgdyn/errors.hpp"

namespace sgdyn::reference {

std::vector<double> hierarchize(const HierarchicalGrid& grid) {
    if (grid.has_unset_values()) throw PreconditionError("reference::hierarchize: unset values");
    const std::size_t n = grid.size();
    const std::size_t d = grid.dim();
    const std::size_t m = grid.num_outputs();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return grid.level_sum(a) < grid.level_sum(b);
    });

    std::vector<double> alpha(n * m, 0.0);
    std::vector<double> u(d);
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t p = order[s];
        grid.unit_coordinates(p, u);
        for (std::size_t r = 0; r < m; ++r) alpha[p * m + r] = grid.values(p)[r];
        for (std::size_t t = 0; t < s; ++t) {
            const std::size_t q = order[t];
            const double phi = grid.basis_product(q, u);
            if (phi == 0.0) continue;
            for (std::size_t r = 0; r < m; ++r) alpha[p * m + r] -= phi * alpha[q * m + r];
        }
    }
    return alpha;
}

std::vector<double> interpolate(const HierarchicalGrid& grid, std::span<const double> x) {
    std::vector<double> u(grid.dim());
    grid.domain().to_unit(x, u);
    std::vector<double> out(grid.num_outputs(), 0.0);
    for (std::size_t p = 0; p < grid.size(); ++p) {
        const double phi = grid.basis_product(p, u);
        if (phi == 0.0) continue;
        const auto a = grid.surpluses(p);
        for (std::size_t r = 0; r < out.size(); ++r) out[r] += phi * a[r];
    }
    return out;
}

void interpolate_batch(const HierarchicalGrid& grid, std::span<const double> xs, std::span<double> out) {
    const std::size_t d = grid.dim();
    const std::size_t m = grid.num_outputs();
    for (std::size_t p = 0; p < xs.size() / d; ++p) {
        const auto v = interpolate(grid, xs.subspan(p * d, d));
        std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(p * m));
    }
}

}  // namespace sgdyn::reference
