#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <set>

#include "sgdyn/errors.hpp"
#include "sgdyn/reference.hpp"
#include "sgdyn/rng.hpp"
#include "sgdyn/sparse_grid.hpp"

using namespace sgdyn;

namespace {

// Brute-force count: enumerate level multi-indices with |l|_1 <= depth and
// multiply the per-level node counts (1, 2, 2, 4, 8, ...).
std::uint64_t brute_force_count(int d, int depth) {
    std::function<std::uint64_t(int, int)> rec = [&](int dims_left, int budget) -> std::uint64_t {
        if (dims_left == 0) return 1;
        std::uint64_t total = 0;
        for (int l = 0; l <= budget; ++l) {
            const std::uint64_t delta = l == 0 ? 1 : (l == 1 ? 2 : (std::uint64_t{1} << (l - 1)));
            total += delta * rec(dims_left - 1, budget - l);
        }
        return total;
    };
    return rec(d, depth);
}

HierarchicalGrid fitted(std::size_t d, int depth, const Domain& dom,
                        const std::function<double(const std::vector<double>&)>& f) {
    auto g = HierarchicalGrid::make_regular(d, depth, 1, dom);
    std::vector<double> v(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) v[p] = f(g.coordinates(p));
    g.hierarchize(v);
    return g;
}

double eval1(const HierarchicalGrid& g, const std::vector<double>& x) { return g.interpolate(x)[0]; }

}  // namespace

TEST_CASE("basis values") {
    CHECK(basis_value(3, 3, 3.0 / 8.0) == doctest::Approx(1.0));
    CHECK(basis_value(2, 1, 0.5) == 0.0);
    CHECK(basis_value(1, 0, 0.25) == doctest::Approx(0.5));
    CHECK(basis_value(1, 1, 0.75) == doctest::Approx(0.5));
    CHECK(basis_value(0, 0, 0.3) == 1.0);
    CHECK(basis_value(2, 3, 0.5) == 0.0);
    CHECK(basis_value(2, 3, 0.625) == doctest::Approx(0.5));
    CHECK_THROWS_AS(basis_value(2, 2, 0.5), PreconditionError);
    CHECK_THROWS_AS(basis_value(1, 2, 0.5), PreconditionError);
    CHECK_THROWS_AS(basis_value(0, 1, 0.5), PreconditionError);
}

TEST_CASE("1D coordinates and validity") {
    CHECK(coordinate_1d(0, 0) == 0.5);
    CHECK(coordinate_1d(1, 0) == 0.0);
    CHECK(coordinate_1d(1, 1) == 1.0);
    CHECK(coordinate_1d(3, 5) == 0.625);
    CHECK(valid_node_1d(4, 15));
    CHECK_FALSE(valid_node_1d(4, 17));
    CHECK(level_node_count(0) == 1);
    CHECK(level_node_count(1) == 2);
    CHECK(level_node_count(2) == 2);
    CHECK(level_node_count(5) == 16);
}

TEST_CASE("regular grid counts match published values") {
    CHECK(HierarchicalGrid::make_regular(4, 3, 1, Domain::unit(4)).size() == 137);
    CHECK(HierarchicalGrid::make_regular(4, 5, 1, Domain::unit(4)).size() == 1105);
    CHECK(HierarchicalGrid::make_regular(4, 7, 1, Domain::unit(4)).size() == 7537);
    CHECK(HierarchicalGrid::make_regular(8, 3, 1, Domain::unit(8)).size() == 849);
    CHECK(HierarchicalGrid::make_regular(16, 3, 1, Domain::unit(16)).size() == 6049);
    const auto g = HierarchicalGrid::make_regular(1, 0, 1, Domain::unit(1));
    REQUIRE(g.size() == 1);
    CHECK(g.coordinates(0)[0] == 0.5);
}

TEST_CASE("regular grid counts match brute-force enumeration") {
    for (int d = 1; d <= 6; ++d) {
        for (int l = 0; l <= 4; ++l) {
            CAPTURE(d);
            CAPTURE(l);
            const auto g = HierarchicalGrid::make_regular(static_cast<std::size_t>(d), l, 1,
                                                          Domain::unit(static_cast<std::size_t>(d)));
            CHECK(g.size() == brute_force_count(d, l));
            CHECK(regular_point_count(static_cast<std::size_t>(d), l) == brute_force_count(d, l));
        }
    }
    CHECK(regular_point_count(20, 5) == 1018129);
}

TEST_CASE("grid nodes are distinct and nested across depths") {
    const auto small = HierarchicalGrid::make_regular(3, 3, 1, Domain::unit(3));
    const auto big = HierarchicalGrid::make_regular(3, 4, 1, Domain::unit(3));
    std::set<std::vector<double>> coords;
    for (std::size_t p = 0; p < big.size(); ++p) coords.insert(big.coordinates(p));
    CHECK(coords.size() == big.size());
    for (std::size_t p = 0; p < small.size(); ++p) CHECK(big.find(small.node(p)).has_value());
    CHECK(big.is_ancestor_closed());
}

TEST_CASE("hierarchize: constant and linear examples") {
    auto c = fitted(3, 3, Domain::unit(3), [](const auto&) { return 2.5; });
    CHECK(c.surpluses(0)[0] == doctest::Approx(2.5));
    for (std::size_t p = 1; p < c.size(); ++p) CHECK(std::abs(c.surpluses(p)[0]) < 1e-14);

    // f(x) = x on one level: alpha(root) = 0.5, boundaries -0.5 and +0.5.
    auto g = fitted(1, 1, Domain::unit(1), [](const auto& x) { return x[0]; });
    for (std::size_t p = 0; p < g.size(); ++p) {
        const double x = g.coordinates(p)[0];
        const double expected = x == 0.5 ? 0.5 : (x == 0.0 ? -0.5 : 0.5);
        CHECK(g.surpluses(p)[0] == doctest::Approx(expected));
    }
}

TEST_CASE("fast kernels agree with the serial reference") {
    const Domain dom({-1.0, 0.0, 2.0}, {1.0, 1.0, 3.0});
    auto g = HierarchicalGrid::make_regular(3, 5, 2, dom);
    std::vector<double> v(g.size() * 2);
    for (std::size_t p = 0; p < g.size(); ++p) {
        const auto x = g.coordinates(p);
        v[2 * p] = std::exp(x[0] * x[1]) + x[2];
        v[2 * p + 1] = std::sin(3.0 * x[0]) * x[2];
    }
    g.set_all_values(v);
    const auto ref = reference::hierarchize(g);
    g.hierarchize();
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(g.all_surpluses()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    for (int s = 0; s < 200; ++s) {
        const std::vector<double> x{2.0 * rng::uniform(3, s, 0) - 1.0, rng::uniform(3, s, 1), 2.0 + rng::uniform(3, s, 2)};
        const auto fast = g.interpolate(x);
        const auto slow = reference::interpolate(g, x);
        CHECK(std::abs(fast[0] - slow[0]) < 1e-12);
        CHECK(std::abs(fast[1] - slow[1]) < 1e-12);
    }
}

TEST_CASE("interpolation is exact at nodes") {
    const Domain dom({0.0, -2.0}, {3.0, 5.0});
    auto f = [](const std::vector<double>& x) { return std::cos(x[0]) * std::exp(0.1 * x[1]) + 10.0; };
    const auto g = fitted(2, 6, dom, f);
    for (std::size_t p = 0; p < g.size(); ++p) {
        const auto x = g.coordinates(p);
        const double v = f(x);
        CHECK(std::abs(eval1(g, x) - v) <= 1e-12 * (1.0 + std::abs(v)));
    }
}

TEST_CASE("interpolation reproduces coordinate-wise linear functions") {
    const Domain dom({0.0, 1.0}, {2.0, 4.0});
    auto f = [](const std::vector<double>& x) { return 1.5 - 2.0 * x[0] + 0.25 * x[1]; };
    for (int depth : {1, 2}) {
        const auto g = fitted(2, depth, dom, f);
        for (int s = 0; s < 100; ++s) {
            const std::vector<double> x{2.0 * rng::uniform(9, s, 0), 1.0 + 3.0 * rng::uniform(9, s, 1)};
            CHECK(eval1(g, x) == doctest::Approx(f(x)).epsilon(1e-12));
        }
    }
}

TEST_CASE("1D sine error decreases with depth") {
    double last = 1e9;
    for (int depth = 2; depth <= 6; ++depth) {
        const auto g = fitted(1, depth, Domain::unit(1), [](const auto& x) { return std::sin(x[0]); });
        double err = 0.0;
        for (int i = 0; i <= 1000; ++i) {
            const double x = i / 1000.0;
            err = std::max(err, std::abs(eval1(g, {x}) - std::sin(x)));
        }
        CHECK(err < last);
        last = err;
    }
}

TEST_CASE("out-of-domain evaluation is an error") {
    const auto g = fitted(2, 2, Domain::unit(2), [](const auto& x) { return x[0]; });
    CHECK_THROWS_AS(g.interpolate(std::vector<double>{1.5, 0.5}), OutOfDomainError);
    CHECK_THROWS_AS(g.interpolate(std::vector<double>{0.5, -0.1}), OutOfDomainError);
    CHECK_NOTHROW(g.interpolate(std::vector<double>{1.0, 0.0}));
}

TEST_CASE("hierarchize requires values at every node") {
    auto g = HierarchicalGrid::make_regular(2, 2, 1, Domain::unit(2));
    CHECK(g.has_unset_values());
    CHECK_THROWS_AS(g.hierarchize(), PreconditionError);
}

TEST_CASE("integration examples") {
    CHECK(fitted(3, 2, Domain({0, 0, 0}, {2, 3, 1}), [](const auto&) { return 1.0; }).integrate()[0] ==
          doctest::Approx(6.0));
    CHECK(fitted(1, 1, Domain::unit(1), [](const auto& x) { return x[0]; }).integrate()[0] == doctest::Approx(0.5));
    const double xy = fitted(2, 5, Domain::unit(2), [](const auto& x) { return x[0] * x[1]; }).integrate()[0];
    CHECK(std::abs(xy - 0.25) < 1e-3);
    CHECK(basis_integral_1d(0) == 1.0);
    CHECK(basis_integral_1d(1) == 0.25);
    CHECK(basis_integral_1d(4) == 1.0 / 16.0);
}

TEST_CASE("quadrature agrees with Monte Carlo within three standard errors") {
    const Domain dom({0.0, -1.0, 0.5}, {1.0, 1.0, 2.0});
    const auto g = fitted(3, 4, dom, [](const auto& x) { return std::exp(x[0]) * std::sin(x[1] + x[2]) + x[2] * x[2]; });
    const double vol = dom.volume();
    const std::size_t n = 1000000;
    double sum = 0.0, sum2 = 0.0;
    std::vector<double> u(3), x(3);
    double out = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t j = 0; j < 3; ++j) u[j] = rng::uniform(77, s, j);
        g.interpolate_unit(u, std::span<double>(&out, 1));
        sum += out;
        sum2 += out * out;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    CHECK(std::abs(g.integrate()[0] - vol * mean) <= 3.0 * vol * se);
}

TEST_CASE("refinement examples") {
    SUBCASE("all surpluses below threshold adds nothing") {
        auto g = fitted(2, 3, Domain::unit(2), [](const auto& x) { return 0.01 * x[0]; });
        const auto before = g.size();
        CHECK(g.refine(1e6, std::vector<double>{1.0}) == 0);
        CHECK(g.size() == before);
    }
    SUBCASE("root-only 1D grid gains both boundaries") {
        auto g = HierarchicalGrid::make_regular(1, 0, 1, Domain::unit(1));
        g.hierarchize(std::vector<double>{1.0});
        CHECK(g.refine(0.5, std::vector<double>{1.0}) == 2);
        std::set<double> xs;
        for (std::size_t p = 0; p < g.size(); ++p) xs.insert(g.coordinates(p)[0]);
        CHECK(xs == std::set<double>{0.0, 0.5, 1.0});
        CHECK(g.has_unset_values());
    }
    SUBCASE("1D children rule") {
        auto g = HierarchicalGrid(1, 1, Domain::unit(1));
        g.insert({{3}, {3}});
        // Ancestors of (3,3): (2,1), (1,0), (0,0).
        CHECK(g.size() == 4);
        CHECK(g.is_ancestor_closed());
    }
}

TEST_CASE("refinement concentrates near a kink and keeps closure") {
    auto f = [](double x) { return std::abs(x - 0.4); };
    auto g = HierarchicalGrid::make_regular(1, 2, 1, Domain::unit(1));
    std::vector<double> v(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) v[p] = f(g.coordinates(p)[0]);
    g.hierarchize(v);
    for (int sweep = 0; sweep < 10; ++sweep) {
        const std::size_t before = g.size();
        if (g.refine(1e-3) == 0) break;
        CHECK(g.size() > before);
        CHECK(g.is_ancestor_closed());
        std::vector<double> all(g.size());
        for (std::size_t p = 0; p < g.size(); ++p) all[p] = f(g.coordinates(p)[0]);
        g.hierarchize(all);
    }
    std::size_t near = 0;
    for (std::size_t p = 0; p < g.size(); ++p) {
        const double x = g.coordinates(p)[0];
        near += (x >= 0.3 && x <= 0.5) ? 1 : 0;
    }
    CHECK(static_cast<double>(near) > 0.5 * static_cast<double>(g.size()));
}

TEST_CASE("refined multi-dimensional grids stay exact at nodes") {
    const Domain dom = Domain::unit(2);
    auto f = [](const std::vector<double>& x) { return std::exp(-20.0 * ((x[0] - 0.3) * (x[0] - 0.3) + (x[1] - 0.6) * (x[1] - 0.6))); };
    auto g = fitted(2, 3, dom, f);
    for (int sweep = 0; sweep < 3; ++sweep) {
        g.refine(1e-2);
        std::vector<double> all(g.size());
        for (std::size_t p = 0; p < g.size(); ++p) all[p] = f(g.coordinates(p));
        g.hierarchize(all);
        CHECK(g.is_ancestor_closed());
        for (std::size_t p = 0; p < g.size(); ++p) CHECK(std::abs(eval1(g, g.coordinates(p)) - all[p]) <= 1e-12 * (1.0 + std::abs(all[p])));
    }
}

TEST_CASE("JSON round trip is bit-stable") {
    const Domain dom({-0.16, 0.8}, {0.16, 1.2});
    auto g = fitted(2, 4, dom, [](const auto& x) { return std::exp(x[0]) * std::pow(x[1], 0.36); });
    g.refine(1e-4);
    std::vector<double> all(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) {
        const auto x = g.coordinates(p);
        all[p] = std::exp(x[0]) * std::pow(x[1], 0.36);
    }
    g.hierarchize(all);
    const auto text = g.to_json().dump();
    const auto h = HierarchicalGrid::from_json(nlohmann::json::parse(text));
    REQUIRE(h.size() == g.size());
    CHECK(h.all_surpluses() == g.all_surpluses());
    CHECK(h.to_json().dump() == text);
    for (int s = 0; s < 50; ++s) {
        const std::vector<double> x{-0.16 + 0.32 * rng::uniform(5, s, 0), 0.8 + 0.4 * rng::uniform(5, s, 1)};
        CHECK(eval1(h, x) == eval1(g, x));
    }
}

TEST_CASE("batch interpolation matches point-wise interpolation") {
    const auto g = fitted(4, 4, Domain::unit(4), [](const auto& x) { return x[0] * x[1] + std::sin(x[2] - x[3]); });
    std::vector<double> xs(400 * 4);
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = rng::uniform(11, i, 0);
    std::vector<double> out(400);
    g.interpolate_batch(xs, out);
    for (std::size_t s = 0; s < 400; ++s) {
        CHECK(out[s] == eval1(g, {xs[4 * s], xs[4 * s + 1], xs[4 * s + 2], xs[4 * s + 3]}));
    }
}
