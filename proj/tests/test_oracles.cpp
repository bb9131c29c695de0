#include "cotflow/oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <vector>

using namespace cotflow::oracles;

TEST_CASE("brute_assignment trivial cases") {
    auto single = brute_assignment({{5.0}});
    REQUIRE(single.perm == std::vector<int>{0});
    REQUIRE(single.cost == 5.0);

    auto two = brute_assignment({{1.0, 2.0}, {2.0, 1.0}});
    REQUIRE(two.perm == std::vector<int>{0, 1});
    REQUIRE(two.cost == 2.0);
}

TEST_CASE("brute_assignment tie-break is lexicographic") {
    // Both permutations cost 3; (0,1) is lexicographically first.
    auto tie = brute_assignment({{1.0, 2.0}, {1.0, 2.0}});
    REQUIRE(tie.perm == std::vector<int>{0, 1});
    REQUIRE(tie.cost == 3.0);
}

TEST_CASE("brute_assignment rejects out-of-range sizes") {
    REQUIRE_THROWS_AS(brute_assignment({}), std::invalid_argument);
    std::vector<std::vector<double>> big(9, std::vector<double>(9, 0.0));
    REQUIRE_THROWS_AS(brute_assignment(big), std::invalid_argument);
}

TEST_CASE("brute_dtw basics") {
    REQUIRE(brute_dtw({{0.0}}, {{0.0}}) == 0.0);
    // Singleton vs 2-point path: the only monotone alignment hits both cells.
    const double d2 = brute_dtw_squared({{0.0}}, {{1.0}, {3.0}});
    REQUIRE(d2 == 1.0 + 9.0);
    std::vector<std::vector<double>> long_a(5, {0.0});
    REQUIRE_THROWS_AS(brute_dtw(long_a, {{0.0}}), std::invalid_argument);
}

TEST_CASE("fd_gradient on simple functions") {
    auto square = [](const std::vector<double>& t) { return t[0] * t[0]; };
    auto g = fd_gradient(square, {3.0});
    REQUIRE(std::abs(g[0] - 6.0) < 1e-6);

    auto constant = [](const std::vector<double>&) { return 4.2; };
    auto gc = fd_gradient(constant, {1.0, -2.0});
    REQUIRE(gc[0] == 0.0);
    REQUIRE(gc[1] == 0.0);
}

TEST_CASE("fd_gradient matches the analytic quadratic gradient") {
    std::mt19937_64 eng(3);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    const int n = 5;
    std::vector<std::vector<double>> a(n, std::vector<double>(n));
    for (auto& row : a)
        for (auto& v : row) v = dist(eng);
    // symmetric quadratic f = theta^T A theta with A symmetric: grad = 2 A theta
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) a[i][j] = a[j][i];
    std::vector<double> theta(n);
    for (auto& v : theta) v = dist(eng);
    auto f = [&](const std::vector<double>& t) {
        double s = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) s += t[i] * a[i][j] * t[j];
        return s;
    };
    auto g = fd_gradient(f, theta);
    for (int i = 0; i < n; ++i) {
        double expect = 0.0;
        for (int j = 0; j < n; ++j) expect += 2.0 * a[i][j] * theta[j];
        REQUIRE(std::abs(g[i] - expect) < 1e-6);
    }
}
