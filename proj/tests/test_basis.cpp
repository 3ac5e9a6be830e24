#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "quantcurve/multi_index.hpp"
#include "quantcurve/rng.hpp"

using quantcurve::BasisSpec;
using quantcurve::MultiIndex;

static long choose(int n, int k) {
    long c = 1;
    for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
}

TEST_CASE("basis size is C(d+p, d)") {
    for (int d = 1; d <= 4; ++d)
        for (int p = 0; p <= 5; ++p) {
            const BasisSpec b(d, p);
            CHECK(b.size() == static_cast<std::size_t>(choose(d + p, d)));
        }
}

TEST_CASE("univariate ordering is by degree") {
    const BasisSpec b(1, 3);
    REQUIRE(b.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(b.index(k).components == std::vector<int>{static_cast<int>(k)});
        CHECK(b.index(k).degree == static_cast<int>(k));
    }
}

TEST_CASE("d=2 p=2 graded lexicographic order") {
    const BasisSpec b(2, 2);
    const std::vector<std::vector<int>> want = {{0, 0}, {0, 1}, {1, 0},
                                                {0, 2}, {1, 1}, {2, 0}};
    REQUIRE(b.size() == want.size());
    for (std::size_t k = 0; k < want.size(); ++k) CHECK(b.index(k).components == want[k]);
}

TEST_CASE("d=3 p=2 graded lexicographic order") {
    const BasisSpec b(3, 2);
    const std::vector<std::vector<int>> want = {
        {0, 0, 0}, {0, 0, 1}, {0, 1, 0}, {1, 0, 0}, {0, 0, 2},
        {0, 1, 1}, {0, 2, 0}, {1, 0, 1}, {1, 1, 0}, {2, 0, 0}};
    REQUIRE(b.size() == want.size());
    for (std::size_t k = 0; k < want.size(); ++k) CHECK(b.index(k).components == want[k]);
}

TEST_CASE("first index is the constant term") {
    for (int d = 1; d <= 3; ++d) {
        const BasisSpec b(d, 3);
        CHECK(b.index(0).degree == 0);
        const auto u = b.eval(std::vector<double>(static_cast<std::size_t>(d), 0.0));
        CHECK(u[0] == 1.0);
        for (std::size_t k = 1; k < u.size(); ++k) CHECK(u[k] == 0.0);
    }
}

TEST_CASE("eval matches z^v / v! componentwise") {
    quantcurve::CounterRng rng(7, 0);
    const BasisSpec b(3, 4);
    for (int rep = 0; rep < 20; ++rep) {
        const std::vector<double> z = {rng.uniform(-2, 2), rng.uniform(-2, 2),
                                       rng.uniform(-2, 2)};
        const auto u = b.eval(z);
        for (std::size_t k = 0; k < b.size(); ++k) {
            double want = 1.0;
            for (int j = 0; j < 3; ++j)
                want *= std::pow(z[static_cast<std::size_t>(j)],
                                 b.index(k).components[static_cast<std::size_t>(j)]);
            want /= quantcurve::multi_factorial(b.index(k));
            CHECK(u[k] == Catch::Approx(want).margin(1e-14));
        }
    }
}

TEST_CASE("scaling identity U(x'-x) = H(h) U((x'-x)/h)") {
    quantcurve::CounterRng rng(11, 0);
    const BasisSpec b(2, 3);
    for (int rep = 0; rep < 10; ++rep) {
        const double h = rng.uniform(0.1, 2.0);
        const std::vector<double> dx = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const auto u_nat = b.eval(dx);
        const auto u_std = b.eval({dx[0] / h, dx[1] / h});
        const auto s = b.scaling(h);
        for (std::size_t k = 0; k < b.size(); ++k)
            CHECK(u_nat[k] == Catch::Approx(s[k] * u_std[k]).margin(1e-13));
    }
}

TEST_CASE("position round trip and bounds") {
    const BasisSpec b(2, 3);
    for (std::size_t k = 0; k < b.size(); ++k) CHECK(b.position(b.index(k)) == k);
    CHECK_THROWS_AS(b.position(MultiIndex({4, 0})), std::domain_error);
    CHECK_THROWS_AS(b.position(MultiIndex({0, 0, 0})), std::invalid_argument);
}

TEST_CASE("invalid constructions throw") {
    CHECK_THROWS_AS(BasisSpec(0, 1), std::invalid_argument);
    CHECK_THROWS_AS(BasisSpec(1, -1), std::invalid_argument);
    CHECK_THROWS_AS(BasisSpec(1, 11), std::invalid_argument);
    CHECK_THROWS_AS(MultiIndex({1, -2}), std::invalid_argument);
}

TEST_CASE("factorials") {
    CHECK(quantcurve::factorial(0) == 1);
    CHECK(quantcurve::factorial(5) == 120);
    CHECK(quantcurve::multi_factorial(MultiIndex({2, 3})) == 12.0);
}
