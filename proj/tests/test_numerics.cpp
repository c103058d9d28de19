#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "abc/numerics.hpp"
#include "support.hpp"

#include <cmath>

using namespace abc;

TEST_CASE("rat_mod1 reduces into [0,1)") {
    CHECK(rat_mod1(Rational(7, 4)) == Rational(3, 4));
    CHECK(rat_mod1(Rational(-1, 3)) == Rational(2, 3));
    CHECK(rat_mod1(Rational(5, 5)) == Rational(0));
    CHECK(rat_mod1(Rational(5, 5)).den() == 1);
}

TEST_CASE("Rational keeps lowest terms and a positive denominator") {
    Rational r(BigInt(6), BigInt(-4));
    CHECK(r.num() == -3);
    CHECK(r.den() == 2);
    CHECK(Rational::parse("10/4") == Rational(5, 2));
    CHECK(Rational::parse("-7") == Rational(-7));
    CHECK(Rational::from_double(0.375) == Rational(3, 8));
    CHECK_THROWS(Rational(1, 0));
}

TEST_CASE("rat_mod1 property: result in [0,1) and differs by an integer") {
    testing::Gen g(11);
    for (int i = 0; i < 500; ++i) {
        Rational r(g.integer(-1000000, 1000000), g.integer(1, 997));
        Rational m = rat_mod1(r);
        CHECK(m >= Rational(0));
        CHECK(m < Rational(1));
        CHECK((r - m).den() == 1);
    }
}

TEST_CASE("locate_cell uses half-open cells") {
    GridSpec g{4, 4};
    CHECK(locate_cell({0.0, 0.0}, g) == std::pair<std::int64_t, std::int64_t>{0, 0});
    CHECK(locate_cell({0.25, 0.5}, g) == std::pair<std::int64_t, std::int64_t>{1, 2});
    CHECK(locate_cell({0.999, 0.001}, g) == std::pair<std::int64_t, std::int64_t>{3, 0});
}

TEST_CASE("locate_cell property: agrees with the floor oracle") {
    testing::Gen g(12);
    for (int i = 0; i < 1000; ++i) {
        GridSpec grid{g.integer(1, 50), g.integer(1, 50)};
        TorusPoint p = g.point();
        auto [ci, cj] = locate_cell(p, grid);
        CHECK(ci == static_cast<std::int64_t>(std::floor(p.x * grid.nx)));
        CHECK(cj == static_cast<std::int64_t>(std::floor(p.y * grid.ny)));
    }
}

TEST_CASE("interval_intersect_length") {
    CHECK(interval_intersect_length({0, 1.0 / 3, Closure::Closed}, {1.0 / 3, 2.0 / 3, Closure::Open}) == 0.0);
    CHECK(interval_intersect_length({0, 0.5, Closure::Closed}, {0.25, 0.75, Closure::Closed}) == 0.25);
    CHECK(interval_intersect_length({0, 1, Closure::Closed}, {0.2, 0.3, Closure::Closed}) ==
          doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("interval_intersect_length property: symmetric and bounded") {
    testing::Gen g(13);
    for (int i = 0; i < 500; ++i) {
        double a = g.unit(), b = g.unit(), c = g.unit(), d = g.unit();
        Interval I{std::min(a, b), std::max(a, b)}, J{std::min(c, d), std::max(c, d)};
        double v = interval_intersect_length(I, J);
        CHECK(v == interval_intersect_length(J, I));
        CHECK(v >= 0.0);
        CHECK(v <= std::min(I.length(), J.length()));
    }
}

TEST_CASE("wrap and torus_distance") {
    CHECK(wrap01(1.25) == 0.25);
    CHECK(wrap01(-0.25) == 0.75);
    CHECK(wrap01(-1e-17) == 0.0);  // 1 - 1e-17 rounds to 1
    CHECK(torus_distance({0.95, 0.5}, {0.05, 0.5}) == doctest::Approx(0.1));
    CHECK(torus_distance({0.3, 0.3}, {0.3, 0.3}) == 0.0);
}

TEST_CASE("scaled_frac property: index and fraction match the exact product") {
    testing::Gen g(14);
    for (int i = 0; i < 500; ++i) {
        double x = g.unit();
        double n = static_cast<double>(g.integer(1, 4000000000LL));
        ScaledFrac f = scaled_frac(x, n);
        Rational exact = Rational::from_double(x) * Rational::from_double(n);
        CHECK(BigInt(f.index) == exact.floor());
        CHECK(std::abs(f.frac - (exact - Rational(exact.floor())).to_double()) < 1e-15);
    }
}
