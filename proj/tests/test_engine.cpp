#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "abc/engine.hpp"
#include "support.hpp"

#include <cmath>
#include <complex>
#include <numbers>

using namespace abc;

namespace {

std::shared_ptr<const RotationSchedule> shared(RotationSchedule s) {
    return std::make_shared<const RotationSchedule>(std::move(s));
}

}  // namespace

TEST_CASE("schedule recurrence") {
    RotationSchedule s = RotationSchedule::start(1, 2, 3).extended(1, 1, 5);
    CHECK(s.stage(2).p == 3);
    CHECK(s.stage(2).q == 4);
    CHECK(s.alpha(2) == Rational(3, 4));
    CHECK_FALSE(s.growth_10n2(1));  // 20 > 4

    RotationSchedule t = extend_schedule(RotationSchedule::start(1, 2, 3), 2, 25, 5);
    CHECK(t.stage(2).q == 200);
    CHECK(t.stage(2).p == 101);
    CHECK(t.growth_10n2(1));  // 200 > 20
}

TEST_CASE("schedule property: every generated pair is coprime") {
    testing::Gen g(41);
    for (int trial = 0; trial < 50; ++trial) {
        std::int64_t q1 = g.integer(2, 9);
        std::int64_t p1 = g.integer(1, q1 - 1);
        if (gcd(BigInt(p1), BigInt(q1)) != 1) continue;
        RotationSchedule s = RotationSchedule::start(p1, q1, q1 + 1);
        for (int n = 0; n < 3; ++n) s = s.extended(g.integer(1, 5), g.integer(1, 5), 1);
        for (int n = 1; n <= s.size(); ++n) CHECK(gcd(s.stage(n).p, s.stage(n).q) == 1);
    }
}

TEST_CASE("stage constants") {
    auto sa = shared(default_schedule(Variant::A));
    StageBundle a1 = build_stage(Variant::A, sa, {}, 1);
    CHECK(a1.eps.e1 == doctest::Approx(1.0 / 6));
    CHECK(a1.eps.e2 == doctest::Approx(1.0 / 48));
    CHECK(a1.eps.e3 == doctest::Approx(1.0 / 12));

    StageBundle c1 = build_stage(Variant::C, shared(default_schedule(Variant::C)), {}, 1);
    CHECK(c1.delta == doctest::Approx(std::exp(-3.0)).epsilon(1e-14));
    CHECK(c1.delta == doctest::Approx(0.0498).epsilon(1e-3));

    testing::Gen g(42);
    for (int i = 0; i < 100; ++i) {
        TorusPoint p = g.point();
        CHECK(torus_distance(eval(a1.H, p), eval(a1.h, p)) == 0.0);
    }
}

TEST_CASE("C/D/E stages need s > q") {
    auto s = shared(RotationSchedule::start(1, 2, 2).extended(2, 3, 40));
    CHECK_THROWS(build_stage(Variant::C, s, {}, 1));
    CHECK_NOTHROW(build_stage(Variant::A, s, {}, 1));
}

TEST_CASE("base phases of a pure rotation") {
    // alpha = 1/4 with H = identity: iterates (0,0), (1/4,0), (1/2,0), (3/4,0).
    for (std::int64_t i = 0; i < 4; ++i) CHECK(phase_numerator(i, 1, 4) == i);
    CHECK(phase_numerator(4, 1, 4) == 0);

    // Full-period character sum over i p / q vanishes for coprime p, q.
    for (auto [p, q] : {std::pair<std::int64_t, std::int64_t>{101, 200}, {3, 4}, {1729, 9216}}) {
        std::complex<double> sum = 0;
        for (std::int64_t i = 0; i < q; ++i)
            sum += std::polar(1.0, 2 * std::numbers::pi * double(phase_numerator(i, p, q)) / double(q));
        CHECK(std::abs(sum) / double(q) < 1e-12);
    }
}

TEST_CASE("T_n has period q_{n+1}") {
    auto sa = shared(default_schedule(Variant::A));
    StageBundle a1 = build_stage(Variant::A, sa, {}, 1);
    CHECK(torus_distance(eval(a1.H, {0, 0}), {0, 0}) == 0.0);
    std::vector<TorusPoint> o = orbit(a1, {0.0, 0.0}, a1.q_next + 1);
    REQUIRE(o.size() == static_cast<std::size_t>(a1.q_next + 1));
    CHECK(torus_distance(o.back(), {0.0, 0.0}) < 1e-12);

    testing::Gen g(43);
    for (Variant v : {Variant::A, Variant::C}) {
        StageBundle st = build_stage(v, shared(default_schedule(v)), {}, 1);
        for (int i = 0; i < 20; ++i) {
            TorusPoint x = g.point();
            std::vector<TorusPoint> orb = orbit(st, x, st.q_next + 1);
            CHECK(torus_distance(orb.front(), x) < 1e-9);
            CHECK(torus_distance(orb.back(), x) < 1e-9);
        }
    }
}

TEST_CASE("mixing sequence") {
    MixingSequence toy = mixing_sequence(1, 1, 2, 1);
    CHECK(toy.m == 1);
    CHECK(toy.a == Rational(0));

    // Exhaustive rational oracle: the least m with |m alpha - 1/(2q)| mod 1/q at most 1/Q.
    auto oracle = [](std::int64_t q, std::int64_t p, std::int64_t Q) {
        for (std::int64_t m = 1; m <= Q; ++m) {
            Rational w = (Rational(m) * Rational(p, Q) - Rational(1, 2 * q)) * Rational(q);
            Rational f = w - Rational(w.floor());
            if (f > Rational(1, 2)) f = f - Rational(1);
            if (abs(f / Rational(q)) <= Rational(1, Q)) return m;
        }
        return std::int64_t(-1);
    };
    MixingSequence ms = mixing_sequence(2, 101, 200, 1);
    CHECK(ms.m == oracle(2, 101, 200));
    CHECK(ms.bound_ok);
    CHECK(abs(ms.a) <= Rational(1, 200));

    testing::Gen g(44);
    for (int trial = 0; trial < 30; ++trial) {
        std::int64_t q = g.integer(1, 6), p = g.integer(0, q - 1);
        std::int64_t k = g.integer(1, 4), l = g.integer(1, 6);
        if (gcd(BigInt(p), BigInt(q)) != 1 && q > 1) continue;
        std::int64_t Q = k * l * q * q, P = k * l * q * p + 1;
        MixingSequence r = mixing_sequence(q, P, Q, 1);
        CHECK(r.m == oracle(q, P, Q));
        CHECK(r.bound_ok);
    }
}

TEST_CASE("growth report") {
    auto sa = shared(RotationSchedule::start(1, 2, 3).extended(1, 1, 5));
    auto stages = build_stages(Variant::A, sa, {}, 1);
    GrowthReport rep = check_growth_conditions(stages, 1, 500);
    bool seen = false;
    for (const auto& c : rep.checks)
        if (c.name == "growth_10n2") {
            seen = true;
            CHECK_FALSE(c.satisfied);
            CHECK(c.lhs == 4.0);
            CHECK(c.rhs == 20.0);
        }
    CHECK(seen);
}

TEST_CASE("r2_point starts away from the shift") {
    TorusPoint p = r2_point(0);
    CHECK(torus_distance(p, {0.5, 0.5}) > 1e-3);
    for (std::int64_t i = 0; i < 100; ++i) {
        TorusPoint s = r2_point(i);
        CHECK(s.x >= 0.0);
        CHECK(s.x < 1.0);
        CHECK(s.y >= 0.0);
        CHECK(s.y < 1.0);
    }
}

TEST_CASE("catalog areas and disjointness") {
    testing::Gen g(45);
    for (Variant v : {Variant::A, Variant::C, Variant::D, Variant::E}) {
        auto stages = build_stages(v, shared(default_schedule(v)), {}, 2);
        for (const StageBundle& st : stages)
            for (const RegionFamily& f : st.catalog.families) {
                CAPTURE(std::string(to_string(v)));
                CAPTURE(st.n);
                CAPTURE(f.name);
                if (f.expected_area > 0.0) CHECK(f.area() == doctest::Approx(f.expected_area).epsilon(1e-9));
                if (!f.disjoint) continue;
                for (int i = 0; i < 300; ++i) {
                    TorusPoint p{g.unit() / double(f.replicate), g.unit()};
                    int hits = 0;
                    for (const Rect& r : f.rects) hits += r.contains(p) ? 1 : 0;
                    CHECK(hits <= 1);
                }
            }
    }
}

TEST_CASE("round trips: every factor within tau_map") {
    // The chain H_3 is not checked end to end: ||Dh_3^-1|| amplifies the H_2 error past 1e-8.
    testing::Gen g(46);
    for (Variant v : {Variant::A, Variant::C, Variant::D, Variant::E}) {
        auto stages = build_stages(v, shared(default_schedule(v)), {}, 3);
        for (const StageBundle& st : stages) {
            double h_err = 0.0, chain = 0.0, prefix = 0.0;
            for (int i = 0; i < 1000; ++i) {
                TorusPoint p = g.point();
                TorusPoint hp = eval(st.h, p);
                h_err = std::max(h_err, torus_distance(st.h.inverse_eval(hp), p));
                if (st.n <= 2) chain = std::max(chain, torus_distance(eval(st.H_inv, eval(st.H, p)), p));
                if (st.n > 1) {
                    const StageBundle& prev = stages[static_cast<std::size_t>(st.n - 2)];
                    prefix = std::max(prefix, torus_distance(eval(prev.H_inv, eval(st.H, p)), hp));
                }
            }
            CAPTURE(std::string(to_string(v)));
            CAPTURE(st.n);
            CHECK(h_err < 1e-8);
            CHECK(chain < 1e-8);
            CHECK(prefix < 1e-8);
        }
    }
}

TEST_CASE("h_n preserves area and commutes with S_{1/q_n} at every stage") {
    testing::Gen g(47);
    for (Variant v : {Variant::A, Variant::C, Variant::D, Variant::E}) {
        auto stages = build_stages(v, shared(default_schedule(v)), {}, 3);
        for (const StageBundle& st : stages) {
            TorusMap S = translation(Rational(1, st.q), Rational(0));
            double det = 0.0, comm = 0.0;
            for (int i = 0; i < 300; ++i) {
                TorusPoint p = g.point();
                det = std::max(det, std::abs(st.h.jacobian_det(p) - 1.0));
                comm = std::max(comm, torus_distance(eval(st.h, eval(S, p)), eval(S, eval(st.h, p))));
            }
            CAPTURE(std::string(to_string(v)));
            CAPTURE(st.n);
            CHECK(det < 1e-6);
            CHECK(comm < 1e-8);
        }
    }
}
