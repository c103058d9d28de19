#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "abc/engine.hpp"
#include "abc/maps.hpp"
#include "support.hpp"

#include <cmath>

using namespace abc;

namespace {

constexpr double kTauMap = 1e-12;

bool near(TorusPoint a, TorusPoint b, double tol = kTauMap) { return torus_distance(a, b) <= tol; }

}  // namespace

TEST_CASE("identity and translations") {
    CHECK(near(eval(identity_map(), {0.3, 0.7}), {0.3, 0.7}));
    TorusPoint p = eval(translation(Rational(1, 4), Rational(0)), {0.9, 0.2});
    CHECK(p.x == doctest::Approx(0.15));
    CHECK(p.y == 0.2);
}

TEST_CASE("shear coefficient and the shear g_n") {
    CHECK(shear_coefficient(1, 2, 0.25) == 1);
    CHECK(shear_coefficient(2, 4, 0.25) == 2);
    TorusPoint p = eval(shear_g(1, 2, 0.25), {0.25, 0.5});
    CHECK(p.x == doctest::Approx(0.75));
    CHECK(p.y == 0.5);
    CHECK(near(eval(shear_g(2, 4, 0.25), {0.0, 0.5}), {0.0, 0.5}));

    testing::Gen g(21);
    TorusMap s = shear_g(3, 24, 0.25);
    for (int i = 0; i < 100; ++i) {
        double x = g.unit();
        CHECK(near(eval(s, {x, 0.0}), {x, 0.0}));
        CHECK(s.jacobian_det(g.point()) == 1.0);
    }
}

TEST_CASE("quarter turn: rigid core, identity margin") {
    TorusMap f = quarter_turn(0.1);
    CHECK(near(eval(f, {0.5, 0.5}), {0.5, 0.5}));
    CHECK(near(eval(f, {0.05, 0.5}), {0.05, 0.5}));
    // clockwise rigid rotation about the centre: (x,y) -> (1/2 + (y-1/2), 1/2 - (x-1/2))
    TorusPoint p = eval(f, {0.2, 0.2});
    CHECK(p.x == doctest::Approx(0.2));
    CHECK(p.y == doctest::Approx(0.8));
    CHECK(jacobian_det(f, {0.3, 0.3}, 1e-6) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("compose and inverse axioms") {
    testing::Gen g(22);
    TorusMap f = assemble_h(2, 24, 2, 0.25, kappa_profile_A(2, 24, 2));
    TorusMap s13 = translation(Rational(1, 3), Rational(0));
    TorusMap s16 = translation(Rational(1, 6), Rational(0));
    TorusMap s12 = translation(Rational(1, 2), Rational(0));
    for (int i = 0; i < 100; ++i) {
        TorusPoint p = g.point();
        CHECK(near(eval(compose(f, identity_map()), p), eval(f, p)));
        CHECK(near(eval(compose(s13, s16), p), eval(s12, p)));
        CHECK(near(eval(compose(f, f.inverse()), p), p, 1e-9));
    }
}

TEST_CASE("block_conjugate: identity inner, identity outside, equivariance") {
    testing::Gen g(23);
    Rect region{0.0, 0.5, 0.0, 1.0};
    AffineChart chart{2.0, 1.0, 0.0, 0.0};
    TorusMap id = block_conjugate(identity_map(), chart, region, Rational(1, 2));
    TorusMap inner = compose(quarter_turn(1.0 / 12).inverse(), quarter_turn(1.0 / 48));
    TorusMap out = block_conjugate(inner, {4.0, 1.0, 0.0, 0.0}, {0.0, 0.25, 0.0, 1.0}, Rational(1, 2));
    TorusMap half = translation(Rational(1, 2), Rational(0));
    for (int i = 0; i < 100; ++i) {
        TorusPoint p = g.point();
        CHECK(near(eval(id, p), p));
        CHECK(near(eval(out, eval(half, p)), eval(half, eval(out, p))));
        TorusPoint outside{0.25 + 0.25 * g.unit(), g.unit()};
        CHECK(near(eval(out, outside), outside));
    }
}

TEST_CASE("phi^w fixes the lines y = t/r") {
    for (int n : {1, 2, 3}) {
        TorusMap w = build_phi_w(n, 24, 2);
        for (int t = 0; t < 2; ++t)
            for (int i = 0; i < 200; ++i) {
                TorusPoint p{i / 200.0, t / 2.0};
                CHECK(near(eval(w, p), p));
            }
    }
}

TEST_CASE("phi^g sends the centre of B into the mirrored strip Y_image") {
    StageBundle st = build_stage(Variant::A, std::make_shared<RotationSchedule>(default_schedule(Variant::A)), {}, 2);
    const Rect& b = st.catalog.at("B").rects.front();
    TorusPoint c{(b.x0 + b.x1) / 2, (b.y0 + b.y1) / 2};
    TorusPoint img = eval(st.phi, c);  // phi^m and phi^w are the identity on B
    CHECK(near(eval(build_phi_g(2, st.q, 2), c), img));
    CHECK(st.catalog.at("Y_image").contains(img));
    CHECK_FALSE(st.catalog.at("Y").contains(img));
}

TEST_CASE("phi^m fixes the line outside its columns") {
    for (int n : {1, 2}) {
        std::int64_t q = 24;
        EpsA e = eps_schedule_A(n, q, 2);
        TorusMap m = build_phi_m(n, q, 2);
        double x = 0.5 / q + e.e2 / q;
        for (int i = 0; i < 100; ++i) CHECK(near(eval(m, {x, i / 100.0}), {x, i / 100.0}));
    }
}

TEST_CASE("P: tent peak, vanishing region, inverse") {
    for (int n : {1, 2, 3}) {
        std::int64_t q = n == 1 ? 2 : 24;
        EpsA e = eps_schedule_A(n, q, 2);
        TorusMap P = build_P(kappa_profile_A(n, q, 2));
        double xp = e.e2 / (2.0 * q);
        TorusPoint peak = eval(P, {xp, 0.0});
        CHECK(torus_distance(peak, {xp, wrap01(1.0 / (n * n))}) < 1e-12);  // a lift of 1 at n = 1 wraps to 0
        for (int i = 0; i < 50; ++i) CHECK(near(eval(P, {0.9 / q, i / 50.0}), {0.9 / q, i / 50.0}));
        testing::Gen g(24 + n);
        for (int i = 0; i < 100; ++i) {
            TorusPoint p = g.point();
            CHECK(near(eval(compose(P, P.inverse()), p), p));
        }
    }
}

TEST_CASE("h_n: fixes the corner, commutes with S_{1/q}, preserves area") {
    testing::Gen g(25);
    for (int n : {1, 2}) {
        std::int64_t q = n == 1 ? 2 : 24;
        TorusMap h = assemble_h(n, q, 2, 0.25, kappa_profile_A(n, q, 2));
        CHECK(near(eval(h, {0.0, 0.0}), {0.0, 0.0}));
        TorusMap S = translation(Rational(1, q), Rational(0));
        double worst = 0.0, det = 0.0;
        for (int i = 0; i < 200; ++i) {
            TorusPoint p = g.point();
            worst = std::max(worst, torus_distance(eval(h, eval(S, p)), eval(S, eval(h, p))));
        }
        for (int i = 0; i < 500; ++i) det = std::max(det, std::abs(h.jacobian_det(g.point()) - 1.0));
        CHECK(worst < 1e-9);
        CHECK(det < 1e-6);
    }
}

TEST_CASE("jacobian_det on simple maps") {
    testing::Gen g(26);
    for (int i = 0; i < 50; ++i) {
        TorusPoint p{0.1 + 0.8 * g.unit(), 0.1 + 0.8 * g.unit()};
        CHECK(jacobian_det(identity_map(), p, 1e-6) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(jacobian_det(shear_g(1, 2, 0.25), p, 1e-6) == doctest::Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("epsilon ladder of variant A") {
    EpsA e = eps_schedule_A(1, 2, 2);
    CHECK(e.e1 == doctest::Approx(1.0 / 6));
    CHECK(e.e2 == doctest::Approx(1.0 / 48));
    CHECK(e.e3 == doctest::Approx(1.0 / 12));
    CHECK(e.e4_clamped);
    CHECK_FALSE(e.e1_clamped);
}

TEST_CASE("map JSON round trip") {
    testing::Gen g(27);
    TorusMap h = assemble_h(2, 24, 2, 0.25, kappa_profile_A(2, 24, 2));
    TorusMap back = map_from_json(h.to_json());
    for (int i = 0; i < 100; ++i) {
        TorusPoint p = g.point();
        CHECK(near(eval(back, p), eval(h, p), 0.0));
    }
}
