#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "abc/cantor.hpp"
#include "abc/exchange.hpp"
#include "support.hpp"

#include <cmath>
#include <memory>
#include <numbers>

using namespace abc;

// ------------------------------------------------------------------ Cantor sets

TEST_CASE("middle-third stages have exact triadic endpoints") {
    CantorStage s1 = cantor_stage(CantorSpec::middle_third(), 1);
    REQUIRE(s1.kept_exact);
    const auto& k = *s1.kept_exact;
    REQUIRE(k.size() == 2);
    CHECK(k[0] == std::pair{Rational(0), Rational(1, 3)});
    CHECK(k[1] == std::pair{Rational(2, 3), Rational(1)});
    CHECK((*s1.gaps_exact)[0][0] == std::pair{Rational(1, 3), Rational(2, 3)});

    CantorStage s2 = cantor_stage(CantorSpec::middle_third(), 2);
    REQUIRE(s2.kept_exact->size() == 4);
    for (const auto& [a, b] : *s2.kept_exact) CHECK(b - a == Rational(1, 9));
}

TEST_CASE("p = 2 gap sequence: first gap is 6/pi^2, placed by the subtree sums") {
    CantorSpec spec = CantorSpec::p_series(2.0);
    CantorStage s = cantor_stage(spec, 1);
    REQUIRE(s.gaps[0].size() == 1);
    const Interval& g = s.gaps[0][0];
    CHECK(g.length() == doctest::Approx(6.0 / (std::numbers::pi * std::numbers::pi)).epsilon(1e-12));
    CHECK(g.length() == doctest::Approx(0.6079).epsilon(1e-4));
    // The left kept interval holds exactly the gaps of the left subtree: indices [2^k, 2^k + 2^(k-1)).
    double left = 0.0, c0 = std::numbers::pi * std::numbers::pi / 6;
    for (int k = 1; k <= 23; ++k)
        for (std::uint64_t j = std::uint64_t(1) << k; j < (std::uint64_t(1) << k) + (std::uint64_t(1) << (k - 1)); ++j)
            left += 1.0 / (double(j) * double(j) * c0);
    CHECK(s.kept[0].length() == doctest::Approx(left).epsilon(1e-6));
    CHECK(s.kept[0].length() + g.length() + s.kept[1].length() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.kept[0].length() > s.kept[1].length());  // decreasing gaps weigh the left subtree more
}

TEST_CASE("gap-sequence stages: partition of [0,1] by kept intervals and gaps") {
    for (double p : {1.5, 2.0, 3.0}) {
        CantorSpec spec = CantorSpec::p_series(p);
        for (int n = 1; n <= 8; ++n) {
            CantorStage s = cantor_stage(spec, n);
            REQUIRE(s.kept.size() == (std::size_t(1) << n));
            double total = s.kept_length();
            for (int k = 1; k <= n; ++k) total += s.gap_length(k);
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
            for (std::size_t i = 0; i + 1 < s.kept.size(); ++i) CHECK(s.kept[i].hi < s.kept[i + 1].lo);
        }
    }
}

TEST_CASE("Cantor membership") {
    CantorSpec mt = CantorSpec::middle_third();
    CHECK(cantor_membership(0.5, mt, 1).status == Membership::Out);
    for (int d : {1, 3, 6}) CHECK(cantor_membership(0.0, mt, d).status == Membership::In);
    MembershipResult q = cantor_membership(0.25, mt, 4);
    CHECK(q.status == Membership::Undecided);
    CHECK(q.where.lo <= 0.25);
    CHECK(q.where.hi >= 0.25);
}

TEST_CASE("membership property: agrees with a ternary-digit oracle") {
    testing::Gen g(31);
    CantorSpec mt = CantorSpec::middle_third();
    for (int i = 0; i < 300; ++i) {
        // x = a / 3^6 + small offset keeps x off every triadic endpoint up to depth 6.
        std::int64_t a = g.integer(0, 728);
        double x = (a + 0.5) / 729.0;
        Membership expect = Membership::Undecided;
        std::int64_t v = a;
        for (int d = 0; d < 6; ++d) {
            std::int64_t digit = (v / static_cast<std::int64_t>(std::pow(3, 5 - d))) % 3;
            if (digit == 1) {
                expect = Membership::Out;
                break;
            }
        }
        CHECK(cantor_membership(x, mt, 6).status == expect);
    }
}

TEST_CASE("box dimension") {
    std::vector<double> scales = geometric_scales(0.1, 1e-3, 10);
    CHECK(box_dimension({{0.0, 1.0, Closure::Closed}}, scales).dimension == doctest::Approx(1.0).epsilon(0.02));
    BoxDimResult mt = box_dimension(cantor_stage(CantorSpec::middle_third(), 8).kept, scales);
    CHECK(mt.dimension == doctest::Approx(std::log(2.0) / std::log(3.0)).epsilon(0.02 / 0.6309));
    BoxDimResult gs = box_dimension(cantor_stage(CantorSpec::from_alpha(1.5), 8).kept, scales);
    CHECK(std::abs(gs.dimension - 0.5) < 0.05);
}

// ------------------------------------------------------------------ exchanges

namespace {

ExchangePiece piece_for(const std::vector<ExchangePiece>& ps, std::int64_t column, std::int64_t cell, CellFamily f,
                        int level, std::uint64_t index, const RectExchange& re) {
    for (const auto& p : ps) {
        const ExchangeSegment& s = re.segments()[p.segment];
        if (p.column == column && p.cell == cell && s.family == f && s.level == level && s.index == index) return p;
    }
    FAIL("piece not found");
    return {};
}

}  // namespace

TEST_CASE("variant C index rule") {
    CantorSpec mt = CantorSpec::middle_third();
    CellImage a = perm_image_bruteforce(ExchangeVariant::C, 1, 2, 2, mt, {CellFamily::Kept, 1, 3, 1});
    CHECK(a.j1 == 1);
    CHECK(a.j2 == 1);
    CHECK(a.j3 == 1);
    CHECK(perm_image_bruteforce(ExchangeVariant::C, 1, 2, 2, mt, {CellFamily::Gap, 1, 0, 0}).j2 == 0);
    CHECK(perm_image_bruteforce(ExchangeVariant::C, 1, 2, 2, mt, {CellFamily::Gap, 1, 0, 1}).j2 == 2);
}

TEST_CASE("variant C: kept strips are distributed vertically with equal areas") {
    for (int n = 1; n <= 3; ++n) {
        std::int64_t q = 2, s = 3;
        RectExchange re = make_exchange_C(n, q, s);
        auto ps = re.pieces();
        double p3n = std::pow(3.0, n);
        for (const auto& p : ps) {
            const ExchangeSegment& seg = re.segments()[p.segment];
            CHECK(p.source.area() == doctest::Approx(p.target.area()).epsilon(1e-12));
            if (seg.family != CellFamily::Kept) continue;
            CHECK(p.source.area() == doctest::Approx(1.0 / (p3n * s * q)).epsilon(1e-12));
            double x0 = double(p.column) / q + seg.index / (p3n * q);
            CHECK(p.target.x0 == doctest::Approx(x0).epsilon(1e-12));
            CHECK(p.target.x1 == doctest::Approx(x0 + 1.0 / (p3n * q)).epsilon(1e-12));
        }
        // A point of cell (i1 = 0, i2 = 0) lands in V_{0,0,0}.
        ExchangePiece p = piece_for(ps, 0, 0, CellFamily::Kept, n, 0, re);
        TorusPoint c{(p.source.x0 + p.source.x1) / 2, (p.source.y0 + p.source.y1) / 2};
        TorusPoint img = exchange_eval(re, c);
        CHECK(Rect{0.0, 1.0 / (p3n * q), 0.0, 1.0 / s}.contains(img));
    }
}

TEST_CASE("variant D: kept widths and the split level-1 gap") {
    CantorSpec lam = CantorSpec::from_alpha(1.5);
    for (int n = 1; n <= 3; ++n) {
        std::int64_t q = 2, s = 3;
        RectExchange re = make_exchange_D(n, q, s, lam);
        CantorStage cs = cantor_stage(lam, n);
        double kept_width = 0.0;
        for (const auto& seg : re.segments())
            if (seg.family == CellFamily::Kept) kept_width += seg.target.x1 - seg.target.x0;
        CHECK(kept_width / q == doctest::Approx(cs.kept_length() / q).epsilon(1e-12));
        for (const auto& seg : re.segments()) {
            if (seg.family != CellFamily::Gap || seg.level != 1) continue;
            CHECK(seg.half >= 0);
            CHECK(seg.target.y0 == doctest::Approx(seg.half == 0 ? 0.0 : 0.5));
            CHECK(seg.target.y1 == doctest::Approx(seg.half == 0 ? 0.5 : 1.0));
        }
    }
}

TEST_CASE("variant E: kept strips stay in their dyadic bands; gap widths match") {
    CantorSpec lam = CantorSpec::from_alpha(1.5);
    for (int n = 1; n <= 3; ++n) {
        std::int64_t q = 2, s = 4;
        RectExchange re = make_exchange_E(n, q, s, lam);
        for (const auto& p : re.pieces()) {
            const ExchangeSegment& seg = re.segments()[p.segment];
            if (seg.family != CellFamily::Kept) continue;
            double band = std::ldexp(1.0, -n);
            CHECK(p.target.y0 >= seg.index * band - 1e-12);
            CHECK(p.target.y1 <= (seg.index + 1) * band + 1e-12);
        }
        // Total target area of every segment equals its source strip area.
        for (std::size_t i = 0; i < re.segments().size(); ++i) {
            double src = 0.0, tgt = 0.0;
            for (const auto& p : re.pieces())
                if (p.segment == i && p.column == 0) {
                    src += p.source.area();
                    tgt += p.target.area();
                }
            const ExchangeSegment& seg = re.segments()[i];
            CHECK(src == doctest::Approx((seg.src_y1 - seg.src_y0) / q).epsilon(1e-12));
            CHECK(tgt == doctest::Approx(src).epsilon(1e-12));
        }
    }
}

TEST_CASE("exchange tables agree with the index-formula oracle") {
    CantorSpec mt = CantorSpec::middle_third(), lam = CantorSpec::from_alpha(1.5);
    for (int n = 1; n <= 3; ++n)
        for (std::int64_t q : {2, 3, 8})
            for (std::int64_t s : {2, 5}) {
                CAPTURE(n);
                CAPTURE(q);
                CAPTURE(s);
                OracleComparison c = compare_with_oracle(make_exchange_C(n, q, s), mt);
                CHECK(c.mismatches == 0);
                CHECK(c.area_imbalance < 1e-12);
                OracleComparison d = compare_with_oracle(make_exchange_D(n, q, s, lam), lam);
                CHECK(d.mismatches == 0);
                CHECK(d.area_imbalance < 1e-12);
                OracleComparison e = compare_with_oracle(make_exchange_E(n, q, s, lam), lam);
                CHECK(e.mismatches == 0);
                CHECK(e.area_imbalance < 1e-12);
            }
}

TEST_CASE("exchange property: forward then inverse returns the point") {
    testing::Gen g(32);
    CantorSpec lam = CantorSpec::from_alpha(1.5);
    for (auto v : {ExchangeVariant::C, ExchangeVariant::D, ExchangeVariant::E}) {
        RectExchange re = build_exchange(v, 2, 3, 4, v == ExchangeVariant::C ? CantorSpec::middle_third() : lam);
        for (int i = 0; i < 2000; ++i) {
            TorusPoint p = g.point();
            CHECK(torus_distance(re.eval_inverse(re.eval(p)), p) < 1e-12);
            CHECK(std::abs(re.jacobian(p).det() - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("a one-strip exchange with horizontal stacking is the identity") {
    ExchangeSegment seg;
    seg.src_y0 = 0.0;
    seg.src_y1 = 1.0;
    seg.target = {0.0, 1.0, 0.0, 1.0};
    seg.stacking = Stacking::Horizontal;
    RectExchange re(ExchangeVariant::C, 1, 3, 2, {seg});
    testing::Gen g(33);
    for (int i = 0; i < 200; ++i) {
        TorusPoint p = g.point();
        CHECK(torus_distance(re.eval(p), p) < 1e-15);
    }
}

TEST_CASE("exchange JSON round trip") {
    RectExchange re = make_exchange_D(2, 3, 4, CantorSpec::from_alpha(1.5));
    RectExchange back = RectExchange::from_json(re.to_json());
    testing::Gen g(34);
    for (int i = 0; i < 200; ++i) {
        TorusPoint p = g.point();
        CHECK(torus_distance(back.eval(p), re.eval(p)) == 0.0);
    }
}
