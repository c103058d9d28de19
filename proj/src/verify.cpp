#include "abc/verify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace abc {

namespace {

constexpr double kTwoPi = 6.283185307179586476925;

// Exact base phase i alpha mod 1 as a double, through rational arithmetic.
double exact_phase(const Rational& alpha, std::int64_t i) { return rat_mod1(alpha * Rational(i)).to_double(); }

struct PhaseStepper {
    std::int64_t P = 0, Q = 1;
    explicit PhaseStepper(const StageBundle& st) {
        if (!st.alpha_next || st.q_next <= 0) throw std::logic_error("stage has no usable alpha_{n+1}");
        Q = st.q_next;
        P = to_i64(st.alpha_next->num() % BigInt(Q));
    }
    TorusPoint at(TorusPoint base, std::int64_t i) const {
        double ph = static_cast<double>(phase_numerator(i, P, Q)) / static_cast<double>(Q);
        return {wrap01(base.x + ph), base.y};
    }
};

std::int64_t default_m(const StageBundle& st, std::int64_t m) {
    if (!st.alpha_next || st.q_next <= 0) throw std::logic_error("stage has no usable alpha_{n+1}");
    return m < 0 ? st.q_next : m;
}

// Value closest to `ref` among v + k, k integer.
double unwrap_near(double v, double ref) { return v - std::round(v - ref); }

}  // namespace

// ------------------------------------------------------------------ functions and sums

TestFunctionSet TestFunctionSet::standard() {
    TestFunctionSet s;
    s.fns.push_back({"one", [](TorusPoint) { return 1.0; }, 1.0, 0.0, 1.0});
    s.fns.push_back({"sin_x", [](TorusPoint p) { return std::sin(kTwoPi * p.x); }, 0.0, kTwoPi, 1.0});
    s.fns.push_back({"cos_x", [](TorusPoint p) { return std::cos(kTwoPi * p.x); }, 0.0, kTwoPi, 1.0});
    s.fns.push_back({"sin_y", [](TorusPoint p) { return std::sin(kTwoPi * p.y); }, 0.0, kTwoPi, 1.0});
    s.fns.push_back({"cos_y", [](TorusPoint p) { return std::cos(kTwoPi * p.y); }, 0.0, kTwoPi, 1.0});
    s.fns.push_back({"sin_xy", [](TorusPoint p) { return std::sin(kTwoPi * (p.x + p.y)); }, 0.0, kTwoPi, 1.0});
    return s;
}

void CompensatedSum::add(double v) {
    double t = sum_ + v;
    if (std::fabs(sum_) >= std::fabs(v))
        comp_ += (sum_ - t) + v;
    else
        comp_ += (v - t) + sum_;
    sum_ = t;
    ++n_;
}

double birkhoff_average(const std::vector<TorusPoint>& pts, const std::function<double(TorusPoint)>& psi) {
    if (pts.empty()) throw std::invalid_argument("birkhoff average of an empty orbit");
    CompensatedSum s;
    for (const auto& p : pts) s.add(psi(p));
    return s.value() / static_cast<double>(s.count());
}

// ------------------------------------------------------------------ genericity

double genericity_bound(const StageBundle& st, const TestFunction& f) {
    const double n = st.n, slack = std::ldexp(1.0, -(st.n + 1));
    switch (st.variant) {
        case Variant::A: {
            double nr = n * st.params.r;
            return 2.0 / nr * f.sup_norm + 8.0 / nr + slack;
        }
        case Variant::C:
        case Variant::D: return 2.0 / (n * n) * f.sup_norm + 4.0 / (n * n) + slack;
        case Variant::E: {
            // Continuity modulus at the cell diameter sqrt(2)/q_n.
            double eps = f.lipschitz * std::sqrt(2.0) / static_cast<double>(st.q);
            return 4.0 * eps + f.sup_norm * std::pow(2.0, -n * (st.params.alpha - 1.0)) + slack;
        }
    }
    return 0.0;
}

nlohmann::json GenericityReport::to_json() const {
    nlohmann::json j;
    j["variant"] = to_string(variant);
    j["n"] = n;
    j["base_point"] = {base_point.x, base_point.y};
    j["orbit_length"] = orbit_length;
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : rows)
        rs.push_back({{"name", r.name},
                      {"average", r.average},
                      {"integral", r.integral},
                      {"integral_mc", r.integral_mc},
                      {"mc_stderr", r.mc_stderr},
                      {"deviation", r.deviation},
                      {"bound", r.bound},
                      {"pass", r.pass}});
    j["rows"] = rs;
    j["grid"] = {grid.nx, grid.ny};
    auto [mn, mx] = std::minmax_element(cell_counts.begin(), cell_counts.end());
    if (mn != cell_counts.end()) j["cell_count_range"] = {*mn, *mx};
    j["pass"] = pass;
    return j;
}

GenericityReport generic_test(const StageBundle& st, TorusPoint base_point, const TestFunctionSet& fns, std::int64_t m,
                              std::int64_t mc_samples) {
    m = default_m(st, m);
    if (m < 1) throw std::invalid_argument("generic test: empty orbit");
    GenericityReport rep;
    rep.variant = st.variant;
    rep.n = st.n;
    rep.base_point = wrap(base_point);
    rep.orbit_length = m;
    rep.grid = {st.q, st.s, 0.0, 0.0};
    rep.cell_counts.assign(static_cast<std::size_t>(rep.grid.cells()), 0);

    const std::size_t k = fns.fns.size();
    std::vector<CompensatedSum> sums(k);
    PhaseStepper ph(st);
    for (std::int64_t i = 0; i < m; ++i) {
        TorusPoint b = ph.at(rep.base_point, i);
        TorusPoint z = st.H(b);
        for (std::size_t f = 0; f < k; ++f) sums[f].add(fns.fns[f].f(z));
        auto [cx, cy] = locate_cell(st.intermediate(b), rep.grid);
        ++rep.cell_counts[static_cast<std::size_t>(cx * rep.grid.ny + cy)];
    }

    std::vector<CompensatedSum> mc(k), mc2(k);
    for (std::int64_t i = 0; i < mc_samples; ++i) {
        TorusPoint z = st.H(r2_point(i));
        for (std::size_t f = 0; f < k; ++f) {
            double v = fns.fns[f].f(z);
            mc[f].add(v);
            mc2[f].add(v * v);
        }
    }

    rep.pass = true;
    for (std::size_t f = 0; f < k; ++f) {
        DeviationRow r;
        r.name = fns.fns[f].name;
        r.average = sums[f].value() / static_cast<double>(m);
        r.integral = fns.fns[f].integral;
        if (mc_samples > 0) {
            double N = static_cast<double>(mc_samples);
            r.integral_mc = mc[f].value() / N;
            double var = std::max(0.0, mc2[f].value() / N - r.integral_mc * r.integral_mc);
            r.mc_stderr = std::sqrt(var / N);
        }
        r.deviation = std::fabs(r.average - r.integral);
        r.bound = genericity_bound(st, fns.fns[f]);
        r.pass = r.deviation <= r.bound;
        rep.pass = rep.pass && r.pass;
        rep.rows.push_back(r);
    }
    return rep;
}

std::vector<TorusPoint> designated_points(const StageBundle& st) {
    if (st.variant == Variant::A) {
        const double e2 = st.eps.e2, e3 = st.eps.e3;
        return {{0.0, (e3 - 2 * e2) / 2}, {0.0, (e3 + 2 * e2) / 2}};
    }
    const CantorStage cs = cantor_stage(st.cantor, st.n);
    const double dx = st.q_next > 0 ? 0.5 / static_cast<double>(st.q_next) : 0.0;
    std::vector<TorusPoint> out;
    for (std::size_t l : {std::size_t{0}, cs.kept.size() / 2, cs.kept.size() - 1}) {
        const Interval& I = cs.kept[l];
        out.push_back({dx, (I.lo + I.hi) / 2});
    }
    return out;
}

// ------------------------------------------------------------------ distribution

std::vector<HorizontalInterval> eta_family(const StageBundle& st, int t, int heights) {
    if (st.variant != Variant::A) throw std::invalid_argument("eta family exists for variant A only");
    const int r = st.params.r;
    if (t < 0 || t >= r) throw std::invalid_argument("eta family: t out of range");
    if (heights < 1) throw std::invalid_argument("eta family: need at least one height");
    const double n = st.n, q = static_cast<double>(st.q);
    const double m = 2.0 / (3.0 * n * q * r);
    const double ylo = double(t) / r + 2.0 / (3.0 * n * r), yhi = double(t + 1) / r - 2.0 / (3.0 * n * r);
    std::vector<HorizontalInterval> out;
    if (yhi < ylo) return out;
    const double a = mixing_sequence(st).a.to_double();
    for (std::int64_t j = 0; j < st.q; ++j) {
        const double J = static_cast<double>(j) / q;
        for (int h = 0; h < heights; ++h) {
            double y = heights == 1 ? (ylo + yhi) / 2 : ylo + (yhi - ylo) * h / (heights - 1);
            double x0 = J + m, x1 = J + 0.5 / q - m;
            if (x1 > x0) out.push_back({x0, x1, y, t, j, false});
            double b0 = J + 0.5 / q - m - a, b1 = J + 1.0 / q - m - a;
            if (b1 > b0) out.push_back({b0, b1, y, t, j, true});
        }
    }
    return out;
}

nlohmann::json DistributionResult::to_json() const {
    return {{"x0", interval.x0},      {"x1", interval.x1},         {"y", interval.y},
            {"t", interval.t},        {"j", interval.j},           {"barred", interval.barred},
            {"x_spread", x_spread},   {"y_lo", y_lo},              {"y_hi", y_hi},
            {"target_lo", target_lo}, {"target_hi", target_hi},    {"covers", covers},
            {"vertical", vertical},   {"monotone", monotone},      {"max_defect", max_defect},
            {"height_ok", height_ok}, {"pass", pass}};
}

TorusMap distribution_map(const StageBundle& st) {
    MixingSequence ms = mixing_sequence(st);
    Rational shift = rat_mod1(Rational(ms.m) * *st.alpha_next);
    return compose_all({st.intermediate, translation(shift, Rational(0)), st.intermediate.inverse()})
        .labelled("Phi_" + std::to_string(st.n));
}

DistributionResult distribution_test(const StageBundle& st, const HorizontalInterval& I, const DistributionSpec& spec,
                                     int samples, int dyadic_depth, double cover_tol) {
    if (st.variant != Variant::A) throw std::invalid_argument("distribution test applies to variant A");
    if (!(I.x1 > I.x0)) throw std::invalid_argument("distribution test: empty interval");
    if (samples < 3 || dyadic_depth < 1 || dyadic_depth > 20) throw std::invalid_argument("distribution test: bad sizes");
    const int r = st.params.r;
    const double n = st.n;
    DistributionResult res;
    res.interval = I;
    res.target_lo = double(I.t) / r + 2.0 / (3.0 * n * r);
    res.target_hi = double(I.t + 1) / r - 2.0 / (3.0 * n * r);

    const TorusMap Phi = distribution_map(st);
    auto image = [&](double u) { return Phi(wrap({I.x0 + u * (I.x1 - I.x0), I.y})); };
    const TorusPoint ref = image(0.5);
    const double yref = unwrap_near(ref.y, (res.target_lo + res.target_hi) / 2);

    std::vector<double> ys(static_cast<std::size_t>(samples));
    double xmin = 0, xmax = 0, ymin = 1e300, ymax = -1e300;
    for (int k = 0; k < samples; ++k) {
        TorusPoint z = image(double(k) / (samples - 1));
        double dx = unwrap_near(z.x, ref.x) - ref.x;
        double y = unwrap_near(z.y, yref);
        xmin = std::min(xmin, dx);
        xmax = std::max(xmax, dx);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
        ys[static_cast<std::size_t>(k)] = y;
    }
    res.x_spread = xmax - xmin;
    res.y_lo = ymin;
    res.y_hi = ymax;
    res.covers = ymin <= res.target_lo + cover_tol && ymax >= res.target_hi - cover_tol;
    res.vertical = res.x_spread <= spec.gamma;
    res.height_ok = (ymax - ymin) * r >= 1.0 - spec.delta;  // measured against the strip height 1/r

    bool inc = true, dec = true;
    for (std::size_t k = 1; k < ys.size(); ++k) {
        inc = inc && ys[k] > ys[k - 1];
        dec = dec && ys[k] < ys[k - 1];
    }
    res.monotone = inc || dec;

    const std::size_t cells = std::size_t{1} << dyadic_depth;
    const double len = ymax - ymin;
    std::vector<double> F(cells + 1);  // preimage parameter of each dyadic boundary
    if (res.monotone && len > 0) {
        for (std::size_t i = 0; i <= cells; ++i) {
            double target = ymin + len * double(i) / double(cells);
            double lo = 0.0, hi = 1.0;
            for (int it = 0; it < 64; ++it) {
                double mid = 0.5 * (lo + hi);
                double y = unwrap_near(image(mid).y, yref);
                if ((y < target) == inc)
                    lo = mid;
                else
                    hi = mid;
            }
            F[i] = 0.5 * (lo + hi);
        }
        if (dec) std::reverse(F.begin(), F.end());
    } else if (len > 0) {
        // Not monotone: fall back to sampled proportions.
        std::vector<double> sorted = ys;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i <= cells; ++i) {
            double target = ymin + len * double(i) / double(cells);
            auto it = std::lower_bound(sorted.begin(), sorted.end(), target);
            F[i] = double(it - sorted.begin()) / double(sorted.size());
        }
        if (dec) std::reverse(F.begin(), F.end());
    }
    double worst = 0.0;
    if (len > 0) {
        for (int d = 1; d <= dyadic_depth; ++d) {
            std::size_t stepc = cells >> d;
            double share = std::ldexp(1.0, -d);
            for (std::size_t i = 0; i + stepc <= cells; i += stepc) {
                double got = std::fabs(F[i + stepc] - F[i]);
                worst = std::max(worst, std::fabs(got - share) / share);
            }
        }
    } else {
        worst = 1.0;
    }
    res.max_defect = worst;
    res.pass = res.covers && res.vertical && res.monotone && res.max_defect <= spec.eps;
    return res;
}

// ------------------------------------------------------------------ counting

std::vector<std::int64_t> equidistribution_counts(const std::vector<TorusPoint>& pts, const GridSpec& grid) {
    if (grid.nx < 1 || grid.ny < 1) throw std::invalid_argument("grid must have positive size");
    std::vector<std::int64_t> c(static_cast<std::size_t>(grid.cells()), 0);
    for (const auto& p : pts) {
        auto [i, j] = locate_cell(p, grid);
        ++c[static_cast<std::size_t>(i * grid.ny + j)];
    }
    return c;
}

namespace {

VisitReport finish_visit(VisitReport rep, const StageBundle& st, std::int64_t m) {
    rep.visited = std::count_if(rep.counts.begin(), rep.counts.end(), [](std::int64_t c) { return c > 0; });
    rep.coverage = double(rep.visited) / double(rep.grid.cells());
    rep.truncated = m < st.q_next;
    rep.pass = rep.visited == rep.grid.cells();
    return rep;
}

GridSpec visit_grid(const StageBundle& st) {
    const auto& ss = st.schedule->stage(st.n);
    if (ss.l < 1) throw std::logic_error("visit test needs l_n from the schedule");
    return {st.q, ss.l, 0.0, 0.0};
}

}  // namespace

VisitReport minimality_visit_test(const StageBundle& st, TorusPoint base_point, std::int64_t m) {
    m = default_m(st, m);
    VisitReport rep;
    rep.grid = visit_grid(st);
    rep.counts.assign(static_cast<std::size_t>(rep.grid.cells()), 0);
    PhaseStepper ph(st);
    const TorusPoint b0 = wrap(base_point);
    for (std::int64_t k = 0; k < m; ++k) {
        auto [i, j] = locate_cell(st.intermediate(ph.at(b0, k)), rep.grid);
        ++rep.counts[static_cast<std::size_t>(i * rep.grid.ny + j)];
    }
    return finish_visit(std::move(rep), st, m);
}

VisitReport minimality_visit_naive(const StageBundle& st, TorusPoint base_point, std::int64_t m) {
    m = default_m(st, m);
    VisitReport rep;
    rep.grid = visit_grid(st);
    const TorusPoint b0 = wrap(base_point);
    std::vector<TorusPoint> pts;
    pts.reserve(static_cast<std::size_t>(m));
    for (std::int64_t k = 0; k < m; ++k)
        pts.push_back(st.intermediate({wrap01(b0.x + exact_phase(*st.alpha_next, k)), b0.y}));
    rep.counts = equidistribution_counts(pts, rep.grid);
    return finish_visit(std::move(rep), st, m);
}

namespace {

const ExchangeSegment& kept_segment(const StageBundle& st, double y) {
    if (!st.exchange) throw std::invalid_argument("trapping test needs a C/D/E stage");
    const auto& seg = st.exchange->segments()[st.exchange->segment_at(y)];
    if (seg.family != CellFamily::Kept) throw std::invalid_argument("base point is not in a kept strip");
    return seg;
}

double trapping_bound(const StageBundle& st) {
    const double n = st.n;
    return (1.0 - 2.0 / (n * n)) * static_cast<double>(st.q_next) /
           (std::pow(3.0, n) * static_cast<double>(st.s) * static_cast<double>(st.q));
}

TrappingReport finish_trap(TrappingReport rep) {
    rep.min_count = rep.counts.empty() ? 0 : *std::min_element(rep.counts.begin(), rep.counts.end());
    rep.pass = static_cast<double>(rep.min_count) >= rep.bound;
    return rep;
}

}  // namespace

TrappingReport trapping_count_test(const StageBundle& st, TorusPoint base_point) {
    const TorusPoint b0 = wrap(base_point);
    const ExchangeSegment& seg = kept_segment(st, b0.y);
    const std::int64_t sq = st.s * st.q;
    const double sqd = static_cast<double>(sq);
    const double h = st.eps_prime / 2;
    const double fx = h * sqd;  // margin in cell-fraction units
    TrappingReport rep;
    rep.t1 = seg.index;
    rep.counts.assign(static_cast<std::size_t>(sq), 0);
    rep.orbit_length = st.q_next;
    rep.bound = trapping_bound(st);
    PhaseStepper ph(st);
    for (std::int64_t k = 0; k < st.q_next; ++k) {
        TorusPoint p = st.P(ph.at(b0, k));
        ScaledFrac f = scaled_frac(p.x, sqd);
        bool in = f.frac >= fx && f.frac < 1.0 - fx && p.y >= seg.src_y0 + h && p.y < seg.src_y1 - h;
        if (in)
            ++rep.counts[static_cast<std::size_t>(((f.index % sq) + sq) % sq)];
        else
            ++rep.excluded;
    }
    return finish_trap(std::move(rep));
}

TrappingReport trapping_count_naive(const StageBundle& st, TorusPoint base_point) {
    const TorusPoint b0 = wrap(base_point);
    const ExchangeSegment& seg = kept_segment(st, b0.y);
    const std::int64_t sq = st.s * st.q;
    const RegionFamily& X = st.catalog.at("X_cells");
    TrappingReport rep;
    rep.t1 = seg.index;
    rep.counts.assign(static_cast<std::size_t>(sq), 0);
    rep.orbit_length = st.q_next;
    rep.bound = trapping_bound(st);
    for (std::int64_t k = 0; k < st.q_next; ++k) {
        TorusPoint p = st.P({wrap01(b0.x + exact_phase(*st.alpha_next, k)), b0.y});
        if (X.contains(p) && p.y >= seg.src_y0 && p.y < seg.src_y1) {
            auto i1 = static_cast<std::int64_t>(std::floor(p.x * static_cast<double>(sq)));
            ++rep.counts[static_cast<std::size_t>(std::clamp<std::int64_t>(i1, 0, sq - 1))];
        } else {
            ++rep.excluded;
        }
    }
    return finish_trap(std::move(rep));
}

nlohmann::json ConfinementReport::to_json() const {
    return {{"family", abc::to_string(family)},
            {"level", level},
            {"index", index},
            {"half", half},
            {"band", {band_lo, band_hi}},
            {"layout_band", layout_band},
            {"samples", samples},
            {"inside", inside},
            {"fraction", fraction},
            {"pi2_mean", pi2_mean},
            {"mean_deviation", mean_deviation},
            {"indicator_deviation", indicator_deviation},
            {"confined", confined}};
}

std::vector<TorusPoint> confinement_base_points(const StageBundle& st, int per_strip, double x) {
    if (!st.exchange) throw std::invalid_argument("confinement points need a C/D/E stage");
    if (per_strip < 1) throw std::invalid_argument("need at least one point per strip");
    const CellFamily want = st.variant == Variant::E ? CellFamily::Kept : CellFamily::Gap;
    const double lift = st.delta / (double(st.n) * st.n);
    std::vector<TorusPoint> out;
    for (const auto& seg : st.exchange->segments()) {
        if (seg.family != want) continue;
        double lo = seg.src_y0 + st.eps_prime / 2, hi = seg.src_y1 - st.eps_prime / 2 - lift;
        if (!(hi > lo)) continue;
        for (int h = 0; h < per_strip; ++h) out.push_back(wrap({x, lo + (hi - lo) * (h + 0.5) / per_strip}));
    }
    return out;
}

ConfinementReport nongeneric_trap_test(const StageBundle& st, TorusPoint base_point, std::int64_t stride) {
    if (!st.exchange) throw std::invalid_argument("confinement test needs a C/D/E stage");
    if (stride < 1) throw std::invalid_argument("stride must be >= 1");
    const TorusPoint b0 = wrap(base_point);
    const ExchangeSegment& seg = st.exchange->segments()[st.exchange->segment_at(b0.y)];
    ConfinementReport rep;
    rep.family = seg.family;
    rep.level = seg.level;
    rep.index = seg.index;
    rep.half = seg.half;
    if (st.variant == Variant::E) {
        if (seg.family != CellFamily::Kept) throw std::invalid_argument("variant E confines kept-strip points only");
        double w = std::ldexp(1.0, -st.n);
        rep.band_lo = double(seg.index) * w;
        rep.band_hi = double(seg.index + 1) * w;
    } else {
        if (seg.family != CellFamily::Gap) throw std::invalid_argument("base point is not in a gap strip");
        if (st.variant == Variant::D && seg.level > 1) {
            // Uniform bands cannot hold area-preserving images of unequal gaps; use the layout's band.
            rep.band_lo = seg.target.y0;
            rep.band_hi = seg.target.y1;
            rep.layout_band = true;
        } else if (seg.level == 1) {
            rep.band_lo = 0.5 * seg.half;
            rep.band_hi = 0.5 * (seg.half + 1);
        } else {
            double w = std::ldexp(1.0, -(seg.level - 1));
            rep.band_lo = double(seg.index) * w;
            rep.band_hi = double(seg.index + 1) * w;
        }
    }
    PhaseStepper ph(st);
    CompensatedSum ysum;
    for (std::int64_t k = 0; k < st.q_next; k += stride) {
        TorusPoint z = st.h(ph.at(b0, k));
        ++rep.samples;
        if (z.y >= rep.band_lo - kTauGeo && z.y < rep.band_hi + kTauGeo) ++rep.inside;
        ysum.add(z.y);
    }
    rep.fraction = double(rep.inside) / double(rep.samples);
    rep.pi2_mean = ysum.value() / double(rep.samples);
    rep.mean_deviation = std::fabs(rep.pi2_mean - 0.5);
    rep.indicator_deviation = std::fabs(rep.fraction - (rep.band_hi - rep.band_lo));
    rep.confined = rep.inside == rep.samples;
    return rep;
}

double area_preservation_test(const TorusMap& m, std::int64_t N) {
    if (N < 100) throw std::invalid_argument("area test needs N >= 100");
    double worst = 0.0;
    for (std::int64_t i = 0; i < N; ++i) worst = std::max(worst, std::fabs(m.jacobian_det(r2_point(i)) - 1.0));
    return worst;
}

double commutation_test(const TorusMap& m, const Rational& shift, std::int64_t N) {
    if (N < 100) throw std::invalid_argument("commutation test needs N >= 100");
    const TorusMap S = translation(shift, Rational(0));
    double worst = 0.0;
    for (std::int64_t i = 0; i < N; ++i) {
        TorusPoint p = r2_point(i);
        worst = std::max(worst, torus_distance(m(S(p)), S(m(p))));
    }
    return worst;
}

// ------------------------------------------------------------------ dimension

DimensionSandwich generic_set_dimension(const StageBundle& st, int depth, std::int64_t x_samples,
                                        const std::vector<double>& scales, double tol) {
    if (st.variant == Variant::A) throw std::invalid_argument("generic-set dimension needs a Cantor variant");
    if (x_samples < 1) throw std::invalid_argument("need x samples");
    CantorStage cs = cantor_stage(st.cantor, depth);
    DimensionSandwich out;
    out.factor = box_dimension(cs.kept, scales);
    std::vector<TorusPoint> cloud;
    cloud.reserve(cs.kept.size() * static_cast<std::size_t>(x_samples));
    for (const auto& I : cs.kept) {
        double y = (I.lo + I.hi) / 2;
        for (std::int64_t i = 0; i < x_samples; ++i)
            cloud.push_back(st.H({(static_cast<double>(i) + 0.5) / static_cast<double>(x_samples), y}));
    }
    out.image = box_dimension_points(cloud, scales);
    out.within = out.image.dimension >= out.factor.dimension - tol && out.image.dimension <= 1.0 + out.factor.dimension + tol;
    return out;
}

}  // namespace abc
