#include "abc/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace abc {

const char* to_string(Variant v) {
    switch (v) {
        case Variant::A: return "A";
        case Variant::C: return "C";
        case Variant::D: return "D";
        case Variant::E: return "E";
    }
    return "?";
}

Variant parse_variant(const std::string& s) {
    if (s == "A") return Variant::A;
    if (s == "C") return Variant::C;
    if (s == "D") return Variant::D;
    if (s == "E") return Variant::E;
    throw std::invalid_argument("unknown variant '" + s + "'");
}

// ---------------------------------------------------------------- schedule

RotationSchedule RotationSchedule::start(const BigInt& p1, const BigInt& q1, std::int64_t s1) {
    if (q1 < 1) throw std::invalid_argument("schedule: q1 must be >= 1");
    if (gcd(p1, q1) != 1) throw std::invalid_argument("schedule: p1 and q1 must be coprime");
    if (s1 < 1) throw std::invalid_argument("schedule: s1 must be >= 1");
    RotationSchedule r;
    ScheduleStage st;
    st.n = 1;
    st.p = p1;
    st.q = q1;
    st.s = s1;
    r.stages_.push_back(st);
    return r;
}

const ScheduleStage& RotationSchedule::stage(int n) const {
    if (!has(n)) throw std::out_of_range("schedule has no stage " + std::to_string(n));
    return stages_[static_cast<std::size_t>(n - 1)];
}

Rational RotationSchedule::alpha(int n) const {
    const auto& st = stage(n);
    return Rational(st.p, st.q);
}

RotationSchedule RotationSchedule::extended(std::int64_t k, std::int64_t l, std::int64_t s_next) const {
    if (k < 1 || l < 1) throw std::invalid_argument("schedule: multipliers k_n, l_n must be >= 1");
    if (s_next < 1) throw std::invalid_argument("schedule: s_n must be >= 1");
    if (stages_.empty()) throw std::logic_error("schedule: extend of an empty schedule");
    RotationSchedule r = *this;
    ScheduleStage& last = r.stages_.back();
    last.k = k;
    last.l = l;
    ScheduleStage nx;
    nx.n = last.n + 1;
    BigInt klq = BigInt(k) * BigInt(l) * last.q;
    nx.q = klq * last.q;
    nx.p = klq * last.p + 1;
    nx.s = s_next;
    r.stages_.push_back(nx);
    return r;
}

bool RotationSchedule::growth_10n2(int n) const {
    if (!has(n + 1)) return false;
    return stage(n + 1).q > BigInt(10) * n * n * stage(n).q;
}

bool RotationSchedule::growth_minimality(int n) const {
    if (!has(n + 1)) return false;
    const auto& st = stage(n);
    return stage(n + 1).q > BigInt(st.l) * st.q * st.q;
}

nlohmann::json RotationSchedule::to_json() const {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& st : stages_) {
        nlohmann::json j;
        j["n"] = st.n;
        j["p"] = st.p.str();
        j["q"] = st.q.str();
        j["s"] = st.s;
        j["k"] = st.k;
        j["l"] = st.l;
        j["alpha"] = Rational(st.p, st.q).str();
        if (has(st.n + 1)) {
            j["growth_10n2"] = growth_10n2(st.n);
            j["growth_minimality"] = growth_minimality(st.n);
        }
        a.push_back(j);
    }
    return a;
}

RotationSchedule extend_schedule(const RotationSchedule& s, std::int64_t k_n, std::int64_t l_n, std::int64_t s_next) {
    return s.extended(k_n, l_n, s_next);
}

RotationSchedule default_schedule(Variant v) {
    // q: 2 -> 24 -> 9216. Variant A uses s_n = q_n + 1; C/D/E keep s_2 q_2 | q_3.
    if (v == Variant::A) return RotationSchedule::start(1, 2, 3).extended(2, 3, 25).extended(8, 2, 9217);
    return RotationSchedule::start(1, 2, 3).extended(2, 3, 32).extended(8, 2, 9217);
}

// ---------------------------------------------------------------- regions

double RegionFamily::area() const {
    double a = 0.0;
    for (const auto& r : rects) a += r.area();
    return a * static_cast<double>(replicate);
}

bool RegionFamily::contains(TorusPoint p) const {
    p = wrap(p);
    ScaledFrac f = scaled_frac(p.x, static_cast<double>(replicate));
    TorusPoint local{f.frac / static_cast<double>(replicate), p.y};
    for (const auto& r : rects)
        if (r.contains(local)) return true;
    return false;
}

const RegionFamily& RegionCatalog::at(const std::string& name) const {
    for (const auto& f : families)
        if (f.name == name) return f;
    throw std::out_of_range("no region family '" + name + "'");
}

bool RegionCatalog::has(const std::string& name) const {
    return std::any_of(families.begin(), families.end(), [&](const RegionFamily& f) { return f.name == name; });
}

nlohmann::json RegionCatalog::to_json() const {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& f : families) {
        nlohmann::json j;
        j["name"] = f.name;
        j["rects_per_copy"] = f.rects.size();
        j["replicate"] = f.replicate;
        j["disjoint"] = f.disjoint;
        j["area"] = f.area();
        j["expected_area"] = f.expected_area;
        if (!f.note.empty()) j["note"] = f.note;
        a.push_back(j);
    }
    return a;
}

namespace {

RegionFamily family(std::string name, std::int64_t replicate, double expected, std::string note = {}) {
    RegionFamily f;
    f.name = std::move(name);
    f.replicate = replicate;
    f.expected_area = expected;
    f.note = std::move(note);
    return f;
}

// Sup-norm annulus {a < s < b} around (1/2,1/2), s = max(|u-1/2|, |v-1/2|), as four disjoint rects.
void add_annulus(std::vector<Rect>& out, double a, double b, double sx) {
    const double lo = 0.5 - b, hi = 0.5 + b, ilo = 0.5 - a, ihi = 0.5 + a;
    out.push_back({lo * sx, hi * sx, ihi, hi});
    out.push_back({lo * sx, hi * sx, lo, ilo});
    out.push_back({lo * sx, ilo * sx, ilo, ihi});
    out.push_back({ihi * sx, hi * sx, ilo, ihi});
}

// Sorted union of intervals clipped to [lo, hi].
std::vector<std::pair<double, double>> merge_intervals(std::vector<std::pair<double, double>> v, double lo, double hi) {
    for (auto& [a, b] : v) {
        a = std::clamp(a, lo, hi);
        b = std::clamp(b, lo, hi);
    }
    std::sort(v.begin(), v.end());
    std::vector<std::pair<double, double>> out;
    for (const auto& [a, b] : v) {
        if (b <= a) continue;
        if (!out.empty() && a <= out.back().second) {
            out.back().second = std::max(out.back().second, b);
        } else {
            out.push_back({a, b});
        }
    }
    return out;
}

double total_length(const std::vector<std::pair<double, double>>& v) {
    double t = 0.0;
    for (const auto& [a, b] : v) t += b - a;
    return t;
}

// Frame zone in a column [0, w) x [0,1): full-height strips `xs` plus full-width bands `ys`, as disjoint
// rectangles. Strips that overlap (large margins at small n) are merged first; returns true if any did.
bool add_frame(RegionFamily& f, const std::vector<std::pair<double, double>>& xs,
               const std::vector<std::pair<double, double>>& ys, double w) {
    auto mx = merge_intervals(xs, 0.0, w), my = merge_intervals(ys, 0.0, 1.0);
    double x = 0.0;
    for (const auto& [a, b] : mx) {
        f.rects.push_back({a, b, 0, 1});
        for (const auto& [c, d] : my)
            if (a > x) f.rects.push_back({x, a, c, d});
        x = b;
    }
    for (const auto& [c, d] : my)
        if (w > x) f.rects.push_back({x, w, c, d});
    const double fv = total_length(mx) / w, fh = total_length(my);
    bool merged = mx.size() != xs.size() || my.size() != ys.size();
    if (merged) {
        f.expected_area = fv + fh - fv * fh;
        f.note += "; overlapping strips merged at this stage";
    }
    return merged;
}

RegionCatalog catalog_A(int n, std::int64_t q, int r, std::int64_t s, std::int64_t l, const EpsA& e) {
    RegionCatalog c;
    const double qd = static_cast<double>(q), w = 1.0 / qd;
    const double e1 = e.e1, e2 = e.e2, e3 = e.e3, e4 = e.e4;

    auto N = family("N", 1, 1.0, "strips T x [t/r,(t+1)/r)");
    auto D = family("D", q, 1.0, "fundamental domains [0,1/q) x [t/r,(t+1)/r); copies are the shifts D_j");
    auto D1 = family("D_half1", q, 0.5, "left halves; copies are the shifts D_j^{t,1}");
    auto D2 = family("D_half2", q, 0.5, "right halves; copies are the shifts D_j^{t,2}");
    for (int t = 0; t < r; ++t) {
        double y0 = double(t) / r, y1 = double(t + 1) / r;
        N.rects.push_back({0, 1, y0, y1});
        D.rects.push_back({0, w, y0, y1});
        D1.rects.push_back({0, w / 2, y0, y1});
        D2.rects.push_back({w / 2, w, y0, y1});
    }

    // Horizontal-interval window of the distribution test: I^0 x [t/r,(t+1)/r).
    const double ia = 2.0 / (3.0 * n * qd * r);
    const double ib = w / 2 - ia;
    auto Dbar = family("D_bar", q, ib > ia ? (ib - ia) * qd : 0.0,
                       "I^0 x [t/r,(t+1)/r); empty when 4/(3nr) >= 1/2");
    if (ib > ia)
        for (int t = 0; t < r; ++t) Dbar.rects.push_back({ia, ib, double(t) / r, double(t + 1) / r});

    auto B = family("B", q, (1 - 4 * e2) * (e3 - 2 * e2), "bottom strips moved by phi^g");
    B.rects.push_back({2 * e2 * w, (1 - 2 * e2) * w, 2 * e2, e3});
    auto Y = family("Y", q, (e3 - 2 * e2) * (1 - 4 * e2), "right strips as written; see Y_image");
    Y.rects.push_back({(1 - e3) * w, (1 - 2 * e2) * w, 2 * e2, 1 - 2 * e2});
    auto Yimg = family("Y_image", q, (e3 - 2 * e2) * (1 - 4 * e2),
                       "actual image of B under phi^g: a clockwise quarter turn sends the bottom strip to the left strip");
    Yimg.rects.push_back({2 * e2 * w, e3 * w, 2 * e2, 1 - 2 * e2});

    auto S1 = family("Sigma1", q, 4 * e2 * e2, "corner squares fixed by phi^g");
    S1.rects.push_back({0, e2 * w, 0, e2});
    S1.rects.push_back({0, e2 * w, 1 - e2, 1});
    S1.rects.push_back({(1 - e2) * w, w, 0, e2});
    S1.rects.push_back({(1 - e2) * w, w, 1 - e2, 1});
    auto S2 = family("Sigma2", q, (1 - 4 * e3) * (1 - 4 * e3), "core fixed by phi^g (both turns rigid)");
    S2.rects.push_back({2 * e3 * w, (1 - 2 * e3) * w, 2 * e3, 1 - 2 * e3});

    auto Eg = family("E_g", q, 4 * ((0.5 - e3) * (0.5 - e3) - (0.5 - 2 * e3) * (0.5 - 2 * e3)) +
                                   4 * ((0.5 - e2) * (0.5 - e2) - (0.5 - 2 * e2) * (0.5 - 2 * e2)),
                     "interpolation annuli of the two turns inside phi^g");
    add_annulus(Eg.rects, 0.5 - 2 * e3, 0.5 - e3, w);
    add_annulus(Eg.rects, 0.5 - 2 * e2, 0.5 - e2, w);

    auto R = family("R", q, e2, "columns where phi^m acts");
    R.rects.push_back({0, e2 * w, 0, 1});

    // phi^m lives in the chart ((q/e2) x, y), so its margins scale by e2/q in x.
    const double mx = e2 * w;
    auto Em = family("E_m", q, 4 * ((0.5 - e4) * (0.5 - e4) - (0.5 - 2 * e4) * (0.5 - 2 * e4)) * e2,
                     "interpolation annulus of the phi^m turn, in chart scale");
    add_annulus(Em.rects, 0.5 - 2 * e4, 0.5 - e4, mx);
    auto EmLit = family("E_m_literal", q, 4 * e4 * e4, "the four corner boxes as written with unscaled margins");
    for (double x0 : {e4 * w, (e2 - 2 * e4) * w})
        for (double y0 : {e4, 1 - 2 * e4}) EmLit.rects.push_back({x0, x0 + e4 * w, y0, y0 + e4});

    const double core = 1 - 4 * e4;
    auto A = family("A_cells", q, e2 * core * core, "vertical slices of the rigid phi^m square; A_k -> B_{l-1-k}");
    auto Bm = family("B_cells", q, e2 * core * core, "horizontal slices of the rigid phi^m square");
    for (std::int64_t k = 0; k < l; ++k) {
        double a0 = 2 * e4 + double(k) * core / double(l), a1 = 2 * e4 + double(k + 1) * core / double(l);
        A.rects.push_back({a0 * mx, a1 * mx, 2 * e4, 1 - 2 * e4});
        Bm.rects.push_back({2 * e4 * mx, (1 - 2 * e4) * mx, a0, a1});
    }

    auto G = family("G_cells", q, (1 - 4 * e2) * (e3 - 2 * e2), "slices of B; G_j -> left-strip band s-1-j");
    auto Yg = family("Y_cells", q, (e3 - 2 * e2) * (1 - 4 * e2), "bands of the right strip as written");
    auto Yi = family("Y_image_cells", q, (e3 - 2 * e2) * (1 - 4 * e2), "bands of the left strip hit by G cells");
    auto Del = family("Delta", q, 1.0, "grid [i/q,(i+1)/q) x [j/s,(j+1)/s)");
    const double band = (1 - 4 * e2) / double(s);
    for (std::int64_t j = 0; j < s; ++j) {
        double g0 = 2 * e2 + double(j) * band, g1 = 2 * e2 + double(j + 1) * band;
        G.rects.push_back({g0 * w, g1 * w, 2 * e2, e3});
        Yg.rects.push_back({(1 - e3) * w, (1 - 2 * e2) * w, g0, g1});
        Yi.rects.push_back({2 * e2 * w, e3 * w, g0, g1});
        Del.rects.push_back({0, w, double(j) / double(s), double(j + 1) / double(s)});
    }

    // Vertical strips of half-width 2 e1 / q around k/(2q), plus horizontal bands around t/r.
    const double hv = 2 * e1 * w, hh = 2 * e1;
    const double fv = 8 * e1, fh = 4 * e1 * r;
    auto Ew = family("E_w", q, fv + fh - fv * fh, "error zone of phi^w");
    std::vector<std::pair<double, double>> ew_x{{0, hv}, {w / 2 - hv, w / 2 + hv}, {w - hv, w}};
    std::vector<std::pair<double, double>> ew_y{{0, hh}, {1 - hh, 1}};
    for (int t = 1; t < r; ++t) ew_y.push_back({double(t) / r - hh, double(t) / r + hh});
    add_frame(Ew, ew_x, ew_y, w);

    for (auto* f : {&N, &D, &D1, &D2, &Dbar, &B, &Y, &Yimg, &S1, &S2, &Eg, &R, &Em, &EmLit, &A, &Bm, &G, &Yg, &Yi,
                    &Del, &Ew})
        c.families.push_back(std::move(*f));
    return c;
}

RegionCatalog catalog_CDE(const RectExchange& ex, const CantorStage& cs, std::int64_t q, std::int64_t s,
                          double eps_prime) {
    RegionCatalog c;
    const std::int64_t sq = s * q;
    const double cw = 1.0 / static_cast<double>(sq);
    const double h = eps_prime / 2;

    double kept_total = cs.kept_length();
    auto Gc = family("G_cells", sq, kept_total, "kept strips cut into 1/(sq) cells");
    auto Xc = family("X_cells", sq, 0.0, "kept cells minus E_n; the trapping zone is the P-preimage");
    double x_area = 0.0;
    for (const auto& I : cs.kept) {
        Gc.rects.push_back({0, cw, I.lo, I.hi});
        if (I.length() > eps_prime && cw > eps_prime) {
            Xc.rects.push_back({h, cw - h, I.lo + h, I.hi - h});
            x_area += (cw - eps_prime) * (I.length() - eps_prime);
        }
    }
    Xc.expected_area = x_area * static_cast<double>(sq);

    auto NGc = family("NG_cells", sq, 1.0 - kept_total, "gap strips cut into 1/(sq) cells");
    auto Yc = family("Y_cells", sq, 0.0, "gap cells minus E_n; the trapping zone is the P-preimage");
    double y_area = 0.0;
    for (const auto& seg : ex.segments()) {
        if (seg.family != CellFamily::Gap) continue;
        NGc.rects.push_back({0, cw, seg.src_y0, seg.src_y1});
        // Only kept endpoints carry an E_n band; the split point of a halved gap does not.
        double lo = seg.src_y0 + (seg.half == 1 ? 0.0 : h);
        double hi = seg.src_y1 - (seg.half == 0 ? 0.0 : h);
        if (hi > lo && cw > eps_prime) {
            Yc.rects.push_back({h, cw - h, lo, hi});
            y_area += (cw - eps_prime) * (hi - lo);
        }
    }
    Yc.expected_area = y_area * static_cast<double>(sq);

    auto V = family("V_cells", q, kept_total, "images of kept cells under the exchange");
    auto W = family("W_cells", q, 1.0 - kept_total, "images of gap cells under the exchange");
    V.disjoint = W.disjoint = true;
    for (std::size_t i = 0; i < ex.segments().size(); ++i) {
        auto& dst = ex.segments()[i].family == CellFamily::Kept ? V : W;
        for (std::int64_t m = 0; m < s; ++m) dst.rects.push_back(ex.cell_target(0, i, m));
    }

    // Horizontal lines: kept endpoints mod 1 (0 and 1 coincide).
    std::vector<double> lines;
    for (const auto& I : cs.kept) {
        if (I.lo > 0) lines.push_back(I.lo);
        if (I.hi < 1) lines.push_back(I.hi);
    }
    lines.push_back(0.0);
    const double fv = static_cast<double>(sq) * eps_prime;
    const double fh = static_cast<double>(lines.size()) * eps_prime;
    auto En = family("E_n", sq, fv + fh - fv * fh, "uncontrolled zone; F_n is its complement");
    std::vector<std::pair<double, double>> en_y{{0, h}, {1 - h, 1}};
    for (double b : lines)
        if (b != 0.0) en_y.push_back({b - h, b + h});
    add_frame(En, {{0, h}, {cw - h, cw}}, en_y, cw);

    for (auto* f : {&Gc, &NGc, &Xc, &Yc, &V, &W, &En}) c.families.push_back(std::move(*f));
    return c;
}

void validate_params(Variant v, const VariantParams& p) {
    if (p.r < 1) throw std::invalid_argument("r must be >= 1");
    if (!(p.sigma > 0.0 && p.sigma < 0.5)) throw std::invalid_argument("sigma out of (0, 1/2)");
    if ((v == Variant::D || v == Variant::E) && !(p.alpha > 1.0 && p.alpha < 2.0))
        throw std::invalid_argument("alpha out of (1, 2)");
    if (p.kappa_smoothing < 0.0) throw std::invalid_argument("kappa smoothing must be >= 0");
}

StageBundle build_one(Variant v, std::shared_ptr<const RotationSchedule> sched, const VariantParams& params, int n,
                      const TorusMap& H_prev) {
    if (!sched->has(n)) throw std::invalid_argument("schedule has no stage " + std::to_string(n));
    StageBundle b;
    b.variant = v;
    b.n = n;
    b.schedule = sched;
    b.params = params;
    const ScheduleStage& st = sched->stage(n);
    b.q = to_i64(st.q);
    b.s = st.s;
    if (b.q < 2) throw std::invalid_argument("stage construction needs q_n >= 2");
    if (sched->has(n + 1)) {
        b.alpha_next = sched->alpha(n + 1);
        const BigInt& qn = sched->stage(n + 1).q;
        if (qn <= BigInt(std::numeric_limits<std::int64_t>::max() / 4)) {
            b.q_next = to_i64(qn);
        } else {
            b.advisories.push_back("q_{n+1} exceeds 64-bit orbit range; orbits disabled");
        }
        if (!sched->growth_10n2(n)) b.advisories.push_back("growth q_{n+1} > 10 n^2 q_n fails");
        if (!sched->growth_minimality(n)) b.advisories.push_back("growth q_{n+1} > l_n q_n^2 fails");
    } else {
        b.advisories.push_back("no successor stage: alpha_{n+1} unknown, orbit evaluation unavailable");
    }
    const std::string tag = "_" + std::to_string(n);

    if (v == Variant::A) {
        b.eps = eps_schedule_A(n, b.q, params.r);
        if (b.eps.e1_clamped) b.advisories.push_back("eps1 = 1/(3nr) >= 1/4 clamped to 1/5");
        if (b.eps.e4_clamped) b.advisories.push_back("eps4 = 1/(2^n q) >= 1/4 clamped to 1/5");
        KappaProfile prof = kappa_profile_A(n, b.q, params.r);
        prof.smoothing = params.kappa_smoothing;
        b.P = build_P(prof).labelled("P" + tag);
        b.phi = assemble_phi(n, b.q, params.r).labelled("phi" + tag);
        b.g = shear_g(n, b.q, params.sigma).labelled("g" + tag);
        b.h = compose_all({b.g, b.phi, b.P}).labelled("h" + tag);
        std::int64_t l = st.l > 0 ? st.l : 1;
        b.catalog = catalog_A(n, b.q, params.r, b.s, l, b.eps);
    } else {
        if (b.s <= b.q) throw std::invalid_argument("s_n must exceed q_n for variants C/D/E");
        if (v == Variant::C) {
            b.cantor = CantorSpec::middle_third();
            b.delta = std::exp(-std::pow(3.0, n));
        } else {
            b.cantor = CantorSpec::from_alpha(params.alpha);
            b.delta = b.cantor.lambda(std::uint64_t(1) << (n + 1));
        }
        CantorStage cs = cantor_stage(b.cantor, n);
        const double sq = static_cast<double>(b.s) * static_cast<double>(b.q);
        b.eps_prime = b.delta / (2.0 * (sq + std::ldexp(1.0, n + 1)));
        ExchangeVariant ev = v == Variant::C ? ExchangeVariant::C : v == Variant::D ? ExchangeVariant::D
                                                                                     : ExchangeVariant::E;
        b.exchange = std::make_shared<const RectExchange>(build_exchange(ev, n, b.q, b.s, b.cantor));
        for (const auto& note : b.exchange->notes) b.advisories.push_back("exchange: " + note);
        KappaProfile prof;
        prof.periods = b.s * b.q;
        prof.rise_end = 0.5;
        prof.fall_end = 1.0;
        prof.peak = b.delta / (double(n) * n);
        prof.smoothing = params.kappa_smoothing;
        b.P = build_P(prof).labelled("P" + tag);
        b.phi = exchange_to_map(b.exchange).labelled("phi" + tag);
        b.g = identity_map();
        b.h = compose(b.phi, b.P).labelled("h" + tag);
        b.catalog = catalog_CDE(*b.exchange, cs, b.q, b.s, b.eps_prime);
    }
    b.intermediate = compose(b.phi, b.P).labelled("phiP" + tag);
    b.H = (n == 1 ? b.h : compose(H_prev, b.h)).labelled("H" + tag);
    b.H_inv = b.H.inverse();
    return b;
}

}  // namespace

std::vector<StageBundle> build_stages(Variant v, std::shared_ptr<const RotationSchedule> schedule,
                                      const VariantParams& params, int n_max) {
    if (!schedule) throw std::invalid_argument("build_stages: null schedule");
    if (n_max < 1) throw std::invalid_argument("build_stages: n_max must be >= 1");
    validate_params(v, params);
    std::vector<StageBundle> out;
    TorusMap H;
    for (int n = 1; n <= n_max; ++n) {
        out.push_back(build_one(v, schedule, params, n, H));
        H = out.back().H;
    }
    return out;
}

StageBundle build_stage(Variant v, std::shared_ptr<const RotationSchedule> schedule, const VariantParams& params,
                        int n) {
    return build_stages(v, std::move(schedule), params, n).back();
}

// ---------------------------------------------------------------- orbits

std::int64_t phase_numerator(std::int64_t i, std::int64_t p, std::int64_t q) {
    __int128 v = static_cast<__int128>(i) * static_cast<__int128>(p % q);
    v %= q;
    if (v < 0) v += q;
    return static_cast<std::int64_t>(v);
}

OrbitInfo for_each_orbit_point(const StageBundle& st, const OrbitRequest& req,
                               const std::function<void(std::int64_t, TorusPoint)>& fn) {
    if (!st.alpha_next || st.q_next <= 0) throw std::logic_error("orbit: stage has no usable alpha_{n+1}");
    if (req.m < 0 || req.stride < 1) throw std::invalid_argument("orbit: need m >= 0 and stride >= 1");
    const BigInt Pn = st.alpha_next->num();
    const std::int64_t Q = st.q_next;
    const std::int64_t P = to_i64(Pn % BigInt(Q));
    const TorusPoint base = req.start_in_base ? wrap(req.start) : st.H_inv(wrap(req.start));
    OrbitInfo info;
    info.beyond_window = req.m > Q;
    const double Qd = static_cast<double>(Q);
    for (std::int64_t i = 0; i < req.m; i += req.stride) {
        double phase = static_cast<double>(phase_numerator(i, P, Q)) / Qd;
        TorusPoint b{wrap01(base.x + phase), base.y};
        fn(i, st.H(b));
        ++info.count;
    }
    return info;
}

std::vector<TorusPoint> orbit(const StageBundle& st, TorusPoint x, std::int64_t m) {
    std::vector<TorusPoint> out;
    out.reserve(static_cast<std::size_t>(std::max<std::int64_t>(m, 0)));
    for_each_orbit_point(st, {x, m, 1, false}, [&](std::int64_t, TorusPoint p) { out.push_back(p); });
    return out;
}

// ---------------------------------------------------------------- mixing sequence

MixingSequence mixing_sequence(const BigInt& q_n, const BigInt& p_next, const BigInt& q_next, int n) {
    if (q_n < 1 || q_next < 1) throw std::invalid_argument("mixing sequence: denominators must be positive");
    if (q_next > BigInt(std::int64_t(1) << 60)) throw std::invalid_argument("mixing sequence: q_{n+1} too large");
    const std::int64_t q = to_i64(q_n), Q = to_i64(q_next);
    const std::int64_t step = to_i64((q_n * p_next) % q_next);
    // |m q p / Q - 1/2 + k| <= q/Q  <=>  |2 r - Q| <= 2q  with r = m q p mod Q.
    __int128 r = 0;
    MixingSequence ms;
    bool found = false;
    for (std::int64_t m = 1; m <= Q; ++m) {
        r += step;
        if (r >= Q) r -= Q;
        __int128 d = 2 * r - Q;
        if (d < 0) d = -d;
        if (d <= 2 * static_cast<__int128>(q)) {
            ms.m = m;
            found = true;
            break;
        }
    }
    if (!found) throw std::logic_error("mixing sequence: no m found; alpha_{n+1} not in lowest terms?");
    // Symmetric residue of m alpha - 1/(2q) modulo 1/q.
    Rational w = (Rational(ms.m) * Rational(p_next, q_next) - Rational(1, 2 * q)) * Rational(q);
    Rational f = w - Rational(w.floor());
    if (f > Rational(1, 2)) f = f - Rational(1);
    ms.a = f / Rational(q);
    ms.growth_ok = q_next > BigInt(10) * n * n * q_n;
    ms.bound_ok = abs(ms.a) <= Rational(BigInt(1), q_next);
    return ms;
}

MixingSequence mixing_sequence(const StageBundle& st) {
    if (!st.alpha_next) throw std::logic_error("mixing sequence: stage has no successor");
    return mixing_sequence(BigInt(st.q), st.alpha_next->num(), st.alpha_next->den(), st.n);
}

// ---------------------------------------------------------------- growth diagnostics

TorusPoint r2_point(std::int64_t i, double shift_x, double shift_y) {
    constexpr double g = 1.32471795724474602596;
    constexpr double a1 = 1.0 / g, a2 = 1.0 / (g * g);
    // Index from 1 as in the usual R2 definition; i = 0 would return the bare shift, a grid corner.
    const double k = static_cast<double>(i + 1);
    return {wrap01(shift_x + std::fmod(k * a1, 1.0)), wrap01(shift_y + std::fmod(k * a2, 1.0))};
}

double estimate_sup_norm(const TorusMap& m, const std::vector<TorusPoint>& probes, std::int64_t samples) {
    double best = 0.0;
    for (std::int64_t i = 0; i < samples; ++i) best = std::max(best, m.jacobian(r2_point(i)).norm());
    for (const auto& p : probes) best = std::max(best, m.jacobian(wrap(p)).norm());
    return best;
}

nlohmann::json GrowthReport::to_json() const {
    nlohmann::json j;
    j["n"] = n;
    nlohmann::json a = nlohmann::json::array();
    for (const auto& c : checks)
        a.push_back({{"name", c.name}, {"satisfied", c.satisfied}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"note", c.note}});
    j["checks"] = a;
    return j;
}

namespace {

std::vector<TorusPoint> region_probes(const RegionCatalog& c, std::size_t per_family) {
    std::vector<TorusPoint> out;
    for (const auto& f : c.families) {
        std::size_t k = std::min(per_family, f.rects.size());
        for (std::size_t i = 0; i < k; ++i) {
            const Rect& r = f.rects[i * f.rects.size() / std::max<std::size_t>(k, 1)];
            out.push_back({(r.x0 + r.x1) / 2, (r.y0 + r.y1) / 2});
            out.push_back({r.x0 + (r.x1 - r.x0) * 0.1, r.y0 + (r.y1 - r.y0) * 0.9});
        }
    }
    return out;
}

}  // namespace

GrowthReport check_growth_conditions(const std::vector<StageBundle>& stages, int n, std::int64_t samples) {
    if (n < 1 || n > static_cast<int>(stages.size())) throw std::out_of_range("growth check: stage not built");
    const StageBundle& st = stages[static_cast<std::size_t>(n - 1)];
    const RotationSchedule& sc = *st.schedule;
    const ScheduleStage& ss = sc.stage(n);
    GrowthReport rep;
    rep.n = n;
    const bool next = sc.has(n + 1);
    const double qn = static_cast<double>(st.q);
    const double qn1 = next ? sc.stage(n + 1).q.convert_to<double>() : 0.0;
    const char* no_next = "no successor stage";

    double dH_prev = 1.0;
    if (n >= 2) {
        const StageBundle& pv = stages[static_cast<std::size_t>(n - 2)];
        dH_prev = estimate_sup_norm(pv.H, region_probes(pv.catalog, 32), samples);
    }
    double dg = 1.0;
    if (st.variant == Variant::A) dg = Mat2{1.0, double(shear_coefficient(n, st.q, st.params.sigma)), 0.0, 1.0}.norm();
    const double L = 2.0 * M_PI;

    rep.checks.push_back({"growth_10n2", next && sc.growth_10n2(n), qn1, 10.0 * n * n * qn, next ? "" : no_next});
    rep.checks.push_back({"growth_minimality", next && sc.growth_minimality(n), qn1, double(ss.l) * qn * qn,
                          next ? "" : no_next});
    rep.checks.push_back({"norm_below_log_q", dH_prev < std::log(qn), dH_prev, std::log(qn),
                          "sampled sup of ||DH_{n-1}|| against ln q_n"});
    const double lrhs = double(n) * n * dH_prev * dg * L;
    rep.checks.push_back({"l_condition", next && double(ss.l) > lrhs, double(ss.l), lrhs,
                          "uses the sampled C^0 norm for the C^{n-1} norm and L = 2 pi"});
    if (next) {
        double dH = estimate_sup_norm(st.H, region_probes(st.catalog, 32), samples);
        double gap = abs(sc.alpha(n + 1) - sc.alpha(n)).to_double();
        double rhs = 1.0 / (std::ldexp(1.0, n + 1) * double(ss.k) * 1.0 * qn * std::max(1.0, dH));
        rep.checks.push_back({"proximity", gap < rhs, gap, rhs,
                              "constant C set to 1 (unknown); |alpha_{n+1} - alpha_n| stands in for |alpha - alpha_n|"});
    } else {
        rep.checks.push_back({"proximity", false, 0.0, 0.0, no_next});
    }
    if (st.variant == Variant::A && next) {
        // Each minimality cell A_k has width e2 (1 - 4 e4) / (l q); spacing 1/q_{n+1} must fit inside.
        double need = double(ss.l) * qn / (st.eps.e2 * (1.0 - 4.0 * st.eps.e4));
        rep.checks.push_back({"cell_resolution", qn1 > need, qn1, need,
                              "orbit spacing below the width of one minimality cell"});
    }
    return rep;
}

}  // namespace abc
