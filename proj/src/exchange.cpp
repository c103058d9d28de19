#include "abc/exchange.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace abc {

const char* to_string(ExchangeVariant v) {
    switch (v) {
        case ExchangeVariant::C: return "C";
        case ExchangeVariant::D: return "D";
        case ExchangeVariant::E: return "E";
    }
    return "?";
}
const char* to_string(CellFamily f) { return f == CellFamily::Kept ? "kept" : "gap"; }
const char* to_string(Orientation o) { return o == Orientation::QuarterTurnCW ? "quarter-turn-cw" : "translate-rescale"; }

namespace {

constexpr double kAreaTol = 1e-12;

bool overlaps(const Rect& a, const Rect& b, double tol) {
    return std::min(a.x1, b.x1) - std::max(a.x0, b.x0) > tol && std::min(a.y1, b.y1) - std::max(a.y0, b.y0) > tol;
}

}  // namespace

RectExchange::RectExchange(ExchangeVariant variant, int n, std::int64_t q, std::int64_t s,
                           std::vector<ExchangeSegment> segs)
    : variant_(variant), n_(n), q_(q), s_(s), segs_(std::move(segs)) {
    if (n < 1 || q < 1 || s < 1) throw std::invalid_argument("exchange: need n, q, s >= 1");
    if (segs_.empty()) throw std::invalid_argument("exchange: no segments");
    std::stable_sort(segs_.begin(), segs_.end(),
                     [](const ExchangeSegment& a, const ExchangeSegment& b) { return a.src_y0 < b.src_y0; });
    double y = 0.0, area = 0.0;
    for (const auto& g : segs_) {
        if (std::fabs(g.src_y0 - y) > kAreaTol || !(g.src_y1 > g.src_y0))
            throw std::invalid_argument("exchange: source strips do not tile the column");
        const Rect& t = g.target;
        if (t.x0 < -kAreaTol || t.x1 > 1 + kAreaTol || t.y0 < -kAreaTol || t.y1 > 1 + kAreaTol || !(t.x1 > t.x0) ||
            !(t.y1 > t.y0))
            throw std::invalid_argument("exchange: target outside the column");
        if (std::fabs(t.area() - (g.src_y1 - g.src_y0)) > kAreaTol)
            throw std::invalid_argument("exchange: segment source and target areas differ");
        y = g.src_y1;
        area += t.area();
    }
    if (std::fabs(y - 1.0) > kAreaTol || std::fabs(area - 1.0) > 1e-11)
        throw std::invalid_argument("exchange: strips do not cover the column");
    for (std::size_t i = 0; i < segs_.size(); ++i)
        for (std::size_t j = i + 1; j < segs_.size(); ++j)
            if (overlaps(segs_[i].target, segs_[j].target, 1e-13))
                throw std::invalid_argument("exchange: target rectangles overlap");
    by_target_x_.resize(segs_.size());
    for (std::size_t i = 0; i < segs_.size(); ++i) by_target_x_[i] = i;
    std::sort(by_target_x_.begin(), by_target_x_.end(),
              [&](std::size_t a, std::size_t b) { return segs_[a].target.x0 < segs_[b].target.x0; });
}

std::size_t RectExchange::segment_at(double y) const {
    auto it = std::upper_bound(segs_.begin(), segs_.end(), y,
                               [](double v, const ExchangeSegment& g) { return v < g.src_y0; });
    return it == segs_.begin() ? 0 : static_cast<std::size_t>(it - segs_.begin()) - 1;
}

Rect RectExchange::rel_target(std::size_t segment, std::int64_t m) const {
    const ExchangeSegment& g = segs_[segment];
    Rect r = g.target;
    double sd = static_cast<double>(s_);
    if (g.stacking == Stacking::Vertical) {
        double h = r.y1 - r.y0;
        double y0 = r.y0 + h * (static_cast<double>(m) / sd);
        double y1 = m + 1 == s_ ? r.y1 : r.y0 + h * (static_cast<double>(m + 1) / sd);
        return {r.x0, r.x1, y0, y1};
    }
    double w = r.x1 - r.x0;
    double x0 = r.x0 + w * (static_cast<double>(m) / sd);
    double x1 = m + 1 == s_ ? r.x1 : r.x0 + w * (static_cast<double>(m + 1) / sd);
    return {x0, x1, r.y0, r.y1};
}

Rect RectExchange::cell_source(std::int64_t column, std::size_t segment, std::int64_t m) const {
    double qs = static_cast<double>(q_) * static_cast<double>(s_);
    double i1 = static_cast<double>(column * s_ + m);
    return {i1 / qs, (i1 + 1) / qs, segs_[segment].src_y0, segs_[segment].src_y1};
}

Rect RectExchange::cell_target(std::int64_t column, std::size_t segment, std::int64_t m) const {
    Rect r = rel_target(segment, m);
    double qd = static_cast<double>(q_), c = static_cast<double>(column);
    return {(c + r.x0) / qd, (c + r.x1) / qd, r.y0, r.y1};
}

RectExchange::Located RectExchange::locate_source(TorusPoint p) const {
    ScaledFrac f = scaled_frac(p.x, static_cast<double>(q_) * static_cast<double>(s_));
    std::int64_t qs = q_ * s_;
    std::int64_t i1 = ((f.index % qs) + qs) % qs;
    Located l;
    l.column = i1 / s_;
    l.m = i1 % s_;
    l.xi = f.frac;
    l.segment = segment_at(p.y);
    const ExchangeSegment& g = segs_[l.segment];
    l.eta = std::clamp((p.y - g.src_y0) / (g.src_y1 - g.src_y0), 0.0, std::nextafter(1.0, 0.0));
    return l;
}

RectExchange::Located RectExchange::locate_in_target(std::int64_t column, std::size_t seg, double u, double y) const {
    Located l;
    l.column = column;
    l.segment = seg;
    const ExchangeSegment& g = segs_[seg];
    const Rect& t = g.target;
    double pos = g.stacking == Stacking::Vertical ? (y - t.y0) / (t.y1 - t.y0) : (u - t.x0) / (t.x1 - t.x0);
    auto m = static_cast<std::int64_t>(std::floor(pos * static_cast<double>(s_)));
    l.m = std::clamp<std::int64_t>(m, 0, s_ - 1);
    Rect r = rel_target(seg, l.m);
    double a = (u - r.x0) / (r.x1 - r.x0), b = (y - r.y0) / (r.y1 - r.y0);
    if (g.orientation == Orientation::TranslateRescale) {
        l.xi = a;
        l.eta = b;
    } else {
        l.eta = a;
        l.xi = 1.0 - b;
    }
    l.xi = std::clamp(l.xi, 0.0, std::nextafter(1.0, 0.0));
    l.eta = std::clamp(l.eta, 0.0, std::nextafter(1.0, 0.0));
    return l;
}

TorusPoint RectExchange::source_point(const Located& l) const {
    const ExchangeSegment& g = segs_[l.segment];
    double qs = static_cast<double>(q_) * static_cast<double>(s_);
    double x = (static_cast<double>(l.column * s_ + l.m) + l.xi) / qs;
    double y = g.src_y0 + l.eta * (g.src_y1 - g.src_y0);
    return {wrap01(x), y};
}

RectExchange::Located RectExchange::locate_target(TorusPoint p) const {
    ScaledFrac f = scaled_frac(p.x, static_cast<double>(q_));
    const std::int64_t column = ((f.index % q_) + q_) % q_;
    const double u = f.frac, y = p.y;
    // Rounding of frac(x q) is about q ulp(x); targets within that distance are all candidates.
    const double tol = 1e-12 * std::max(1.0, static_cast<double>(q_));
    std::vector<std::size_t> near;
    std::size_t best = segs_.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t idx : by_target_x_) {
        const Rect& t = segs_[idx].target;
        if (t.x0 > u + tol) break;
        double d = std::max({t.x0 - u, u - t.x1, t.y0 - y, y - t.y1, 0.0});
        if (d <= tol) near.push_back(idx);
        if (d < best_d) {
            best_d = d;
            best = idx;
        }
    }
    if (near.size() == 1) return locate_in_target(column, near.front(), u, y);
    if (near.empty()) return locate_in_target(column, best == segs_.size() ? by_target_x_.front() : best, u, y);
    // Edge case: keep the candidate whose forward image reproduces p.
    Located pick{};
    double pick_d = std::numeric_limits<double>::infinity();
    for (std::size_t idx : near) {
        Located l = locate_in_target(column, idx, u, y);
        double d = torus_distance(eval(source_point(l)), p);
        if (d < pick_d) {
            pick_d = d;
            pick = l;
        }
    }
    return pick;
}

TorusPoint RectExchange::eval(TorusPoint p) const {
    Located l = locate_source(p);
    const ExchangeSegment& g = segs_[l.segment];
    Rect r = rel_target(l.segment, l.m);
    double a = l.xi, b = l.eta;
    if (g.orientation == Orientation::QuarterTurnCW) {
        a = l.eta;
        b = 1.0 - l.xi;
    }
    double X = r.x0 + a * (r.x1 - r.x0), Y = r.y0 + b * (r.y1 - r.y0);
    return {wrap01((static_cast<double>(l.column) + X) / static_cast<double>(q_)), wrap01(Y)};
}

TorusPoint RectExchange::eval_inverse(TorusPoint p) const { return source_point(locate_target(p)); }

namespace {

Mat2 piece_jacobian(const Rect& src, const Rect& dst, Orientation o) {
    double as = src.x1 - src.x0, bs = src.y1 - src.y0, at = dst.x1 - dst.x0, bt = dst.y1 - dst.y0;
    if (o == Orientation::TranslateRescale) return {at / as, 0.0, 0.0, bt / bs};
    return {0.0, at / bs, -bt / as, 0.0};
}

Mat2 inverse_of(const Mat2& m) {
    double d = m.det();
    return {m.d / d, -m.b / d, -m.c / d, m.a / d};
}

}  // namespace

Mat2 RectExchange::jacobian(TorusPoint p) const {
    Located l = locate_source(p);
    return piece_jacobian(cell_source(l.column, l.segment, l.m), cell_target(l.column, l.segment, l.m),
                          segs_[l.segment].orientation);
}

Mat2 RectExchange::jacobian_inverse(TorusPoint p) const {
    Located l = locate_target(p);
    return inverse_of(piece_jacobian(cell_source(l.column, l.segment, l.m), cell_target(l.column, l.segment, l.m),
                                     segs_[l.segment].orientation));
}

std::vector<ExchangePiece> RectExchange::pieces(std::size_t max_pieces) const {
    double total = static_cast<double>(q_) * static_cast<double>(s_) * static_cast<double>(segs_.size());
    if (total > static_cast<double>(max_pieces)) throw std::length_error("exchange piece table too large to enumerate");
    std::vector<ExchangePiece> out;
    out.reserve(static_cast<std::size_t>(total));
    for (std::int64_t c = 0; c < q_; ++c)
        for (std::size_t g = 0; g < segs_.size(); ++g)
            for (std::int64_t m = 0; m < s_; ++m)
                out.push_back({c, m, g, cell_source(c, g, m), cell_target(c, g, m), segs_[g].orientation});
    return out;
}

nlohmann::json RectExchange::to_json() const {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& g : segs_) {
        segs.push_back({{"family", to_string(g.family)},
                        {"level", g.level},
                        {"index", g.index},
                        {"half", g.half},
                        {"src", {g.src_y0, g.src_y1}},
                        {"target", {g.target.x0, g.target.x1, g.target.y0, g.target.y1}},
                        {"stacking", g.stacking == Stacking::Vertical ? "vertical" : "horizontal"},
                        {"orientation", to_string(g.orientation)}});
    }
    return {{"variant", to_string(variant_)}, {"n", n_}, {"q", q_}, {"s", s_}, {"segments", segs}, {"notes", notes}};
}

RectExchange RectExchange::from_json(const nlohmann::json& j) {
    std::string v = j.at("variant").get<std::string>();
    ExchangeVariant var = v == "C" ? ExchangeVariant::C : v == "D" ? ExchangeVariant::D : ExchangeVariant::E;
    std::vector<ExchangeSegment> segs;
    for (const auto& s : j.at("segments")) {
        ExchangeSegment g;
        g.family = s.at("family").get<std::string>() == "kept" ? CellFamily::Kept : CellFamily::Gap;
        g.level = s.at("level").get<int>();
        g.index = s.at("index").get<std::uint64_t>();
        g.half = s.at("half").get<int>();
        g.src_y0 = s.at("src")[0].get<double>();
        g.src_y1 = s.at("src")[1].get<double>();
        const auto& t = s.at("target");
        g.target = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>(), t[3].get<double>()};
        g.stacking = s.at("stacking").get<std::string>() == "vertical" ? Stacking::Vertical : Stacking::Horizontal;
        g.orientation = s.at("orientation").get<std::string>() == "quarter-turn-cw" ? Orientation::QuarterTurnCW
                                                                                   : Orientation::TranslateRescale;
        segs.push_back(g);
    }
    RectExchange re(var, j.at("n").get<int>(), j.at("q").get<std::int64_t>(), j.at("s").get<std::int64_t>(),
                    std::move(segs));
    re.notes = j.value("notes", std::vector<std::string>{});
    return re;
}

namespace {

// Kept strips become full-height columns in Cantor order; level-k gaps share the column
// [K_k, K_k + G_k) with one horizontal band per gap, band height proportional to gap length.
std::vector<ExchangeSegment> layout_cd(const CantorStage& st) {
    int n = st.depth;
    std::vector<ExchangeSegment> segs;
    double x = 0.0;
    for (std::uint64_t l = 0; l < st.kept.size(); ++l) {
        const Interval& I = st.kept[l];
        ExchangeSegment g;
        g.family = CellFamily::Kept;
        g.level = n;
        g.index = l;
        g.src_y0 = I.lo;
        g.src_y1 = I.hi;
        g.target = {x, x + I.length(), 0.0, 1.0};
        g.stacking = Stacking::Vertical;
        g.orientation = Orientation::QuarterTurnCW;
        segs.push_back(g);
        x += I.length();
    }
    // K_k = 1 - sum_{j <= k} G_j is the kept total at depth k.
    std::vector<double> G(n + 1, 0.0), K(n + 1, 1.0);
    for (int k = 1; k <= n; ++k) G[k] = st.gap_length(k);
    for (int k = 1; k <= n; ++k) K[k] = K[k - 1] - G[k];
    for (int k = n; k >= 1; --k) {
        const auto& gaps = st.gaps[k - 1];
        double x0 = K[k], x1 = k == 1 ? 1.0 : K[k] + G[k];
        if (k == 1) {
            const Interval& J = gaps[0];
            double mid = 0.5 * (J.lo + J.hi);
            for (int h = 0; h < 2; ++h) {
                ExchangeSegment g;
                g.family = CellFamily::Gap;
                g.level = 1;
                g.index = 0;
                g.half = h;
                g.src_y0 = h == 0 ? J.lo : mid;
                g.src_y1 = h == 0 ? mid : J.hi;
                g.target = {x0, x1, 0.5 * h, 0.5 * (h + 1)};
                segs.push_back(g);
            }
            continue;
        }
        double acc = 0.0;
        for (std::uint64_t l = 0; l < gaps.size(); ++l) {
            const Interval& J = gaps[l];
            ExchangeSegment g;
            g.family = CellFamily::Gap;
            g.level = k;
            g.index = l;
            g.src_y0 = J.lo;
            g.src_y1 = J.hi;
            double b0 = acc / G[k];
            acc += J.length();
            double b1 = l + 1 == gaps.size() ? 1.0 : acc / G[k];
            g.target = {x0, x1, b0, b1};
            segs.push_back(g);
        }
    }
    return segs;
}

}  // namespace

RectExchange make_exchange_C(int n, std::int64_t q, std::int64_t s) {
    CantorStage st = cantor_stage(CantorSpec::middle_third(), n);
    return RectExchange(ExchangeVariant::C, n, q, s, layout_cd(st));
}

RectExchange make_exchange_D(int n, std::int64_t q, std::int64_t s, const CantorSpec& lambda) {
    CantorStage st = cantor_stage(lambda, n);
    RectExchange re(ExchangeVariant::D, n, q, s, layout_cd(st));
    re.notes.push_back("level-k gap bands have height |J|/G_k (area-forced); uniform 1/2^(n-1) bands do not tile");
    return re;
}

namespace {

struct Container {
    Rect rect;
    double capacity;
};

// Gap containers of the staircase layout, in pouring order: the full-height gap block
// [0, 1 - X), then the holes right of each kept band.
std::vector<Container> e_containers(const CantorStage& st, double& X) {
    int n = st.depth;
    double scale = std::ldexp(1.0, n), maxlen = 0.0;
    for (const auto& I : st.kept) maxlen = std::max(maxlen, I.length());
    X = scale * maxlen;
    std::vector<Container> cs;
    if (1.0 - X > 0.0) cs.push_back({{0.0, 1.0 - X, 0.0, 1.0}, 1.0 - X});
    for (std::uint64_t l = 0; l < st.kept.size(); ++l) {
        double x0 = 1.0 - X + scale * st.kept[l].length();
        if (1.0 - x0 <= 1e-15) continue;
        double y0 = static_cast<double>(l) / scale, y1 = static_cast<double>(l + 1) / scale;
        cs.push_back({{x0, 1.0, y0, y1}, (1.0 - x0) * (y1 - y0)});
    }
    return cs;
}

}  // namespace

RectExchange make_exchange_E(int n, std::int64_t q, std::int64_t s, const CantorSpec& lambda) {
    CantorStage st = cantor_stage(lambda, n);
    double scale = std::ldexp(1.0, n);
    double X = 0.0;
    std::vector<Container> cs = e_containers(st, X);
    if (X > 1.0 + 1e-12) throw std::invalid_argument("variant E layout: 2^n max|I| exceeds 1");
    std::vector<ExchangeSegment> segs;
    for (std::uint64_t l = 0; l < st.kept.size(); ++l) {
        ExchangeSegment g;
        g.family = CellFamily::Kept;
        g.level = n;
        g.index = l;
        g.src_y0 = st.kept[l].lo;
        g.src_y1 = st.kept[l].hi;
        g.target = {1.0 - X, 1.0 - X + scale * st.kept[l].length(), l / scale, (l + 1) / scale};
        g.stacking = Stacking::Vertical;
        segs.push_back(g);
    }
    std::size_t c = 0;
    double used = 0.0;  // area already poured into container c
    std::vector<std::string> spilled;
    for (int k = 1; k <= n; ++k) {
        for (std::uint64_t l = 0; l < st.gaps[k - 1].size(); ++l) {
            const Interval& J = st.gaps[k - 1][l];
            double y = J.lo;
            bool last_gap = k == n && l + 1 == st.gaps[k - 1].size();
            while (y < J.hi) {
                if (c >= cs.size()) throw std::logic_error("variant E layout: gap material exceeds containers");
                const Container& ct = cs[c];
                double room = ct.capacity - used;
                double take = std::min(room, J.hi - y);
                bool fills = room - take <= 1e-15;
                if (fills && c + 1 == cs.size() && !last_gap && J.hi - y - take > 1e-15)
                    throw std::logic_error("variant E layout: containers exhausted early");
                double h = ct.rect.y1 - ct.rect.y0;
                ExchangeSegment g;
                g.family = CellFamily::Gap;
                g.level = k;
                g.index = l;
                g.src_y0 = y;
                g.src_y1 = (J.hi - y - take <= 1e-15) ? J.hi : y + take;
                double x0 = ct.rect.x0 + used / h;
                double x1 = fills ? ct.rect.x1 : x0 + (g.src_y1 - g.src_y0) / h;
                g.target = {x0, x1, ct.rect.y0, ct.rect.y1};
                g.stacking = Stacking::Horizontal;
                segs.push_back(g);
                if (c > 0) spilled.push_back("J^" + std::to_string(k) + "_" + std::to_string(l));
                used += g.src_y1 - g.src_y0;
                y = g.src_y1;
                if (fills) {
                    ++c;
                    used = 0.0;
                }
            }
        }
    }
    RectExchange re(ExchangeVariant::E, n, q, s, std::move(segs));
    spilled.erase(std::unique(spilled.begin(), spilled.end()), spilled.end());
    std::ostringstream os;
    os << "kept bands start at x = 1 - 2^n max|I| = " << 1.0 - X;
    re.notes.push_back(os.str());
    if (!spilled.empty()) {
        std::string msg = "gap strips poured beside kept bands:";
        for (const auto& sname : spilled) msg += " " + sname;
        re.notes.push_back(msg);
    }
    return re;
}

RectExchange build_exchange(ExchangeVariant v, int n, std::int64_t q, std::int64_t s, const CantorSpec& spec) {
    switch (v) {
        case ExchangeVariant::C: return make_exchange_C(n, q, s);
        case ExchangeVariant::D: return make_exchange_D(n, q, s, spec);
        case ExchangeVariant::E: return make_exchange_E(n, q, s, spec);
    }
    throw std::invalid_argument("unknown exchange variant");
}

TorusPoint exchange_eval(const RectExchange& re, TorusPoint p) { return re.eval(p); }

namespace {

class ExchangeNode final : public MapNode {
public:
    explicit ExchangeNode(std::shared_ptr<const RectExchange> re) : re_(std::move(re)) {}
    TorusPoint forward(TorusPoint p) const override { return re_->eval(p); }
    TorusPoint backward(TorusPoint p) const override { return re_->eval_inverse(p); }
    Mat2 jac_forward(TorusPoint p) const override { return re_->jacobian(p); }
    Mat2 jac_backward(TorusPoint p) const override { return re_->jacobian_inverse(p); }
    Json describe() const override { return {{"type", "exchange"}, {"exchange", re_->to_json()}}; }

private:
    std::shared_ptr<const RectExchange> re_;
};

}  // namespace

TorusMap exchange_to_map(std::shared_ptr<const RectExchange> re) {
    return TorusMap(std::make_shared<ExchangeNode>(std::move(re))).labelled("phi_tilde");
}

CellImage perm_image_bruteforce(ExchangeVariant v, int n, std::int64_t q, std::int64_t s, const CantorSpec& spec,
                                const CellIndex& cell) {
    if (cell.i1 < 0 || cell.i1 >= s * q) throw std::out_of_range("cell column index out of range");
    if (cell.family == CellFamily::Kept && (cell.level != n || cell.i2 >= (std::uint64_t(1) << n)))
        throw std::out_of_range("kept cell index out of range");
    if (cell.family == CellFamily::Gap) {
        if (cell.level < 1 || cell.level > n) throw std::out_of_range("gap level out of range");
        std::uint64_t count = cell.level == 1 ? 2 : (std::uint64_t(1) << (cell.level - 1));
        if (v == ExchangeVariant::E && cell.level == 1) count = 1;
        if (cell.i2 >= count) throw std::out_of_range("gap index out of range");
    }
    CellImage out;
    double qd = static_cast<double>(q), sd = static_cast<double>(s);
    std::int64_t j1 = cell.i1 / s, m = cell.i1 % s;
    out.j1 = j1;
    double col = static_cast<double>(j1) / qd;

    if (v == ExchangeVariant::C) {
        double p3n = std::pow(3.0, n);
        if (cell.family == CellFamily::Kept) {
            out.j2 = static_cast<std::int64_t>(cell.i2);
            out.j3 = m;
            out.targets.push_back({col + out.j2 / (p3n * qd), col + (out.j2 + 1) / (p3n * qd), out.j3 / sd,
                                   (out.j3 + 1) / sd});
            return out;
        }
        int k = cell.level;
        double p2k = std::ldexp(1.0, k), p3k = std::pow(3.0, k);
        if (k >= 2) {
            out.j2 = static_cast<std::int64_t>(cell.i2) * s + m;
            double h = 1.0 / (sd * std::ldexp(1.0, k - 1));
            out.targets.push_back({col + p2k / (p3k * qd), col + p2k / (p3k * qd) + (p2k / 2) / (p3k * qd),
                                   out.j2 * h, (out.j2 + 1) * h});
        } else {
            out.j2 = cell.i2 == 0 ? m : s + m;
            out.targets.push_back({col + 2.0 / (3.0 * qd), col + 1.0 / qd, out.j2 / (2 * sd), (out.j2 + 1) / (2 * sd)});
        }
        return out;
    }

    CantorStage st = cantor_stage(spec, n);
    if (v == ExchangeVariant::D) {
        if (cell.family == CellFamily::Kept) {
            double before = 0.0;
            for (std::uint64_t j = 0; j < cell.i2; ++j) before += st.kept[j].hi - st.kept[j].lo;
            double w = st.kept[cell.i2].hi - st.kept[cell.i2].lo;
            out.j2 = static_cast<std::int64_t>(cell.i2);
            out.j3 = m;
            out.targets.push_back({col + before / qd, col + (before + w) / qd, m / sd, (m + 1) / sd});
            return out;
        }
        int k = cell.level;
        // Kept total at depth k equals one minus every gap of level <= k.
        double removed = 0.0, Gk = 0.0;
        for (int kk = 1; kk <= k; ++kk)
            for (const auto& J : st.gaps[kk - 1]) removed += J.hi - J.lo;
        for (const auto& J : st.gaps[k - 1]) Gk += J.hi - J.lo;
        double Kk = 1.0 - removed;
        double xl = col + Kk / qd, xr = col + (Kk + Gk) / qd;
        if (k == 1) {
            out.j2 = cell.i2 == 0 ? m : s + m;
            out.targets.push_back({xl, xr, out.j2 / (2 * sd), (out.j2 + 1) / (2 * sd)});
            return out;
        }
        double below = 0.0;
        for (std::uint64_t j = 0; j < cell.i2; ++j) below += st.gaps[k - 1][j].hi - st.gaps[k - 1][j].lo;
        double len = st.gaps[k - 1][cell.i2].hi - st.gaps[k - 1][cell.i2].lo;
        out.j2 = static_cast<std::int64_t>(cell.i2) * s + m;
        out.targets.push_back({xl, xr, (below + m * len / sd) / Gk, (below + (m + 1) * len / sd) / Gk});
        return out;
    }

    // Variant E: kept strips go to uniform bands; gap strips are poured in (level, index)
    // order into the gap block and then into the holes right of each kept band.
    double scale = std::ldexp(1.0, n), maxlen = 0.0;
    for (const auto& I : st.kept) maxlen = std::max(maxlen, I.hi - I.lo);
    double X = scale * maxlen;
    if (cell.family == CellFamily::Kept) {
        double w = scale * (st.kept[cell.i2].hi - st.kept[cell.i2].lo);
        double band = 1.0 / scale, h = band / sd;
        out.j2 = static_cast<std::int64_t>(cell.i2);
        out.j3 = m;
        double y0 = cell.i2 * band;
        out.targets.push_back({col + (1.0 - X) / qd, col + (1.0 - X + w) / qd, y0 + m * h, y0 + (m + 1) * h});
        return out;
    }
    double start = 0.0;
    for (int kk = 1; kk < cell.level; ++kk)
        for (const auto& J : st.gaps[kk - 1]) start += J.hi - J.lo;
    for (std::uint64_t j = 0; j < cell.i2; ++j) start += st.gaps[cell.level - 1][j].hi - st.gaps[cell.level - 1][j].lo;
    double len = st.gaps[cell.level - 1][cell.i2].hi - st.gaps[cell.level - 1][cell.i2].lo;
    double end = start + len;
    out.j2 = static_cast<std::int64_t>(cell.i2);
    // Container list: (x0, x1, y0, y1) with cumulative area offsets.
    struct Box {
        double x0, x1, y0, y1;
    };
    std::vector<Box> boxes;
    if (1.0 - X > 0.0) boxes.push_back({0.0, 1.0 - X, 0.0, 1.0});
    for (std::uint64_t l = 0; l < st.kept.size(); ++l) {
        double x0 = 1.0 - X + scale * (st.kept[l].hi - st.kept[l].lo);
        if (1.0 - x0 > 1e-15) boxes.push_back({x0, 1.0, l / scale, (l + 1) / scale});
    }
    double offset = 0.0;
    for (const auto& b : boxes) {
        double h = b.y1 - b.y0, cap = (b.x1 - b.x0) * h;
        double lo = std::max(start, offset), hi = std::min(end, offset + cap);
        if (hi - lo > 1e-15) {
            double x0 = b.x0 + (lo - offset) / h, x1 = b.x0 + (hi - offset) / h;
            double w = (x1 - x0) / sd;
            out.targets.push_back({col + (x0 + m * w) / qd, col + (x0 + (m + 1) * w) / qd, b.y0, b.y1});
        }
        offset += cap;
    }
    return out;
}

OracleComparison compare_with_oracle(const RectExchange& re, const CantorSpec& spec, std::size_t max_pieces) {
    // A poured strip spans several segments, so pieces are grouped by source cell index.
    using Key = std::tuple<std::int64_t, int, int, std::uint64_t>;  // i1, family, level, i2
    struct Cell {
        std::vector<Rect> targets;
        double source_area = 0.0;
    };
    std::map<Key, Cell> cells;
    OracleComparison out;
    double src_area = 0.0, tgt_area = 0.0;
    const auto& segs = re.segments();
    for (const auto& pc : re.pieces(max_pieces)) {
        const ExchangeSegment& sg = segs[pc.segment];
        Key k{pc.column * re.s() + pc.cell, static_cast<int>(sg.family), sg.level,
              sg.half >= 0 ? std::uint64_t(sg.half) : sg.index};
        Cell& c = cells[k];
        c.targets.push_back(pc.target);
        c.source_area += pc.source.area();
        src_area += pc.source.area();
        tgt_area += pc.target.area();
    }
    out.area_imbalance = std::fabs(src_area - tgt_area) + std::fabs(src_area - 1.0);
    auto less = [](const Rect& a, const Rect& b) { return std::tie(a.y0, a.x0) < std::tie(b.y0, b.x0); };
    for (auto& [key, c] : cells) {
        auto [i1, fam, level, i2] = key;
        CellImage want = perm_image_bruteforce(re.variant(), re.n(), re.q(), re.s(), spec,
                                               CellIndex{static_cast<CellFamily>(fam), level, i1, i2});
        ++out.cells;
        std::sort(c.targets.begin(), c.targets.end(), less);
        std::sort(want.targets.begin(), want.targets.end(), less);
        bool same = c.targets.size() == want.targets.size();
        for (std::size_t i = 0; same && i < c.targets.size(); ++i) {
            const Rect &a = c.targets[i], &b = want.targets[i];
            same = std::fabs(a.x0 - b.x0) < 1e-12 && std::fabs(a.x1 - b.x1) < 1e-12 && std::fabs(a.y0 - b.y0) < 1e-12 &&
                   std::fabs(a.y1 - b.y1) < 1e-12;
        }
        double area = 0.0;
        for (const auto& r : c.targets) area += r.area();
        same = same && std::fabs(area - c.source_area) <= 1e-12 * c.source_area;
        out.mismatches += !same;
    }
    return out;
}

}  // namespace abc
