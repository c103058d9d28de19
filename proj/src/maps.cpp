#include "abc/maps.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace abc {

double Mat2::norm() const {
    // Largest singular value from the eigenvalues of M^T M.
    double p = a * a + c * c, q = a * b + c * d, r = b * b + d * d;
    double tr = p + r, disc = std::sqrt(std::max(0.0, (p - r) * (p - r) + 4 * q * q));
    return std::sqrt(0.5 * (tr + disc));
}

namespace {

class IdentityNode final : public MapNode {
public:
    TorusPoint forward(TorusPoint p) const override { return p; }
    TorusPoint backward(TorusPoint p) const override { return p; }
    Mat2 jac_forward(TorusPoint) const override { return {}; }
    Mat2 jac_backward(TorusPoint) const override { return {}; }
    Json describe() const override { return {{"type", "identity"}}; }
};

class TranslationNode final : public MapNode {
public:
    TranslationNode(Rational tx, Rational ty)
        : rx_(rat_mod1(tx)), ry_(rat_mod1(ty)), tx_(rx_.to_double()), ty_(ry_.to_double()) {}
    TorusPoint forward(TorusPoint p) const override { return {wrap01(p.x + tx_), wrap01(p.y + ty_)}; }
    TorusPoint backward(TorusPoint p) const override { return {wrap01(p.x - tx_), wrap01(p.y - ty_)}; }
    Mat2 jac_forward(TorusPoint) const override { return {}; }
    Mat2 jac_backward(TorusPoint) const override { return {}; }
    Json describe() const override { return {{"type", "translation"}, {"tx", rx_.str()}, {"ty", ry_.str()}}; }

private:
    Rational rx_, ry_;
    double tx_, ty_;
};

class ShearXNode final : public MapNode {
public:
    explicit ShearXNode(std::int64_t c) : c_(c) {}
    TorusPoint forward(TorusPoint p) const override { return apply(p, c_); }
    TorusPoint backward(TorusPoint p) const override { return apply(p, -c_); }
    Mat2 jac_forward(TorusPoint) const override { return {1.0, double(c_), 0.0, 1.0}; }
    Mat2 jac_backward(TorusPoint) const override { return {1.0, -double(c_), 0.0, 1.0}; }
    Json describe() const override { return {{"type", "shear_x"}, {"c", c_}}; }

private:
    static TorusPoint apply(TorusPoint p, std::int64_t c) {
        double cy = static_cast<double>(c) * p.y;
        return {wrap01(p.x + wrap01(cy)), p.y};
    }
    std::int64_t c_;
};

// Square twist about (1/2,1/2); positive direction is clockwise.
class TwistNode final : public MapNode {
public:
    explicit TwistNode(double eps) : eps_(eps) {}
    TorusPoint forward(TorusPoint p) const override { return apply(p, +1); }
    TorusPoint backward(TorusPoint p) const override { return apply(p, -1); }
    Mat2 jac_forward(TorusPoint p) const override { return jac(p, +1); }
    Mat2 jac_backward(TorusPoint p) const override { return jac(p, -1); }
    Json describe() const override { return {{"type", "twist"}, {"eps", eps_}}; }

private:
    // Fraction of a quarter turn applied on the sup-norm level set of radius s.
    double beta(double s) const {
        if (s <= 0.5 - 2 * eps_) return 1.0;
        if (s >= 0.5 - eps_) return 0.0;
        double w = ((0.5 - eps_) - s) / eps_;
        return w * w * (3.0 - 2.0 * w);
    }
    double beta_prime(double s) const {
        if (s <= 0.5 - 2 * eps_ || s >= 0.5 - eps_) return 0.0;
        double w = ((0.5 - eps_) - s) / eps_;
        return -6.0 * w * (1.0 - w) / eps_;
    }
    // Clockwise arc parameter along the level square, starting at the top-right corner.
    static double arc(double u, double v, double s, int& side) {
        if (std::fabs(u) >= std::fabs(v)) {
            if (u > 0) { side = 0; return s - v; }
            side = 2;
            return 5 * s + v;
        }
        if (v < 0) { side = 1; return 3 * s - u; }
        side = 3;
        return 7 * s + u;
    }

    TorusPoint apply(TorusPoint p, int dir) const {
        double u = p.x - 0.5, v = p.y - 0.5;
        double s = std::max(std::fabs(u), std::fabs(v));
        double b = beta(s);
        if (b == 0.0) return p;
        if (b == 1.0) return dir > 0 ? TorusPoint{0.5 + v, 0.5 - u} : TorusPoint{0.5 - v, 0.5 + u};
        int side;
        double per = 8 * s;
        double l = arc(u, v, s, side) + dir * b * 2 * s;
        l = std::fmod(l, per);
        if (l < 0) l += per;
        int k = std::min(3, static_cast<int>(l / (2 * s)));
        double r = l - 2 * s * k;
        switch (k) {
            case 0: return {0.5 + s, 0.5 + s - r};
            case 1: return {0.5 + s - r, 0.5 - s};
            case 2: return {0.5 - s, 0.5 - s + r};
            default: return {0.5 - s + r, 0.5 + s};
        }
    }

    Mat2 jac(TorusPoint p, int dir) const {
        double u = p.x - 0.5, v = p.y - 0.5;
        double s = std::max(std::fabs(u), std::fabs(v));
        double b = beta(s);
        if (b == 0.0) return {};
        if (b == 1.0) return dir > 0 ? Mat2{0, 1, -1, 0} : Mat2{0, -1, 1, 0};
        int side;
        double l = arc(u, v, s, side);
        // Rows of D(s, theta) with theta = l/(8s).
        Mat2 dpsi;
        if (side == 0 || side == 2) {
            dpsi = {side == 0 ? 1.0 : -1.0, 0.0, v / (8 * u * u), -1.0 / (8 * u)};
        } else {
            dpsi = {0.0, side == 3 ? 1.0 : -1.0, 1.0 / (8 * v), -u / (8 * v * v)};
        }
        Mat2 twist{1.0, 0.0, dir * beta_prime(s) / 4.0, 1.0};
        double per = 8 * s;
        double lp = std::fmod(l + dir * b * 2 * s, per);
        if (lp < 0) lp += per;
        int k = std::min(3, static_cast<int>(lp / (2 * s)));
        double th = lp / per;
        double m = 1.0 - 8 * th + 2 * k;
        // Columns d/ds and d/dtheta' of the inverse parametrization.
        Mat2 dinv;
        switch (k) {
            case 0: dinv = {1.0, 0.0, m, -8 * s}; break;
            case 1: dinv = {m, -8 * s, -1.0, 0.0}; break;
            case 2: dinv = {-1.0, 0.0, -m, 8 * s}; break;
            default: dinv = {-m, 8 * s, 1.0, 0.0}; break;
        }
        return dinv * twist * dpsi;
    }

    double eps_;
};

class BlockNode final : public MapNode {
public:
    BlockNode(TorusMap inner, AffineChart chart, Rect region, std::int64_t periods)
        : inner_(std::move(inner)), chart_(chart), region_(region), n_(periods) {
        double nd = static_cast<double>(n_);
        t0_ = region_.x0 * nd;
        t1_ = region_.x1 * nd;
        kx_ = chart_.sx / nd;
    }
    TorusPoint forward(TorusPoint p) const override { return apply(p, false); }
    TorusPoint backward(TorusPoint p) const override { return apply(p, true); }
    Mat2 jac_forward(TorusPoint p) const override { return jac(p, false); }
    Mat2 jac_backward(TorusPoint p) const override { return jac(p, true); }
    Json describe() const override {
        return {{"type", "block"},
                {"chart", {chart_.sx, chart_.sy, chart_.tx, chart_.ty}},
                {"region", {region_.x0, region_.x1, region_.y0, region_.y1}},
                {"periods", n_},
                {"inner", inner_.to_json()}};
    }

private:
    bool active(const ScaledFrac& f, double y) const {
        return f.frac >= t0_ && f.frac < t1_ && y >= region_.y0 && y < region_.y1;
    }
    TorusPoint apply(TorusPoint p, bool inv) const {
        ScaledFrac f = scaled_frac(p.x, static_cast<double>(n_));
        if (!active(f, p.y)) return p;
        TorusPoint c{kx_ * f.frac + chart_.tx, chart_.sy * p.y + chart_.ty};
        TorusPoint d = inv ? inner_.inverse_eval(c) : inner_(c);
        if (d.x == c.x && d.y == c.y) return p;
        double t = (d.x - chart_.tx) / kx_;
        return {wrap01((static_cast<double>(f.index) + t) / static_cast<double>(n_)), (d.y - chart_.ty) / chart_.sy};
    }
    double det_forward(TorusPoint p) const override { return det(p, false); }
    double det_backward(TorusPoint p) const override { return det(p, true); }
    double det(TorusPoint p, bool inv) const {
        ScaledFrac f = scaled_frac(p.x, static_cast<double>(n_));
        if (!active(f, p.y)) return 1.0;
        TorusPoint c{kx_ * f.frac + chart_.tx, chart_.sy * p.y + chart_.ty};
        return inv ? inner_.inverse().jacobian_det(c) : inner_.jacobian_det(c);
    }
    Mat2 jac(TorusPoint p, bool inv) const {
        ScaledFrac f = scaled_frac(p.x, static_cast<double>(n_));
        if (!active(f, p.y)) return {};
        TorusPoint c{kx_ * f.frac + chart_.tx, chart_.sy * p.y + chart_.ty};
        Mat2 j = inv ? inner_.inverse().jacobian(c) : inner_.jacobian(c);
        return {j.a, j.b * chart_.sy / chart_.sx, j.c * chart_.sx / chart_.sy, j.d};
    }

    TorusMap inner_;
    AffineChart chart_;
    Rect region_;
    std::int64_t n_;
    double t0_, t1_, kx_;
};

class KappaNode final : public MapNode {
public:
    explicit KappaNode(KappaProfile k) : k_(k) {}
    TorusPoint forward(TorusPoint p) const override { return {p.x, wrap01(p.y + k_.value(p.x))}; }
    TorusPoint backward(TorusPoint p) const override { return {p.x, wrap01(p.y - k_.value(p.x))}; }
    Mat2 jac_forward(TorusPoint p) const override { return {1.0, 0.0, k_.slope(p.x), 1.0}; }
    Mat2 jac_backward(TorusPoint p) const override { return {1.0, 0.0, -k_.slope(p.x), 1.0}; }
    Json describe() const override { return {{"type", "kappa"}, {"profile", k_.to_json()}}; }

private:
    KappaProfile k_;
};

class ComposeNode final : public MapNode {
public:
    explicit ComposeNode(std::vector<TorusMap> f) : f_(std::move(f)) {}
    TorusPoint forward(TorusPoint p) const override {
        for (auto it = f_.rbegin(); it != f_.rend(); ++it) p = (*it)(p);
        return p;
    }
    TorusPoint backward(TorusPoint p) const override {
        for (const auto& m : f_) p = m.inverse_eval(p);
        return p;
    }
    Mat2 jac_forward(TorusPoint p) const override {
        Mat2 j;
        for (auto it = f_.rbegin(); it != f_.rend(); ++it) {
            j = it->jacobian(p) * j;
            p = (*it)(p);
        }
        return j;
    }
    Mat2 jac_backward(TorusPoint p) const override {
        Mat2 j;
        for (const auto& m : f_) {
            j = m.inverse().jacobian(p) * j;
            p = m.inverse_eval(p);
        }
        return j;
    }
    double det_forward(TorusPoint p) const override {
        double d = 1.0;
        for (auto it = f_.rbegin(); it != f_.rend(); ++it) {
            d *= it->jacobian_det(p);
            p = (*it)(p);
        }
        return d;
    }
    double det_backward(TorusPoint p) const override {
        double d = 1.0;
        for (const auto& m : f_) {
            d *= m.inverse().jacobian_det(p);
            p = m.inverse_eval(p);
        }
        return d;
    }
    Json describe() const override {
        Json arr = Json::array();
        for (const auto& m : f_) arr.push_back(m.to_json());
        return {{"type", "compose"}, {"factors", arr}};
    }
    const std::vector<TorusMap>& factors() const { return f_; }

private:
    std::vector<TorusMap> f_;
};

}  // namespace

TorusMap::TorusMap() : node_(std::make_shared<IdentityNode>()), label_("id") {}

TorusMap::TorusMap(std::shared_ptr<const MapNode> node, bool inverted) : node_(std::move(node)), inverted_(inverted) {}

TorusMap TorusMap::labelled(std::string label) const {
    TorusMap m = *this;
    m.label_ = std::move(label);
    return m;
}

bool TorusMap::is_identity() const { return dynamic_cast<const IdentityNode*>(node_.get()) != nullptr; }

Json TorusMap::to_json() const {
    Json j = node_->describe();
    if (inverted_) j["inverted"] = true;
    if (!label_.empty()) j["label"] = label_;
    return j;
}

TorusMap compose(const TorusMap& outer, const TorusMap& inner) { return compose_all({outer, inner}); }

TorusMap compose_all(const std::vector<TorusMap>& factors) {
    std::vector<TorusMap> flat;
    for (const auto& m : factors) {
        if (m.is_identity()) continue;
        flat.push_back(m);
    }
    if (flat.empty()) return identity_map();
    if (flat.size() == 1) return flat.front();
    return TorusMap(std::make_shared<ComposeNode>(std::move(flat)));
}

TorusMap identity_map() { return TorusMap(); }

TorusMap translation(const Rational& tx, const Rational& ty) {
    return TorusMap(std::make_shared<TranslationNode>(tx, ty)).labelled("S(" + tx.str() + "," + ty.str() + ")");
}

TorusMap quarter_turn(double eps) {
    if (!(eps > 0.0 && eps < 0.25)) throw std::invalid_argument("quarter_turn: eps must lie in (0, 1/4)");
    return TorusMap(std::make_shared<TwistNode>(eps)).labelled("phi");
}

std::int64_t shear_coefficient(int n, std::int64_t q, double sigma) {
    double v = n * std::pow(static_cast<double>(q), sigma);
    double r = std::round(v);
    if (std::fabs(v - r) < 1e-9 * std::max(1.0, v)) return static_cast<std::int64_t>(r);
    return static_cast<std::int64_t>(std::floor(v));
}

TorusMap shear_x(std::int64_t c) {
    if (c == 0) return identity_map();
    return TorusMap(std::make_shared<ShearXNode>(c)).labelled("g");
}

TorusMap shear_g(int n, std::int64_t q, double sigma) {
    if (n < 1 || q < 2 || !(sigma > 0.0 && sigma < 0.5))
        throw std::invalid_argument("shear_g: need n >= 1, q >= 2, 0 < sigma < 1/2");
    return shear_x(shear_coefficient(n, q, sigma)).labelled("g_" + std::to_string(n));
}

TorusMap block_conjugate(const TorusMap& inner, const AffineChart& chart, const Rect& region,
                         const Rational& period) {
    if (period.num() != 1 || period.den() < 1) throw std::invalid_argument("block_conjugate: period must be 1/k");
    if (chart.sx == 0.0 || chart.sy == 0.0) throw std::invalid_argument("block_conjugate: degenerate chart");
    std::int64_t n = to_i64(period.den());
    double tol = 1e-9;
    auto near = [tol](double a, double b) { return std::fabs(a - b) <= tol * std::max(1.0, std::fabs(b)); };
    if (!near(chart.sx * region.x0 + chart.tx, 0.0) || !near(chart.sx * region.x1 + chart.tx, 1.0) ||
        !near(chart.sy * region.y0 + chart.ty, 0.0) || !near(chart.sy * region.y1 + chart.ty, 1.0))
        throw std::invalid_argument("block_conjugate: chart does not map the region onto the unit square");
    if (region.x0 < -tol || region.x1 > 1.0 / static_cast<double>(n) * (1 + tol) || region.y0 < -tol ||
        region.y1 > 1.0 + tol)
        throw std::invalid_argument("block_conjugate: region exceeds one period");
    if (inner.is_identity()) return identity_map();
    return TorusMap(std::make_shared<BlockNode>(inner, chart, region, n));
}

namespace {

// Tent value (in units of the peak) and its t-derivative, before smoothing.
double tent(const KappaProfile& k, double t) {
    if (t < k.rise_end) return t / k.rise_end;
    if (t < k.fall_end) return (k.fall_end - t) / (k.fall_end - k.rise_end);
    return 0.0;
}
double tent_slope(const KappaProfile& k, double t) {
    if (t < k.rise_end) return 1.0 / k.rise_end;
    if (t < k.fall_end) return -1.0 / (k.fall_end - k.rise_end);
    return 0.0;
}

struct Corner {
    double at, left, right;
};

// Returns true and fills value/slope when t falls inside a blended corner.
bool blended(const KappaProfile& k, double t, double& val, double& slope) {
    double w = k.smoothing;
    if (w <= 0.0) return false;
    double down = -1.0 / (k.fall_end - k.rise_end);
    double up = 1.0 / k.rise_end;
    Corner cs[4];
    int nc = 0;
    cs[nc++] = {0.0, k.fall_end < 1.0 ? 0.0 : down, up};
    cs[nc++] = {k.rise_end, up, down};
    if (k.fall_end < 1.0) cs[nc++] = {k.fall_end, down, 0.0};
    cs[nc++] = {1.0, k.fall_end < 1.0 ? 0.0 : down, up};
    for (int i = 0; i < nc; ++i) {
        double tau = t - cs[i].at;
        if (std::fabs(tau) >= w) continue;
        double s = tau + w;
        double base = (cs[i].at == 1.0) ? 0.0 : tent(k, cs[i].at);
        val = base + cs[i].left * tau + (cs[i].right - cs[i].left) * s * s / (4 * w);
        slope = cs[i].left + (cs[i].right - cs[i].left) * s / (2 * w);
        return true;
    }
    return false;
}

}  // namespace

void KappaProfile::validate() const {
    if (periods < 1) throw std::invalid_argument("kappa: periods must be positive");
    if (!(rise_end > 0.0 && rise_end < fall_end && fall_end <= 1.0))
        throw std::invalid_argument("kappa: need 0 < rise_end < fall_end <= 1");
    double seg = std::min(rise_end, fall_end - rise_end);
    if (fall_end < 1.0) seg = std::min(seg, 1.0 - fall_end);
    if (smoothing < 0.0 || smoothing >= 0.5 * seg) throw std::invalid_argument("kappa: smoothing too wide");
}

double KappaProfile::value(double x) const {
    double t = scaled_frac(x, static_cast<double>(periods)).frac;
    double v, s;
    if (blended(*this, t, v, s)) return peak * v;
    return peak * tent(*this, t);
}

double KappaProfile::slope(double x) const {
    double t = scaled_frac(x, static_cast<double>(periods)).frac;
    double v, s;
    if (!blended(*this, t, v, s)) s = tent_slope(*this, t);
    return peak * s * static_cast<double>(periods);
}

Json KappaProfile::to_json() const {
    return {{"periods", periods}, {"rise_end", rise_end}, {"fall_end", fall_end}, {"peak", peak}, {"smoothing", smoothing}};
}

TorusMap build_P(const KappaProfile& profile) {
    profile.validate();
    return TorusMap(std::make_shared<KappaNode>(profile)).labelled("P");
}

EpsA eps_schedule_A(int n, std::int64_t q, int r) {
    if (n < 1 || q < 2 || r < 1) throw std::invalid_argument("eps schedule: need n >= 1, q >= 2, r >= 1");
    EpsA e;
    e.e1 = 1.0 / (3.0 * n * r);
    if (e.e1 >= 0.25) {
        e.e1 = 0.2;
        e.e1_clamped = true;
    }
    e.e2 = e.e1 / 8.0;
    e.e3 = e.e1 / 2.0;
    e.e4 = std::ldexp(1.0 / static_cast<double>(q), -n);
    if (e.e4 >= 0.25) {
        e.e4 = 0.2;
        e.e4_clamped = true;
    }
    return e;
}

TorusMap build_phi_w(int n, std::int64_t q, int r) {
    EpsA e = eps_schedule_A(n, q, r);
    TorusMap rot = quarter_turn(e.e1).inverse();
    std::vector<TorusMap> parts;
    double qd = static_cast<double>(q);
    for (int t = 0; t < r; ++t) {
        AffineChart c{2 * qd, static_cast<double>(r), 0.0, -static_cast<double>(t)};
        Rect reg{0.0, 1.0 / (2 * qd), double(t) / r, double(t + 1) / r};
        parts.push_back(block_conjugate(rot, c, reg, Rational(1, q)).labelled("phi_w_" + std::to_string(t)));
    }
    return compose_all(parts).labelled("phi_w");
}

TorusMap build_phi_g(int n, std::int64_t q, int r) {
    EpsA e = eps_schedule_A(n, q, r);
    TorusMap inner = compose(quarter_turn(e.e3).inverse(), quarter_turn(e.e2));
    double qd = static_cast<double>(q);
    return block_conjugate(inner, {qd, 1.0, 0.0, 0.0}, {0.0, 1.0 / qd, 0.0, 1.0}, Rational(1, q)).labelled("phi_g");
}

TorusMap build_phi_m(int n, std::int64_t q, int r) {
    EpsA e = eps_schedule_A(n, q, r);
    double qd = static_cast<double>(q);
    return block_conjugate(quarter_turn(e.e4), {qd / e.e2, 1.0, 0.0, 0.0}, {0.0, e.e2 / qd, 0.0, 1.0},
                           Rational(1, q))
        .labelled("phi_m");
}

TorusMap assemble_phi(int n, std::int64_t q, int r) {
    return compose_all({build_phi_g(n, q, r), build_phi_m(n, q, r), build_phi_w(n, q, r)}).labelled("phi");
}

KappaProfile kappa_profile_A(int n, std::int64_t q, int r) {
    EpsA e = eps_schedule_A(n, q, r);
    KappaProfile k;
    k.periods = q;
    k.rise_end = e.e2 / 2;
    k.fall_end = e.e2;
    k.peak = 1.0 / (double(n) * n);
    return k;
}

TorusMap assemble_h(int n, std::int64_t q, int r, double sigma, const KappaProfile& profile) {
    return compose_all({shear_g(n, q, sigma), assemble_phi(n, q, r), build_P(profile)})
        .labelled("h_" + std::to_string(n));
}

Mat2 jacobian_fd(const TorusMap& m, TorusPoint p, double h) {
    auto diff = [](double a, double b) {
        double d = a - b;
        return d - std::round(d);
    };
    TorusPoint xp = m(wrap({p.x + h, p.y})), xm = m(wrap({p.x - h, p.y}));
    TorusPoint yp = m(wrap({p.x, p.y + h})), ym = m(wrap({p.x, p.y - h}));
    return {diff(xp.x, xm.x) / (2 * h), diff(yp.x, ym.x) / (2 * h), diff(xp.y, xm.y) / (2 * h),
            diff(yp.y, ym.y) / (2 * h)};
}

double jacobian_det(const TorusMap& m, TorusPoint p, double h) {
    if (!(h >= 1e-7 && h <= 1e-4)) throw std::invalid_argument("jacobian_det: step must lie in [1e-7, 1e-4]");
    return jacobian_fd(m, p, h).det();
}

}  // namespace abc
