#include "abc/numerics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace abc {

Rational::Rational(const BigInt& num, const BigInt& den) {
    if (den == 0) throw std::invalid_argument("rational with zero denominator");
    // cpp_rational rejects a negative denominator, so move the sign to the numerator.
    v_ = den < 0 ? Rep(-num, -den) : Rep(num, den);
}

Rational operator/(const Rational& a, const Rational& b) {
    if (b.v_ == 0) throw std::domain_error("rational division by zero");
    return Rational(Rational::Rep(a.v_ / b.v_));
}

Rational Rational::parse(const std::string& s) {
    auto slash = s.find('/');
    try {
        if (slash == std::string::npos) return Rational(BigInt(s));
        return Rational(BigInt(s.substr(0, slash)), BigInt(s.substr(slash + 1)));
    } catch (const std::runtime_error&) {
        throw std::invalid_argument("malformed rational '" + s + "'");
    }
}

Rational Rational::from_double(double v) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite double");
    int e = 0;
    double m = std::frexp(v, &e);
    auto mant = static_cast<std::int64_t>(std::ldexp(m, 53));
    e -= 53;
    BigInt one = 1;
    if (e >= 0) return Rational(BigInt(mant) << e);
    return Rational(BigInt(mant), one << (-e));
}

BigInt Rational::floor() const {
    BigInt n = num(), d = den();
    BigInt q = n / d;  // truncates toward zero
    if (n < 0 && q * d != n) q -= 1;
    return q;
}

double Rational::to_double() const { return v_.convert_to<double>(); }

std::string Rational::str() const { return num().str() + "/" + den().str(); }

Rational rat_mod1(const Rational& r) { return r - Rational(r.floor()); }

Rational abs(const Rational& r) { return r < Rational(0) ? -r : r; }

BigInt gcd(const BigInt& a, const BigInt& b) { return boost::multiprecision::gcd(a, b); }

std::int64_t to_i64(const BigInt& v) {
    if (v > std::numeric_limits<std::int64_t>::max() || v < std::numeric_limits<std::int64_t>::min())
        throw std::overflow_error("integer " + v.str() + " exceeds 64 bits");
    return v.convert_to<std::int64_t>();
}

double wrap01(double v) {
    double w = v - std::floor(v);
    return w >= 1.0 ? 0.0 : w;
}

TorusPoint wrap(TorusPoint p) { return {wrap01(p.x), wrap01(p.y)}; }

double torus_distance(TorusPoint a, TorusPoint b) {
    double dx = std::fabs(wrap01(a.x) - wrap01(b.x));
    double dy = std::fabs(wrap01(a.y) - wrap01(b.y));
    dx = std::min(dx, 1.0 - dx);
    dy = std::min(dy, 1.0 - dy);
    return std::hypot(dx, dy);
}

ScaledFrac scaled_frac(double x, double n) {
    double prod = x * n;
    double err = std::fma(x, n, -prod);
    double k = std::floor(prod);
    double f = (prod - k) + err;
    if (f < 0.0) {
        f += 1.0;
        k -= 1.0;
    } else if (f >= 1.0) {
        f -= 1.0;
        k += 1.0;
    }
    if (f >= 1.0) f = std::nextafter(1.0, 0.0);
    return {static_cast<std::int64_t>(k), f};
}

bool Interval::contains(double v) const {
    switch (closure) {
        case Closure::Closed: return v >= lo && v <= hi;
        case Closure::HalfOpen: return v >= lo && v < hi;
        case Closure::Open: return v > lo && v < hi;
    }
    return false;
}

double interval_intersect_length(const Interval& a, const Interval& b) {
    double lo = std::max(a.lo, b.lo);
    double hi = std::min(a.hi, b.hi);
    return hi > lo ? hi - lo : 0.0;
}

std::pair<std::int64_t, std::int64_t> locate_cell(TorusPoint p, const GridSpec& g) {
    auto axis = [](double v, double origin, std::int64_t n) {
        std::int64_t i = scaled_frac(wrap01(v - origin), static_cast<double>(n)).index;
        return ((i % n) + n) % n;
    };
    return {axis(p.x, g.ox, g.nx), axis(p.y, g.oy, g.ny)};
}

}  // namespace abc
