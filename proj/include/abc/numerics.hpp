#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <string>
#include <utility>

namespace abc {

using BigInt = boost::multiprecision::cpp_int;

// Exact rational, always in lowest terms with a positive denominator.
class Rational {
public:
    Rational() = default;
    Rational(std::int64_t n) : v_(n) {}
    Rational(const BigInt& n) : v_(n) {}
    Rational(const BigInt& num, const BigInt& den);
    Rational(std::int64_t num, std::int64_t den) : Rational(BigInt(num), BigInt(den)) {}

    // Parses "p/q" or "p".
    static Rational parse(const std::string& s);
    // Exact value of a finite double.
    static Rational from_double(double v);

    BigInt num() const { return boost::multiprecision::numerator(v_); }
    BigInt den() const { return boost::multiprecision::denominator(v_); }

    BigInt floor() const;
    double to_double() const;
    std::string str() const;
    bool is_zero() const { return v_ == 0; }

    friend Rational operator+(const Rational& a, const Rational& b) { return Rational(a.v_ + b.v_); }
    friend Rational operator-(const Rational& a, const Rational& b) { return Rational(a.v_ - b.v_); }
    friend Rational operator*(const Rational& a, const Rational& b) { return Rational(a.v_ * b.v_); }
    friend Rational operator/(const Rational& a, const Rational& b);
    Rational operator-() const { return Rational(-v_); }

    friend bool operator==(const Rational& a, const Rational& b) { return a.v_ == b.v_; }
    friend bool operator!=(const Rational& a, const Rational& b) { return a.v_ != b.v_; }
    friend bool operator<(const Rational& a, const Rational& b) { return a.v_ < b.v_; }
    friend bool operator<=(const Rational& a, const Rational& b) { return a.v_ <= b.v_; }
    friend bool operator>(const Rational& a, const Rational& b) { return a.v_ > b.v_; }
    friend bool operator>=(const Rational& a, const Rational& b) { return a.v_ >= b.v_; }

private:
    using Rep = boost::multiprecision::cpp_rational;
    explicit Rational(Rep v) : v_(std::move(v)) {}
    Rep v_;
};

Rational rat_mod1(const Rational& r);
Rational abs(const Rational& r);
BigInt gcd(const BigInt& a, const BigInt& b);
std::int64_t to_i64(const BigInt& v);  // throws std::overflow_error when it does not fit

// Global tolerance for "point lies in region" on floating-point images.
inline constexpr double kTauGeo = 1e-9;

struct TorusPoint {
    double x = 0.0;
    double y = 0.0;
};

// Reduces into [0,1); values that round up to 1 are sent to 0.
double wrap01(double v);
TorusPoint wrap(TorusPoint p);

// Euclidean distance between the closest lifts of two torus points.
double torus_distance(TorusPoint a, TorusPoint b);

// Splits x*n into floor and fractional part with the product rounding recovered by fma,
// so frac stays accurate even when x*n is large.
struct ScaledFrac {
    std::int64_t index;
    double frac;
};
ScaledFrac scaled_frac(double x, double n);

enum class Closure { Closed, HalfOpen, Open };

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    Closure closure = Closure::HalfOpen;

    double length() const { return hi - lo; }
    bool contains(double v) const;
};

double interval_intersect_length(const Interval& a, const Interval& b);

// Half-open rectangle [x0,x1) x [y0,y1).
struct Rect {
    double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;

    double area() const { return (x1 - x0) * (y1 - y0); }
    bool contains(TorusPoint p) const { return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1; }
    // Closed rectangle grown by tol on every side.
    bool contains_tol(TorusPoint p, double tol) const {
        return p.x >= x0 - tol && p.x <= x1 + tol && p.y >= y0 - tol && p.y <= y1 + tol;
    }
};

// Regular grid of half-open cells, shifted by (ox, oy).
struct GridSpec {
    std::int64_t nx = 1;
    std::int64_t ny = 1;
    double ox = 0.0;
    double oy = 0.0;

    std::int64_t cells() const { return nx * ny; }
};

std::pair<std::int64_t, std::int64_t> locate_cell(TorusPoint p, const GridSpec& g);

}  // namespace abc
