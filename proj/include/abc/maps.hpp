#pragma once

#include "abc/numerics.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace abc {

using Json = nlohmann::json;

// Row-major 2x2 matrix [[a, b], [c, d]].
struct Mat2 {
    double a = 1.0, b = 0.0, c = 0.0, d = 1.0;

    double det() const { return a * d - b * c; }
    double norm() const;  // spectral norm
    friend Mat2 operator*(const Mat2& l, const Mat2& r) {
        return {l.a * r.a + l.b * r.c, l.a * r.b + l.b * r.d, l.c * r.a + l.d * r.c, l.c * r.b + l.d * r.d};
    }
};

// One node of a map expression tree. `forward` and `backward` are mutually inverse.
class MapNode {
public:
    virtual ~MapNode() = default;
    virtual TorusPoint forward(TorusPoint p) const = 0;
    virtual TorusPoint backward(TorusPoint p) const = 0;
    virtual Mat2 jac_forward(TorusPoint p) const = 0;
    virtual Mat2 jac_backward(TorusPoint p) const = 0;
    virtual Json describe() const = 0;
    // Determinant of the differential, accumulated factor by factor for compositions.
    virtual double det_forward(TorusPoint p) const { return jac_forward(p).det(); }
    virtual double det_backward(TorusPoint p) const { return jac_backward(p).det(); }
};

// Immutable handle to an invertible area-preserving map of [0,1)^2.
class TorusMap {
public:
    TorusMap();  // identity
    explicit TorusMap(std::shared_ptr<const MapNode> node, bool inverted = false);

    TorusPoint operator()(TorusPoint p) const { return inverted_ ? node_->backward(p) : node_->forward(p); }
    TorusPoint inverse_eval(TorusPoint p) const { return inverted_ ? node_->forward(p) : node_->backward(p); }
    Mat2 jacobian(TorusPoint p) const { return inverted_ ? node_->jac_backward(p) : node_->jac_forward(p); }
    // Product of the factor determinants along the evaluation chain; avoids the cancellation
    // of det() on an assembled matrix with large entries.
    double jacobian_det(TorusPoint p) const { return inverted_ ? node_->det_backward(p) : node_->det_forward(p); }

    TorusMap inverse() const { return TorusMap(node_, !inverted_); }
    TorusMap labelled(std::string label) const;
    const std::string& label() const { return label_; }
    bool is_identity() const;

    Json to_json() const;
    const MapNode& node() const { return *node_; }
    bool inverted() const { return inverted_; }

private:
    std::shared_ptr<const MapNode> node_;
    bool inverted_ = false;
    std::string label_;
};

inline TorusPoint eval(const TorusMap& m, TorusPoint p) { return m(p); }

// compose(f, g)(p) = f(g(p)).
TorusMap compose(const TorusMap& outer, const TorusMap& inner);
// Factors listed outermost first.
TorusMap compose_all(const std::vector<TorusMap>& factors);

TorusMap identity_map();
TorusMap translation(const Rational& tx, const Rational& ty);

// Square twist: rigid clockwise quarter turn on [2e,1-2e]^2, identity off [e,1-e]^2.
TorusMap quarter_turn(double eps);

std::int64_t shear_coefficient(int n, std::int64_t q, double sigma);
TorusMap shear_x(std::int64_t c);  // (x + c y, y)
TorusMap shear_g(int n, std::int64_t q, double sigma);

struct AffineChart {
    double sx = 1.0, sy = 1.0, tx = 0.0, ty = 0.0;
};

// chart^-1 o inner o chart on `region` (inside [0, period) x [0,1)), identity elsewhere,
// repeated with the given period in x.
TorusMap block_conjugate(const TorusMap& inner, const AffineChart& chart, const Rect& region,
                         const Rational& period);

// Periodic tent in the period-normalized coordinate t in [0,1):
// rises linearly to `peak` at t = rise_end, falls to 0 at t = fall_end, stays 0 after.
struct KappaProfile {
    std::int64_t periods = 1;  // period is 1/periods
    double rise_end = 0.5;
    double fall_end = 1.0;
    double peak = 0.0;
    double smoothing = 0.0;  // quadratic blend half-width in t units; 0 keeps exact corners

    Rational period() const { return Rational(1, periods); }
    double value(double x) const;
    double slope(double x) const;
    void validate() const;
    Json to_json() const;
};

TorusMap build_P(const KappaProfile& profile);

// Epsilon ladder of the variant-A conjugacies at stage n.
struct EpsA {
    double e1 = 0, e2 = 0, e3 = 0, e4 = 0;
    bool e1_clamped = false;  // raw 1/(3nr) was >= 1/4 and e1 was reduced to 1/5
    bool e4_clamped = false;  // raw 1/(2^n q) was >= 1/4 and e4 was reduced to 1/5
};
EpsA eps_schedule_A(int n, std::int64_t q, int r);

TorusMap build_phi_w(int n, std::int64_t q, int r);
TorusMap build_phi_g(int n, std::int64_t q, int r);
TorusMap build_phi_m(int n, std::int64_t q, int r);
TorusMap assemble_phi(int n, std::int64_t q, int r);
KappaProfile kappa_profile_A(int n, std::int64_t q, int r);
TorusMap assemble_h(int n, std::int64_t q, int r, double sigma, const KappaProfile& profile);

// Central finite-difference differential with torus-aware differences.
Mat2 jacobian_fd(const TorusMap& m, TorusPoint p, double h);
double jacobian_det(const TorusMap& m, TorusPoint p, double h);

// Rebuilds a map from to_json output.
TorusMap map_from_json(const Json& j);

}  // namespace abc
