#pragma once

#include "abc/cantor.hpp"
#include "abc/exchange.hpp"
#include "abc/maps.hpp"
#include "abc/numerics.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace abc {

enum class Variant { A, C, D, E };
const char* to_string(Variant v);
Variant parse_variant(const std::string& s);

struct ScheduleStage {
    int n = 1;
    BigInt p, q;
    std::int64_t s = 1;
    // Multipliers producing stage n+1; zero until the schedule is extended past n.
    std::int64_t k = 0, l = 0;
};

// Exact rational approximations alpha_n = p_n / q_n.
class RotationSchedule {
public:
    static RotationSchedule start(const BigInt& p1, const BigInt& q1, std::int64_t s1);

    int size() const { return static_cast<int>(stages_.size()); }
    const ScheduleStage& stage(int n) const;  // 1-based
    bool has(int n) const { return n >= 1 && n <= size(); }
    Rational alpha(int n) const;

    // Appends stage size()+1 with q = k l q^2, p = k l q p + 1, using (k, l) for the last stage.
    RotationSchedule extended(std::int64_t k, std::int64_t l, std::int64_t s_next) const;

    // Growth flags of stage n (needs stage n+1).
    bool growth_10n2(int n) const;      // q_{n+1} > 10 n^2 q_n
    bool growth_minimality(int n) const;  // q_{n+1} > l_n q_n^2

    nlohmann::json to_json() const;

private:
    std::vector<ScheduleStage> stages_;
};

RotationSchedule extend_schedule(const RotationSchedule& s, std::int64_t k_n, std::int64_t l_n, std::int64_t s_next);

struct VariantParams {
    int r = 2;
    double sigma = 0.25;
    double alpha = 1.5;           // D/E: gap exponent p = 1/(alpha - 1)
    double kappa_smoothing = 0.0;
};

struct RegionFamily {
    std::string name;
    std::vector<Rect> rects;    // inside the reference column [0, 1/replicate)
    std::int64_t replicate = 1;  // copies shifted by multiples of 1/replicate
    bool disjoint = true;
    double expected_area = 0.0;  // closed form for the whole torus
    std::string note;

    double area() const;
    bool contains(TorusPoint p) const;
};

struct RegionCatalog {
    std::vector<RegionFamily> families;
    const RegionFamily& at(const std::string& name) const;
    bool has(const std::string& name) const;
    nlohmann::json to_json() const;
};

struct StageBundle {
    Variant variant = Variant::A;
    int n = 1;
    std::shared_ptr<const RotationSchedule> schedule;
    VariantParams params;

    std::int64_t q = 0, s = 1;
    std::optional<Rational> alpha_next;  // alpha_{n+1}
    std::int64_t q_next = 0;

    EpsA eps;               // variant A
    double delta = 0.0;     // C/D/E tent height factor
    double eps_prime = 0.0;  // C/D/E margin of E_n
    CantorSpec cantor;      // C: middle third, D/E: gap sequence
    std::shared_ptr<const RectExchange> exchange;

    TorusMap g, phi, P;      // factors of h (g is identity for C/D/E)
    TorusMap h, H, H_inv;
    TorusMap intermediate;   // phi o P: maps base coordinates to H_{n-1} o g coordinates
    RegionCatalog catalog;
    std::vector<std::string> advisories;
};

// Builds stages 1..n_max; element i is stage i+1.
std::vector<StageBundle> build_stages(Variant v, std::shared_ptr<const RotationSchedule> schedule,
                                      const VariantParams& params, int n_max);
StageBundle build_stage(Variant v, std::shared_ptr<const RotationSchedule> schedule, const VariantParams& params,
                        int n);

// Default desk-scale schedules.
RotationSchedule default_schedule(Variant v);

// Orbit of T_n = H_n S_{alpha_{n+1}} H_n^-1 via exact base phases.
struct OrbitRequest {
    TorusPoint start;
    std::int64_t m = 0;
    std::int64_t stride = 1;
    bool start_in_base = false;  // start is already H_n^-1 of the physical point
};

struct OrbitInfo {
    std::int64_t count = 0;
    bool beyond_window = false;  // m > q_{n+1}
};

// Base phase of iterate i: (i p_{n+1} mod q_{n+1}) / q_{n+1}, exact.
std::int64_t phase_numerator(std::int64_t i, std::int64_t p, std::int64_t q);

OrbitInfo for_each_orbit_point(const StageBundle& st, const OrbitRequest& req,
                               const std::function<void(std::int64_t, TorusPoint)>& fn);
std::vector<TorusPoint> orbit(const StageBundle& st, TorusPoint x, std::int64_t m);

struct MixingSequence {
    BigInt m;
    Rational a;
    bool growth_ok = false;
    bool bound_ok = false;  // |a| <= 1/q_{n+1}
};
MixingSequence mixing_sequence(const StageBundle& st);
MixingSequence mixing_sequence(const BigInt& q_n, const BigInt& p_next, const BigInt& q_next, int n);

struct GrowthCheck {
    std::string name;
    bool satisfied = false;
    double lhs = 0.0, rhs = 0.0;
    std::string note;
};
struct GrowthReport {
    int n = 0;
    std::vector<GrowthCheck> checks;
    nlohmann::json to_json() const;
};

// Sup of the spectral norm of the differential over quasi-random samples plus region probes.
double estimate_sup_norm(const TorusMap& m, const std::vector<TorusPoint>& probes, std::int64_t samples);
GrowthReport check_growth_conditions(const std::vector<StageBundle>& stages, int n, std::int64_t samples = 20000);

// Point i >= 0 of the quasi-random R2 sequence (plastic-number lattice), offset by the shifts.
TorusPoint r2_point(std::int64_t i, double shift_x = 0.5, double shift_y = 0.5);

}  // namespace abc
