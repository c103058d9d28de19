#pragma once

#include "abc/cantor.hpp"
#include "abc/engine.hpp"
#include "abc/maps.hpp"
#include "abc/numerics.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace abc {

struct TestFunction {
    std::string name;
    std::function<double(TorusPoint)> f;
    double integral = 0.0;   // exact integral over the torus
    double lipschitz = 0.0;  // Lipschitz constant for the torus metric
    double sup_norm = 0.0;   // ||f||_0
};

struct TestFunctionSet {
    std::vector<TestFunction> fns;
    // {1, sin 2pi x, cos 2pi x, sin 2pi y, cos 2pi y, sin 2pi(x+y)}.
    static TestFunctionSet standard();
};

// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double v);
    double value() const { return sum_ + comp_; }
    std::int64_t count() const { return n_; }

private:
    double sum_ = 0.0, comp_ = 0.0;
    std::int64_t n_ = 0;
};

double birkhoff_average(const std::vector<TorusPoint>& pts, const std::function<double(TorusPoint)>& psi);

// ------------------------------------------------------------------ genericity

struct DeviationRow {
    std::string name;
    double average = 0.0;
    double integral = 0.0;
    double integral_mc = 0.0;  // quasi-Monte Carlo value of the integral of psi o H_n
    double mc_stderr = 0.0;
    double deviation = 0.0;    // |average - integral|
    double bound = 0.0;
    bool pass = false;
};

struct GenericityReport {
    Variant variant = Variant::A;
    int n = 0;
    TorusPoint base_point;    // H_n^-1 side
    std::int64_t orbit_length = 0;
    std::vector<DeviationRow> rows;
    GridSpec grid;            // q_n x s_n cells in intermediate coordinates
    std::vector<std::int64_t> cell_counts;
    bool pass = false;
    nlohmann::json to_json() const;
};

// Variant bound for one function; slack 1/2^(n+1) included.
double genericity_bound(const StageBundle& st, const TestFunction& f);

// Orbit of the base point x' under the rotation, pushed forward by H_n, over m iterates.
GenericityReport generic_test(const StageBundle& st, TorusPoint base_point, const TestFunctionSet& fns, std::int64_t m,
                              std::int64_t mc_samples = 1000000);

// Designated base points: variant A uses (0, (e3 - 2 e2)/2) as written and the strip midpoint
// (0, (e3 + 2 e2)/2); C/D/E use the centre of kept strip `l` shifted to avoid cell edges.
std::vector<TorusPoint> designated_points(const StageBundle& st);

// ------------------------------------------------------------------ distribution

struct DistributionSpec {
    double gamma = 0.0;
    double delta = 0.0;
    double eps = 0.0;
};

struct HorizontalInterval {
    double x0 = 0.0, x1 = 0.0, y = 0.0;
    int t = 0;
    std::int64_t j = 0;
    bool barred = false;  // second family, sitting in the right half-domains
};

// Elements of the partial decomposition of N^t: `heights` levels per family and every column j.
std::vector<HorizontalInterval> eta_family(const StageBundle& st, int t, int heights);

struct DistributionResult {
    HorizontalInterval interval;
    double x_spread = 0.0;
    double y_lo = 0.0, y_hi = 0.0;
    double target_lo = 0.0, target_hi = 0.0;
    bool covers = false;
    bool vertical = false;
    bool monotone = false;
    double max_defect = 0.0;  // worst relative proportionality defect over the dyadic family
    bool height_ok = false;   // 1 - delta <= |J|
    bool pass = false;
    nlohmann::json to_json() const;
};

// Phi_n = phi P S^m P^-1 phi^-1 with the stage's mixing sequence m.
TorusMap distribution_map(const StageBundle& st);

DistributionResult distribution_test(const StageBundle& st, const HorizontalInterval& I, const DistributionSpec& spec,
                                     int samples = 1025, int dyadic_depth = 6, double cover_tol = 1e-6);

// ------------------------------------------------------------------ counting

std::vector<std::int64_t> equidistribution_counts(const std::vector<TorusPoint>& pts, const GridSpec& grid);

struct VisitReport {
    GridSpec grid;
    std::vector<std::int64_t> counts;
    std::int64_t visited = 0;
    double coverage = 0.0;
    bool truncated = false;  // m < q_{n+1}
    bool pass = false;
};

// Cells of the q_n x l_n grid met by phi_n P_n S^k x' for k < m (x' in base coordinates).
VisitReport minimality_visit_test(const StageBundle& st, TorusPoint base_point, std::int64_t m = -1);
// Same counts from a fully materialized orbit.
VisitReport minimality_visit_naive(const StageBundle& st, TorusPoint base_point, std::int64_t m = -1);

struct TrappingReport {
    std::uint64_t t1 = 0;
    std::vector<std::int64_t> counts;  // per i1 in [0, s q)
    std::int64_t excluded = 0;
    std::int64_t orbit_length = 0;
    double bound = 0.0;
    std::int64_t min_count = 0;
    bool pass = false;
};

// Counts k with P_n(S^k x) in the kept cell (i1, t1) minus E_n, for base point x in T x I_{t1}.
TrappingReport trapping_count_test(const StageBundle& st, TorusPoint base_point);
// Same via the catalog's X_cells membership on a materialized orbit.
TrappingReport trapping_count_naive(const StageBundle& st, TorusPoint base_point);

struct ConfinementReport {
    CellFamily family = CellFamily::Gap;
    int level = 0;
    std::uint64_t index = 0;
    int half = -1;
    double band_lo = 0.0, band_hi = 1.0;
    bool layout_band = false;  // band taken from the exchange layout rather than the dyadic rule
    std::int64_t samples = 0, inside = 0;
    double fraction = 0.0;
    double pi2_mean = 0.0;
    double mean_deviation = 0.0;       // |mean pi2 - 1/2|
    double indicator_deviation = 0.0;  // |fraction inside - band length|
    bool confined = false;
    nlohmann::json to_json() const;
};

// Base points whose whole orbit stays in the trapping zone P^-1(J cap F_n): per non-generic
// strip (gaps for C/D, kept strips for E), `per_strip` heights between the E_n margins, kept
// below the top by the largest lift of P. Strips too thin for that are skipped.
std::vector<TorusPoint> confinement_base_points(const StageBundle& st, int per_strip, double x);

// Orbit of x' (base coordinates) in h_n coordinates; band from the strip containing x'.
ConfinementReport nongeneric_trap_test(const StageBundle& st, TorusPoint base_point, std::int64_t stride = 1);

double area_preservation_test(const TorusMap& m, std::int64_t N);
double commutation_test(const TorusMap& m, const Rational& shift, std::int64_t N);

// ------------------------------------------------------------------ dimension

struct DimensionSandwich {
    BoxDimResult factor;   // Cantor factor at depth
    BoxDimResult image;    // H_n(T x C) point cloud
    bool within = false;   // factor - tol <= image <= 1 + factor + tol
};

DimensionSandwich generic_set_dimension(const StageBundle& st, int depth, std::int64_t x_samples,
                                        const std::vector<double>& scales, double tol = 0.06);

}  // namespace abc
