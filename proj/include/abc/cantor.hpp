#pragma once

#include "abc/numerics.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <vector>

namespace abc {

enum class CantorKind { MiddleThird, GapSequence };

// Cantor set on [0,1]. For gap sequences the level-(k+1) gap inside the k-th level kept
// interval l has length lambda(2^k + l); positions are forced by the subtree sums.
struct CantorSpec {
    CantorKind kind = CantorKind::MiddleThird;
    double p = 0.0;              // lambda_k = k^-p / c0 when `gaps` is empty
    double c0 = 0.0;
    std::vector<double> gaps;    // explicit lambda_1, lambda_2, ... (zero beyond the list)

    static CantorSpec middle_third();
    static CantorSpec p_series(double p);
    static CantorSpec from_alpha(double alpha);  // p = 1/(alpha - 1)
    static CantorSpec explicit_gaps(std::vector<double> gaps);

    double lambda(std::uint64_t k) const;  // 1-based
    // Sum of lambda_k over k in [a, b).
    double lambda_range(double a, double b) const;
    // |I^n_l|: total length of the gaps strictly below node (n, l).
    double subtree_length(int n, std::uint64_t l) const;
    nlohmann::json to_json() const;
};

struct CantorStage {
    int depth = 0;
    std::vector<Interval> kept;                   // 2^n closed intervals, left to right
    std::vector<std::vector<Interval>> gaps;      // gaps[k-1]: the 2^(k-1) open gaps of level k
    // Exact endpoints for the middle-third set.
    std::optional<std::vector<std::pair<Rational, Rational>>> kept_exact;
    std::optional<std::vector<std::vector<std::pair<Rational, Rational>>>> gaps_exact;

    double kept_length() const;
    double gap_length(int level) const;
    nlohmann::json to_json() const;
};

CantorStage cantor_stage(const CantorSpec& spec, int n);

enum class Membership { In, Out, Undecided };

struct MembershipResult {
    Membership status = Membership::Undecided;
    int level = 0;        // level of the gap (Out) or depth of the containing kept interval
    std::uint64_t index = 0;
    Interval where;
};

MembershipResult cantor_membership(double x, const CantorSpec& spec, int depth);

struct BoxDimResult {
    double dimension = 0.0;
    bool degenerate = false;
    std::vector<double> scales;
    std::vector<double> counts;
};

// Geometric scale ladder from hi down to lo inclusive.
std::vector<double> geometric_scales(double hi, double lo, int count);

BoxDimResult box_dimension(const std::vector<Interval>& intervals, const std::vector<double>& scales);
// Union of the full-width strips [0,1) x I.
BoxDimResult box_dimension_product(const std::vector<Interval>& intervals, const std::vector<double>& scales);
BoxDimResult box_dimension_points(const std::vector<TorusPoint>& points, const std::vector<double>& scales);

}  // namespace abc
