#include "abc/cantor.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_sf_zeta.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace abc {

CantorSpec CantorSpec::middle_third() { return CantorSpec{}; }

CantorSpec CantorSpec::p_series(double p) {
    if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("gap sequence k^-p needs p > 1 to be summable");
    CantorSpec s;
    s.kind = CantorKind::GapSequence;
    s.p = p;
    gsl_sf_result r;
    gsl_error_handler_t* old = gsl_set_error_handler_off();
    int status = gsl_sf_zeta_e(p, &r);
    gsl_set_error_handler(old);
    if (status != GSL_SUCCESS) throw std::invalid_argument("zeta(p) evaluation failed");
    s.c0 = r.val;
    return s;
}

CantorSpec CantorSpec::from_alpha(double alpha) {
    if (!(alpha > 1.0 && alpha < 2.0)) throw std::invalid_argument("alpha out of (1, 2)");
    return p_series(1.0 / (alpha - 1.0));
}

CantorSpec CantorSpec::explicit_gaps(std::vector<double> gaps) {
    double sum = 0.0;
    for (double g : gaps) {
        if (!(g > 0.0)) throw std::invalid_argument("gap lengths must be positive");
        sum += g;
    }
    if (std::fabs(sum - 1.0) > 1e-9) throw std::invalid_argument("gap lengths must sum to 1");
    CantorSpec s;
    s.kind = CantorKind::GapSequence;
    s.gaps = std::move(gaps);
    s.c0 = 1.0;
    return s;
}

double CantorSpec::lambda(std::uint64_t k) const {
    if (k == 0) throw std::invalid_argument("gap index is 1-based");
    if (kind == CantorKind::MiddleThird) throw std::logic_error("middle-third set has no gap sequence");
    if (!gaps.empty()) return k <= gaps.size() ? gaps[k - 1] : 0.0;
    return std::pow(static_cast<double>(k), -p) / c0;
}

double CantorSpec::lambda_range(double a, double b) const {
    if (b <= a) return 0.0;
    if (!gaps.empty()) {
        double s = 0.0;
        double end = std::min(b, static_cast<double>(gaps.size()) + 1.0);
        for (double k = a; k < end; k += 1.0) s += gaps[static_cast<std::size_t>(k) - 1];
        return s;
    }
    double w = b - a;
    if (w <= 256.0) {
        double s = 0.0;
        for (double k = b - 1.0; k >= a; k -= 1.0) s += std::pow(k, -p);
        return s / c0;
    }
    // Euler-Maclaurin; a >= 512 here, so the first omitted term is below 1e-16 relative.
    double lr = std::log1p(w / a);
    auto diff = [&](double m) { return -std::pow(a, -m) * std::expm1(-m * lr); };  // a^-m - b^-m
    double integral = -std::pow(a, 1.0 - p) * std::expm1((1.0 - p) * lr) / (p - 1.0);
    double s = integral + 0.5 * diff(p) + p / 12.0 * diff(p + 1.0) -
               p * (p + 1.0) * (p + 2.0) / 720.0 * diff(p + 3.0);
    return s / c0;
}

double CantorSpec::subtree_length(int n, std::uint64_t l) const {
    if (kind == CantorKind::MiddleThird) return std::pow(3.0, -n);
    double total = 0.0;
    double lo = static_cast<double>(l), hi = static_cast<double>(l + 1);
    double base = std::ldexp(1.0, n);
    for (int d = 0; d < 1000; ++d) {
        double a = base + lo, b = base + hi;
        if (!gaps.empty() && a > static_cast<double>(gaps.size())) break;
        double term = lambda_range(a, b);
        total += term;
        if (gaps.empty() && term <= 1e-18 * total) break;
        base *= 2.0;
        lo *= 2.0;
        hi *= 2.0;
    }
    return total;
}

nlohmann::json CantorSpec::to_json() const {
    if (kind == CantorKind::MiddleThird) return {{"kind", "middle-third"}};
    nlohmann::json j{{"kind", "gap-sequence"}, {"c0", c0}};
    if (gaps.empty()) j["p"] = p;
    else j["gaps"] = gaps;
    return j;
}

double CantorStage::kept_length() const {
    double s = 0.0;
    for (const auto& i : kept) s += i.length();
    return s;
}

double CantorStage::gap_length(int level) const {
    double s = 0.0;
    for (const auto& i : gaps.at(level - 1)) s += i.length();
    return s;
}

nlohmann::json CantorStage::to_json() const {
    nlohmann::json j;
    j["depth"] = depth;
    auto dump = [](const std::vector<Interval>& v) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& i : v) a.push_back({i.lo, i.hi});
        return a;
    };
    j["kept"] = dump(kept);
    j["gaps"] = nlohmann::json::array();
    for (const auto& g : gaps) j["gaps"].push_back(dump(g));
    if (kept_exact) {
        nlohmann::json e = nlohmann::json::array();
        for (const auto& [a, b] : *kept_exact) e.push_back({a.str(), b.str()});
        j["kept_exact"] = e;
    }
    return j;
}

CantorStage cantor_stage(const CantorSpec& spec, int n) {
    if (n < 1 || n > 30) throw std::invalid_argument("cantor depth must lie in [1, 30]");
    CantorStage st;
    st.depth = n;
    st.gaps.resize(n);
    if (spec.kind == CantorKind::MiddleThird) {
        std::vector<std::pair<Rational, Rational>> cur{{Rational(0), Rational(1)}};
        std::vector<std::vector<std::pair<Rational, Rational>>> gx(n);
        for (int k = 1; k <= n; ++k) {
            std::vector<std::pair<Rational, Rational>> next;
            next.reserve(cur.size() * 2);
            for (const auto& [a, b] : cur) {
                Rational third = (b - a) / Rational(3);
                next.emplace_back(a, a + third);
                next.emplace_back(b - third, b);
                gx[k - 1].emplace_back(a + third, b - third);
            }
            cur = std::move(next);
        }
        for (const auto& [a, b] : cur) st.kept.push_back({a.to_double(), b.to_double(), Closure::Closed});
        for (int k = 0; k < n; ++k)
            for (const auto& [a, b] : gx[k]) st.gaps[k].push_back({a.to_double(), b.to_double(), Closure::Open});
        st.kept_exact = std::move(cur);
        st.gaps_exact = std::move(gx);
        return st;
    }
    // Subtree lengths: leaves from the gap sums, parents bottom-up.
    std::vector<std::vector<double>> len(n + 1);
    len[n].resize(std::size_t(1) << n);
    for (std::uint64_t l = 0; l < len[n].size(); ++l) len[n][l] = spec.subtree_length(n, l);
    for (int k = n - 1; k >= 0; --k) {
        len[k].resize(std::size_t(1) << k);
        for (std::uint64_t l = 0; l < len[k].size(); ++l)
            len[k][l] = spec.lambda((std::uint64_t(1) << k) + l) + len[k + 1][2 * l] + len[k + 1][2 * l + 1];
    }
    std::vector<double> left{0.0};
    for (int k = 0; k < n; ++k) {
        std::vector<double> next(left.size() * 2);
        for (std::uint64_t l = 0; l < left.size(); ++l) {
            double a = left[l];
            double g0 = a + len[k + 1][2 * l];
            double g1 = g0 + spec.lambda((std::uint64_t(1) << k) + l);
            st.gaps[k].push_back({g0, g1, Closure::Open});
            next[2 * l] = a;
            next[2 * l + 1] = g1;
        }
        left = std::move(next);
    }
    for (std::uint64_t l = 0; l < left.size(); ++l) st.kept.push_back({left[l], left[l] + len[n][l], Closure::Closed});
    return st;
}

MembershipResult cantor_membership(double x, const CantorSpec& spec, int depth) {
    if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("membership query outside [0,1]");
    CantorStage st = cantor_stage(spec, depth);
    MembershipResult res;
    if (st.kept_exact) {
        // Exact comparisons against the triadic endpoints.
        Rational rx = Rational::from_double(x);
        for (int k = 1; k <= depth; ++k) {
            const auto& g = (*st.gaps_exact)[k - 1];
            for (std::uint64_t l = 0; l < g.size(); ++l) {
                if (g[l].first < rx && rx < g[l].second) {
                    res.status = Membership::Out;
                    res.level = k;
                    res.index = l;
                    res.where = st.gaps[k - 1][l];
                    return res;
                }
            }
        }
        const auto& kept = *st.kept_exact;
        for (std::uint64_t l = 0; l < kept.size(); ++l) {
            if (kept[l].first <= rx && rx <= kept[l].second) {
                bool endpoint = rx == kept[l].first || rx == kept[l].second;
                res.status = endpoint ? Membership::In : Membership::Undecided;
                res.level = depth;
                res.index = l;
                res.where = st.kept[l];
                return res;
            }
        }
        throw std::logic_error("membership: point in neither gap nor kept interval");
    }
    for (int k = 1; k <= depth; ++k) {
        const auto& g = st.gaps[k - 1];
        auto it = std::upper_bound(g.begin(), g.end(), x, [](double v, const Interval& i) { return v < i.hi; });
        if (it != g.end() && it->lo < x && x < it->hi) {
            res.status = Membership::Out;
            res.level = k;
            res.index = static_cast<std::uint64_t>(it - g.begin());
            res.where = *it;
            return res;
        }
    }
    auto it = std::upper_bound(st.kept.begin(), st.kept.end(), x, [](double v, const Interval& i) { return v < i.lo; });
    if (it != st.kept.begin()) --it;
    res.level = depth;
    res.index = static_cast<std::uint64_t>(it - st.kept.begin());
    res.where = *it;
    res.status = (x == it->lo || x == it->hi) ? Membership::In : Membership::Undecided;
    return res;
}

std::vector<double> geometric_scales(double hi, double lo, int count) {
    if (count < 2 || !(hi > lo && lo > 0.0)) throw std::invalid_argument("scale ladder needs hi > lo > 0 and count >= 2");
    std::vector<double> s(count);
    double r = std::log(lo / hi) / (count - 1);
    for (int i = 0; i < count; ++i) s[i] = hi * std::exp(r * i);
    s.back() = lo;
    return s;
}

namespace {

void check_scales(const std::vector<double>& scales) {
    if (scales.size() < 3) throw std::invalid_argument("box dimension needs at least 3 scales");
    auto [mn, mx] = std::minmax_element(scales.begin(), scales.end());
    if (*mn <= 0.0 || *mx / *mn < 100.0 * (1 - 1e-12))
        throw std::invalid_argument("box dimension scales must span at least two decades");
}

BoxDimResult fit(const std::vector<double>& scales, std::vector<double> counts) {
    BoxDimResult r;
    r.scales = scales;
    r.counts = std::move(counts);
    if (std::all_of(r.counts.begin(), r.counts.end(), [](double c) { return c <= 1.0; })) {
        r.degenerate = true;
        return r;
    }
    double n = static_cast<double>(scales.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < scales.size(); ++i) {
        double x = -std::log(scales[i]), y = std::log(r.counts[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    r.dimension = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return r;
}

double count_1d(const std::vector<Interval>& sorted, double delta) {
    double count = 0.0;
    std::int64_t last = -1;
    for (const auto& iv : sorted) {
        auto j0 = static_cast<std::int64_t>(std::floor(iv.lo / delta));
        auto j1 = static_cast<std::int64_t>(std::floor(iv.hi / delta));
        j0 = std::max(j0, last + 1);
        if (j1 >= j0) {
            count += static_cast<double>(j1 - j0 + 1);
            last = j1;
        }
    }
    return count;
}

}  // namespace

BoxDimResult box_dimension(const std::vector<Interval>& intervals, const std::vector<double>& scales) {
    check_scales(scales);
    std::vector<Interval> sorted = intervals;
    std::sort(sorted.begin(), sorted.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::vector<double> counts;
    for (double d : scales) counts.push_back(count_1d(sorted, d));
    return fit(scales, counts);
}

BoxDimResult box_dimension_product(const std::vector<Interval>& intervals, const std::vector<double>& scales) {
    check_scales(scales);
    std::vector<Interval> sorted = intervals;
    std::sort(sorted.begin(), sorted.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::vector<double> counts;
    for (double d : scales) counts.push_back(std::ceil(1.0 / d - 1e-12) * count_1d(sorted, d));
    return fit(scales, counts);
}

BoxDimResult box_dimension_points(const std::vector<TorusPoint>& points, const std::vector<double>& scales) {
    check_scales(scales);
    if (points.empty()) throw std::invalid_argument("box dimension of an empty point set");
    std::vector<double> counts;
    for (double d : scales) {
        std::unordered_set<std::uint64_t> boxes;
        boxes.reserve(points.size());
        for (const auto& p : points) {
            auto i = static_cast<std::uint64_t>(std::floor(p.x / d));
            auto j = static_cast<std::uint64_t>(std::floor(p.y / d));
            boxes.insert((i << 32) ^ j);
        }
        counts.push_back(static_cast<double>(boxes.size()));
    }
    return fit(scales, counts);
}

}  // namespace abc
