// Runs the thirteen acceptance criteria at their stated tolerances and prints one PASS/FAIL line
// each. Exit status is 0 once every criterion has been evaluated; with --strict it is 1 when any
// criterion failed.

#include "abc/cantor.hpp"
#include "abc/engine.hpp"
#include "abc/exchange.hpp"
#include "abc/runner.hpp"
#include "abc/verify.hpp"

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace abc;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

std::shared_ptr<const RotationSchedule> schedule_of(Variant v) {
    return std::make_shared<const RotationSchedule>(default_schedule(v));
}

const std::vector<Variant> kAll = {Variant::A, Variant::C, Variant::D, Variant::E};

// 1. Exact schedule recurrence, coprimality and phase permutation.
Verdict schedule_exactness() {
    bool ok = true;
    std::string note;
    for (Variant v : {Variant::A, Variant::C}) {
        // The default policy stops at stage 3; alpha_4 comes from (k_3, l_3) = (1, 1).
        RotationSchedule s = default_schedule(v).extended(1, 1, 1);
        for (int n = 1; n <= 3; ++n) {
            const ScheduleStage& a = s.stage(n);
            ok = ok && gcd(a.p, a.q) == 1;
            if (n >= 2) {
                const ScheduleStage& b = s.stage(n - 1);
                ok = ok && a.q == BigInt(b.k) * b.l * b.q * b.q && a.p == BigInt(b.k) * b.l * b.q * b.p + 1;
            }
            if (v != Variant::A) continue;  // phases depend on (p, q) only, which the variants share
            const std::int64_t q = to_i64(s.stage(n + 1).q), p = to_i64(s.stage(n + 1).p % s.stage(n + 1).q);
            std::vector<bool> seen(static_cast<std::size_t>(q), false);
            std::int64_t r = 0, distinct = 0;
            for (std::int64_t i = 0; i < q; ++i) {
                if (!seen[static_cast<std::size_t>(r)]) seen[static_cast<std::size_t>(r)] = true, ++distinct;
                r += p;
                if (r >= q) r -= q;
            }
            ok = ok && distinct == q;
            note += fmt(" q%d=%lld", n + 1, static_cast<long long>(q));
        }
    }
    return {ok, "recurrence, coprime, phases complete:" + note};
}

// 2. Area preservation of every elementary conjugacy and every H_n, n <= 3.
Verdict area_preservation() {
    double worst = 0.0;
    std::string where;
    auto check = [&](const std::string& name, const TorusMap& m) {
        double w = area_preservation_test(m, 500);
        if (w >= worst) worst = w, where = name;
    };
    check("quarter_turn", quarter_turn(0.1));
    for (Variant v : kAll)
        for (const auto& st : build_stages(v, schedule_of(v), VariantParams{}, 3)) {
            const std::string tag = std::string(to_string(v)) + std::to_string(st.n) + ":";
            if (v == Variant::A) {
                check(tag + "g", st.g);
                check(tag + "phi_w", build_phi_w(st.n, st.q, st.params.r));
                check(tag + "phi_g", build_phi_g(st.n, st.q, st.params.r));
                check(tag + "phi_m", build_phi_m(st.n, st.q, st.params.r));
            }
            check(tag + "phi", st.phi);
            check(tag + "P", st.P);
            check(tag + "h", st.h);
            check(tag + "H", st.H);
        }
    return {worst < 1e-6, fmt("max |det D - 1| = %.3g at %s (bound 1e-6)", worst, where.c_str())};
}

// 3. h_n commutes with S_{1/q_n}.
Verdict equivariance() {
    double worst = 0.0;
    for (Variant v : kAll)
        for (const auto& st : build_stages(v, schedule_of(v), VariantParams{}, 3))
            worst = std::max(worst, commutation_test(st.h, Rational(1, st.q), 200));
    return {worst < 1e-8, fmt("max commutation defect %.3g (bound 1e-8)", worst)};
}

// 4. Quarter turn on [0.2, 0.8]^2 and identity off [0.1, 0.9]^2.
Verdict quarter_turn_check() {
    const TorusMap R = quarter_turn(0.1);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double inside = 0.0, outside = 0.0;
    for (int i = 0; i < 100; ++i) {
        TorusPoint p{0.2 + 0.6 * U(rng), 0.2 + 0.6 * U(rng)};
        inside = std::max(inside, torus_distance(R(p), {p.y, 1.0 - p.x}));
        const double band = 0.1 * U(rng), along = U(rng);
        const TorusPoint frame[4] = {{band, along}, {0.9 + band, along}, {along, band}, {along, 0.9 + band}};
        TorusPoint o = wrap(frame[i % 4]);
        if (o.x > 0.1 && o.x < 0.9 && o.y > 0.1 && o.y < 0.9) continue;
        outside = std::max(outside, torus_distance(R(o), o));
    }
    return {inside < 1e-9 && outside == 0.0, fmt("rotation error %.3g, outside displacement %.3g", inside, outside)};
}

// 5. Verticality and proportionality of Phi_n on the partial decomposition, n = 2, r = 1 and 2.
Verdict verticality() {
    bool ok = true;
    std::string note;
    for (int r : {1, 2}) {
        VariantParams vp;
        vp.r = r;
        StageBundle st = build_stage(Variant::A, schedule_of(Variant::A), vp, 2);
        const double gamma = 1.0 / (st.n * std::pow(static_cast<double>(st.q), vp.sigma));
        int tested[2] = {0, 0}, passed[2] = {0, 0};
        for (int t = 0; t < r; ++t)
            for (const auto& I : eta_family(st, t, 5)) {
                DistributionResult d = distribution_test(st, I, {gamma, 4.0 / (3.0 * st.n), 1e-6});
                ++tested[I.barred];
                passed[I.barred] += d.pass;
            }
        ok = ok && passed[0] == tested[0] && passed[1] == tested[1];
        note += fmt(" r=%d: I %d/%d, I-bar %d/%d;", r, passed[0], tested[0], passed[1], tested[1]);
    }
    return {ok, "intervals passing" + note};
}

// 6 and 7. Birkhoff deviations over the full period at the designated points, n = 2.
Verdict genericity(Variant v) {
    StageBundle st = build_stage(v, schedule_of(v), VariantParams{}, 2);
    bool ok = true;
    double worst = 0.0, ratio = 0.0;
    for (TorusPoint x : designated_points(st)) {
        GenericityReport g = generic_test(st, x, TestFunctionSet::standard(), -1, 200000);
        ok = ok && g.pass;
        for (const auto& row : g.rows) {
            worst = std::max(worst, row.deviation);
            ratio = std::max(ratio, row.deviation / row.bound);
        }
    }
    return {ok, fmt("max deviation %.3g, max deviation/bound %.3g over %zu points", worst, ratio,
                    designated_points(st).size())};
}

// 8. Lower bound on trapped iterates in every cell, variant C, n = 2.
Verdict trapping() {
    StageBundle st = build_stage(Variant::C, schedule_of(Variant::C), VariantParams{}, 2);
    CantorStage cs = cantor_stage(st.cantor, st.n);
    bool ok = true;
    std::int64_t min_count = -1;
    double bound = 0.0;
    for (const auto& I : cs.kept) {
        TrappingReport r = trapping_count_test(st, {0.5 / static_cast<double>(st.q_next), (I.lo + I.hi) / 2});
        ok = ok && r.pass;
        min_count = min_count < 0 ? r.min_count : std::min(min_count, r.min_count);
        bound = r.bound;
    }
    return {ok, fmt("min count %lld over %zu x %lld cells (bound %.3g)", static_cast<long long>(min_count),
                    cs.kept.size(), static_cast<long long>(st.s * st.q), bound)};
}

// 9. Full-period band confinement and the pi2 deviation on the first bands, variants C and E.
Verdict confinement() {
    bool confined = true, claim = true;
    int points = 0, claim_points = 0, claim_ok = 0;
    double min_dev = 1.0;
    for (Variant v : {Variant::C, Variant::E}) {
        StageBundle st = build_stage(v, schedule_of(v), VariantParams{}, 2);
        for (TorusPoint x : confinement_base_points(st, 5, 0.5 / static_cast<double>(st.q_next))) {
            ConfinementReport c = nongeneric_trap_test(st, x);
            ++points;
            confined = confined && c.confined;
            const bool applies = v == Variant::E ? c.index == 0 : (c.level == 1 && c.half == 0);
            if (!applies) continue;
            ++claim_points;
            min_dev = std::min(min_dev, c.mean_deviation);
            claim_ok += c.mean_deviation >= 0.25;
            claim = claim && c.mean_deviation >= 0.25;
        }
    }
    return {confined && claim && points >= 20,
            fmt("%d points, all confined: %s; deviation >= 1/4 on %d/%d first-band points (min %.4f)", points,
                confined ? "yes" : "no", claim_ok, claim_points, min_dev)};
}

// 10. Cell visiting on the q_n x l_n grid at a stage with q_{n+1} > l_n q_n^2.
Verdict minimality() {
    StageBundle st = build_stage(Variant::A, schedule_of(Variant::A), VariantParams{}, 2);
    if (!st.schedule->growth_minimality(st.n)) return {false, "default schedule violates q_{n+1} > l_n q_n^2"};
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 1.0;
    for (int i = 0; i < 10; ++i) worst = std::min(worst, minimality_visit_test(st, {U(rng), U(rng)}).coverage);
    return {worst == 1.0, fmt("minimum coverage %.4f over 10 random points", worst)};
}

// 11. Piece tables against the index-formula oracle.
Verdict permutation_oracle() {
    std::int64_t tables = 0, rejected = 0, cells = 0, mismatches = 0;
    double imbalance = 0.0;
    for (ExchangeVariant v : {ExchangeVariant::C, ExchangeVariant::D, ExchangeVariant::E})
        for (int n = 1; n <= 3; ++n)
            for (std::int64_t q = 1; q <= 8; ++q)
                for (std::int64_t s = 1; s <= 6; ++s) {
                    CantorSpec spec = v == ExchangeVariant::C ? CantorSpec::middle_third() : CantorSpec::from_alpha(1.5);
                    try {
                        RectExchange re = build_exchange(v, n, q, s, spec);
                        OracleComparison c = compare_with_oracle(re, spec);
                        ++tables;
                        cells += c.cells;
                        mismatches += c.mismatches;
                        imbalance = std::max(imbalance, c.area_imbalance);
                    } catch (const std::invalid_argument&) {
                        ++rejected;
                    }
                }
    return {mismatches == 0 && imbalance < 1e-12 && tables > 0,
            fmt("%lld tables, %lld cells, %lld mismatches, max area imbalance %.2g, %lld parameter sets rejected",
                static_cast<long long>(tables), static_cast<long long>(cells), static_cast<long long>(mismatches),
                imbalance, static_cast<long long>(rejected))};
}

// 12. Box-counting dimensions of the Cantor factors and of the product sets.
Verdict dimensions() {
    bool ok = true;
    std::string note;
    auto one = [&](const char* name, const CantorSpec& spec, double target, double tol, double lo) {
        CantorStage cs = cantor_stage(spec, 10);
        auto scales = geometric_scales(0.1, lo, 12);
        double f = box_dimension(cs.kept, scales).dimension;
        double p = box_dimension_product(cs.kept, scales).dimension;
        ok = ok && std::fabs(f - target) <= tol && std::fabs(p - 1.0 - f) <= 0.06;
        note += fmt(" %s %.4f (target %.4f), product %.4f;", name, f, target, p);
    };
    one("middle-third", CantorSpec::middle_third(), std::log(2.0) / std::log(3.0), 0.03, 1e-4);
    for (double a : {1.25, 1.5, 1.75}) {
        CantorSpec s = CantorSpec::from_alpha(a);
        one(fmt("alpha=%.2f", a).c_str(), s, 1.0 / s.p, 0.06, 1e-4);
    }
    return {ok, "depth 10:" + note};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 13. Byte-identical reports for the same config and seed, also across worker counts.
Verdict determinism() {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / ("abc_acceptance_" + std::to_string(::getpid()));
    bool ok = true;
    int compared = 0;
    for (Variant v : {Variant::A, Variant::C}) {
        ExperimentConfig cfg = ExperimentConfig::defaults(v);
        cfg.seed = 7;
        cfg.budgets.mc_samples = 20000;
        const fs::path a = root / (std::string(to_string(v)) + "1"), b = root / (std::string(to_string(v)) + "2");
        run(cfg, a, 1);
        run(cfg, b, 2);
        for (const char* f : {"report.json", "schedule.csv", "deviations.csv", "counts_heatmap.csv", "boxcount.csv"}) {
            ok = ok && slurp(a / f) == slurp(b / f) && !slurp(a / f).empty();
            ++compared;
        }
    }
    fs::remove_all(root);
    return {ok, fmt("%d artifact pairs compared (jobs 1 vs 2)", compared)};
}

}  // namespace

int main(int argc, char** argv) {
    const bool strict = argc > 1 && std::strcmp(argv[1], "--strict") == 0;
    struct Criterion {
        const char* name;
        double budget_s;  // 0: no runtime bound
        std::function<Verdict()> run;
    };
    const std::vector<Criterion> criteria = {
        {"schedule exactness", 1, schedule_exactness},
        {"area preservation", 30, area_preservation},
        {"equivariance", 0, equivariance},
        {"quarter-turn correctness", 0, quarter_turn_check},
        {"verticality of the distribution map", 60, verticality},
        {"genericity bound, variant A", 300, [] { return genericity(Variant::A); }},
        {"genericity bound, variant C", 0, [] { return genericity(Variant::C); }},
        {"trapping counts", 0, trapping},
        {"non-generic confinement", 0, confinement},
        {"minimality coverage", 0, minimality},
        {"permutation oracle equivalence", 10, permutation_oracle},
        {"dimension estimates", 60, dimensions},
        {"determinism", 0, determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (criteria[i].budget_s > 0 && secs > criteria[i].budget_s) {
            v.pass = false;
            v.detail += fmt(" [runtime %.1fs over %.0fs]", secs, criteria[i].budget_s);
        }
        failed += !v.pass;
        std::printf("%s %2zu %s: %s (%.2fs)\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, v.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
    return strict && failed ? 1 : 0;
}
