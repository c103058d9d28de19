#include "abc/runner.hpp"

#include "abc/cantor.hpp"
#include "abc/exchange.hpp"
#include "abc/verify.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

namespace abc {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- config

namespace {

const std::vector<std::string> kTests = {"schedule",     "area",       "commutation", "roundtrip",   "quarter_turn",
                                         "mixing",       "distribution", "genericity", "minimality", "trapping",
                                         "confinement",  "dimension",  "permutation"};

template <class T>
T get_field(const json& j, const char* key, const std::string& path) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(path + key + ": wrong type");
    }
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& path) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError(path + it.key() + ": unknown field");
}

BigInt parse_bigint(const json& v, const std::string& field) {
    if (v.is_number_integer()) return BigInt(v.get<std::int64_t>());
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
            throw ConfigError(field + ": expected a non-negative integer");
        return BigInt(s);
    }
    throw ConfigError(field + ": expected an integer or integer string");
}

}  // namespace

const std::vector<std::string>& known_tests() { return kTests; }

bool test_applies(const std::string& test, Variant v) {
    const bool a = v == Variant::A;
    if (test == "mixing" || test == "distribution" || test == "minimality") return a;
    if (test == "trapping") return v == Variant::C;
    if (test == "confinement" || test == "dimension" || test == "permutation") return !a;
    return std::find(kTests.begin(), kTests.end(), test) != kTests.end();
}

ExperimentConfig ExperimentConfig::defaults(Variant v) {
    ExperimentConfig c;
    c.variant = v;
    c.stages = {{2, 3, v == Variant::A ? 25 : 32}, {8, 2, 9217}};
    return c;
}

RotationSchedule ExperimentConfig::schedule() const {
    RotationSchedule s = RotationSchedule::start(p1, q1, s1);
    for (const auto& m : stages) s = s.extended(m.k, m.l, m.s);
    return s;
}

json ExperimentConfig::to_json() const {
    json st = json::array();
    for (const auto& m : stages) st.push_back({{"k", m.k}, {"l", m.l}, {"s", m.s}});
    return {{"variant", to_string(variant)},
            {"n_max", n_max},
            {"schedule", {{"p1", p1.str()}, {"q1", q1.str()}, {"s1", s1}, {"stages", st}}},
            {"r", params.r},
            {"sigma", params.sigma},
            {"alpha", params.alpha},
            {"kappa_smoothing", params.kappa_smoothing},
            {"tests", tests},
            {"seed", seed},
            {"budgets",
             {{"area_points", budgets.area_points},
              {"commutation_points", budgets.commutation_points},
              {"roundtrip_points", budgets.roundtrip_points},
              {"mc_samples", budgets.mc_samples},
              {"visit_points", budgets.visit_points},
              {"distribution_heights", budgets.distribution_heights},
              {"confinement_heights", budgets.confinement_heights},
              {"box_depth", budgets.box_depth},
              {"box_x_samples", budgets.box_x_samples},
              {"max_pieces", budgets.max_pieces},
              {"max_phase_check", budgets.max_phase_check}}}};
}

ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    reject_unknown(j, {"variant", "n_max", "schedule", "r", "sigma", "alpha", "kappa_smoothing", "tests", "seed", "budgets"},
                   "");
    Variant v = Variant::A;
    if (j.contains("variant")) {
        try {
            v = parse_variant(get_field<std::string>(j, "variant", ""));
        } catch (const std::invalid_argument&) {
            throw ConfigError("variant: expected one of A, C, D, E");
        }
    }
    ExperimentConfig c = ExperimentConfig::defaults(v);
    if (j.contains("n_max")) c.n_max = get_field<int>(j, "n_max", "");
    if (c.n_max < 1 || c.n_max > 4) throw ConfigError("n_max out of [1, 4]");
    if (j.contains("r")) c.params.r = get_field<int>(j, "r", "");
    if (j.contains("sigma")) c.params.sigma = get_field<double>(j, "sigma", "");
    if (j.contains("alpha")) c.params.alpha = get_field<double>(j, "alpha", "");
    if (j.contains("kappa_smoothing")) c.params.kappa_smoothing = get_field<double>(j, "kappa_smoothing", "");
    if (!(c.params.sigma > 0.0 && c.params.sigma < 0.5)) throw ConfigError("sigma out of (0, 1/2)");
    if (!(c.params.alpha > 1.0 && c.params.alpha < 2.0)) throw ConfigError("alpha out of (1, 2)");
    if (c.params.r < 1) throw ConfigError("r must be >= 1");
    if (!(c.params.kappa_smoothing >= 0.0 && c.params.kappa_smoothing < 0.25))
        throw ConfigError("kappa_smoothing out of [0, 1/4)");
    if (j.contains("seed")) c.seed = get_field<std::uint64_t>(j, "seed", "");

    if (j.contains("schedule")) {
        const json& s = j.at("schedule");
        if (!s.is_object()) throw ConfigError("schedule: expected an object");
        reject_unknown(s, {"p1", "q1", "s1", "stages"}, "schedule.");
        if (s.contains("p1")) c.p1 = parse_bigint(s.at("p1"), "schedule.p1");
        if (s.contains("q1")) c.q1 = parse_bigint(s.at("q1"), "schedule.q1");
        if (s.contains("s1")) c.s1 = get_field<std::int64_t>(s, "s1", "schedule.");
        if (s.contains("stages")) {
            const json& a = s.at("stages");
            if (!a.is_array()) throw ConfigError("schedule.stages: expected an array");
            c.stages.clear();
            for (std::size_t i = 0; i < a.size(); ++i) {
                const std::string path = "schedule.stages[" + std::to_string(i) + "].";
                if (!a[i].is_object()) throw ConfigError(path + ": expected an object");
                reject_unknown(a[i], {"k", "l", "s"}, path);
                StageMultipliers m;
                m.k = get_field<std::int64_t>(a[i], "k", path);
                m.l = get_field<std::int64_t>(a[i], "l", path);
                m.s = get_field<std::int64_t>(a[i], "s", path);
                if (m.k < 1 || m.l < 1 || m.s < 1) throw ConfigError(path + "k, l, s must be >= 1");
                c.stages.push_back(m);
            }
        }
    }
    if (c.q1 < 1) throw ConfigError("schedule.q1 must be >= 1");
    if (c.s1 < 1) throw ConfigError("schedule.s1 must be >= 1");
    if (gcd(c.p1, c.q1) != 1) throw ConfigError("schedule: p1 and q1 must be coprime");
    if (static_cast<int>(c.stages.size()) + 1 < c.n_max) throw ConfigError("schedule.stages: fewer stages than n_max");

    if (j.contains("tests")) {
        c.tests = get_field<std::vector<std::string>>(j, "tests", "");
        for (const auto& t : c.tests)
            if (std::find(kTests.begin(), kTests.end(), t) == kTests.end())
                throw ConfigError("tests: unknown test \"" + t + "\"");
    }
    if (j.contains("budgets")) {
        const json& b = j.at("budgets");
        if (!b.is_object()) throw ConfigError("budgets: expected an object");
        reject_unknown(b,
                       {"area_points", "commutation_points", "roundtrip_points", "mc_samples", "visit_points",
                        "distribution_heights", "confinement_heights", "box_depth", "box_x_samples", "max_pieces",
                        "max_phase_check"},
                       "budgets.");
        auto pos = [&](const char* key, auto& dst, long long min) {
            if (!b.contains(key)) return;
            using T = std::decay_t<decltype(dst)>;
            dst = get_field<T>(b, key, "budgets.");
            if (static_cast<long long>(dst) < min)
                throw ConfigError(std::string("budgets.") + key + " must be >= " + std::to_string(min));
        };
        pos("area_points", c.budgets.area_points, 100);
        pos("commutation_points", c.budgets.commutation_points, 100);
        pos("roundtrip_points", c.budgets.roundtrip_points, 1);
        pos("mc_samples", c.budgets.mc_samples, 1);
        pos("visit_points", c.budgets.visit_points, 1);
        pos("distribution_heights", c.budgets.distribution_heights, 1);
        pos("confinement_heights", c.budgets.confinement_heights, 1);
        pos("box_depth", c.budgets.box_depth, 2);
        pos("box_x_samples", c.budgets.box_x_samples, 1);
        pos("max_pieces", c.budgets.max_pieces, 1);
        pos("max_phase_check", c.budgets.max_phase_check, 1);
        if (c.budgets.box_depth > 16) throw ConfigError("budgets.box_depth must be <= 16");
    }
    try {
        (void)c.schedule();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("schedule: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
    return parse_config(j);
}

// ---------------------------------------------------------------- hashing

std::string sha256_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

// ---------------------------------------------------------------- tests

namespace {

// Fixed-format numbers keep CSV output byte-stable.
std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

struct TaskOutput {
    std::vector<TestOutcome> outcomes;
    std::vector<std::string> deviations, heatmap, boxcount;
};

TestOutcome outcome(const std::string& test, int n, bool pass, json details) {
    return {test, n, pass ? "pass" : "fail", true, std::move(details)};
}

TestOutcome skipped(const std::string& test, int n, const std::string& why) {
    return {test, n, "skipped", true, {{"reason", why}}};
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(salt)};
    return std::mt19937_64(seq);
}

TestOutcome test_schedule(const RotationSchedule& sch, int n, std::int64_t max_q) {
    const ScheduleStage& s = sch.stage(n);
    json d;
    bool ok = gcd(s.p, s.q) == 1;
    d["coprime"] = ok;
    if (n >= 2) {
        const ScheduleStage& pv = sch.stage(n - 1);
        bool rec = s.q == BigInt(pv.k) * pv.l * pv.q * pv.q && s.p == BigInt(pv.k) * pv.l * pv.q * pv.p + 1;
        d["recurrence"] = rec;
        ok = ok && rec;
    }
    if (!sch.has(n + 1)) {
        d["phases"] = "no successor stage";
    } else if (sch.stage(n + 1).q > max_q) {
        d["phases"] = "q_{n+1} above budget";
    } else {
        const std::int64_t q = to_i64(sch.stage(n + 1).q), p = to_i64(sch.stage(n + 1).p % sch.stage(n + 1).q);
        std::vector<bool> seen(static_cast<std::size_t>(q), false);
        std::int64_t r = 0, distinct = 0;
        for (std::int64_t i = 0; i < q; ++i) {
            if (!seen[static_cast<std::size_t>(r)]) {
                seen[static_cast<std::size_t>(r)] = true;
                ++distinct;
            }
            r += p;
            if (r >= q) r -= q;
        }
        d["phases"] = distinct == q ? "all residues j/q_{n+1} met once" : "phase multiset incomplete";
        ok = ok && distinct == q;
    }
    return outcome("schedule", n, ok, d);
}

TestOutcome test_area(const StageBundle& st, std::int64_t N) {
    std::vector<std::pair<std::string, TorusMap>> maps = {{"phi", st.phi}, {"P", st.P}, {"h", st.h}, {"H", st.H}};
    if (st.variant == Variant::A) {
        maps.push_back({"g", st.g});
        maps.push_back({"phi_w", build_phi_w(st.n, st.q, st.params.r)});
        maps.push_back({"phi_g", build_phi_g(st.n, st.q, st.params.r)});
        maps.push_back({"phi_m", build_phi_m(st.n, st.q, st.params.r)});
    }
    json d;
    bool ok = true;
    for (const auto& [name, m] : maps) {
        double w = area_preservation_test(m, N);
        d[name] = w;
        ok = ok && w < 1e-6;
    }
    d["threshold"] = 1e-6;
    return outcome("area", st.n, ok, d);
}

TestOutcome test_commutation(const StageBundle& st, std::int64_t N) {
    double w = commutation_test(st.h, Rational(1, st.q), N);
    return outcome("commutation", st.n, w < 1e-8, {{"defect", w}, {"threshold", 1e-8}, {"shift", "1/" + std::to_string(st.q)}});
}

// Each built factor must round-trip within tau_map: h_n itself, and H_{n-1} at the points h_n p. The forward
// error of the full chain H_n is reported but not asserted, since ||Dh_n^-1|| amplifies the H_{n-1} error.
TestOutcome test_roundtrip(const StageBundle& st, const StageBundle* prev, std::int64_t N) {
    constexpr double kTauMap = 1e-8;
    double fwd = 0.0, res = 0.0, h_err = 0.0, prefix_err = 0.0;
    for (std::int64_t i = 0; i < N; ++i) {
        TorusPoint p = r2_point(i, 0.25, 0.75);
        TorusPoint hp = st.H(p);
        TorusPoint back = st.H_inv(hp);
        fwd = std::max(fwd, torus_distance(back, p));
        res = std::max(res, torus_distance(st.H(back), hp));
        TorusPoint local = st.h(p);
        h_err = std::max(h_err, torus_distance(st.h.inverse_eval(local), p));
        if (prev) prefix_err = std::max(prefix_err, torus_distance(prev->H_inv(hp), local));
    }
    const bool ok = h_err < kTauMap && (prev ? prefix_err < kTauMap : fwd < kTauMap);
    return outcome("roundtrip", st.n, ok,
                   {{"stage_map_error", h_err},
                    {"prefix_error", prefix_err},
                    {"forward_error", fwd},
                    {"image_residual", res},
                    {"threshold", kTauMap}});
}

TestOutcome test_quarter_turn() {
    const TorusMap R = quarter_turn(0.1);
    double inside = 0.0, outside = 0.0;
    for (int i = 0; i < 100; ++i) {
        TorusPoint u = r2_point(i);
        TorusPoint p{0.2 + 0.6 * u.x, 0.2 + 0.6 * u.y};
        TorusPoint want{0.5 + (p.y - 0.5), 0.5 - (p.x - 0.5)};
        inside = std::max(inside, torus_distance(R(p), want));
        // One of the four frame strips outside [0.1, 0.9]^2.
        const double band = 0.1 * u.y, along = u.x;
        const TorusPoint frame[4] = {{band, along}, {0.9 + band, along}, {along, band}, {along, 0.9 + band}};
        TorusPoint o = wrap(frame[i % 4]);
        if (o.x > 0.1 && o.x < 0.9 && o.y > 0.1 && o.y < 0.9) continue;
        outside = std::max(outside, torus_distance(R(o), o));
    }
    return outcome("quarter_turn", 0, inside < 1e-9 && outside == 0.0,
                   {{"rotation_error", inside}, {"outside_displacement", outside}});
}

TestOutcome test_mixing(const StageBundle& st) {
    if (!st.alpha_next) return skipped("mixing", st.n, "no successor stage");
    MixingSequence ms = mixing_sequence(st);
    return outcome("mixing", st.n, ms.bound_ok,
                   {{"m", ms.m.str()}, {"a", ms.a.str()}, {"bound_ok", ms.bound_ok}, {"growth_ok", ms.growth_ok}});
}

TestOutcome test_distribution(const StageBundle& st, int heights) {
    if (!st.alpha_next) return skipped("distribution", st.n, "no successor stage");
    const double gamma = 1.0 / (st.n * std::pow(static_cast<double>(st.q), st.params.sigma));
    const DistributionSpec spec{gamma, 4.0 / (3.0 * st.n), 1e-6};
    json d;
    d["gamma"] = gamma;
    bool ok = true;
    std::int64_t total = 0;
    for (int t = 0; t < st.params.r; ++t) {
        std::int64_t tested[2] = {0, 0}, passed[2] = {0, 0};
        double spread[2] = {0, 0}, defect[2] = {0, 0};
        json first_fail;
        for (const auto& I : eta_family(st, t, heights)) {
            DistributionResult r = distribution_test(st, I, spec);
            int b = I.barred ? 1 : 0;
            ++tested[b];
            passed[b] += r.pass;
            spread[b] = std::max(spread[b], r.x_spread);
            defect[b] = std::max(defect[b], r.max_defect);
            if (!r.pass && first_fail.is_null()) first_fail = r.to_json();
        }
        for (int b = 0; b < 2; ++b) {
            d["t" + std::to_string(t)][b ? "barred" : "plain"] = {
                {"tested", tested[b]}, {"passed", passed[b]}, {"max_spread", spread[b]}, {"max_defect", defect[b]}};
            ok = ok && passed[b] == tested[b];
            total += tested[b];
        }
        if (!first_fail.is_null()) d["t" + std::to_string(t)]["first_failure"] = first_fail;
    }
    if (total == 0) return skipped("distribution", st.n, "partial decomposition is empty at this stage");
    return outcome("distribution", st.n, ok, d);
}

TaskOutput test_genericity(const StageBundle& st, std::int64_t mc) {
    TaskOutput out;
    if (!st.alpha_next) {
        out.outcomes.push_back(skipped("genericity", st.n, "no successor stage"));
        return out;
    }
    const auto fns = TestFunctionSet::standard();
    json pts = json::array();
    bool ok = true;
    std::size_t idx = 0;
    for (TorusPoint x : designated_points(st)) {
        GenericityReport g = generic_test(st, x, fns, -1, mc);
        ok = ok && g.pass;
        pts.push_back(g.to_json());
        for (const auto& r : g.rows)
            out.deviations.push_back(std::string(to_string(st.variant)) + "," + std::to_string(st.n) + "," +
                                     std::to_string(idx) + "," + r.name + "," + num(r.average) + "," +
                                     num(r.integral) + "," + num(r.deviation) + "," + num(r.bound) + "," +
                                     (r.pass ? "1" : "0"));
        if (idx == 0)
            for (std::int64_t i = 0; i < g.grid.nx; ++i)
                for (std::int64_t j = 0; j < g.grid.ny; ++j)
                    out.heatmap.push_back("genericity," + std::to_string(st.n) + "," + std::to_string(i) + "," +
                                          std::to_string(j) + "," +
                                          std::to_string(g.cell_counts[static_cast<std::size_t>(i * g.grid.ny + j)]));
        ++idx;
    }
    out.outcomes.push_back(outcome("genericity", st.n, ok, {{"points", pts}}));
    return out;
}

TaskOutput test_minimality(const StageBundle& st, int points, std::uint64_t seed) {
    TaskOutput out;
    if (!st.alpha_next) {
        out.outcomes.push_back(skipped("minimality", st.n, "no successor stage"));
        return out;
    }
    if (!st.schedule->growth_minimality(st.n)) {
        out.outcomes.push_back(skipped("minimality", st.n, "q_{n+1} <= l_n q_n^2"));
        return out;
    }
    auto rng = stream(seed, 0x6d696eULL + static_cast<std::uint64_t>(st.n));
    std::uniform_real_distribution<double> U(0.0, 1.0);
    json pts = json::array();
    bool ok = true;
    for (int i = 0; i < points; ++i) {
        TorusPoint x{U(rng), U(rng)};
        VisitReport v = minimality_visit_test(st, x);
        ok = ok && v.pass;
        pts.push_back({{"point", {x.x, x.y}}, {"visited", v.visited}, {"cells", v.grid.cells()}, {"coverage", v.coverage}});
        if (i == 0)
            for (std::int64_t a = 0; a < v.grid.nx; ++a)
                for (std::int64_t b = 0; b < v.grid.ny; ++b)
                    out.heatmap.push_back("minimality," + std::to_string(st.n) + "," + std::to_string(a) + "," +
                                          std::to_string(b) + "," +
                                          std::to_string(v.counts[static_cast<std::size_t>(a * v.grid.ny + b)]));
    }
    out.outcomes.push_back(outcome("minimality", st.n, ok, {{"points", pts}}));
    return out;
}

TestOutcome test_trapping(const StageBundle& st) {
    if (!st.alpha_next) return skipped("trapping", st.n, "no successor stage");
    CantorStage cs = cantor_stage(st.cantor, st.n);
    const double x = 0.5 / static_cast<double>(st.q_next);
    json rows = json::array();
    bool ok = true;
    for (std::size_t t1 = 0; t1 < cs.kept.size(); ++t1) {
        TrappingReport r = trapping_count_test(st, {x, (cs.kept[t1].lo + cs.kept[t1].hi) / 2});
        ok = ok && r.pass;
        rows.push_back({{"t1", t1}, {"min_count", r.min_count}, {"bound", r.bound}, {"excluded", r.excluded},
                        {"cells", r.counts.size()}, {"pass", r.pass}});
    }
    return outcome("trapping", st.n, ok, {{"kept_cells", rows}});
}

TestOutcome test_confinement(const StageBundle& st, int heights, std::uint64_t seed) {
    if (!st.alpha_next) return skipped("confinement", st.n, "no successor stage");
    auto rng = stream(seed, 0x636f6eULL + static_cast<std::uint64_t>(st.n));
    const double x = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    json rows = json::array();
    bool confined = true, claim = true;
    std::int64_t points = 0;
    for (TorusPoint p : confinement_base_points(st, heights, x)) {
        ConfinementReport c = nongeneric_trap_test(st, p);
        json row = c.to_json();
        row["point"] = {p.x, p.y};
        // The deviation claim concerns the bands of the first split (C/D) or of the lowest kept strip (E).
        const bool applies = st.variant == Variant::E ? c.index == 0 : (c.level == 1 && c.half == 0);
        if (applies) {
            row["deviation_claim"] = c.mean_deviation >= 0.25;
            claim = claim && c.mean_deviation >= 0.25;
        }
        confined = confined && c.confined;
        rows.push_back(row);
        ++points;
    }
    return outcome("confinement", st.n, confined && claim,
                   {{"points", points}, {"all_confined", confined}, {"deviation_claim", claim}, {"rows", rows}});
}

TaskOutput test_dimension(const StageBundle& st, int depth, std::int64_t x_samples) {
    TaskOutput out;
    const bool mid = st.cantor.kind == CantorKind::MiddleThird;
    const double target = mid ? std::log(2.0) / std::log(3.0) : 1.0 / st.cantor.p;
    const double tol = mid ? 0.03 : 0.06;
    CantorStage cs = cantor_stage(st.cantor, depth);
    const auto scales = geometric_scales(0.1, mid ? 1e-3 : 1e-4, 12);
    BoxDimResult f = box_dimension(cs.kept, scales);
    BoxDimResult p = box_dimension_product(cs.kept, scales);
    DimensionSandwich s = generic_set_dimension(st, depth, x_samples, geometric_scales(0.1, 1e-3, 12));
    auto emit = [&](const std::string& set, const BoxDimResult& r) {
        for (std::size_t i = 0; i < r.scales.size(); ++i)
            out.boxcount.push_back(set + "," + std::to_string(st.n) + "," + num(r.scales[i]) + "," + num(r.counts[i]));
    };
    emit("factor", f);
    emit("product", p);
    emit("image", s.image);
    bool ok = std::fabs(f.dimension - target) <= tol && std::fabs(p.dimension - 1.0 - f.dimension) <= 0.06 && s.within;
    out.outcomes.push_back(outcome("dimension", st.n, ok,
                                   {{"depth", depth},
                                    {"factor", f.dimension},
                                    {"target", target},
                                    {"tolerance", tol},
                                    {"product", p.dimension},
                                    {"image", s.image.dimension},
                                    {"sandwich", s.within}}));
    return out;
}

ExchangeVariant exchange_variant(Variant v) {
    switch (v) {
        case Variant::C: return ExchangeVariant::C;
        case Variant::D: return ExchangeVariant::D;
        case Variant::E: return ExchangeVariant::E;
        default: break;
    }
    throw std::invalid_argument("variant A has no rectangle exchange");
}


TestOutcome test_permutation(const StageBundle& st, std::int64_t max_pieces) {
    const std::int64_t cells = st.q * st.s * static_cast<std::int64_t>(st.exchange->segments().size());
    if (cells > max_pieces) return skipped("permutation", st.n, "piece table above budget");
    OracleComparison c = compare_with_oracle(*st.exchange, st.cantor, static_cast<std::size_t>(max_pieces) * 4);
    return outcome("permutation", st.n, c.mismatches == 0 && c.area_imbalance < 1e-12,
                   {{"cells", c.cells}, {"mismatches", c.mismatches}, {"area_imbalance", c.area_imbalance}});
}

void write_lines(const fs::path& p, const std::string& header, const std::vector<std::string>& rows) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << header << '\n';
    for (const auto& r : rows) out << r << '\n';
}

// Runs tasks on a fixed worker pool; results keep task order.
template <class R>
std::vector<R> run_pool(const std::vector<std::function<R()>>& tasks, int jobs) {
    std::vector<R> results(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();) {
            try {
                results[i] = tasks[i]();
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int w = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
    std::vector<std::thread> pool;
    for (int i = 1; i < w; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

}  // namespace

RunResult run(const ExperimentConfig& cfg, const fs::path& out_dir, int jobs) {
    auto sched = std::make_shared<const RotationSchedule>(cfg.schedule());
    const std::vector<StageBundle> stages = build_stages(cfg.variant, sched, cfg.params, cfg.n_max);

    std::vector<std::string> selected;
    for (const auto& t : known_tests())
        if ((cfg.tests.empty() || std::count(cfg.tests.begin(), cfg.tests.end(), t)) && test_applies(t, cfg.variant))
            selected.push_back(t);

    std::vector<std::function<TaskOutput()>> tasks;
    auto single = [](std::function<TestOutcome()> f) {
        return [f] { return TaskOutput{{f()}, {}, {}, {}}; };
    };
    const Budgets& b = cfg.budgets;
    for (const auto& t : selected) {
        if (t == "quarter_turn") {
            tasks.push_back(single([] { return test_quarter_turn(); }));
            continue;
        }
        for (const auto& st : stages) {
            const StageBundle* s = &st;
            const StageBundle* prev = st.n > 1 ? &stages[static_cast<std::size_t>(st.n - 2)] : nullptr;
            if (t == "schedule") tasks.push_back(single([s, &b] { return test_schedule(*s->schedule, s->n, b.max_phase_check); }));
            if (t == "area") tasks.push_back(single([s, &b] { return test_area(*s, b.area_points); }));
            if (t == "commutation") tasks.push_back(single([s, &b] { return test_commutation(*s, b.commutation_points); }));
            if (t == "roundtrip") tasks.push_back(single([s, prev, &b] { return test_roundtrip(*s, prev, b.roundtrip_points); }));
            if (t == "mixing") tasks.push_back(single([s] { return test_mixing(*s); }));
            if (t == "distribution")
                tasks.push_back(single([s, &b] { return test_distribution(*s, b.distribution_heights); }));
            if (t == "genericity") tasks.push_back([s, &b] { return test_genericity(*s, b.mc_samples); });
            if (t == "minimality") tasks.push_back([s, &b, &cfg] { return test_minimality(*s, b.visit_points, cfg.seed); });
            if (t == "trapping") tasks.push_back(single([s] { return test_trapping(*s); }));
            if (t == "confinement")
                tasks.push_back(single([s, &b, &cfg] { return test_confinement(*s, b.confinement_heights, cfg.seed); }));
            if (t == "dimension") tasks.push_back([s, &b] { return test_dimension(*s, b.box_depth, b.box_x_samples); });
            if (t == "permutation") tasks.push_back(single([s, &b] { return test_permutation(*s, b.max_pieces); }));
        }
    }
    std::vector<TaskOutput> outs = run_pool(tasks, jobs);

    RunResult res;
    std::vector<std::string> dev, heat, box;
    for (auto& o : outs) {
        for (auto& oc : o.outcomes) res.outcomes.push_back(std::move(oc));
        dev.insert(dev.end(), o.deviations.begin(), o.deviations.end());
        heat.insert(heat.end(), o.heatmap.begin(), o.heatmap.end());
        box.insert(box.end(), o.boxcount.begin(), o.boxcount.end());
    }

    // Growth conditions and layout remarks are advisories; they never fail the run.
    json advisories = json::array();
    json growth = json::array();
    for (const auto& st : stages) {
        for (const auto& a : st.advisories) advisories.push_back({{"n", st.n}, {"message", a}});
        GrowthReport g = check_growth_conditions(stages, st.n);
        for (const auto& c : g.checks)
            if (!c.satisfied)
                advisories.push_back({{"n", st.n}, {"message", "growth condition " + c.name + " not met" +
                                                                    (c.note.empty() ? "" : " (" + c.note + ")")}});
        growth.push_back(g.to_json());
    }

    fs::create_directories(out_dir);
    std::vector<std::string> sched_rows;
    for (int n = 1; n <= sched->size(); ++n) {
        const ScheduleStage& s = sched->stage(n);
        bool nx = sched->has(n + 1);
        sched_rows.push_back(std::to_string(n) + "," + s.p.str() + "," + s.q.str() + "," + std::to_string(s.s) + "," +
                             std::to_string(s.k) + "," + std::to_string(s.l) + "," +
                             (nx ? (sched->growth_10n2(n) ? "1" : "0") : "") + "," +
                             (nx ? (sched->growth_minimality(n) ? "1" : "0") : ""));
    }
    write_lines(out_dir / "schedule.csv", "n,p,q,s,k,l,growth_10n2,growth_minimality", sched_rows);
    write_lines(out_dir / "deviations.csv", "variant,n,point,function,average,integral,deviation,bound,pass", dev);
    write_lines(out_dir / "counts_heatmap.csv", "source,n,i,j,count", heat);
    write_lines(out_dir / "boxcount.csv", "set,n,scale,count", box);

    json manifest = json::object();
    for (const char* f : {"schedule.csv", "deviations.csv", "counts_heatmap.csv", "boxcount.csv"})
        manifest[f] = sha256_file(out_dir / f);

    json tests = json::array();
    json failures = json::array();
    for (const auto& o : res.outcomes) {
        tests.push_back({{"test", o.test}, {"n", o.n}, {"status", o.status}, {"details", o.details}});
        if (o.hard && o.status == "fail") failures.push_back(o.test + "@n=" + std::to_string(o.n));
    }
    res.exit_code = failures.empty() ? 0 : 1;
    res.report = {{"config", cfg.to_json()},
                  {"schedule", sched->to_json()},
                  {"growth", growth},
                  {"advisories", advisories},
                  {"tests", tests},
                  {"summary", {{"pass", failures.empty()}, {"failures", failures}}},
                  {"manifest", manifest}};
    std::ofstream rep(out_dir / "report.json", std::ios::binary);
    rep << res.report.dump(2) << '\n';
    return res;
}

// ---------------------------------------------------------------- dump

fs::path dump(const std::string& what, const ExperimentConfig& cfg, const fs::path& out_dir, int depth, int stage) {
    fs::create_directories(out_dir);
    auto sched = std::make_shared<const RotationSchedule>(cfg.schedule());
    if (what == "schedule") {
        fs::path p = out_dir / "schedule.csv";
        std::vector<std::string> rows;
        for (int n = 1; n <= sched->size(); ++n) {
            const ScheduleStage& s = sched->stage(n);
            bool nx = sched->has(n + 1);
            rows.push_back(std::to_string(n) + "," + s.p.str() + "," + s.q.str() + "," +
                           (nx ? (sched->growth_10n2(n) ? "1" : "0") : "") + "," +
                           (nx ? (sched->growth_minimality(n) ? "1" : "0") : ""));
        }
        write_lines(p, "n,p,q,growth_10n2,growth_minimality", rows);
        return p;
    }
    if (what == "regions") {
        fs::path p = out_dir / "regions.json";
        json a = json::array();
        for (const auto& st : build_stages(cfg.variant, sched, cfg.params, cfg.n_max))
            a.push_back({{"n", st.n}, {"families", st.catalog.to_json()}});
        std::ofstream(p, std::ios::binary) << a.dump(2) << '\n';
        return p;
    }
    if (what == "exchange-table") {
        if (stage < 1 || stage > cfg.n_max) throw ConfigError("stage out of [1, n_max]");
        StageBundle st = build_stage(cfg.variant, sched, cfg.params, stage);
        if (!st.exchange) throw ConfigError("variant A has no rectangle exchange");
        fs::path p = out_dir / ("exchange_n" + std::to_string(stage) + ".csv");
        std::vector<std::string> rows;
        const auto& segs = st.exchange->segments();
        for (const auto& pc : st.exchange->pieces()) {
            const ExchangeSegment& sg = segs[pc.segment];
            CellIndex ci{sg.family, sg.level, pc.column * st.s + pc.cell, sg.half >= 0 ? std::uint64_t(sg.half) : sg.index};
            CellImage want = perm_image_bruteforce(exchange_variant(cfg.variant), st.n, st.q, st.s, st.cantor, ci);
            bool match = false;
            for (const auto& r : want.targets)
                match = match || (std::fabs(r.x0 - pc.target.x0) < 1e-12 && std::fabs(r.x1 - pc.target.x1) < 1e-12 &&
                                  std::fabs(r.y0 - pc.target.y0) < 1e-12 && std::fabs(r.y1 - pc.target.y1) < 1e-12);
            rows.push_back(std::to_string(pc.column) + "," + std::to_string(pc.cell) + "," + to_string(sg.family) + "," +
                           std::to_string(sg.level) + "," + std::to_string(ci.i2) + "," + num(pc.source.x0) + "," +
                           num(pc.source.x1) + "," + num(pc.source.y0) + "," + num(pc.source.y1) + "," +
                           num(pc.target.x0) + "," + num(pc.target.x1) + "," + num(pc.target.y0) + "," +
                           num(pc.target.y1) + "," + to_string(pc.orientation) + "," + (match ? "1" : "0"));
        }
        write_lines(p, "column,cell,family,level,index,src_x0,src_x1,src_y0,src_y1,tgt_x0,tgt_x1,tgt_y0,tgt_y1,orientation,oracle_match",
                    rows);
        return p;
    }
    if (what == "cantor-stage") {
        if (depth < 0 || depth > 20) throw ConfigError("depth out of [0, 20]");
        CantorSpec spec = cfg.variant == Variant::C || cfg.variant == Variant::A ? CantorSpec::middle_third()
                                                                                 : CantorSpec::from_alpha(cfg.params.alpha);
        fs::path p = out_dir / ("cantor_stage_" + std::to_string(depth) + ".json");
        std::ofstream(p, std::ios::binary) << cantor_stage(spec, depth).to_json().dump(2) << '\n';
        return p;
    }
    throw ConfigError("dump: unknown target \"" + what + "\"");
}

}  // namespace abc
