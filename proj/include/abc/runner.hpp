#pragma once

#include "abc/engine.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace abc {

// Invalid configuration; what() names the offending field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StageMultipliers {
    std::int64_t k = 1, l = 1, s = 1;  // (k_n, l_n) produce stage n+1, whose s is s_{n+1}
};

struct Budgets {
    std::int64_t area_points = 500;
    std::int64_t commutation_points = 200;
    std::int64_t roundtrip_points = 1000;
    std::int64_t mc_samples = 200000;
    int visit_points = 10;
    int distribution_heights = 5;
    int confinement_heights = 5;
    int box_depth = 8;
    std::int64_t box_x_samples = 2048;
    std::int64_t max_pieces = 200000;     // permutation oracle skipped above this table size
    std::int64_t max_phase_check = 200000000;  // phase permutation skipped above this q_{n+1}
};

struct ExperimentConfig {
    Variant variant = Variant::A;
    int n_max = 2;
    BigInt p1 = 1, q1 = 2;
    std::int64_t s1 = 3;
    std::vector<StageMultipliers> stages;  // stage i produces stage i+2
    VariantParams params;
    std::vector<std::string> tests;        // empty: every test applicable to the variant
    std::uint64_t seed = 1;
    Budgets budgets;

    // Variant default schedule with n_max = 2.
    static ExperimentConfig defaults(Variant v);
    RotationSchedule schedule() const;
    nlohmann::json to_json() const;
};

// Strict parse: unknown keys, out-of-range values and inconsistent schedules throw ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

const std::vector<std::string>& known_tests();
bool test_applies(const std::string& test, Variant v);

struct TestOutcome {
    std::string test;
    int n = 0;
    std::string status;  // pass, fail, skipped
    bool hard = true;    // false for advisories
    nlohmann::json details;
};

struct RunResult {
    nlohmann::json report;
    std::vector<TestOutcome> outcomes;
    int exit_code = 0;  // 0 every hard assertion passed, 1 otherwise
};

// Builds stages, runs the selected tests on `jobs` workers and writes the report files to out_dir.
RunResult run(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, int jobs = 1);

// Writes a human-inspectable file for `what` in {schedule, regions, exchange-table, cantor-stage};
// returns the written path.
std::filesystem::path dump(const std::string& what, const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                           int depth = 3, int stage = 1);

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& p);

}  // namespace abc
