// Experiment runner: `abc_cli run --config cfg.json --out dir` and `abc_cli dump <what> ...`.
// Exit status 0 when every hard assertion passes, 1 on an assertion failure, 2 on usage errors.

#include "abc/runner.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

abc::ExperimentConfig resolve(const std::string& config, const std::string& variant, bool has_seed,
                              std::uint64_t seed, const std::string& only) {
    abc::ExperimentConfig cfg;
    if (!config.empty()) {
        cfg = abc::load_config(config);
    } else {
        nlohmann::json j = nlohmann::json::object();
        if (!variant.empty()) j["variant"] = variant;
        cfg = abc::parse_config(j);
    }
    if (has_seed) cfg.seed = seed;
    if (!only.empty()) {
        nlohmann::json j = cfg.to_json();
        j["tests"] = split_csv(only);
        cfg = abc::parse_config(j);
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite stages of approximation-by-conjugation torus maps"};
    app.require_subcommand(1);

    std::string config, out = "out", only, variant;
    std::uint64_t seed = 0;
    int jobs = 1;

    auto* run = app.add_subcommand("run", "build stages, run the selected tests and write reports");
    run->add_option("--config", config, "JSON experiment config");
    run->add_option("--variant", variant, "variant when no config is given (A, C, D, E)");
    run->add_option("--out", out, "output directory");
    auto* seed_opt = run->add_option("--seed", seed, "random seed (overrides the config)");
    run->add_option("--only", only, "comma-separated test names");
    run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

    std::string what;
    int depth = 3, stage = 1;
    auto* dmp = app.add_subcommand("dump", "write one structure for inspection");
    dmp->add_option("what", what, "schedule, regions, exchange-table or cantor-stage")->required();
    dmp->add_option("--config", config, "JSON experiment config");
    dmp->add_option("--variant", variant, "variant when no config is given (A, C, D, E)");
    dmp->add_option("--out", out, "output directory");
    dmp->add_option("--depth", depth, "Cantor depth for cantor-stage");
    dmp->add_option("--stage", stage, "stage for exchange-table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*run) {
            abc::ExperimentConfig cfg = resolve(config, variant, seed_opt->count() > 0, seed, only);
            abc::RunResult res = abc::run(cfg, out, jobs);
            for (const auto& o : res.outcomes)
                std::cout << (o.status == "pass" ? "PASS " : o.status == "fail" ? "FAIL " : "SKIP ") << o.test
                          << " n=" << o.n << '\n';
            std::cout << "report: " << (std::filesystem::path(out) / "report.json").string() << '\n';
            return res.exit_code;
        }
        abc::ExperimentConfig cfg = resolve(config, variant, false, 0, "");
        std::cout << abc::dump(what, cfg, out, depth, stage).string() << '\n';
        return 0;
    } catch (const abc::ConfigError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
