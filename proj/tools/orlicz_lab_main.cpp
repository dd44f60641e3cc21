// orlicz-lab: run a configured experiment scenario, calibrate envelope
// constants from recorded runs, or fit scaling exponents from records.
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "olab/harness.hpp"

namespace {

std::uint64_t parse_seed(const std::string& s) {
    std::size_t used = 0;
    std::uint64_t x = std::stoull(s, &used, 0);
    if (used != s.size()) throw CLI::ValidationError("seed", "not an integer: " + s);
    return x;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, int threads,
            const std::string& seed_override) {
    auto cfg = olab::harness::ExperimentConfig::load(config_path);
    if (!seed_override.empty()) {
        cfg.seed = parse_seed(seed_override);
    } else if (const char* env = std::getenv("ORLICZ_LAB_SEED"); env && *env) {
        cfg.seed = parse_seed(env);
    }
    std::cerr << "scenario " << olab::harness::scenario_name(cfg.scenario) << ", seed " << cfg.seed
              << ", " << cfg.dims.size() * cfg.ks.size() * static_cast<std::size_t>(cfg.trials)
              << " items\n";
    auto result = olab::harness::run(cfg, {}, threads);
    olab::harness::write_outputs(out_dir, cfg, result);
    std::size_t passes = 0;
    for (const auto& r : result.records) passes += r.pass ? 1 : 0;
    std::cerr << result.records.size() << " records (" << passes << " pass) -> " << out_dir
              << "\n";
    return 0;
}

int cmd_calibrate(const std::string& records_path, const std::string& constants_out) {
    auto records = olab::harness::read_records_csv(records_path);
    auto cal = olab::harness::calibrate_constants(records);
    nlohmann::json j;
    for (const auto& [metric, e] : cal.multipliers)
        j["multipliers"][metric] = {{"multiplier", e.multiplier}, {"records", e.records}};
    j["constants"] = olab::harness::detail::constants_json(cal.constants);
    std::cout << j.dump(2) << "\n";
    if (!constants_out.empty()) {
        olab::config::KeyValues kv;
        for (const auto& [k, v] : cal.constants.to_kv()) kv.set(k, v);
        std::ofstream out(constants_out);
        if (!out) throw std::runtime_error("cannot write " + constants_out);
        out << kv.serialize();
    }
    return 0;
}

int cmd_fit(const std::string& records_path, const std::string& x_field,
            const std::string& metric, const std::string& y_field) {
    auto records = olab::harness::read_records_csv(records_path);
    std::vector<olab::harness::ExperimentRecord> slice;
    for (const auto& r : records)
        if (r.metric == metric) slice.push_back(r);
    if (slice.empty()) throw std::runtime_error("no records with metric " + metric);
    auto fit = olab::harness::scaling_fit(slice, x_field, y_field);
    nlohmann::json j{{"metric", metric},
                     {"x", x_field},
                     {"y", y_field},
                     {"slope", fit.slope},
                     {"intercept", fit.intercept},
                     {"stderr", fit.stderr_},
                     {"points", fit.points}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"empirical-process experiment runner"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", seed_override;
    int threads = 1;
    auto* run = app.add_subcommand("run", "run the scenario described by a config file");
    run->add_option("--config", config_path, "key = value experiment config")->required();
    run->add_option("--out", out_dir, "output directory (records.csv, summary.json, plots/)");
    run->add_option("--threads", threads, "worker threads for independent items");
    run->add_option("--seed", seed_override,
                    "override the config seed (ORLICZ_LAB_SEED env is the fallback)");

    std::string records_path, constants_out;
    auto* cal = app.add_subcommand("calibrate", "fit envelope multipliers from recorded runs");
    cal->add_option("--records", records_path, "records.csv from a previous run")->required();
    cal->add_option("--constants-out", constants_out, "also write the constants as key = value");

    std::string fit_records, x_field = "k", fit_metric = "deviation", y_field = "measured";
    auto* fit = app.add_subcommand("fit", "log-log scaling fit of per-group medians");
    fit->add_option("--records", fit_records, "records.csv from a previous run")->required();
    fit->add_option("--x", x_field, "abscissa field: n, k, trial, or param");
    fit->add_option("--y", fit_metric, "metric whose records are fitted");
    fit->add_option("--field", y_field, "ordinate field: measured or bound");

    CLI11_PARSE(app, argc, argv);
    try {
        if (run->parsed()) return cmd_run(config_path, out_dir, threads, seed_override);
        if (cal->parsed()) return cmd_calibrate(records_path, constants_out);
        if (fit->parsed()) return cmd_fit(fit_records, x_field, fit_metric, y_field);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
