#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fedleak/error.hpp"
#include "fedleak/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

fedleak::ExperimentConfig load_with_overrides(const std::string& config_path, const std::string& out,
                                              std::int64_t seed) {
    auto config = fedleak::load_config(config_path);
    if (!out.empty()) config.out_dir = out;
    if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crafted-model inversion attack simulator for secure-aggregation FL"};
    app.require_subcommand(1);

    std::string config_path, out_dir, axis, inspect_path;
    std::int64_t seed = -1;

    auto* run = app.add_subcommand("run", "execute one end-to-end attack experiment");
    run->add_option("config", config_path, "experiment config JSON")->required();
    run->add_option("--out", out_dir, "output directory (overrides config)");
    run->add_option("--seed", seed, "seed override");

    auto* sweep = app.add_subcommand("sweep", "run the experiment across one factor axis");
    sweep->add_option("config", config_path, "experiment config JSON")->required();
    sweep->add_option("--axis", axis, "k | n_clients | local_epochs | noniid")->required();
    sweep->add_option("--out", out_dir, "output directory (overrides config)");
    sweep->add_option("--seed", seed, "seed override");

    auto* inspect = app.add_subcommand("inspect", "dump a parameter stream file");
    inspect->add_option("file", inspect_path, "parameter stream (.bin with .json sidecar)")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const auto config = load_with_overrides(config_path, out_dir, seed);
            const auto dir = fedleak::cmd_run(config);
            std::cout << "artifacts: " << dir.string() << "\n";
            return kExitOk;
        }
        if (sweep->parsed()) {
            const auto config = load_with_overrides(config_path, out_dir, seed);
            const auto csv = std::filesystem::path(config.out_dir) /
                             ("sweep_" + axis + "_" + fedleak::config_hash(config) + ".csv");
            std::filesystem::create_directories(config.out_dir);
            const auto rows = fedleak::cmd_sweep(config, axis, csv);
            for (const auto& r : rows) {
                std::cout << axis << "=" << r.axis_value << " rate=" << r.rate << "\n";
            }
            std::cout << "csv: " << csv.string() << "\n";
            return kExitOk;
        }
        if (inspect->parsed()) {
            std::cout << fedleak::inspect_param_file(inspect_path);
            return kExitOk;
        }
    } catch (const fedleak::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const fedleak::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const fedleak::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
