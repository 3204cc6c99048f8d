// qdecay: run preset experiments of qubit decay into an oscillator bath.
//
//   qdecay run --config P [--seed S] [--out DIR] [--threads K]
//   qdecay presets
//   qdecay check --config P
//
// QDECAY_THREADS sets the default worker count; --threads overrides it.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "qdecay/qdecay.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw qdecay::ConfigError("cannot read config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void print_presets() {
    for (const auto& p : qdecay::preset_catalogue()) {
        std::cout << p.name << "  " << p.summary << "\n";
        for (const auto& par : p.parameters)
            std::cout << "    " << par.key << " = " << par.value << "    " << par.note << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qubit decay into randomized oscillator baths"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::size_t threads = qdecay::default_thread_count();

    auto* run = app.add_subcommand("run", "run a config and write report.txt plus CSV files");
    run->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
    auto* seed_opt = run->add_option("--seed", seed, "override the config seed");
    auto* out_opt = run->add_option("--out", out_dir, "output directory");
    run->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

    auto* presets = app.add_subcommand("presets", "list presets and their parameters");

    auto* check = app.add_subcommand("check", "validate a config without running it");
    check->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (presets->parsed()) {
            print_presets();
            return 0;
        }
        auto cfg = qdecay::parse_config(read_file(config_path));
        if (check->parsed()) {
            std::cout << qdecay::describe(cfg);
            return 0;
        }
        if (*seed_opt) cfg = qdecay::with_override(cfg, "seed", std::to_string(seed));
        if (*out_opt) cfg = qdecay::with_override(cfg, "output_dir", out_dir);
        const auto report = qdecay::run(cfg, {threads});
        std::cout << qdecay::to_text(report);
        if (!report.ok()) {
            std::cerr << "qdecay: norm drift " << report.max_norm_drift << " exceeds tolerance "
                      << report.norm_tolerance << "\n";
            return 2;
        }
        return 0;
    } catch (const qdecay::ConfigError& e) {
        std::cerr << "qdecay: " << e.what() << "\n";
        return 64;
    } catch (const std::exception& e) {
        std::cerr << "qdecay: run aborted: " << e.what() << "\n";
        return 1;
    }
}
