/// \file kam_cli.cpp
/// Command-line front end: loads a config, applies flag overrides, runs the
/// selected mode and writes report.json, summary.txt and CSV sidecars.
///
///   kam_cli [mode] --config <path> [--out <dir>] [--levels L] [--seed S]
///           [--mode M] [--strict | --no-strict]
///
/// Exit codes: 0 success, 2 configuration, 3 exclusion, 4 numeric/assertion.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "kam/app.hpp"

namespace {

/// A saved report passed as --config is replayed in verify mode.
bool looks_like_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) return false;
    try {
        const kam::ojson j = kam::ojson::parse(in);
        return j.is_object() && j.contains("schema") && j["schema"] == kam::kReportSchema;
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quasi-periodic KAM iteration toolkit"};
    std::string config_path, out_dir = "kam_out", mode_word, mode_flag;
    std::optional<int> levels;
    std::optional<std::uint64_t> seed;
    std::optional<bool> strict;
    app.add_option("mode_word", mode_word, "mode (run, atlas, greens, sigma-scan, stability, verify)");
    app.add_option("--config", config_path, "configuration file (JSON) or a saved report to verify")->required();
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_option("--levels", levels, "number of KAM levels (overrides run.levels)");
    app.add_option("--seed", seed, "random seed (overrides seed)");
    app.add_option("--mode", mode_flag, "mode (overrides mode)");
    app.add_flag("--strict,!--no-strict", strict, "hard assertions (exit 4) vs warnings");
    CLI11_PARSE(app, argc, argv);

    if (!mode_word.empty() && !mode_flag.empty() && mode_word != mode_flag) {
        std::cerr << "error: conflicting modes '" << mode_word << "' and '" << mode_flag << "'\n";
        return kam::exit_code_for(kam::ErrorClass::Config);
    }
    const std::string mode_text = mode_flag.empty() ? mode_word : mode_flag;

    kam::RunConfig cfg;
    std::string base_dir = std::filesystem::path(config_path).parent_path().string();
    if (base_dir.empty()) base_dir = ".";
    try {
        if (looks_like_report(config_path)) {
            cfg.mode = kam::Mode::Verify;
            cfg.verify_report = std::filesystem::path(config_path).filename().string();
        } else {
            cfg = kam::parse_config_file(config_path);
        }
        if (!mode_text.empty()) {
            auto m = kam::parse_mode(mode_text);
            if (!m) throw kam::ConfigError("unknown mode '" + mode_text + "'");
            cfg.mode = *m;
        }
        if (levels) cfg.run.levels = *levels;
        if (seed) cfg.seed = *seed;
        if (strict) cfg.run.strict = *strict;
        if (auto v = kam::config_violations(cfg); !v.empty()) {
            std::ostringstream os;
            os << "invalid configuration after overrides:";
            for (const auto& s : v) os << "\n  - " << s;
            throw kam::ConfigError(os.str());
        }
    } catch (const kam::KamError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kam::exit_code_for(e.error_class());
    }

    const kam::Outcome out = kam::dispatch(cfg, base_dir);
    try {
        kam::write_outcome(out, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kam::exit_code_for(kam::ErrorClass::Numeric);
    }
    std::cout << out.summary;
    std::cout << "report written to " << (std::filesystem::path(out_dir) / "report.json").string() << '\n';
    return out.exit_code;
}
