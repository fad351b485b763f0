// Command-line driver for the closed-loop simulator.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pfc/pfc.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 1, kNumeric = 2, kIo = 3 };

struct Common {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::optional<int> workers;
    std::string pipeline;
    std::vector<std::string> set;
};

pfc::ExperimentConfig load(const Common& c) {
    std::string text;
    if (!c.config.empty()) {
        std::ifstream f(c.config);
        if (!f) throw pfc::IoError("cannot open config '" + c.config + "'");
        std::stringstream ss;
        ss << f.rdbuf();
        text = ss.str();
    }
    std::vector<std::pair<std::string, std::string>> ov;
    for (const auto& kv : c.set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw pfc::ConfigError("--set expects key=value, got '" + kv + "'");
        ov.emplace_back(pfc::detail::trim(kv.substr(0, eq)), pfc::detail::trim(kv.substr(eq + 1)));
    }
    if (c.seed) ov.emplace_back("seed", std::to_string(*c.seed));
    if (c.trials) ov.emplace_back("trials", std::to_string(*c.trials));
    if (c.workers) ov.emplace_back("workers", std::to_string(*c.workers));
    if (!c.pipeline.empty()) ov.emplace_back("pipeline", c.pipeline);
    try {
        return pfc::parse_config(text, ov);
    } catch (const pfc::ConfigError& e) {
        throw pfc::ConfigError((c.config.empty() ? std::string("<defaults>") : c.config) + ": " + e.what());
    }
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "Configuration file (key = value lines)");
    sub->add_option("--out", c.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", c.seed, "Root seed (overrides the config)");
    sub->add_option("--trials", c.trials, "Monte-Carlo trials per point");
    sub->add_option("--workers", c.workers, "Worker threads");
    sub->add_option("--pipeline", c.pipeline, "Link model")->check(CLI::IsMember({"full", "effective"}));
    sub->add_option("--set", c.set, "Override a config key, e.g. --set controller.m_r=1");
}

std::string joined(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pfcsim: pilot-free control over fading channels"};
    app.require_subcommand(1);
    Common c;
    std::string table_path;

    auto* sim = app.add_subcommand("simulate", "Run one configuration and write per-slot and summary CSVs");
    auto* sweep = app.add_subcommand("sweep", "Run every arm over the SNR grid");
    auto* solve = app.add_subcommand("solve-care", "Solve the coupled Riccati equations and save the kernel table");
    auto* check = app.add_subcommand("check-stability", "Audit a kernel table: closed-loop spectral radius per bin");
    auto* pilot = app.add_subcommand("pilot-overhead", "Cumulative pilot power of the pilot-aided baseline");
    for (auto* s : {sim, sweep, solve, check, pilot}) add_common(s, c);
    solve->add_option("--table", table_path, "Output table path (default <out>/kernels.txt)");
    check->add_option("--table", table_path, "Table to audit (default: solve from the config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Help and version requests exit 0; malformed command lines count as config errors.
        return app.exit(e) == 0 ? 0 : 1;
    }
    const std::string command = joined(argc, argv);
    const std::filesystem::path out(c.out);

    try {
        const auto cfg = load(c);
        if (sim->parsed()) {
            const auto r = pfc::simulate(cfg);
            pfc::emit_results(out, cfg, r, command);
            for (const auto& row : r.summary)
                std::cout << row.predictor << ":" << row.controller << " snr_db=" << row.snr_db
                          << " nmse=" << row.nmse_mean << " energy=" << row.energy_mean
                          << " diverged_rate=" << row.diverged_rate << "\n";
        } else if (sweep->parsed()) {
            const auto r = pfc::snr_sweep(cfg);
            pfc::emit_results(out, cfg, r, command);
            for (const auto& row : r.summary)
                std::cout << row.snr_db << " dB " << row.predictor << ":" << row.controller << " nmse=" << row.nmse_mean
                          << " energy=" << row.energy_mean << " diverged_rate=" << row.diverged_rate << "\n";
        } else if (solve->parsed()) {
            if (cfg.scenario != pfc::Scenario::LinearOfdm) throw pfc::ConfigError("solve-care needs linear-ofdm");
            auto t = pfc::solve_kernel_table(cfg);
            const std::filesystem::path p = table_path.empty() ? out / "kernels.txt" : std::filesystem::path(table_path);
            if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
            pfc::save_kernel_table(p.string(), t);
            const auto rep = pfc::stabilizing_check(t, cfg.plant, cfg.controller.gain_index);
            std::cout << "bins=" << t.size() << " iterations=" << t.iterations << " max_radius=" << rep.max_radius()
                      << " flagged=" << rep.flagged.size() << " table=" << p.string() << "\n";
        } else if (check->parsed()) {
            if (cfg.scenario != pfc::Scenario::LinearOfdm) throw pfc::ConfigError("check-stability needs linear-ofdm");
            auto cfg2 = cfg;
            if (!table_path.empty()) cfg2.controller.table = table_path;
            const auto t = pfc::solve_kernel_table(cfg2);
            const auto rep = pfc::stabilizing_check(t, cfg.plant, cfg.controller.gain_index);
            std::filesystem::create_directories(out);
            std::ofstream f(out / "stability.csv");
            if (!f) throw pfc::IoError("cannot write '" + (out / "stability.csv").string() + "'");
            f << "bin,spectral_radius,flagged\n";
            for (std::size_t l = 0; l < rep.radii.size(); ++l)
                f << l << ',' << pfc::fmt_double(rep.radii[l]) << ','
                  << (std::find(rep.flagged.begin(), rep.flagged.end(), l) != rep.flagged.end() ? 1 : 0) << '\n';
            std::cout << "bins=" << rep.radii.size() << " max_radius=" << rep.max_radius()
                      << " flagged=" << rep.flagged.size() << "\n";
            if (!rep.stable()) return kNumeric;
        } else if (pilot->parsed()) {
            const auto rows = pfc::pilot_overhead(cfg);
            std::filesystem::create_directories(out);
            pfc::write_pilot_overhead_csv(out / "pilot_overhead.csv", rows);
            if (!rows.empty())
                std::cout << "slot " << rows.back().slot << ": pilot-aided " << rows.back().pilot_db
                          << " dB cumulative, pilot-free " << rows.back().proposed_power << "\n";
        }
    } catch (const pfc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const pfc::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const pfc::DimensionError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const pfc::Error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kNumeric;
    }
    return kOk;
}
