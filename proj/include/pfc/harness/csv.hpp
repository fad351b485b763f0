#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pfc/harness/config.hpp"
#include "pfc/harness/sweep.hpp"

#ifndef PFC_VERSION
#define PFC_VERSION "0.1.0"
#endif

namespace pfc {

inline constexpr const char* kPerSlotHeader =
    "trial,slot,snr_db,state_energy,stage_cost,chan_err_sq,chan_pow_sq,pilot_pow";
inline constexpr const char* kSummaryHeader =
    "snr_db,predictor,controller,nmse_mean,nmse_se,energy_mean,energy_se,diverged_rate,trials";

/// Shortest text that round-trips a double (17 significant digits).
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot open '" + p.string() + "' for writing");
    return f;
}

inline void close_out(std::ofstream& f, const std::filesystem::path& p) {
    f.close();
    if (!f) throw IoError("write failed for '" + p.string() + "'");
}

}  // namespace detail

inline void write_per_slot_csv(const std::filesystem::path& p, const std::vector<std::vector<TrialRecord>>& groups) {
    auto f = detail::open_out(p);
    f << kPerSlotHeader << '\n';
    for (const auto& g : groups)
        for (const auto& r : g)
            for (std::size_t k = 0; k < r.slots.size(); ++k) {
                const auto& s = r.slots[k];
                f << r.trial << ',' << k << ',' << fmt_double(r.snr_db) << ',' << fmt_double(s.state_energy) << ','
                  << fmt_double(s.stage_cost) << ',' << fmt_double(s.chan_err_sq) << ',' << fmt_double(s.chan_pow_sq)
                  << ',' << fmt_double(s.pilot_pow) << '\n';
            }
    detail::close_out(f, p);
}

inline void write_summary_csv(const std::filesystem::path& p, const std::vector<SummaryRow>& rows) {
    auto f = detail::open_out(p);
    f << kSummaryHeader << '\n';
    for (const auto& r : rows)
        f << fmt_double(r.snr_db) << ',' << r.predictor << ',' << r.controller << ',' << fmt_double(r.nmse_mean) << ','
          << fmt_double(r.nmse_se) << ',' << fmt_double(r.energy_mean) << ',' << fmt_double(r.energy_se) << ','
          << fmt_double(r.diverged_rate) << ',' << r.trials << '\n';
    detail::close_out(f, p);
}

/// Parses a summary CSV written by write_summary_csv.
inline std::vector<SummaryRow> read_summary_csv(const std::filesystem::path& p) {
    std::ifstream f(p);
    if (!f) throw IoError("cannot open '" + p.string() + "'");
    std::string line;
    if (!std::getline(f, line) || line != kSummaryHeader) throw IoError("'" + p.string() + "': bad summary header");
    std::vector<SummaryRow> rows;
    while (std::getline(f, line)) {
        std::vector<std::string> c;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) c.push_back(cell);
        if (c.size() != 9) throw IoError("'" + p.string() + "': expected 9 columns");
        rows.push_back({std::stod(c[0]), c[1], c[2], std::stod(c[3]), std::stod(c[4]), std::stod(c[5]),
                        std::stod(c[6]), std::stod(c[7]), std::stoi(c[8])});
    }
    return rows;
}

/// Config echo, seed lineage and version. The git field is left as a placeholder.
inline void write_manifest(const std::filesystem::path& p, const ExperimentConfig& cfg, const SweepResult& r,
                           const std::string& command) {
    auto f = detail::open_out(p);
    f << "# pfc run manifest\n";
    f << "# command: " << command << "\n";
    f << "# version: " << PFC_VERSION << "\n";
    f << "# git: unknown\n";
    f << "# root_seed: " << cfg.seed << "\n";
    f << "# streams: " << streams::kChannel << ' ' << streams::kProcess << ' ' << streams::kLink << ' '
      << streams::kInit << ' ' << streams::kPilot << " (seeded per root seed, trial index, label)\n";
    f << "# calibration_power: " << fmt_double(r.calibration_power) << "\n";
    for (std::size_t i = 0; i < r.snr_db.size(); ++i)
        f << "# snr_db " << fmt_double(r.snr_db[i]) << " -> sigma_n2 " << fmt_double(r.sigma_n2[i]) << "\n";
    f << dump_config(cfg);
    detail::close_out(f, p);
}

inline std::string arm_file_stem(const Arm& a) { return to_string(a.predictor) + "_" + to_string(a.controller); }

/// Writes per_slot_<predictor>_<controller>.csv per arm, summary.csv and manifest.txt into `dir`.
inline void emit_results(const std::filesystem::path& dir, const ExperimentConfig& cfg, const SweepResult& r,
                         const std::string& command) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    for (const auto& a : r.arms) write_per_slot_csv(dir / ("per_slot_" + arm_file_stem(a.arm) + ".csv"), a.per_snr);
    write_summary_csv(dir / "summary.csv", r.summary);
    write_manifest(dir / "manifest.txt", cfg, r, command);
}

inline void write_pilot_overhead_csv(const std::filesystem::path& p, const std::vector<PilotOverheadRow>& rows) {
    auto f = detail::open_out(p);
    f << "slot,pilot_power,pilot_db,proposed_power\n";
    for (const auto& r : rows)
        f << r.slot << ',' << fmt_double(r.pilot_power) << ',' << fmt_double(r.pilot_db) << ','
          << fmt_double(r.proposed_power) << '\n';
    detail::close_out(f, p);
}

}  // namespace pfc
