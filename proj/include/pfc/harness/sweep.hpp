#pragma once

#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "pfc/harness/config.hpp"
#include "pfc/harness/trial.hpp"

namespace pfc {

/// Runs trials 0..n−1 across `workers` threads. Results are stored by trial index, so
/// the output does not depend on scheduling.
template <class Fn>
std::vector<TrialRecord> run_trials(std::size_t n, int workers, Fn&& fn) {
    std::vector<TrialRecord> out(n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                out[i] = fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n;
            }
        }
    };
    const auto w = static_cast<std::size_t>(std::max(1, workers));
    if (w == 1 || n <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < std::min(w, n); ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

struct SummaryRow {
    double snr_db = 0.0;
    std::string predictor;
    std::string controller;
    double nmse_mean = 0.0;
    double nmse_se = 0.0;
    double energy_mean = 0.0;
    double energy_se = 0.0;
    double diverged_rate = 0.0;
    int trials = 0;
};

namespace detail {

inline std::pair<double, double> mean_se(const std::vector<double>& v) {
    if (v.empty()) return {std::nan(""), std::nan("")};
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    if (v.size() < 2) return {m, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()))};
}

}  // namespace detail

/// Means and standard errors over the trials that stayed bounded.
inline SummaryRow summarize(const std::vector<TrialRecord>& recs, const Arm& arm, double snr_db) {
    SummaryRow row;
    row.snr_db = snr_db;
    row.predictor = to_string(arm.predictor);
    row.controller = to_string(arm.controller);
    row.trials = static_cast<int>(recs.size());
    std::vector<double> nm, en;
    std::size_t div = 0;
    for (const auto& r : recs) {
        if (r.diverged) {
            ++div;
            continue;
        }
        nm.push_back(r.nmse());
        en.push_back(r.mean_energy());
    }
    std::tie(row.nmse_mean, row.nmse_se) = detail::mean_se(nm);
    std::tie(row.energy_mean, row.energy_se) = detail::mean_se(en);
    row.diverged_rate = recs.empty() ? 0.0 : static_cast<double>(div) / static_cast<double>(recs.size());
    return row;
}

struct ArmResult {
    Arm arm;
    std::vector<std::vector<TrialRecord>> per_snr;  ///< [snr index][trial]
};

struct SweepResult {
    double calibration_power = 0.0;  ///< E‖Hu‖²/N at the calibration noise level
    std::vector<double> snr_db;
    std::vector<double> sigma_n2;
    std::vector<ArmResult> arms;
    std::vector<SummaryRow> summary;
};

/// Received signal power E‖H u‖²/N of the primary arm at the calibration noise level, from
/// trials seeded independently of the sweep.
inline double calibrate_signal_power(const ExperimentConfig& cfg, const SharedResources& res) {
    const std::uint64_t root = stream_seed(cfg.seed, 0, "calibration");
    const Arm arm = cfg.primary_arm();
    const auto recs = run_trials(static_cast<std::size_t>(cfg.trials), cfg.workers, [&](std::size_t i) {
        return run_trial(cfg, arm, res, {i, cfg.calibration_sigma_n2, std::nan(""), root, {}});
    });
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& r : recs) {
        if (r.diverged) continue;
        s += r.signal_power();
        ++n;
    }
    if (n == 0 || !(s > 0.0)) throw NumericError("calibration: no bounded trial with nonzero signal power");
    return s / static_cast<double>(n);
}

inline double sigma_n2_for_snr(double signal_power, double snr_db) {
    return signal_power / std::pow(10.0, snr_db / 10.0);
}

inline std::vector<Arm> sweep_arms(const ExperimentConfig& cfg) {
    return cfg.arms.empty() ? std::vector<Arm>{cfg.primary_arm()} : cfg.arms;
}

/// For each SNR point, every arm runs the same `trials` seeded trials (common random numbers).
/// `pre` supplies already solved shared objects (kernel table, LQR gain) for this config.
inline SweepResult snr_sweep(const ExperimentConfig& cfg, const SharedResources* pre = nullptr) {
    cfg.validate();
    const auto arms = sweep_arms(cfg);
    std::vector<Arm> needed = arms;
    needed.push_back(cfg.primary_arm());
    const SharedResources res = pre ? *pre : build_resources(cfg, needed);
    SweepResult out;
    out.calibration_power = calibrate_signal_power(cfg, res);
    out.snr_db = cfg.snr_db;
    for (double snr : cfg.snr_db) out.sigma_n2.push_back(sigma_n2_for_snr(out.calibration_power, snr));
    for (const auto& arm : arms) {
        ArmResult ar{arm, {}};
        for (std::size_t s = 0; s < cfg.snr_db.size(); ++s) {
            ar.per_snr.push_back(run_trials(static_cast<std::size_t>(cfg.trials), cfg.workers, [&](std::size_t i) {
                return run_trial(cfg, arm, res, {i, out.sigma_n2[s], cfg.snr_db[s], cfg.seed, {}});
            }));
            out.summary.push_back(summarize(ar.per_snr.back(), arm, cfg.snr_db[s]));
        }
        out.arms.push_back(std::move(ar));
    }
    return out;
}

/// Single-configuration run at link.sigma_n2; the SNR column reports the measured
/// received SNR 10·log10(E‖Hu‖²/(N σ_n²)).
inline SweepResult simulate(const ExperimentConfig& cfg) {
    cfg.validate();
    const Arm arm = cfg.primary_arm();
    const SharedResources res = build_resources(cfg, {arm});
    auto recs = run_trials(static_cast<std::size_t>(cfg.trials), cfg.workers, [&](std::size_t i) {
        return run_trial(cfg, arm, res, {i, cfg.sigma_n2, 0.0, cfg.seed, {}});
    });
    double p = 0.0;
    std::size_t n = 0;
    for (const auto& r : recs)
        if (!r.diverged) {
            p += r.signal_power();
            ++n;
        }
    const double snr = (n > 0 && cfg.sigma_n2 > 0.0) ? 10.0 * std::log10(p / static_cast<double>(n) / cfg.sigma_n2)
                                                     : std::numeric_limits<double>::infinity();
    for (auto& r : recs) r.snr_db = snr;
    SweepResult out;
    out.calibration_power = n ? p / static_cast<double>(n) : 0.0;
    out.snr_db = {snr};
    out.sigma_n2 = {cfg.sigma_n2};
    out.summary.push_back(summarize(recs, arm, snr));
    out.arms.push_back({arm, {std::move(recs)}});
    return out;
}

struct PilotOverheadRow {
    long slot = 0;               ///< 1-based
    double pilot_power = 0.0;    ///< cumulative Σ‖Φ‖²_F, pilot-aided baseline
    double pilot_db = 0.0;       ///< 10·log10 of the above
    double proposed_power = 0.0; ///< cumulative pilot power of the pilot-free scheme
};

/// Cumulative pilot power over one trial of the pilot-aided baseline next to the pilot-free
/// primary arm, both driven by the configured controller.
inline std::vector<PilotOverheadRow> pilot_overhead(const ExperimentConfig& cfg) {
    cfg.validate();
    const Arm proposed = cfg.primary_arm();
    const Arm base{PredictorKind::PilotLs, proposed.controller};
    const SharedResources res = build_resources(cfg, {proposed});
    const auto a = run_trial(cfg, base, res, {0, cfg.sigma_n2, 0.0, cfg.seed, {}});
    const auto b = run_trial(cfg, proposed, res, {0, cfg.sigma_n2, 0.0, cfg.seed, {}});
    std::vector<PilotOverheadRow> rows;
    double ca = 0.0, cb = 0.0;
    for (std::size_t k = 0; k < a.slots.size(); ++k) {
        ca += a.slots[k].pilot_pow;
        cb += k < b.slots.size() ? b.slots[k].pilot_pow : 0.0;
        rows.push_back({static_cast<long>(k + 1), ca, 10.0 * std::log10(ca), cb});
    }
    return rows;
}

}  // namespace pfc
