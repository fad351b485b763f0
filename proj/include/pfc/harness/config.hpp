#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pfc/control/classical.hpp"
#include "pfc/control/quantizer.hpp"
#include "pfc/control/riccati.hpp"
#include "pfc/core/types.hpp"
#include "pfc/model/channel.hpp"
#include "pfc/model/ofdm.hpp"
#include "pfc/model/plant.hpp"

namespace pfc {

enum class Scenario { LinearOfdm, NonlinearMimo };
enum class Pipeline { Effective, Full };
enum class PredictorKind { Kf, Ls, BlindSvd, InterpLs, PilotLs, Ekf, Ukf };
enum class ControllerKind { Care, Pid, Lqr };
enum class KernelSolver { ValueIteration, FiniteHorizon };

inline std::string to_string(Scenario s) { return s == Scenario::LinearOfdm ? "linear-ofdm" : "nonlinear-mimo"; }
inline std::string to_string(Pipeline p) { return p == Pipeline::Full ? "full" : "effective"; }
inline std::string to_string(KernelSolver s) {
    return s == KernelSolver::ValueIteration ? "value-iteration" : "finite-horizon";
}

inline std::string to_string(PredictorKind p) {
    switch (p) {
        case PredictorKind::Kf: return "kf";
        case PredictorKind::Ls: return "ls";
        case PredictorKind::BlindSvd: return "blind-svd";
        case PredictorKind::InterpLs: return "interp-ls";
        case PredictorKind::PilotLs: return "pilot-ls";
        case PredictorKind::Ekf: return "ekf";
        case PredictorKind::Ukf: return "ukf";
    }
    return "?";
}

inline std::string to_string(ControllerKind c) {
    switch (c) {
        case ControllerKind::Care: return "care";
        case ControllerKind::Pid: return "pid";
        case ControllerKind::Lqr: return "lqr";
    }
    return "?";
}

inline PredictorKind parse_predictor(std::string_view s) {
    for (auto p : {PredictorKind::Kf, PredictorKind::Ls, PredictorKind::BlindSvd, PredictorKind::InterpLs,
                   PredictorKind::PilotLs, PredictorKind::Ekf, PredictorKind::Ukf})
        if (to_string(p) == s) return p;
    throw ConfigError("unknown predictor '" + std::string(s) + "'");
}

inline ControllerKind parse_controller(std::string_view s) {
    for (auto c : {ControllerKind::Care, ControllerKind::Pid, ControllerKind::Lqr})
        if (to_string(c) == s) return c;
    throw ConfigError("unknown controller '" + std::string(s) + "'");
}

/// A predictor/controller pairing evaluated in a sweep.
struct Arm {
    PredictorKind predictor = PredictorKind::Kf;
    ControllerKind controller = ControllerKind::Care;

    std::string label() const { return to_string(predictor) + ":" + to_string(controller); }
    bool operator==(const Arm&) const = default;

    static Arm parse(std::string_view s) {
        const auto colon = s.find(':');
        if (colon == std::string_view::npos) throw ConfigError("arm '" + std::string(s) + "' must be predictor:controller");
        return {parse_predictor(s.substr(0, colon)), parse_controller(s.substr(colon + 1))};
    }
};

struct ControllerConfig {
    ControllerKind kind = ControllerKind::Care;
    int m_r = 2;
    int m_theta = 4;
    bool sa = false;
    double sa_c = 1.0;
    GainIndex gain_index = GainIndex::Successor;
    double sigma_bar_scale = 1.0;
    KernelSolver solver = KernelSolver::ValueIteration;
    long horizon_steps = 100;  ///< finite-horizon solver depth
    std::string table;         ///< precomputed kernel table; empty → solve offline
    PidGains pid;
};

struct ExperimentConfig {
    Scenario scenario = Scenario::LinearOfdm;
    std::uint64_t seed = 1;
    int trials = 200;
    int horizon = 100;
    int workers = 1;
    Pipeline pipeline = Pipeline::Effective;

    PlantModel plant = reference_linear_plant();
    double alpha = 0.95;
    double sigma_v2 = ChannelProcess::sigma_v2_for_innovation_std(0.95, 0.3);

    int n_sub = 4;
    int l_cp = 3;
    std::vector<int> perm = identity_permutation(4);
    double sigma_n2 = 0.1;
    int n_rx = 4;
    int n_tx = 3;

    PredictorKind predictor = PredictorKind::Kf;
    int svd_window = 10;
    ControllerConfig controller;

    std::vector<double> snr_db{0.0, 5.0, 10.0, 15.0, 20.0};
    std::vector<Arm> arms;
    double calibration_sigma_n2 = 1.0;

    /// Channel shape: N×1 diagonal gains (OFDM) or n_rx×n_tx (MIMO).
    Eigen::Index chan_rows() const { return scenario == Scenario::LinearOfdm ? n_sub : n_rx; }
    Eigen::Index chan_cols() const { return scenario == Scenario::LinearOfdm ? 1 : n_tx; }
    Eigen::Index control_dim() const { return scenario == Scenario::LinearOfdm ? n_sub : n_tx; }
    ChannelProcess channel_process() const { return ChannelProcess(alpha, sigma_v2, Mat::Zero(chan_rows(), chan_cols())); }
    Arm primary_arm() const { return {predictor, controller.kind}; }

    /// Control cost weight: plant R when the control dimension matches, else identity.
    Mat control_weight() const {
        const auto n = control_dim();
        return plant.R.rows() == n ? plant.R : Mat::Identity(n, n);
    }

    void validate() const;
};

inline bool predictor_supports(Scenario s, PredictorKind p) {
    if (s == Scenario::LinearOfdm) return p != PredictorKind::Ekf && p != PredictorKind::Ukf;
    return p != PredictorKind::Kf && p != PredictorKind::InterpLs;
}

inline bool controller_supports(Scenario s, ControllerKind c) {
    return s == Scenario::LinearOfdm || c != ControllerKind::Care;
}

inline void ExperimentConfig::validate() const {
    if (trials < 1) throw ConfigError("trials must be at least 1");
    if (horizon < 1) throw ConfigError("horizon must be at least 1");
    if (workers < 1) throw ConfigError("workers must be at least 1");
    plant.validate();
    channel_process().validate();
    if (!(sigma_n2 >= 0.0)) throw ConfigError("link.sigma_n2 must be nonnegative");
    if (!(calibration_sigma_n2 > 0.0)) throw ConfigError("sweep.calibration_sigma_n2 must be positive");
    if (svd_window < 1) throw ConfigError("predictor.svd_window must be positive");
    if (scenario == Scenario::LinearOfdm) {
        if (plant.B.cols() != n_sub) throw ConfigError("plant.B must have link.n_sub columns");
        if (static_cast<int>(perm.size()) != n_sub) throw ConfigError("link.perm must list link.n_sub entries");
        if (auto v = validate_permutation(perm); v != MappingViolation::None)
            throw ConfigError("link.perm violates the " + to_string(v));
        if (l_cp < 0) throw ConfigError("link.l_cp must be nonnegative");
        if (pipeline == Pipeline::Full && l_cp < n_sub - 1)
            throw ConfigError("full pipeline needs link.l_cp >= link.n_sub - 1 to carry arbitrary subcarrier gains");
    } else {
        if (n_rx < 1 || n_tx < 1) throw ConfigError("link.n_rx and link.n_tx must be positive");
        if (plant.B.cols() != n_rx) throw ConfigError("plant.B must have link.n_rx columns");
        if (pipeline == Pipeline::Full) throw ConfigError("the full OFDM pipeline applies to linear-ofdm only");
    }
    const auto& c = controller;
    if (c.m_r < 1 || c.m_theta < 1) throw ConfigError("controller.m_r and controller.m_theta must be positive");
    if (!(c.sa_c > 0.0)) throw ConfigError("controller.sa_c must be positive");
    if (!(c.sigma_bar_scale > 0.0)) throw ConfigError("controller.sigma_bar_scale must be positive");
    if (c.horizon_steps < 1) throw ConfigError("controller.horizon_steps must be positive");
    if (!(c.pid.windup > 0.0)) throw ConfigError("controller.pid.windup must be positive");
    std::vector<Arm> all = arms;
    all.push_back(primary_arm());
    for (const auto& a : all) {
        if (!predictor_supports(scenario, a.predictor)) {
            if (a.predictor == PredictorKind::Ekf || a.predictor == PredictorKind::Ukf)
                throw ConfigError("predictor " + to_string(a.predictor) +
                                  " needs the nonlinear-mimo scenario (re/im widened channel state)");
            throw ConfigError("predictor " + to_string(a.predictor) + " is not available for " + to_string(scenario));
        }
        if (!controller_supports(scenario, a.controller))
            throw ConfigError("controller care needs diagonal OFDM channels (linear-ofdm scenario)");
    }
}

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        throw ConfigError("expected a number, got '" + tok + "'");
    }
    if (used != tok.size()) throw ConfigError("expected a number, got '" + tok + "'");
    return v;
}

inline long parse_long(const std::string& tok) {
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(tok, &used);
    } catch (const std::exception&) {
        throw ConfigError("expected an integer, got '" + tok + "'");
    }
    if (used != tok.size()) throw ConfigError("expected an integer, got '" + tok + "'");
    return v;
}

inline std::vector<std::string> tokens(const std::string& s) {
    std::string t = s;
    for (char& c : t)
        if (c == ',') c = ' ';
    std::istringstream is(t);
    std::vector<std::string> out;
    for (std::string w; is >> w;) out.push_back(w);
    return out;
}

inline std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    for (const auto& t : tokens(s)) out.push_back(parse_double(t));
    return out;
}

/// Row-major real matrix; rows separated by ';'. Without ';' the entry count must be a square.
inline Mat parse_matrix(const std::string& s) {
    std::vector<std::vector<double>> rows;
    std::stringstream ss(s);
    for (std::string row; std::getline(ss, row, ';');) {
        auto vals = parse_list(row);
        if (!vals.empty()) rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw ConfigError("empty matrix");
    if (rows.size() == 1) {
        const auto n = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(rows[0].size()))));
        if (n * n != rows[0].size()) throw ConfigError("matrix without ';' row separators must be square");
        std::vector<std::vector<double>> split(n);
        for (std::size_t i = 0; i < n; ++i) split[i].assign(rows[0].begin() + i * n, rows[0].begin() + (i + 1) * n);
        rows = std::move(split);
    }
    Mat M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) throw ConfigError("matrix rows differ in length");
        for (std::size_t j = 0; j < rows[i].size(); ++j) M(i, j) = rows[i][j];
    }
    return M;
}

inline bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError("expected a boolean, got '" + s + "'");
}

}  // namespace detail

/// Defaults of a scenario before any key is applied.
inline ExperimentConfig default_config(Scenario s) {
    ExperimentConfig c;
    c.scenario = s;
    if (s == Scenario::LinearOfdm) {
        c.arms = {Arm::parse("kf:care"), Arm::parse("ls:care"), Arm::parse("blind-svd:care"),
                  Arm::parse("interp-ls:care"), Arm::parse("pilot-ls:care"), Arm::parse("kf:pid"),
                  Arm::parse("kf:lqr")};
    } else {
        c.predictor = PredictorKind::Ekf;
        c.controller.kind = ControllerKind::Lqr;
        c.arms = {Arm::parse("ekf:lqr"), Arm::parse("ukf:lqr"), Arm::parse("ls:lqr"), Arm::parse("blind-svd:lqr"),
                  Arm::parse("pilot-ls:lqr"), Arm::parse("ekf:pid")};
    }
    return c;
}

/// Every accepted key, in the order emitted by `dump_config`.
inline const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys{
        "scenario", "seed", "trials", "horizon", "workers", "pipeline",
        "plant.A", "plant.B", "plant.W", "plant.Q", "plant.R", "plant.sigma_x2",
        "channel.alpha", "channel.sigma_v2",
        "link.n_sub", "link.l_cp", "link.perm", "link.sigma_n2", "link.n_rx", "link.n_tx",
        "predictor", "predictor.svd_window",
        "controller", "controller.m_r", "controller.m_theta", "controller.sa", "controller.sa_c",
        "controller.gain_index", "controller.sigma_bar_scale", "controller.solver", "controller.horizon_steps",
        "controller.table", "controller.pid.kp", "controller.pid.ki", "controller.pid.kd", "controller.pid.windup",
        "sweep.snr_db", "sweep.arms", "sweep.calibration_sigma_n2"};
    return keys;
}

inline void apply_config_key(ExperimentConfig& c, const std::string& key, const std::string& v) {
    using namespace detail;
    auto as_int = [&](const std::string& s) {
        const long x = parse_long(s);
        if (x < INT32_MIN || x > INT32_MAX) throw ConfigError("integer out of range");
        return static_cast<int>(x);
    };
    if (key == "seed") {
        try {
            std::size_t used = 0;
            c.seed = std::stoull(v, &used, 0);
            if (used != v.size()) throw ConfigError("");
        } catch (const std::exception&) {
            throw ConfigError("seed must be an unsigned 64-bit integer");
        }
    } else if (key == "trials") c.trials = as_int(v);
    else if (key == "horizon") c.horizon = as_int(v);
    else if (key == "workers") c.workers = as_int(v);
    else if (key == "pipeline") {
        if (v == "full") c.pipeline = Pipeline::Full;
        else if (v == "effective") c.pipeline = Pipeline::Effective;
        else throw ConfigError("pipeline must be 'full' or 'effective'");
    }
    else if (key == "plant.A") c.plant.A = parse_matrix(v);
    else if (key == "plant.B") c.plant.B = parse_matrix(v);
    else if (key == "plant.W") c.plant.W = parse_matrix(v);
    else if (key == "plant.Q") c.plant.Q = parse_matrix(v);
    else if (key == "plant.R") c.plant.R = parse_matrix(v);
    else if (key == "plant.sigma_x2") c.plant.sigma_x2 = parse_double(v);
    else if (key == "channel.alpha") {
        c.alpha = parse_double(v);
        if (!(std::abs(c.alpha) <= 1.0)) throw ConfigError("channel.alpha violates |alpha| <= 1");
    }
    else if (key == "channel.sigma_v2") c.sigma_v2 = parse_double(v);
    else if (key == "link.n_sub") {
        c.n_sub = as_int(v);
        if (c.n_sub < 1) throw ConfigError("link.n_sub must be positive");
        c.perm = identity_permutation(c.n_sub);
    }
    else if (key == "link.l_cp") c.l_cp = as_int(v);
    else if (key == "link.perm") {
        c.perm.clear();
        for (const auto& t : tokens(v)) c.perm.push_back(as_int(t));
    }
    else if (key == "link.sigma_n2") c.sigma_n2 = parse_double(v);
    else if (key == "link.n_rx") c.n_rx = as_int(v);
    else if (key == "link.n_tx") c.n_tx = as_int(v);
    else if (key == "predictor") c.predictor = parse_predictor(v);
    else if (key == "predictor.svd_window") c.svd_window = as_int(v);
    else if (key == "controller") c.controller.kind = parse_controller(v);
    else if (key == "controller.m_r") c.controller.m_r = as_int(v);
    else if (key == "controller.m_theta") c.controller.m_theta = as_int(v);
    else if (key == "controller.sa") c.controller.sa = parse_bool(v);
    else if (key == "controller.sa_c") c.controller.sa_c = parse_double(v);
    else if (key == "controller.gain_index") {
        if (v == "successor") c.controller.gain_index = GainIndex::Successor;
        else if (v == "current") c.controller.gain_index = GainIndex::Current;
        else throw ConfigError("controller.gain_index must be 'successor' or 'current'");
    }
    else if (key == "controller.sigma_bar_scale") c.controller.sigma_bar_scale = parse_double(v);
    else if (key == "controller.solver") {
        if (v == "value-iteration") c.controller.solver = KernelSolver::ValueIteration;
        else if (v == "finite-horizon") c.controller.solver = KernelSolver::FiniteHorizon;
        else throw ConfigError("controller.solver must be 'value-iteration' or 'finite-horizon'");
    }
    else if (key == "controller.horizon_steps") c.controller.horizon_steps = parse_long(v);
    else if (key == "controller.table") c.controller.table = v;
    else if (key == "controller.pid.kp") c.controller.pid.kp = parse_double(v);
    else if (key == "controller.pid.ki") c.controller.pid.ki = parse_double(v);
    else if (key == "controller.pid.kd") c.controller.pid.kd = parse_double(v);
    else if (key == "controller.pid.windup") c.controller.pid.windup = parse_double(v);
    else if (key == "sweep.snr_db") {
        c.snr_db = parse_list(v);
        if (c.snr_db.empty()) throw ConfigError("sweep.snr_db must list at least one value");
    }
    else if (key == "sweep.arms") {
        c.arms.clear();
        for (const auto& t : tokens(v)) c.arms.push_back(Arm::parse(t));
    }
    else if (key == "sweep.calibration_sigma_n2") c.calibration_sigma_n2 = parse_double(v);
    else throw ConfigError("unknown key '" + key + "'");
}

/// Line-oriented `key = value` text with '#' comments. Unknown or repeated keys are errors;
/// absent keys keep the scenario defaults. Errors carry the offending line number.
inline ExperimentConfig parse_config(std::string_view text,
                                     const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
    struct Entry {
        int line;
        std::string key, value;
    };
    std::vector<Entry> entries;
    std::set<std::string> seen;
    std::istringstream is{std::string(text)};
    int lineno = 0;
    for (std::string raw; std::getline(is, raw);) {
        ++lineno;
        if (auto h = raw.find('#'); h != std::string::npos) raw.erase(h);
        const std::string line = detail::trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        Entry e{lineno, detail::trim(std::string_view(line).substr(0, eq)),
                detail::trim(std::string_view(line).substr(eq + 1))};
        if (std::find(config_keys().begin(), config_keys().end(), e.key) == config_keys().end())
            throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + e.key + "'");
        if (!seen.insert(e.key).second)
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + e.key + "'");
        entries.push_back(std::move(e));
    }
    for (const auto& [k, v] : overrides) {
        if (std::find(config_keys().begin(), config_keys().end(), k) == config_keys().end())
            throw ConfigError("override: unknown key '" + k + "'");
        std::erase_if(entries, [&](const Entry& e) { return e.key == k; });
        entries.push_back({0, k, v});
    }
    Scenario sc = Scenario::LinearOfdm;
    for (const auto& e : entries) {
        if (e.key != "scenario") continue;
        if (e.value == "linear-ofdm") sc = Scenario::LinearOfdm;
        else if (e.value == "nonlinear-mimo") sc = Scenario::NonlinearMimo;
        else
            throw ConfigError((e.line ? "line " + std::to_string(e.line) + ": " : std::string("override: ")) +
                              "scenario must be 'linear-ofdm' or 'nonlinear-mimo'");
    }
    ExperimentConfig c = default_config(sc);
    // link.n_sub resets the permutation, so apply it before link.perm.
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return (a.key == "link.n_sub") > (b.key == "link.n_sub"); });
    for (const auto& e : entries) {
        if (e.key == "scenario") continue;
        try {
            apply_config_key(c, e.key, e.value);
        } catch (const ConfigError& err) {
            throw ConfigError((e.line ? "line " + std::to_string(e.line) + ": " : std::string("override: ")) +
                              err.what());
        }
    }
    c.validate();
    return c;
}

/// Canonical text of a configuration (every key), parseable by parse_config.
inline std::string dump_config(const ExperimentConfig& c) {
    auto num = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    auto mat = [&](const Mat& M) {
        std::string s;
        for (Eigen::Index i = 0; i < M.rows(); ++i) {
            if (i) s += "; ";
            for (Eigen::Index j = 0; j < M.cols(); ++j) s += (j ? " " : "") + num(M(i, j).real());
        }
        return s;
    };
    auto list = [&](const auto& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if constexpr (std::is_same_v<std::decay_t<decltype(v[i])>, Arm>) s += (i ? " " : "") + v[i].label();
            else if constexpr (std::is_same_v<std::decay_t<decltype(v[i])>, int>) s += (i ? " " : "") + std::to_string(v[i]);
            else s += (i ? " " : "") + num(v[i]);
        }
        return s;
    };
    const auto& k = c.controller;
    std::ostringstream os;
    os << "scenario = " << to_string(c.scenario) << "\nseed = " << c.seed << "\ntrials = " << c.trials
       << "\nhorizon = " << c.horizon << "\nworkers = " << c.workers << "\npipeline = " << to_string(c.pipeline)
       << "\nplant.A = " << mat(c.plant.A) << "\nplant.B = " << mat(c.plant.B) << "\nplant.W = " << mat(c.plant.W)
       << "\nplant.Q = " << mat(c.plant.Q) << "\nplant.R = " << mat(c.plant.R)
       << "\nplant.sigma_x2 = " << num(c.plant.sigma_x2) << "\nchannel.alpha = " << num(c.alpha)
       << "\nchannel.sigma_v2 = " << num(c.sigma_v2) << "\nlink.n_sub = " << c.n_sub << "\nlink.l_cp = " << c.l_cp
       << "\nlink.perm = " << list(c.perm) << "\nlink.sigma_n2 = " << num(c.sigma_n2) << "\nlink.n_rx = " << c.n_rx
       << "\nlink.n_tx = " << c.n_tx << "\npredictor = " << to_string(c.predictor)
       << "\npredictor.svd_window = " << c.svd_window << "\ncontroller = " << to_string(k.kind)
       << "\ncontroller.m_r = " << k.m_r << "\ncontroller.m_theta = " << k.m_theta
       << "\ncontroller.sa = " << (k.sa ? "true" : "false") << "\ncontroller.sa_c = " << num(k.sa_c)
       << "\ncontroller.gain_index = " << (k.gain_index == GainIndex::Successor ? "successor" : "current")
       << "\ncontroller.sigma_bar_scale = " << num(k.sigma_bar_scale) << "\ncontroller.solver = " << to_string(k.solver)
       << "\ncontroller.horizon_steps = " << k.horizon_steps << "\ncontroller.pid.kp = " << num(k.pid.kp)
       << "\ncontroller.pid.ki = " << num(k.pid.ki) << "\ncontroller.pid.kd = " << num(k.pid.kd)
       << "\ncontroller.pid.windup = " << num(k.pid.windup) << "\nsweep.snr_db = " << list(c.snr_db)
       << "\nsweep.arms = " << list(c.arms) << "\nsweep.calibration_sigma_n2 = " << num(c.calibration_sigma_n2)
       << "\n";
    if (!k.table.empty()) os << "controller.table = " << k.table << "\n";
    return os.str();
}

}  // namespace pfc
