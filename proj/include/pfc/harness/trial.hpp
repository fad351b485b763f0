#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pfc/control/classical.hpp"
#include "pfc/control/kernel_io.hpp"
#include "pfc/control/riccati.hpp"
#include "pfc/core/random.hpp"
#include "pfc/harness/config.hpp"
#include "pfc/model/channel.hpp"
#include "pfc/model/ofdm.hpp"
#include "pfc/model/plant.hpp"
#include "pfc/predict/baselines.hpp"
#include "pfc/predict/kalman.hpp"
#include "pfc/predict/nonlinear.hpp"

namespace pfc {

inline constexpr double kDivergenceNorm = 1e12;

/// Stream labels; every trial draws each source from its own seeded stream.
namespace streams {
inline constexpr const char* kChannel = "channel";
inline constexpr const char* kProcess = "process";
inline constexpr const char* kLink = "link";
inline constexpr const char* kInit = "init";
inline constexpr const char* kPilot = "pilot";
}  // namespace streams

struct SlotRecord {
    double state_energy = 0.0;  ///< ‖x_k‖²
    double stage_cost = 0.0;    ///< x_kᴴQx_k + u_kᴴRu_k
    double chan_err_sq = 0.0;   ///< ‖Ĥ(k+1|k) − H_{k+1}‖²_F
    double chan_pow_sq = 0.0;   ///< ‖H_{k+1}‖²_F
    double pilot_pow = 0.0;     ///< ‖Φ‖²_F spent in slot k
    double signal_pow = 0.0;    ///< ‖H_{k+1} u_k‖²/N, for the SNR convention
};

struct TrialRecord {
    std::uint64_t root_seed = 0;
    std::size_t trial = 0;
    double snr_db = 0.0;
    double sigma_n2 = 0.0;
    std::vector<SlotRecord> slots;
    std::vector<Vec> received;  ///< û_k per slot
    bool diverged = false;
    bool predictor_failed = false;  ///< numeric breakdown of the predictor; also counted as diverged

    double mean_energy() const {
        double s = 0.0;
        for (const auto& r : slots) s += r.state_energy;
        return slots.empty() ? 0.0 : s / static_cast<double>(slots.size());
    }

    /// Σ‖Ĥ−H‖² / Σ‖H‖² over the trial.
    double nmse() const {
        double e = 0.0, p = 0.0;
        for (const auto& r : slots) {
            e += r.chan_err_sq;
            p += r.chan_pow_sq;
        }
        if (!(p > 0.0)) throw NumericError("nmse: channel power is zero");
        return e / p;
    }

    double signal_power() const {
        double s = 0.0;
        for (const auto& r : slots) s += r.signal_pow;
        return slots.empty() ? 0.0 : s / static_cast<double>(slots.size());
    }
};

/// Ground truth a predictor may consume after slot k: only pilot-based schemes look at it,
/// through their own noisy pilot measurement.
struct LinkSide {
    const Mat& channel;  ///< H_{k+1}
    double sigma_n2;
    Rng& pilot_rng;
};

class ChannelPredictor {
public:
    virtual ~ChannelPredictor() = default;
    /// Ĥ(k+1|k) in channel shape (N×1 gains or n_rx×n_tx).
    virtual Mat predict() const = 0;
    /// Consume the transition (x_k, x_{k+1}, u_k).
    virtual void observe(const Observation& obs, const LinkSide& side) = 0;
    /// Pilot power spent in the slot just observed.
    virtual double pilot_power() const { return 0.0; }
};

class Controller {
public:
    virtual ~Controller() = default;
    virtual Vec control(const Vec& x, const Mat& h_pred) = 0;
};

/// Expensive per-configuration objects shared read-only by all trials.
struct SharedResources {
    std::shared_ptr<const KernelTable> table;
    std::optional<LqrSolution> lqr;
};

/// Nominal channel for the fixed-gain baselines: I (square) or I_{n_rx×n_tx}.
inline Mat nominal_channel(const ExperimentConfig& cfg) {
    return Mat::Identity(cfg.plant.B.cols(), cfg.control_dim());
}

inline KernelTable solve_kernel_table(const ExperimentConfig& cfg) {
    const auto& c = cfg.controller;
    const QuantGrid grid{c.m_r, c.m_theta, cfg.n_sub};
    const auto proc = cfg.channel_process();
    if (!c.table.empty()) {
        KernelTable t = load_kernel_table(c.table, grid);
        if (std::abs(t.alpha - cfg.alpha) > 1e-12) throw ConfigError("kernel table was solved for a different alpha");
        return t;
    }
    const ModeSet modes = ModeSet::from_grid(grid, cfg.alpha);
    const Mat sigma_bar = c.sigma_bar_scale * stationary_sigma_bar(proc, cfg.n_sub);
    KernelTable t;
    if (c.solver == KernelSolver::ValueIteration) {
        t = care_value_iteration(cfg.plant, modes, sigma_bar);
    } else {
        // Truncated backward recursion from P = Q, identical across modes' successors.
        t.modes = modes;
        t.sigma_bar = sigma_bar;
        t.kernels.assign(modes.size(), cfg.plant.Q);
        std::vector<Mat> next(modes.size());
        for (long k = 0; k < c.horizon_steps; ++k) {
            for (std::size_t l = 0; l < modes.size(); ++l)
                next[l] = care_riccati_rhs(cfg.plant, modes.h_hat(l), t.kernels[modes.next[l]], sigma_bar);
            std::swap(next, t.kernels);
        }
        t.iterations = c.horizon_steps;
    }
    t.grid = grid;
    t.alpha = cfg.alpha;
    return t;
}

inline SharedResources build_resources(const ExperimentConfig& cfg, const std::vector<Arm>& arms) {
    SharedResources r;
    for (const auto& a : arms) {
        if (a.controller == ControllerKind::Care && !r.table)
            r.table = std::make_shared<const KernelTable>(solve_kernel_table(cfg));
        if (a.controller == ControllerKind::Lqr && !r.lqr) r.lqr = nominal_lqr(cfg.plant, nominal_channel(cfg));
    }
    return r;
}

namespace detail {

inline Mat as_diag(const Mat& h) { return h.col(0).asDiagonal(); }

class KfPredictor final : public ChannelPredictor {
public:
    KfPredictor(const ExperimentConfig& c, double sigma_n2)
        : model_(c.plant), proc_(c.channel_process()), sigma_n2_(sigma_n2), st_(PredictorState::initial(c.n_sub)) {}
    Mat predict() const override { return st_.h_prior; }
    void observe(const Observation& obs, const LinkSide&) override {
        st_ = kf_predict(kf_estimate(st_, model_, sigma_n2_, obs), proc_);
    }

private:
    PlantModel model_;
    ChannelProcess proc_;
    double sigma_n2_;
    PredictorState st_;
};

class LsPredictor final : public ChannelPredictor {
public:
    LsPredictor(const ExperimentConfig& c) : c_(c), h_(Mat::Zero(c.chan_rows(), c.chan_cols())) {}
    Mat predict() const override { return h_; }
    void observe(const Observation& obs, const LinkSide&) override {
        if (c_.scenario == Scenario::LinearOfdm) h_ = ls_estimate(c_.plant, obs, h_.col(0)).h;
        else h_ = linearized_ls_mimo({c_.plant, Saturation::TanhSplit}, obs, h_);
    }

private:
    const ExperimentConfig& c_;
    Mat h_;
};

/// Causal every-other-slot LS: estimates on even slots, and predicts odd slots from the
/// average of the two most recent estimates.
class InterpLsPredictor final : public ChannelPredictor {
public:
    InterpLsPredictor(const ExperimentConfig& c) : c_(c), h_(Vec::Zero(c.n_sub)) {}
    Mat predict() const override { return h_; }
    void observe(const Observation& obs, const LinkSide&) override {
        if (slot_++ % 2 == 0) {
            const Vec prev = recent_.empty() ? Vec::Zero(c_.n_sub).eval() : recent_.back();
            recent_.push_back(ls_estimate(c_.plant, obs, prev).h);
            if (recent_.size() > 2) recent_.pop_front();
            h_ = recent_.back();
        } else if (recent_.size() == 2) {
            h_ = interpolated_ls({recent_[0], recent_[1]}, 2)[1];
        }
    }

private:
    const ExperimentConfig& c_;
    Vec h_;
    std::deque<Vec> recent_;
    long slot_ = 0;
};

class BlindSvdPredictor final : public ChannelPredictor {
public:
    BlindSvdPredictor(const ExperimentConfig& c) : c_(c) {}
    Mat predict() const override {
        if (c_.scenario == Scenario::LinearOfdm) return blind_svd_predict(window_, c_.plant.B);
        return blind_svd_mimo(window_, c_.plant.B, c_.n_tx);
    }
    void observe(const Observation& obs, const LinkSide&) override {
        window_.push_back(obs.x_curr);
        if (static_cast<int>(window_.size()) > c_.svd_window) window_.pop_front();
    }

private:
    const ExperimentConfig& c_;
    std::deque<Vec> window_;
};

/// Unitary pilot Φ = I sent each slot; the estimate of H_{k+1} serves as the next prediction.
class PilotLsPredictor final : public ChannelPredictor {
public:
    PilotLsPredictor(const ExperimentConfig& c) : c_(c), h_(Mat::Zero(c.chan_rows(), c.chan_cols())) {}
    Mat predict() const override { return h_; }
    double pilot_power() const override { return power_; }
    void observe(const Observation&, const LinkSide& side) override {
        const auto n = c_.control_dim();
        const Mat pilot = Mat::Identity(n, n);
        const bool diag = c_.scenario == Scenario::LinearOfdm;
        const Mat Hfull = diag ? as_diag(side.channel) : side.channel;
        const Mat Y = Hfull * pilot + side.pilot_rng.complex_normal_mat(Hfull.rows(), n, side.sigma_n2);
        const auto est = pilot_ls(pilot, Y, diag);
        h_ = est.H;
        power_ = est.pilot_power;
    }

private:
    const ExperimentConfig& c_;
    Mat h_;
    double power_ = 0.0;
};

class WidenedPredictor final : public ChannelPredictor {
public:
    WidenedPredictor(const ExperimentConfig& c, double sigma_n2, bool unscented)
        : spec_{c.plant, Saturation::TanhSplit}, shape_{c.n_rx, c.n_tx}, proc_(c.channel_process()),
          sigma_n2_(sigma_n2), unscented_(unscented), st_(widened_initial(shape_)) {}
    Mat predict() const override { return narrow_channel(st_.h_prior, shape_); }
    void observe(const Observation& obs, const LinkSide&) override {
        st_ = unscented_ ? ukf_step(st_, spec_, shape_, sigma_n2_, obs, proc_)
                         : ekf_step(st_, spec_, shape_, sigma_n2_, obs, proc_);
    }

private:
    NonlinearPlantSpec spec_;
    WidenedShape shape_;
    ChannelProcess proc_;
    double sigma_n2_;
    bool unscented_;
    RealPredictorState st_;
};

class CareController final : public Controller {
public:
    CareController(const ExperimentConfig& c, const KernelTable& table)
        : model_(c.plant), grid_(*table.grid), idx_(c.controller.gain_index), shared_(&table) {
        if (c.controller.sa) {
            // Online learning starts every kernel at Q; the offline table only supplies modes and Σ̄.
            KernelTable start = table;
            for (auto& P : start.kernels) P = c.plant.Q;
            learner_.emplace(std::move(start), StepSchedule{c.controller.sa_c});
        }
    }
    Vec control(const Vec& x, const Mat& h_pred) override {
        const std::size_t l = grid_.quantize(h_pred.col(0));
        if (learner_) {
            learner_->update(l, model_);
            return pfc::control(learner_->table(), model_, l, x, idx_);
        }
        return pfc::control(*shared_, model_, l, x, idx_);
    }
    const SaLearner* learner() const { return learner_ ? &*learner_ : nullptr; }

private:
    PlantModel model_;
    QuantGrid grid_;
    GainIndex idx_;
    const KernelTable* shared_;
    std::optional<SaLearner> learner_;
};

class FixedGainController final : public Controller {
public:
    explicit FixedGainController(Mat K) : K_(std::move(K)) {}
    Vec control(const Vec& x, const Mat&) override { return K_ * x; }

private:
    Mat K_;
};

class PidAdapter final : public Controller {
public:
    PidAdapter(const Mat& B_eff, PidGains g) : pid_(B_eff, g) {}
    Vec control(const Vec& x, const Mat&) override { return pid_(x); }

private:
    PidController pid_;
};

}  // namespace detail

inline std::unique_ptr<ChannelPredictor> make_predictor(const ExperimentConfig& c, PredictorKind kind,
                                                        double sigma_n2) {
    switch (kind) {
        case PredictorKind::Kf: return std::make_unique<detail::KfPredictor>(c, sigma_n2);
        case PredictorKind::Ls: return std::make_unique<detail::LsPredictor>(c);
        case PredictorKind::BlindSvd: return std::make_unique<detail::BlindSvdPredictor>(c);
        case PredictorKind::InterpLs: return std::make_unique<detail::InterpLsPredictor>(c);
        case PredictorKind::PilotLs: return std::make_unique<detail::PilotLsPredictor>(c);
        case PredictorKind::Ekf: return std::make_unique<detail::WidenedPredictor>(c, sigma_n2, false);
        case PredictorKind::Ukf: return std::make_unique<detail::WidenedPredictor>(c, sigma_n2, true);
    }
    throw ConfigError("unsupported predictor");
}

inline std::unique_ptr<Controller> make_controller(const ExperimentConfig& c, ControllerKind kind,
                                                   const SharedResources& res) {
    switch (kind) {
        case ControllerKind::Care:
            if (!res.table) throw ConfigError("care controller needs a kernel table");
            return std::make_unique<detail::CareController>(c, *res.table);
        case ControllerKind::Lqr:
            if (!res.lqr) throw ConfigError("lqr controller needs a nominal gain");
            return std::make_unique<detail::FixedGainController>(res.lqr->K);
        case ControllerKind::Pid:
            return std::make_unique<detail::PidAdapter>(c.plant.B * nominal_channel(c), c.controller.pid);
    }
    throw ConfigError("unsupported controller");
}

struct TrialOptions {
    std::size_t trial = 0;
    double sigma_n2 = 0.0;
    double snr_db = 0.0;
    std::uint64_t root_seed = 0;
    /// Optional hook after every slot, e.g. to inspect an SA learner.
    std::function<void(long slot, const Controller&)> on_slot;
};

/// One closed-loop run of `horizon` slots for a predictor/controller pair.
/// Per slot k: Ĥ(k+1|k) → u_k → link (full OFDM chain or effective model) → plant step →
/// predictor update with (x_k, x_{k+1}, u_k) → channel step. A state norm above 1e12, or a
/// numeric failure inside the predictor, ends the trial early and marks it diverged.
inline TrialRecord run_trial(const ExperimentConfig& cfg, const Arm& arm, const SharedResources& res,
                             const TrialOptions& opt) {
    const auto& m = cfg.plant;
    const auto S = m.A.rows();
    const auto n_u = cfg.control_dim();
    const bool ofdm = cfg.scenario == Scenario::LinearOfdm;

    Rng chan_rng(opt.root_seed, opt.trial, streams::kChannel);
    Rng proc_rng(opt.root_seed, opt.trial, streams::kProcess);
    Rng link_rng(opt.root_seed, opt.trial, streams::kLink);
    Rng init_rng(opt.root_seed, opt.trial, streams::kInit);
    Rng pilot_rng(opt.root_seed, opt.trial, streams::kPilot);

    TrialRecord rec;
    rec.root_seed = opt.root_seed;
    rec.trial = opt.trial;
    rec.snr_db = opt.snr_db;
    rec.sigma_n2 = opt.sigma_n2;
    rec.slots.reserve(cfg.horizon);

    ChannelProcess chan = cfg.channel_process();
    chan.h = init_rng.complex_normal_mat(cfg.chan_rows(), cfg.chan_cols(), 1.0);  // H_1
    Vec x = init_rng.complex_normal_vec(S, m.sigma_x2);

    auto predictor = make_predictor(cfg, arm.predictor, opt.sigma_n2);
    auto controller = make_controller(cfg, arm.controller, res);
    const Mat Rc = cfg.control_weight();
    const NonlinearPlantSpec spec{m, Saturation::TanhSplit};
    const bool full = cfg.pipeline == Pipeline::Full;
    std::optional<OfdmLink> link;
    if (ofdm) link.emplace(cfg.n_sub, cfg.l_cp, cfg.perm, opt.sigma_n2, Vec::Ones(1));

    for (long k = 0; k < cfg.horizon; ++k) {
        SlotRecord slot;
        const Mat h_pred = predictor->predict();
        const Vec u = controller->control(x, h_pred);
        slot.state_energy = x.squaredNorm();
        slot.stage_cost = (x.adjoint() * m.Q * x).value().real() + (u.adjoint() * Rc * u).value().real();
        slot.chan_err_sq = (h_pred - chan.h).squaredNorm();
        slot.chan_pow_sq = chan.h.squaredNorm();

        const Vec w = proc_rng.complex_normal_cov(m.W);
        Vec x_next;
        Vec u_hat;
        if (ofdm) {
            const Vec g = chan.h.col(0);
            slot.signal_pow = g.cwiseProduct(u).squaredNorm() / static_cast<double>(n_u);
            // Both pipelines consume the same time-domain noise block.
            const Vec n_t = link_rng.complex_normal_vec(cfg.n_sub + cfg.l_cp, opt.sigma_n2);
            if (full) {
                link->set_taps(link->taps_for_gains(g));
                u_hat = link->transmit(u, n_t);
            } else {
                u_hat = effective_link(g.asDiagonal(), u, link->effective_noise(n_t));
            }
            x_next = m.A * x + m.B * u_hat + w;
        } else {
            slot.signal_pow = (chan.h * u).squaredNorm() / static_cast<double>(chan.h.rows());
            const Vec n_c = link_rng.complex_normal_vec(chan.h.rows(), opt.sigma_n2);
            u_hat = saturate(Saturation::TanhSplit, chan.h * u) + saturate(Saturation::TanhSplit, n_c);
            x_next = step_nonlinear_plant(spec, PlantState(x), chan.h, u, n_c, w).x();
        }
        rec.received.push_back(u_hat);

        if (!x_next.allFinite() || x_next.norm() > kDivergenceNorm) {
            rec.diverged = true;
            rec.slots.push_back(slot);
            break;
        }
        try {
            predictor->observe({x, x_next, u}, LinkSide{chan.h, opt.sigma_n2, pilot_rng});
        } catch (const NumericError&) {
            // Runaway controls make the innovation covariance ill-conditioned; the loop is lost.
            rec.diverged = rec.predictor_failed = true;
            rec.slots.push_back(slot);
            break;
        }
        slot.pilot_pow = predictor->pilot_power();
        rec.slots.push_back(slot);
        if (opt.on_slot) opt.on_slot(k, *controller);
        x = std::move(x_next);
        chan = step_channel(chan, chan_rng);
    }
    return rec;
}

}  // namespace pfc
