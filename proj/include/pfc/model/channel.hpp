#pragma once

#include <cmath>

#include "pfc/core/random.hpp"
#include "pfc/core/types.hpp"

namespace pfc {

/// Gauss–Markov fading process h' = α h + sqrt(1 − α²) v, v ~ CN(0, σ_v²).
/// For |α| < 1 the stationary per-entry variance is σ_v².
struct ChannelProcess {
    double alpha = 0.95;
    double sigma_v2 = 1.0;
    Mat h;  ///< current realization, n_rx×n_tx (N×1 for OFDM diagonal gains)

    ChannelProcess() = default;
    ChannelProcess(double a, double s2, Mat h0) : alpha(a), sigma_v2(s2), h(std::move(h0)) { validate(); }

    Eigen::Index n_rx() const { return h.rows(); }
    Eigen::Index n_tx() const { return h.cols(); }

    void validate() const {
        if (!(std::abs(alpha) <= 1.0)) throw ConfigError("channel: |alpha| <= 1 required");
        if (!(sigma_v2 > 0.0)) throw ConfigError("channel: sigma_v2 must be positive");
    }

    /// σ_v² for which sqrt(1 − α²)·σ_v equals a given innovation standard deviation.
    static double sigma_v2_for_innovation_std(double alpha, double innovation_std) {
        return innovation_std * innovation_std / (1.0 - alpha * alpha);
    }
};

inline ChannelProcess step_channel(const ChannelProcess& proc, const Mat& v) {
    require_dims(v.rows() == proc.h.rows() && v.cols() == proc.h.cols(), "channel innovation shape");
    ChannelProcess next = proc;
    next.h = proc.alpha * proc.h + std::sqrt(std::max(0.0, 1.0 - proc.alpha * proc.alpha)) * v;
    return next;
}

/// Draw v ~ CN(0, σ_v²) and step.
inline ChannelProcess step_channel(const ChannelProcess& proc, Rng& rng) {
    return step_channel(proc, rng.complex_normal_mat(proc.h.rows(), proc.h.cols(), proc.sigma_v2));
}

}  // namespace pfc
