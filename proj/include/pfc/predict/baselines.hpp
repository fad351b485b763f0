#pragma once

#include <cmath>
#include <deque>
#include <optional>
#include <vector>

#include "pfc/core/linalg.hpp"
#include "pfc/core/types.hpp"
#include "pfc/model/plant.hpp"
#include "pfc/predict/kalman.hpp"

namespace pfc {

/// Controls with |u_i| below this carry no usable excitation for entry i.
inline constexpr double kExcitationThreshold = 1e-8;

struct LsEstimate {
    Vec h;                          ///< estimate; unidentifiable entries carry the previous value
    std::vector<bool> identified;   ///< per-entry: was it re-estimated this slot
    bool no_excitation = false;     ///< all-zero control, h is the previous estimate unchanged
};

/// Least-squares channel estimate from one transition:
/// h = pinv(B Diag(u)) (x_curr − A x_prev) over the excited entries.
inline LsEstimate ls_estimate(const PlantModel& model, const Observation& obs, const Vec& previous) {
    obs.validate();
    const auto n = model.B.cols();
    require_dims(obs.u_prev.size() == n && previous.size() == n, "ls: control/previous vs B");
    LsEstimate out{previous, std::vector<bool>(n, false), false};
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(obs.u_prev(i)) >= kExcitationThreshold) active.push_back(i);
    if (active.empty()) {
        out.no_excitation = true;
        return out;
    }
    Mat C(model.B.rows(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t j = 0; j < active.size(); ++j) C.col(j) = model.B.col(active[j]) * obs.u_prev(active[j]);
    const Vec y = obs.x_curr - model.A * obs.x_prev;
    const Vec sol = linalg::pinv(C) * y;
    for (std::size_t j = 0; j < active.size(); ++j) {
        out.h(active[j]) = sol(j);
        out.identified[active[j]] = true;
    }
    return out;
}

/// Blind proxy from a window of states only. Stacks the states as rows of a w×S matrix,
/// takes the top right singular pair (s₁, v₁) and aligns (s₁/√w)·v₁ with the columns of B.
/// The result is defined up to a common phase.
inline Vec blind_svd_predict(const std::deque<Vec>& window, const Mat& B) {
    const auto s = B.rows();
    if (window.empty()) return Vec::Zero(B.cols());
    Mat X(static_cast<Eigen::Index>(window.size()), s);
    for (std::size_t r = 0; r < window.size(); ++r) {
        require_dims(window[r].size() == s, "svd window state size");
        X.row(static_cast<Eigen::Index>(r)) = window[r].transpose();
    }
    Eigen::JacobiSVD<Mat> svd(X, Eigen::ComputeThinV);
    const double s1 = svd.singularValues()(0);
    if (!(s1 > 1e-12)) return Vec::Zero(B.cols());
    // Rows are xᵀ, so the state direction is the conjugate of the right singular vector.
    const Vec v1 = svd.matrixV().col(0).conjugate();
    return linalg::pinv(B) * (v1 * (s1 / std::sqrt(static_cast<double>(window.size()))));
}

/// Fill odd slots of an every-other-slot LS sequence by averaging the neighbouring
/// even-slot estimates; a trailing odd slot repeats the last estimate.
inline std::vector<Vec> interpolated_ls(const std::vector<Vec>& even_estimates, std::size_t length) {
    if (even_estimates.empty()) throw Error("interpolated_ls: no even-slot estimates");
    std::vector<Vec> out(length);
    for (std::size_t k = 0; k < length; ++k) {
        const std::size_t lo = k / 2;
        if (k % 2 == 0 && lo < even_estimates.size()) {
            out[k] = even_estimates[lo];
        } else if (lo + 1 < even_estimates.size()) {
            out[k] = 0.5 * (even_estimates[lo] + even_estimates[lo + 1]);
        } else {
            out[k] = even_estimates.back();
        }
    }
    return out;
}

struct PilotEstimate {
    Mat H;               ///< n_rx×n_tx estimate (N×1 diagonal gains for OFDM)
    double pilot_power;  ///< ‖Φ‖²_F spent this slot
};

/// LS through a unitary pilot Φ (n_tx×n_tx): Y = H Φ + noise ⇒ Ĥ = Y Φᴴ.
inline PilotEstimate pilot_ls(const Mat& pilot, const Mat& received, bool diagonal_channel) {
    require_dims(pilot.rows() == pilot.cols() && received.cols() == pilot.cols(), "pilot shapes");
    if (linalg::unitarity_defect(pilot) > 1e-9) throw ConfigError("pilot matrix must be unitary");
    Mat H = received * pilot.adjoint();
    if (diagonal_channel) H = Mat(H.diagonal());
    return {H, pilot.squaredNorm()};
}

}  // namespace pfc
