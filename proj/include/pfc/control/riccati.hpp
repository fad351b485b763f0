#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pfc/control/quantizer.hpp"
#include "pfc/core/linalg.hpp"
#include "pfc/core/types.hpp"
#include "pfc/model/channel.hpp"
#include "pfc/model/plant.hpp"

namespace pfc {

/// Raised when an iterative solver stops without meeting its tolerance.
class ConvergenceError : public NumericError {
public:
    ConvergenceError(const std::string& what, std::vector<double> residuals)
        : NumericError(what), residuals_(std::move(residuals)) {}
    const std::vector<double>& residuals() const { return residuals_; }

private:
    std::vector<double> residuals_;
};

/// Kernel P̄_ℓ per channel mode plus the channel-uncertainty weight Σ̄.
struct KernelTable {
    ModeSet modes;
    std::optional<QuantGrid> grid;  ///< set when the modes came from a grid
    double alpha = 1.0;
    Mat sigma_bar;
    std::vector<Mat> kernels;
    long iterations = 0;

    std::size_t size() const { return kernels.size(); }
};

/// Σ̄ = σ_v²/(1−α²) I for |α| < 1, otherwise I.
inline Mat stationary_sigma_bar(const ChannelProcess& proc, Eigen::Index n) {
    const double a = std::abs(proc.alpha);
    const double s = a < 1.0 ? proc.sigma_v2 / (1.0 - a * a) : 1.0;
    return s * Mat::Identity(n, n);
}

namespace detail {

inline Mat effective_input_weight(const PlantModel& m, const Mat& H, const Mat& P, const Mat& sigma_bar) {
    const Mat BtPB = m.B.adjoint() * P * m.B;
    const cplx tr = (BtPB * sigma_bar).trace();
    return m.R + H.adjoint() * BtPB * H + tr.real() * Mat::Identity(m.R.rows(), m.R.cols());
}

/// tr(BᴴPBΣ̄) = Σ_ij P_ij (BΣ̄Bᴴ)_ji.
inline double weighted_trace(const Mat& P, const Mat& BSBt) { return P.cwiseProduct(BSBt.transpose()).sum().real(); }

/// Riccati map with BĤ and BΣ̄Bᴴ precomputed.
inline Mat riccati_rhs(const PlantModel& m, const Mat& BH, const Mat& BSBt, const Mat& P) {
    const Mat PA = P * m.A;
    const Mat PBH = P * BH;
    Mat M = m.R + BH.adjoint() * PBH;
    M.diagonal().array() += weighted_trace(P, BSBt);
    const Mat G = BH.adjoint() * PA;
    return linalg::hermitian_part(m.Q + m.A.adjoint() * PA - G.adjoint() * M.ldlt().solve(G));
}

}  // namespace detail

/// Feedback gain K (u = K x) minimizing the one-step Bellman form against P_next.
inline Mat care_gain(const PlantModel& m, const Mat& H, const Mat& P_next, const Mat& sigma_bar) {
    const Mat M = detail::effective_input_weight(m, H, P_next, sigma_bar);
    return -M.ldlt().solve(H.adjoint() * m.B.adjoint() * P_next * m.A);
}

/// Q + AᴴP A − AᴴP B Ĥ M⁻¹ Ĥᴴ Bᴴ P A with M = R + ĤᴴBᴴPBĤ + tr(BᴴPBΣ̄) I.
inline Mat care_riccati_rhs(const PlantModel& m, const Mat& H, const Mat& P_next, const Mat& sigma_bar) {
    return detail::riccati_rhs(m, m.B * H, m.B * sigma_bar * m.B.adjoint(), P_next);
}

inline double max_kernel_gap(const std::vector<Mat>& a, const std::vector<Mat>& b) {
    require_dims(a.size() == b.size(), "kernel tables differ in size");
    double gap = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) gap = std::max(gap, (a[i] - b[i]).norm());
    return gap;
}

struct IterationOptions {
    double tol = 1e-9;
    long max_iter = 10000;
};

/// Fixed-point iteration P̄_ℓ ← rhs(P̄_ℓ′) from P̄ = Q. Nodes on cycles of ℓ → ℓ′ are iterated
/// simultaneously until the largest Frobenius change drops below tol; every other node is
/// a finite chain into a cycle and gets its value in one pass afterwards.
inline KernelTable care_value_iteration(const PlantModel& m, const ModeSet& modes, const Mat& sigma_bar,
                                        IterationOptions opt = {}) {
    KernelTable t;
    t.modes = modes;
    t.sigma_bar = sigma_bar;
    t.kernels.assign(modes.size(), m.Q);
    const auto st = modes.structure();
    std::vector<std::size_t> active;
    for (const auto& c : st.cycles) active.insert(active.end(), c.begin(), c.end());
    std::vector<Mat> BH(modes.size());
    for (std::size_t l = 0; l < modes.size(); ++l) BH[l] = m.B * modes.h_hat(l);
    const Mat BSBt = m.B * sigma_bar * m.B.adjoint();
    std::vector<double> residuals;
    std::vector<Mat> next(modes.size());
    for (long it = 1; it <= opt.max_iter; ++it) {
        double res = 0.0;
        for (auto l : active) {
            next[l] = detail::riccati_rhs(m, BH[l], BSBt, t.kernels[modes.next[l]]);
            res = std::max(res, (next[l] - t.kernels[l]).norm());
        }
        for (auto l : active) std::swap(next[l], t.kernels[l]);
        residuals.push_back(res);
        if (!std::isfinite(res)) throw ConvergenceError("value iteration produced non-finite kernels", residuals);
        if (res < opt.tol) {
            for (auto l : st.tree_order) t.kernels[l] = detail::riccati_rhs(m, BH[l], BSBt, t.kernels[modes.next[l]]);
            t.iterations = it;
            return t;
        }
    }
    throw ConvergenceError("value iteration did not converge", residuals);
}

inline KernelTable care_value_iteration(const PlantModel& m, const QuantGrid& grid, const ChannelProcess& proc,
                                        IterationOptions opt = {}) {
    KernelTable t = care_value_iteration(m, ModeSet::from_grid(grid, proc.alpha),
                                         stationary_sigma_bar(proc, grid.n_sub), opt);
    t.grid = grid;
    t.alpha = proc.alpha;
    return t;
}

enum class GainIndex {
    Successor,  ///< kernel of ℓ′ = quantize(α Ĥ_ℓ)
    Current,    ///< kernel of ℓ itself
};

inline Mat control_gain(const KernelTable& t, const PlantModel& m, std::size_t l,
                        GainIndex idx = GainIndex::Successor) {
    const std::size_t k = idx == GainIndex::Successor ? t.modes.next.at(l) : l;
    return care_gain(m, t.modes.h_hat(l), t.kernels.at(k), t.sigma_bar);
}

inline Vec control(const KernelTable& t, const PlantModel& m, std::size_t l, const Vec& x,
                   GainIndex idx = GainIndex::Successor) {
    return control_gain(t, m, l, idx) * x;
}

/// Per-stage bias tr(σ_n² BᴴP̄_ℓ′B + P̄_ℓ′ W).
inline double bellman_bias(const KernelTable& t, const PlantModel& m, std::size_t l, double sigma_n2, const Mat& W) {
    const Mat& P = t.kernels.at(t.modes.next.at(l));
    return (sigma_n2 * m.B.adjoint() * P * m.B + P * W).trace().real();
}

struct StabilityReport {
    std::vector<double> radii;
    std::vector<std::size_t> flagged;
    bool stable() const { return flagged.empty(); }
    double max_radius() const {
        double r = 0.0;
        for (double x : radii) r = std::max(r, x);
        return r;
    }
};

inline constexpr double kSchurMargin = 1e-8;

/// Spectral radius of A + B Ĥ_ℓ K_ℓ for every mode; flags radii ≥ 1 − 1e-8.
inline StabilityReport stabilizing_check(const KernelTable& t, const PlantModel& m,
                                         GainIndex idx = GainIndex::Successor) {
    StabilityReport rep;
    rep.radii.reserve(t.size());
    for (std::size_t l = 0; l < t.size(); ++l) {
        const Mat K = control_gain(t, m, l, idx);
        const double r = linalg::spectral_radius(m.A + m.B * t.modes.h_hat(l) * K);
        rep.radii.push_back(r);
        if (!(r < 1.0 - kSchurMargin)) rep.flagged.push_back(l);
    }
    return rep;
}

namespace detail {

inline Mat kron_dense(const Mat& X, const Mat& Y) {
    Mat out(X.rows() * Y.rows(), X.cols() * Y.cols());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < X.cols(); ++j) out.block(i * Y.rows(), j * Y.cols(), Y.rows(), Y.cols()) = X(i, j) * Y;
    return out;
}

/// vec(P_ℓ) = b_ℓ + T_ℓ vec(P_ℓ′) for the kernels of the policy u = K_ℓ x (column-major vec).
struct AffineKernelMap {
    Mat T;
    Vec b;
};

inline AffineKernelMap policy_kernel_map(const PlantModel& m, const Mat& H, const Mat& K, const Mat& sigma_bar) {
    const Mat Acl = m.A + m.B * H * K;
    const Mat KtK = K.adjoint() * K;
    const Mat BSB = m.B * sigma_bar * m.B.adjoint();
    const Mat Mt = BSB.transpose();
    const Mat Base = m.Q + K.adjoint() * m.R * K;
    AffineKernelMap f;
    f.T = kron_dense(Acl.transpose(), Acl.adjoint());
    f.T += Eigen::Map<const Vec>(KtK.data(), KtK.size()) * Eigen::Map<const Vec>(Mt.data(), Mt.size()).transpose();
    f.b = Eigen::Map<const Vec>(Base.data(), Base.size());
    return f;
}

}  // namespace detail

/// Closed-loop kernels of a fixed mode-dependent policy:
/// P_ℓ = Q + K_ℓᴴ R_eff(P_ℓ′) K_ℓ + (A + BĤ_ℓK_ℓ)ᴴ P_ℓ′ (A + BĤ_ℓK_ℓ), R_eff(P) = R + tr(BᴴPBΣ̄) I.
/// Each cycle of ℓ → ℓ′ is solved exactly through the vectorized affine map; remaining
/// nodes follow by substitution. A cycle operator with spectral radius ≥ 1 means the
/// policy is not mean-square stabilizing and raises ConvergenceError.
inline std::vector<Mat> care_policy_evaluation(const PlantModel& m, const ModeSet& modes, const Mat& sigma_bar,
                                               const std::vector<Mat>& gains) {
    require_dims(gains.size() == modes.size(), "one gain per mode required");
    const auto S = m.A.rows();
    const auto st = modes.structure();
    std::vector<Mat> P(modes.size());
    auto unvec = [S](const Vec& v) { return linalg::hermitian_part(Eigen::Map<const Mat>(v.data(), S, S)); };
    auto apply = [&](std::size_t l) {
        const Mat H = modes.h_hat(l);
        const Mat Acl = m.A + m.B * H * gains[l];
        const Mat& Pn = P[modes.next[l]];
        const double tr = (m.B.adjoint() * Pn * m.B * sigma_bar).trace().real();
        P[l] = linalg::hermitian_part(m.Q + gains[l].adjoint() * (m.R + tr * Mat::Identity(m.R.rows(), m.R.cols())) * gains[l] +
                                      Acl.adjoint() * Pn * Acl);
    };
    for (const auto& cyc : st.cycles) {
        // vec P_0 = b_0 + T_0 b_1 + … + (T_0⋯T_{c−1}) vec P_0 along the cycle.
        Mat prod = Mat::Identity(S * S, S * S);
        Vec acc = Vec::Zero(S * S);
        for (auto l : cyc) {
            const auto f = detail::policy_kernel_map(m, modes.h_hat(l), gains[l], sigma_bar);
            acc += prod * f.b;
            prod = prod * f.T;
        }
        const double rho = linalg::spectral_radius(prod);
        if (!(rho < 1.0))
            throw ConvergenceError("policy evaluation diverged: policy is not mean-square stabilizing", {rho});
        const Vec p0 = (Mat::Identity(S * S, S * S) - prod).partialPivLu().solve(acc);
        P[cyc.front()] = unvec(p0);
        for (std::size_t i = cyc.size(); i-- > 1;) apply(cyc[i]);
    }
    for (auto l : st.tree_order) apply(l);
    for (const auto& p : P)
        if (!p.allFinite()) throw ConvergenceError("policy evaluation produced non-finite kernels", {});
    return P;
}

struct PolicyIterationResult {
    KernelTable table;
    long sweeps = 0;
    std::vector<double> table_norms;  ///< Σ_ℓ ‖P̄_ℓ‖_F after each evaluation
};

/// Alternates policy evaluation and gain improvement. Each sweep asserts the Loewner
/// decrease P̄⁽ᵏ⁺¹⁾ ⪯ P̄⁽ᵏ⁾ bin by bin.
inline PolicyIterationResult care_policy_iteration(const PlantModel& m, const ModeSet& modes, const Mat& sigma_bar,
                                                   std::vector<Mat> gains, double gain_tol = 1e-9,
                                                   long max_sweeps = 200) {
    require_dims(gains.size() == modes.size(), "one initial gain per mode required");
    for (std::size_t l = 0; l < modes.size(); ++l) {
        if (!(linalg::spectral_radius(m.A + m.B * modes.h_hat(l) * gains[l]) < 1.0))
            throw ConfigError("policy iteration: initial gain does not stabilize mode " + std::to_string(l));
    }
    PolicyIterationResult out;
    std::vector<Mat> prev;
    for (long sweep = 1; sweep <= max_sweeps; ++sweep) {
        std::vector<Mat> P = care_policy_evaluation(m, modes, sigma_bar, gains);
        double norm_sum = 0.0;
        for (const auto& p : P) norm_sum += p.norm();
        out.table_norms.push_back(norm_sum);
        if (!prev.empty()) {
            for (std::size_t l = 0; l < P.size(); ++l) {
                const double tol = 1e-8 * std::max(1.0, prev[l].norm());
                if (linalg::min_eigenvalue(linalg::hermitian_part(prev[l] - P[l])) < -tol)
                    throw NumericError("policy iteration: kernel of mode " + std::to_string(l) + " increased");
            }
        }
        double change = 0.0;
        for (std::size_t l = 0; l < modes.size(); ++l) {
            Mat K = care_gain(m, modes.h_hat(l), P[modes.next[l]], sigma_bar);
            change = std::max(change, (K - gains[l]).norm());
            gains[l] = std::move(K);
        }
        prev = std::move(P);
        if (change < gain_tol) {
            out.sweeps = sweep;
            out.table.modes = modes;
            out.table.sigma_bar = sigma_bar;
            out.table.kernels = std::move(prev);
            out.table.iterations = sweep;
            return out;
        }
    }
    throw ConvergenceError("policy iteration did not converge", out.table_norms);
}

/// Initial gains from one greedy step against Q: K_ℓ = care_gain(Ĥ_ℓ, Q).
inline std::vector<Mat> greedy_gains(const PlantModel& m, const ModeSet& modes, const Mat& sigma_bar) {
    std::vector<Mat> g;
    g.reserve(modes.size());
    for (std::size_t l = 0; l < modes.size(); ++l) g.push_back(care_gain(m, modes.h_hat(l), m.Q, sigma_bar));
    return g;
}

/// Gains of the k-step finite-horizon policy (value iteration stopped after k steps) for the
/// first k in 1, 2, 4, 8, … at which every closed loop is Schur and the policy evaluates
/// to finite kernels. Used as a verified stabilizing start for policy iteration.
inline std::vector<Mat> truncated_horizon_gains(const PlantModel& m, const ModeSet& modes, const Mat& sigma_bar,
                                                long max_horizon = 1 << 16) {
    std::vector<Mat> P(modes.size(), m.Q), next(modes.size()), gains(modes.size());
    long checkpoint = 1;
    for (long k = 1; k <= max_horizon; ++k) {
        for (std::size_t l = 0; l < modes.size(); ++l)
            next[l] = care_riccati_rhs(m, modes.h_hat(l), P[modes.next[l]], sigma_bar);
        std::swap(P, next);
        if (k != checkpoint) continue;
        checkpoint *= 2;
        bool schur = true;
        for (std::size_t l = 0; l < modes.size() && schur; ++l) {
            gains[l] = care_gain(m, modes.h_hat(l), P[modes.next[l]], sigma_bar);
            schur = linalg::spectral_radius(m.A + m.B * modes.h_hat(l) * gains[l]) < 1.0 - kSchurMargin;
        }
        if (!schur) continue;
        try {
            care_policy_evaluation(m, modes, sigma_bar, gains);
            return gains;
        } catch (const ConvergenceError&) {
        }
    }
    throw ConvergenceError("no stabilizing finite-horizon policy within the horizon limit", {});
}

/// Gains of an existing table, e.g. to warm-start policy iteration.
inline std::vector<Mat> table_gains(const KernelTable& t, const PlantModel& m) {
    std::vector<Mat> g;
    g.reserve(t.size());
    for (std::size_t l = 0; l < t.size(); ++l) g.push_back(control_gain(t, m, l));
    return g;
}

/// μ_k = c/(k+1).
struct StepSchedule {
    double c = 1.0;

    void validate() const {
        if (!(c > 0.0)) throw ConfigError("step schedule: c must be positive");
    }
    double step(long k) const { return c / (static_cast<double>(k) + 1.0); }
};

/// In-place update of the active kernel: P̄_ℓ ← P̄_ℓ + μ (rhs(P̄_ℓ′) − P̄_ℓ).
inline void sa_kernel_update(KernelTable& t, std::size_t l_active, const PlantModel& m, double mu) {
    if (mu == 0.0) return;
    const Mat target = care_riccati_rhs(m, t.modes.h_hat(l_active), t.kernels.at(t.modes.next.at(l_active)),
                                        t.sigma_bar);
    Mat& P = t.kernels[l_active];
    P = linalg::hermitian_part(P + mu * (target - P));
}

/// Online learner: owns a table and a per-bin visit counter that drives the step size.
class SaLearner {
public:
    SaLearner(KernelTable table, StepSchedule schedule) : table_(std::move(table)), schedule_(schedule) {
        schedule_.validate();
        visits_.assign(table_.size(), 0);
    }

    void update(std::size_t l_active, const PlantModel& m) {
        const double mu = schedule_.step(visits_.at(l_active)++);
        sa_kernel_update(table_, l_active, m, mu);
    }

    const KernelTable& table() const { return table_; }
    const std::vector<long>& visits() const { return visits_; }

private:
    KernelTable table_;
    StepSchedule schedule_;
    std::vector<long> visits_;
};

/// Backward recursion P_K = Q, P_k = rhs(Ĥ_k, P_{k+1}, Σ_k). Returns P_0 … P_K.
inline std::vector<Mat> finite_horizon_kernel(const PlantModel& m, const std::vector<Mat>& h_path,
                                              const std::vector<Mat>& sigma_path, std::size_t horizon) {
    require_dims(h_path.size() >= horizon && sigma_path.size() >= horizon, "paths shorter than horizon");
    std::vector<Mat> P(horizon + 1);
    P[horizon] = m.Q;
    for (std::size_t k = horizon; k-- > 0;) P[k] = care_riccati_rhs(m, h_path[k], P[k + 1], sigma_path[k]);
    return P;
}

}  // namespace pfc
