#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <vector>

#include "pfc/core/linalg.hpp"
#include "pfc/core/types.hpp"
#include "pfc/model/channel.hpp"
#include "pfc/model/plant.hpp"
#include "pfc/predict/baselines.hpp"
#include "pfc/predict/kalman.hpp"

namespace pfc {

// The channel matrix H (n_rx×n_tx) is tracked as the real vector
// [Re vec(H); Im vec(H)] with vec column-major. Split tanh is not holomorphic,
// so the filters work on this widened real state.

struct WidenedShape {
    Eigen::Index n_rx;
    Eigen::Index n_tx;
    Eigen::Index complex_dim() const { return n_rx * n_tx; }
    Eigen::Index real_dim() const { return 2 * n_rx * n_tx; }
};

inline RVec widen_channel(const Mat& H) { return linalg::widen(Eigen::Map<const Vec>(H.data(), H.size())); }

inline Mat narrow_channel(const RVec& h, WidenedShape shape) {
    const Vec v = linalg::narrow(h);
    return Eigen::Map<const Mat>(v.data(), shape.n_rx, shape.n_tx);
}

/// E[tanh(X)²] for X ~ N(0, var), by composite Simpson quadrature on ±10σ.
inline double tanh_second_moment(double var) {
    if (var <= 0.0) return 0.0;
    const double sd = std::sqrt(var);
    const int n = 4000;
    const double a = -10.0 * sd, h = 20.0 * sd / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double x = a + i * h;
        const double f = std::pow(std::tanh(x), 2) * std::exp(-0.5 * x * x / var);
        acc += f * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
    }
    return acc * h / 3.0 / (sd * std::sqrt(2.0 * std::numbers::pi));
}

/// Observation map g(h) = [Re; Im](A x_prev + B sat(H u_prev)).
inline RVec widened_observation(const NonlinearPlantSpec& spec, const RVec& h, WidenedShape shape, const Vec& x_prev,
                                const Vec& u_prev) {
    const Mat H = narrow_channel(h, shape);
    return linalg::widen(spec.base.A * x_prev + spec.base.B * saturate(spec.saturation, H * u_prev));
}

/// Analytic Jacobian of widened_observation with respect to the widened channel.
inline RMat widened_jacobian(const NonlinearPlantSpec& spec, const RVec& h, WidenedShape shape, const Vec& u_prev) {
    const auto nr = shape.n_rx, nt = shape.n_tx, s = spec.base.A.rows();
    const Mat H = narrow_channel(h, shape);
    const Vec z = H * u_prev;
    RVec dre(nr), dim(nr);
    for (Eigen::Index i = 0; i < nr; ++i) {
        if (spec.saturation == Saturation::TanhSplit) {
            dre(i) = 1.0 - std::pow(std::tanh(z(i).real()), 2);
            dim(i) = 1.0 - std::pow(std::tanh(z(i).imag()), 2);
        } else {
            dre(i) = dim(i) = 1.0;
        }
    }
    const RMat Br = spec.base.B.real();
    const RMat Bi = spec.base.B.imag();
    // Jacobian of [Re sat; Im sat] (2nr) w.r.t. [Re vec H; Im vec H] (2 nr nt).
    RMat Js = RMat::Zero(2 * nr, 2 * nr * nt);
    const auto off = nr * nt;
    for (Eigen::Index j = 0; j < nt; ++j) {
        const double ur = u_prev(j).real(), ui = u_prev(j).imag();
        for (Eigen::Index i = 0; i < nr; ++i) {
            const auto col = i + j * nr;
            Js(i, col) = dre(i) * ur;
            Js(nr + i, col) = dim(i) * ui;
            Js(i, off + col) = -dre(i) * ui;
            Js(nr + i, off + col) = dim(i) * ur;
        }
    }
    RMat Bw(2 * s, 2 * nr);
    Bw << Br, -Bi, Bi, Br;
    return Bw * Js;
}

/// Covariance of the widened observation noise w + B sat(n_c), n_c ~ CN(0, σ_n² I).
inline RMat widened_observation_noise(const NonlinearPlantSpec& spec, double sigma_n2, Eigen::Index n_rx) {
    const double per_component = spec.saturation == Saturation::TanhSplit ? tanh_second_moment(sigma_n2 / 2.0)
                                                                          : sigma_n2 / 2.0;
    const Mat Bc = spec.base.B;
    const Mat link_cov = (2.0 * per_component) * Bc * Bc.adjoint();
    require_dims(Bc.cols() == n_rx, "B columns vs n_rx");
    return linalg::widen_covariance(spec.base.W + link_cov);
}

/// Initial widened state: zero mean, ½ I per real component (CN(0, I) on the complex entries).
inline RealPredictorState widened_initial(WidenedShape shape) {
    return RealPredictorState::initial(shape.real_dim(), 0.5);
}

inline RealPredictorState widened_predict(const RealPredictorState& st, const ChannelProcess& proc) {
    const auto d = st.h_post.size();
    RealPredictorState next = st;
    next.h_prior = proc.alpha * st.h_post;
    next.sigma_prior = proc.alpha * proc.alpha * st.sigma_post +
                       0.5 * proc.sigma_v2 * (1.0 - proc.alpha * proc.alpha) * RMat::Identity(d, d);
    next.slot = st.slot + 1;
    return next;
}

/// EKF measurement step, linearized at the prior mean.
inline RealPredictorState ekf_estimate(const RealPredictorState& st, const NonlinearPlantSpec& spec, WidenedShape shape,
                                       double sigma_n2, const Observation& obs) {
    obs.validate();
    const RMat J = widened_jacobian(spec, st.h_prior, shape, obs.u_prev);
    const RMat Rn = widened_observation_noise(spec, sigma_n2, shape.n_rx);
    const RVec innov = linalg::widen(obs.x_curr) - widened_observation(spec, st.h_prior, shape, obs.x_prev, obs.u_prev);
    RealPredictorState next = st;
    kalman_update<double>(next, J, Rn, innov);
    return next;
}

inline RealPredictorState ekf_step(const RealPredictorState& st, const NonlinearPlantSpec& spec, WidenedShape shape,
                                   double sigma_n2, const Observation& obs, const ChannelProcess& proc) {
    return widened_predict(ekf_estimate(st, spec, shape, sigma_n2, obs), proc);
}

struct UnscentedParams {
    double alpha = 1e-3;
    double beta = 2.0;
    double kappa = 0.0;
};

struct SigmaWeights {
    double lambda;
    RVec mean;
    RVec cov;
};

inline SigmaWeights sigma_weights(Eigen::Index n, UnscentedParams p = {}) {
    const double nn = static_cast<double>(n);
    const double lambda = p.alpha * p.alpha * (nn + p.kappa) - nn;
    SigmaWeights w{lambda, RVec::Constant(2 * n + 1, 0.5 / (nn + lambda)), RVec::Constant(2 * n + 1, 0.5 / (nn + lambda))};
    w.mean(0) = lambda / (nn + lambda);
    w.cov(0) = w.mean(0) + (1.0 - p.alpha * p.alpha + p.beta);
    return w;
}

/// UKF measurement step on the widened state. A failed Cholesky factorization is
/// retried once with 1e-9·I jitter.
inline RealPredictorState ukf_estimate(const RealPredictorState& st, const NonlinearPlantSpec& spec, WidenedShape shape,
                                       double sigma_n2, const Observation& obs, UnscentedParams params = {}) {
    obs.validate();
    const auto n = st.h_prior.size();
    if (obs.u_prev.cwiseAbs().maxCoeff() == 0.0) {
        RealPredictorState next = st;
        next.h_post = st.h_prior;
        next.sigma_post = st.sigma_prior;
        return next;
    }
    const SigmaWeights w = sigma_weights(n, params);
    RMat scaled = (static_cast<double>(n) + w.lambda) * st.sigma_prior;
    Eigen::LLT<RMat> llt(scaled);
    if (llt.info() != Eigen::Success) {
        llt.compute(scaled + 1e-9 * RMat::Identity(n, n));
        if (llt.info() != Eigen::Success) throw NumericError("ukf: covariance square root failed");
    }
    const RMat L = llt.matrixL();

    std::vector<RVec> pts(2 * n + 1, st.h_prior);
    for (Eigen::Index i = 0; i < n; ++i) {
        pts[1 + i] += L.col(i);
        pts[1 + n + i] -= L.col(i);
    }
    std::vector<RVec> ys(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) ys[i] = widened_observation(spec, pts[i], shape, obs.x_prev, obs.u_prev);

    // Means accumulated as offsets from the centre point; the weights sum to one and
    // the centre weight is O(1/α²), so this avoids cancellation.
    RVec y_mean = ys[0];
    for (std::size_t i = 1; i < ys.size(); ++i) y_mean += w.mean(i) * (ys[i] - ys[0]);

    const auto m = y_mean.size();
    RMat Pyy = widened_observation_noise(spec, sigma_n2, shape.n_rx);
    RMat Pxy = RMat::Zero(n, m);
    for (std::size_t i = 0; i < ys.size(); ++i) {
        const RVec dy = ys[i] - y_mean;
        Pyy += w.cov(i) * dy * dy.transpose();
        Pxy += w.cov(i) * (pts[i] - st.h_prior) * dy.transpose();
    }
    Pyy = 0.5 * (Pyy + Pyy.transpose()).eval();
    Eigen::JacobiSVD<RMat> svd(Pyy);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 0.0 || sv(0) / sv(sv.size() - 1) > kMaxInnovationCondition)
        throw NumericError("ukf: innovation covariance is singular or ill-conditioned");
    const RMat K = Pyy.ldlt().solve(Pxy.transpose()).transpose();

    RealPredictorState next = st;
    next.h_post = st.h_prior + K * (linalg::widen(obs.x_curr) - y_mean);
    RMat post = st.sigma_prior - K * Pyy * K.transpose();
    next.sigma_post = 0.5 * (post + post.transpose());
    return next;
}

inline RealPredictorState ukf_step(const RealPredictorState& st, const NonlinearPlantSpec& spec, WidenedShape shape,
                                   double sigma_n2, const Observation& obs, const ChannelProcess& proc,
                                   UnscentedParams params = {}) {
    return widened_predict(ukf_estimate(st, spec, shape, sigma_n2, obs, params), proc);
}

/// Baseline LS for the saturated MIMO link: z = B⁺(x_curr − A x_prev) ≈ sat(H u),
/// invert the saturation componentwise (clipped just inside ±1), then take the
/// minimum-norm H with H u = z, i.e. z uᴴ/‖u‖². Returns `previous` without excitation.
inline Mat linearized_ls_mimo(const NonlinearPlantSpec& spec, const Observation& obs, const Mat& previous) {
    obs.validate();
    require_dims(previous.cols() == obs.u_prev.size(), "previous estimate vs control");
    const double u2 = obs.u_prev.squaredNorm();
    if (!(std::sqrt(u2) >= kExcitationThreshold)) return previous;
    Vec z = linalg::pinv(spec.base.B) * (obs.x_curr - spec.base.A * obs.x_prev);
    if (spec.saturation == Saturation::TanhSplit) {
        constexpr double lim = 1.0 - 1e-6;
        for (Eigen::Index i = 0; i < z.size(); ++i)
            z(i) = {std::atanh(std::clamp(z(i).real(), -lim, lim)), std::atanh(std::clamp(z(i).imag(), -lim, lim))};
    }
    return z * obs.u_prev.adjoint() / u2;
}

/// Blind MIMO proxy: the blind vector spread evenly over the transmit columns.
inline Mat blind_svd_mimo(const std::deque<Vec>& window, const Mat& B, Eigen::Index n_tx) {
    const Vec g = blind_svd_predict(window, B);
    return g * RVec::Ones(n_tx).cast<cplx>().transpose() / static_cast<double>(n_tx);
}

}  // namespace pfc
