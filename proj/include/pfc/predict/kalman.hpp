#pragma once

#include <cmath>

#include "pfc/core/linalg.hpp"
#include "pfc/core/types.hpp"
#include "pfc/model/channel.hpp"
#include "pfc/model/plant.hpp"

namespace pfc {

/// Prior/posterior channel mean and error covariance at slot k.
template <class Scalar>
struct BasicPredictorState {
    using VecT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using MatT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    VecT h_prior;      ///< ĥ(k|k−1)
    VecT h_post;       ///< ĥ(k|k)
    MatT sigma_prior;  ///< Σ(k|k−1)
    MatT sigma_post;   ///< Σ(k|k)
    long slot = 1;

    /// ĥ(1|0) = 0 with Σ(1|0) = prior_variance·I.
    static BasicPredictorState initial(Eigen::Index dim, double prior_variance = 1.0) {
        BasicPredictorState s;
        s.h_prior = VecT::Zero(dim);
        s.h_post = VecT::Zero(dim);
        s.sigma_prior = prior_variance * MatT::Identity(dim, dim);
        s.sigma_post = s.sigma_prior;
        return s;
    }
};

using PredictorState = BasicPredictorState<cplx>;
using RealPredictorState = BasicPredictorState<double>;

/// One plant transition: x_curr = A x_prev + B Diag(u_prev) h + B n + w.
struct Observation {
    Vec x_prev;
    Vec x_curr;
    Vec u_prev;

    void validate() const {
        if (!x_prev.allFinite() || !x_curr.allFinite() || !u_prev.allFinite())
            throw NumericError("observation contains non-finite entries");
    }
};

inline constexpr double kMaxInnovationCondition = 1e12;

/// Joseph-form measurement update for y = C h + e, e ~ (0, Rn), given innovation y − C ĥ_prior.
/// Works for complex and real (widened) states alike.
template <class Scalar>
void kalman_update(BasicPredictorState<Scalar>& st, const typename BasicPredictorState<Scalar>::MatT& C,
                   const typename BasicPredictorState<Scalar>::MatT& Rn,
                   const typename BasicPredictorState<Scalar>::VecT& innovation) {
    using MatT = typename BasicPredictorState<Scalar>::MatT;
    require_dims(C.cols() == st.h_prior.size() && C.rows() == Rn.rows() && innovation.size() == C.rows(),
                 "kalman update shapes");
    if (C.cwiseAbs().maxCoeff() == 0.0) {
        st.h_post = st.h_prior;
        st.sigma_post = st.sigma_prior;
        return;
    }
    const MatT PCt = st.sigma_prior * C.adjoint();
    MatT S = C * PCt + Rn;
    S = 0.5 * (S + S.adjoint()).eval();
    Eigen::JacobiSVD<MatT> svd(S);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) <= 0.0 || sv(0) / sv(sv.size() - 1) > kMaxInnovationCondition)
        throw NumericError("innovation covariance is singular or ill-conditioned");
    const MatT K = S.ldlt().solve(PCt.adjoint()).adjoint();
    st.h_post = st.h_prior + K * innovation;
    const MatT IKC = MatT::Identity(C.cols(), C.cols()) - K * C;
    MatT post = IKC * st.sigma_prior * IKC.adjoint() + K * Rn * K.adjoint();
    st.sigma_post = 0.5 * (post + post.adjoint());
}

/// Measurement step of the control-aided channel predictor: the applied control acts as the pilot.
inline PredictorState kf_estimate(const PredictorState& state, const PlantModel& model, double sigma_n2,
                                  const Observation& obs) {
    obs.validate();
    require_dims(obs.u_prev.size() == model.B.cols() && state.h_prior.size() == model.B.cols(),
                 "control/channel vs B");
    require_dims(obs.x_prev.size() == model.A.cols() && obs.x_curr.size() == model.A.rows(), "states vs A");
    const Mat C = model.B * obs.u_prev.asDiagonal();
    const Mat Rn = sigma_n2 * model.B * model.B.adjoint() + model.W;
    PredictorState next = state;
    kalman_update<cplx>(next, C, Rn, obs.x_curr - model.A * obs.x_prev - C * state.h_prior);
    return next;
}

/// ĥ(k+1|k) = α ĥ(k|k), Σ(k+1|k) = α² Σ(k|k) + σ_v²(1 − α²) I.
inline PredictorState kf_predict(const PredictorState& state, const ChannelProcess& proc) {
    const auto d = state.h_post.size();
    PredictorState next = state;
    next.h_prior = proc.alpha * state.h_post;
    next.sigma_prior = proc.alpha * proc.alpha * state.sigma_post +
                       proc.sigma_v2 * (1.0 - proc.alpha * proc.alpha) * Mat::Identity(d, d);
    next.slot = state.slot + 1;
    return next;
}

/// Long-run bound on the time-averaged trace of the one-step prediction covariance.
inline double prediction_error_bound(const ChannelProcess& proc, Eigen::Index n) {
    if (!(std::abs(proc.alpha) <= 1.0)) throw ConfigError("channel: |alpha| <= 1 required");
    const double nn = static_cast<double>(n);
    if (std::abs(proc.alpha) < 1.0) return proc.sigma_v2 * nn / (1.0 - proc.alpha * proc.alpha);
    return nn;
}

}  // namespace pfc
