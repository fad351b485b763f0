#pragma once

#include <cmath>
#include <vector>

#include "pfc/core/linalg.hpp"
#include "pfc/core/types.hpp"
#include "pfc/model/plant.hpp"

namespace pfc {

struct LqrSolution {
    Mat P;
    Mat K;  ///< u = K x
    long iterations = 0;
};

/// Iterates P ← Q + AᴴPA − AᴴPB(R + BᴴPB)⁻¹BᴴPA from P = Q.
/// Throws ConfigError when the iteration blows up or ends with an unstable closed loop.
inline LqrSolution dare_iterate(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, double tol = 1e-10,
                                long max_iter = 1000000) {
    require_dims(A.rows() == A.cols() && B.rows() == A.rows() && Q.rows() == A.rows() && R.rows() == B.cols(),
                 "dare: inconsistent dimensions");
    Mat P = Q;
    for (long it = 1; it <= max_iter; ++it) {
        const Mat G = B.adjoint() * P * A;
        const Mat Pn = linalg::hermitian_part(Q + A.adjoint() * P * A - G.adjoint() * (R + B.adjoint() * P * B).ldlt().solve(G));
        const double res = (Pn - P).norm();
        P = Pn;
        if (!std::isfinite(res) || P.norm() > 1e14) throw ConfigError("dare: (A, B) is not stabilizable");
        if (res < tol * std::max(1.0, P.norm())) {
            LqrSolution s{P, -(R + B.adjoint() * P * B).ldlt().solve(B.adjoint() * P * A), it};
            if (!(linalg::spectral_radius(A + B * s.K) < 1.0)) throw ConfigError("dare: (A, B) is not stabilizable");
            return s;
        }
    }
    throw ConfigError("dare: iteration did not converge; (A, B) may not be stabilizable");
}

/// Fixed LQR gain designed for a nominal channel and applied whatever the realized channel is.
inline LqrSolution nominal_lqr(const PlantModel& m, const Mat& H_nominal) {
    require_dims(H_nominal.rows() == m.B.cols(), "nominal channel rows vs B columns");
    const Mat Beff = m.B * H_nominal;
    const Mat R = H_nominal.cols() == m.R.rows() ? m.R : Mat::Identity(H_nominal.cols(), H_nominal.cols());
    return dare_iterate(m.A, Beff, m.Q, R);
}

struct PidGains {
    double kp = 0.8;
    double ki = 0.05;
    double kd = 0.1;
    double windup = 10.0;  ///< bound on ‖Σ x_j‖
};

/// u = −pinv(B_eff)(Kp x_k + Ki Σ_j x_j + Kd (x_k − x_{k−1})), integral clamped to the windup bound.
class PidController {
public:
    PidController(const Mat& B_eff, PidGains gains) : pinv_(linalg::pinv(B_eff)), g_(gains) {
        if (!(g_.windup > 0.0)) throw ConfigError("pid: windup bound must be positive");
        reset();
    }

    void reset() {
        integral_ = Vec::Zero(pinv_.cols());
        prev_ = Vec::Zero(pinv_.cols());
        first_ = true;
    }

    Vec operator()(const Vec& x) {
        require_dims(x.size() == pinv_.cols(), "pid: state dimension");
        integral_ += x;
        const double n = integral_.norm();
        if (n > g_.windup) integral_ *= g_.windup / n;
        const Vec d = first_ ? Vec::Zero(x.size()).eval() : (x - prev_).eval();
        prev_ = x;
        first_ = false;
        return -pinv_ * (g_.kp * x + g_.ki * integral_ + g_.kd * d);
    }

private:
    Mat pinv_;
    PidGains g_;
    Vec integral_;
    Vec prev_;
    bool first_ = true;
};

}  // namespace pfc
