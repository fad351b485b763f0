#pragma once

#include <cmath>
#include <string>

#include "pfc/core/linalg.hpp"
#include "pfc/core/types.hpp"

namespace pfc {

/// Linear plant x' = A x + B û + w with quadratic stage cost xᴴQx + uᴴRu.
struct PlantModel {
    Mat A;  ///< S×S
    Mat B;  ///< S×N
    Mat W;  ///< process-noise covariance
    Mat Q;
    Mat R;
    double sigma_x2 = 1.0;  ///< initial-state variance

    Eigen::Index state_dim() const { return A.rows(); }
    Eigen::Index input_dim() const { return B.cols(); }

    /// Throws ConfigError when shapes, definiteness, or controllability fail.
    void validate() const {
        const auto s = A.rows();
        if (A.cols() != s || B.rows() != s || W.rows() != s || W.cols() != s || Q.rows() != s || Q.cols() != s)
            throw ConfigError("plant: inconsistent dimensions");
        if (R.rows() != B.cols() || R.cols() != B.cols()) throw ConfigError("plant: R must be N×N");
        if (!(sigma_x2 >= 0.0)) throw ConfigError("plant: sigma_x2 must be nonnegative");
        if (linalg::hermitian_defect(Q) > 1e-10 || linalg::min_eigenvalue(Q) <= 0.0)
            throw ConfigError("plant: Q must be symmetric positive definite");
        if (linalg::hermitian_defect(R) > 1e-10 || linalg::min_eigenvalue(R) <= 0.0)
            throw ConfigError("plant: R must be symmetric positive definite");
        if (linalg::hermitian_defect(W) > 1e-10 || linalg::min_eigenvalue(W) < -1e-12)
            throw ConfigError("plant: W must be Hermitian positive semidefinite");
        if (controllability_rank() != s) throw ConfigError("plant: (A, B) is not controllable");
    }

    Eigen::Index controllability_rank() const {
        const auto s = A.rows();
        Mat C(s, s * B.cols());
        Mat blk = B;
        for (Eigen::Index i = 0; i < s; ++i) {
            C.middleCols(i * B.cols(), B.cols()) = blk;
            blk = A * blk;
        }
        Eigen::ColPivHouseholderQR<Mat> qr(C);
        qr.setThreshold(1e-10);
        return qr.rank();
    }
};

/// Plant state; construction rejects NaN/Inf entries.
class PlantState {
public:
    explicit PlantState(Vec x) : x_(std::move(x)) {
        if (!x_.allFinite()) throw NumericError("plant state contains non-finite entries");
    }
    const Vec& x() const { return x_; }
    double energy() const { return x_.squaredNorm(); }

private:
    Vec x_;
};

/// x' = A x + B û + w.
inline PlantState step_linear_plant(const PlantModel& m, const PlantState& x, const Vec& u_hat, const Vec& w) {
    require_dims(x.x().size() == m.A.cols(), "state vs A");
    require_dims(u_hat.size() == m.B.cols(), "received control vs B");
    require_dims(w.size() == m.A.rows(), "process noise vs A");
    return PlantState(m.A * x.x() + m.B * u_hat + w);
}

enum class Saturation {
    TanhSplit,  ///< tanh applied separately to real and imaginary parts
    None,       ///< identity; turns the nonlinear plant back into a linear one
};

/// Bounded componentwise nonlinearity; |Re|, |Im| < 1 for TanhSplit.
inline Vec saturate(Saturation kind, const Vec& z) {
    if (kind == Saturation::None) return z;
    Vec out(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) out(i) = cplx(std::tanh(z(i).real()), std::tanh(z(i).imag()));
    return out;
}

struct NonlinearPlantSpec {
    PlantModel base;
    Saturation saturation = Saturation::TanhSplit;
};

/// x' = A x + B sat(H u) + B sat(n_c) + w.
inline PlantState step_nonlinear_plant(const NonlinearPlantSpec& spec, const PlantState& x, const Mat& H, const Vec& u,
                                       const Vec& n_c, const Vec& w) {
    const auto& m = spec.base;
    require_dims(H.cols() == u.size(), "channel columns vs control");
    require_dims(H.rows() == m.B.cols(), "channel rows vs B columns");
    require_dims(n_c.size() == H.rows(), "link noise vs channel rows");
    require_dims(x.x().size() == m.A.cols() && w.size() == m.A.rows(), "state/process noise vs A");
    return PlantState(m.A * x.x() + m.B * saturate(spec.saturation, H * u) + m.B * saturate(spec.saturation, n_c) + w);
}

/// Plant constants of the linear-OFDM experiment (Q, R and σ_x² are unit defaults).
inline PlantModel reference_linear_plant() {
    PlantModel m;
    RMat A(4, 4), B(4, 4);
    A << 1.02, 0.01, 0, 0,  //
        0, 0.02, 0.05, 0,   //
        0, 0, 0.33, 0.02,   //
        0.04, 0, 0, 0.21;
    B << 0.5, 0, 0, 0,  //
        0.1, 0.6, 0, 0,  //
        0, 0, 0.7, 0.21,  //
        0, 0, 0, 0.8;
    m.A = A.cast<cplx>();
    m.B = B.cast<cplx>();
    m.W = Mat::Identity(4, 4);
    m.Q = Mat::Identity(4, 4);
    m.R = Mat::Identity(4, 4);
    m.sigma_x2 = 1.0;
    return m;
}

}  // namespace pfc
