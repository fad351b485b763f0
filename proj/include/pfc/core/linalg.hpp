#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pfc/core/types.hpp"

namespace pfc::linalg {

inline Mat hermitian_part(const Mat& X) { return 0.5 * (X + X.adjoint()); }

inline double hermitian_defect(const Mat& X) { return (X - X.adjoint()).cwiseAbs().maxCoeff(); }

inline double min_eigenvalue(const Mat& X) {
    Eigen::SelfAdjointEigenSolver<Mat> es(hermitian_part(X), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline double min_eigenvalue(const RMat& X) {
    Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (X + X.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline bool is_psd(const Mat& X, double tol = 1e-9) {
    return hermitian_defect(X) <= 1e-10 * std::max(1.0, X.cwiseAbs().maxCoeff()) && min_eigenvalue(X) >= -tol;
}

inline double spectral_radius(const Mat& X) {
    if (X.size() == 0) return 0.0;
    Eigen::ComplexEigenSolver<Mat> es(X, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double condition_number(const Mat& X) {
    Eigen::JacobiSVD<Mat> svd(X);
    const auto& s = svd.singularValues();
    if (s.size() == 0) return 1.0;
    const double lo = s(s.size() - 1);
    return lo > 0.0 ? s(0) / lo : std::numeric_limits<double>::infinity();
}

inline Mat pinv(const Mat& X) {
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(X);
    return cod.pseudoInverse();
}

inline RMat pinv(const RMat& X) {
    Eigen::CompleteOrthogonalDecomposition<RMat> cod(X);
    return cod.pseudoInverse();
}

/// Unitary N-point DFT matrix, F(m, n) = exp(-2πj mn / N) / sqrt(N).
inline Mat dft_matrix(Eigen::Index n) {
    Mat F(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (Eigen::Index m = 0; m < n; ++m)
        for (Eigen::Index k = 0; k < n; ++k)
            F(m, k) = std::polar(scale, -2.0 * std::numbers::pi * static_cast<double>((m * k) % n) / n);
    return F;
}

inline double unitarity_defect(const Mat& U) {
    return (U.adjoint() * U - Mat::Identity(U.cols(), U.cols())).norm();
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }

/// Real widening of a complex vector: [Re v; Im v].
inline RVec widen(const Vec& v) {
    RVec r(2 * v.size());
    r << v.real(), v.imag();
    return r;
}

inline Vec narrow(const RVec& r) {
    const auto n = r.size() / 2;
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = cplx(r(i), r(n + i));
    return v;
}

/// Real covariance of [Re z; Im z] for a proper complex vector with covariance C.
inline RMat widen_covariance(const Mat& C) {
    const auto n = C.rows();
    RMat R(2 * n, 2 * n);
    R << C.real(), -C.imag(), C.imag(), C.real();
    return 0.5 * R;
}

/// Inverse of widen_covariance for proper (circular) covariances.
inline Mat narrow_covariance(const RMat& R) {
    const auto n = R.rows() / 2;
    Mat C(n, n);
    C.real() = R.topLeftCorner(n, n) + R.bottomRightCorner(n, n);
    C.imag() = R.bottomLeftCorner(n, n) - R.topRightCorner(n, n);
    return C;
}

}  // namespace pfc::linalg
