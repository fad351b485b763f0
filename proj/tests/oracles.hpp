#pragma once
// Reference computations written independently of the library code paths.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "pfc/core/types.hpp"

namespace oracle {

using pfc::cplx;
using pfc::Mat;
using pfc::RMat;
using pfc::RVec;
using pfc::Vec;

/// Posterior of h ~ CN(mu, S) given y = C h + e, e ~ CN(0, Rn), read off the joint precision
/// of (h, y): cov = (Λ_hh)⁻¹, mean = mu − (Λ_hh)⁻¹ Λ_hy (y − C mu).
struct Posterior {
    Vec mean;
    Mat cov;
};

inline Posterior conditional_gaussian(const Vec& mu, const Mat& S, const Mat& C, const Mat& Rn, const Vec& y) {
    const auto d = mu.size(), m = y.size();
    Mat J(d + m, d + m);
    J.topLeftCorner(d, d) = S;
    J.topRightCorner(d, m) = S * C.adjoint();
    J.bottomLeftCorner(m, d) = C * S;
    J.bottomRightCorner(m, m) = C * S * C.adjoint() + Rn;
    const Mat L = J.fullPivLu().inverse();
    const Mat Lhh = L.topLeftCorner(d, d);
    const Mat Lhy = L.topRightCorner(d, m);
    Posterior p;
    p.cov = Lhh.fullPivLu().inverse();
    p.mean = mu - p.cov * Lhy * (y - C * mu);
    return p;
}

/// Stabilizing DARE solution by the eigenvector method on the symplectic pencil
/// (A must be invertible): P = U₂ U₁⁻¹ from the eigenvectors with |λ| < 1.
inline Mat dare_symplectic(const Mat& A, const Mat& B, const Mat& Q, const Mat& R) {
    const auto n = A.rows();
    const Mat Ait = A.adjoint().inverse();
    const Mat G = B * R.inverse() * B.adjoint();
    Mat Z(2 * n, 2 * n);
    Z.topLeftCorner(n, n) = A + G * Ait * Q;
    Z.topRightCorner(n, n) = -G * Ait;
    Z.bottomLeftCorner(n, n) = -Ait * Q;
    Z.bottomRightCorner(n, n) = Ait;
    Eigen::ComplexEigenSolver<Mat> es(Z);
    Mat U(2 * n, n);
    Eigen::Index c = 0;
    for (Eigen::Index i = 0; i < 2 * n; ++i)
        if (std::abs(es.eigenvalues()(i)) < 1.0 && c < n) U.col(c++) = es.eigenvectors().col(i);
    if (c != n) throw pfc::NumericError("dare oracle: wrong number of stable eigenvalues");
    const Mat P = U.bottomRows(n) * U.topRows(n).inverse();
    return 0.5 * (P + P.adjoint());
}

/// Scalar DARE p = q + a²p − a²b²p²/(r + b²p): positive root of b²p² + (r(1−a²) − qb²)p − qr = 0.
inline double scalar_dare(double a, double b, double q, double r) {
    const double B2 = b * b;
    const double lin = r * (1.0 - a * a) - q * B2;
    return (-lin + std::sqrt(lin * lin + 4.0 * B2 * q * r)) / (2.0 * B2);
}

/// Textbook OFDM receive chain written with explicit sums: convolve the CP block with the taps,
/// drop the prefix, DFT by definition, undo the subcarrier map.
inline Vec ofdm_chain(const Vec& u, const std::vector<int>& perm, int l_cp, const Vec& taps) {
    const int N = static_cast<int>(u.size());
    const double pi = std::numbers::pi;
    Vec sf(N);
    for (int i = 0; i < N; ++i) sf(perm[i]) = u(i);
    Vec t(N);
    for (int n = 0; n < N; ++n) {
        cplx acc = 0.0;
        for (int m = 0; m < N; ++m) acc += sf(m) * std::polar(1.0, 2.0 * pi * m * n / N);
        t(n) = acc / std::sqrt(double(N));
    }
    std::vector<cplx> block;
    for (int i = N - l_cp; i < N; ++i) block.push_back(t(i));
    for (int i = 0; i < N; ++i) block.push_back(t(i));
    std::vector<cplx> r(block.size(), 0.0);
    for (std::size_t n = 0; n < block.size(); ++n)
        for (int k = 0; k < taps.size(); ++k)
            if (n >= static_cast<std::size_t>(k)) r[n] += taps(k) * block[n - k];
    Vec rf(N);
    for (int m = 0; m < N; ++m) {
        cplx acc = 0.0;
        for (int n = 0; n < N; ++n) acc += r[l_cp + n] * std::polar(1.0, -2.0 * pi * m * n / N);
        rf(m) = acc / std::sqrt(double(N));
    }
    Vec out(N);
    for (int i = 0; i < N; ++i) out(i) = rf(perm[i]);
    return out;
}

/// Subcarrier gain by definition: Σ_t h_t e^{−2πj m t / N}.
inline cplx subcarrier_gain(const Vec& taps, int m, int N) {
    cplx acc = 0.0;
    for (int t = 0; t < taps.size(); ++t) acc += taps(t) * std::polar(1.0, -2.0 * std::numbers::pi * m * t / N);
    return acc;
}

/// Central-difference Jacobian.
template <class F>
RMat central_jacobian(F&& f, const RVec& x, double step) {
    const RVec f0 = f(x);
    RMat J(f0.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        RVec xp = x, xm = x;
        xp(j) += step;
        xm(j) -= step;
        J.col(j) = (f(xp) - f(xm)) / (2.0 * step);
    }
    return J;
}

/// Random Hermitian positive definite matrix with eigenvalues in [lo, hi].
template <class Gen>
Mat random_hpd(Eigen::Index n, Gen& g, double lo = 0.2, double hi = 2.0) {
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> ud(lo, hi);
    Mat X(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) X(i, j) = cplx(nd(g), nd(g));
    Eigen::HouseholderQR<Mat> qr(X);
    const Mat Qm = qr.householderQ();
    RVec ev(n);
    for (Eigen::Index i = 0; i < n; ++i) ev(i) = ud(g);
    return Qm * ev.cast<cplx>().asDiagonal() * Qm.adjoint();
}

template <class Gen>
Mat random_mat(Eigen::Index r, Eigen::Index c, Gen& g, double scale = 1.0) {
    std::normal_distribution<double> nd;
    Mat X(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) X(i, j) = scale * cplx(nd(g), nd(g));
    return X;
}

}  // namespace oracle
