#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "pfc/core/types.hpp"

namespace pfc {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t label_hash(std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed for the stream (root, trial, label). Streams for different trials or
/// labels never share state, so adding trials leaves earlier ones untouched.
inline std::uint64_t stream_seed(std::uint64_t root, std::uint64_t trial, std::string_view label) {
    return splitmix64(splitmix64(root ^ splitmix64(trial + 0x632be59bd9b4e019ULL)) ^ label_hash(label));
}

/// Gaussian source producing circularly-symmetric complex samples:
/// CN(0, s2) has independent real/imaginary parts, each N(0, s2/2).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t root, std::uint64_t trial, std::string_view label)
        : engine_(stream_seed(root, trial, label)) {}

    double normal() { return normal_(engine_); }

    cplx complex_normal(double variance = 1.0) {
        const double s = std::sqrt(variance / 2.0);
        const double re = normal_(engine_);
        const double im = normal_(engine_);
        return {s * re, s * im};
    }

    Vec complex_normal_vec(Eigen::Index n, double variance = 1.0) {
        Vec v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = complex_normal(variance);
        return v;
    }

    Mat complex_normal_mat(Eigen::Index rows, Eigen::Index cols, double variance = 1.0) {
        Mat m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = complex_normal(variance);
        return m;
    }

    /// Sample CN(0, C) for a Hermitian PSD covariance C.
    Vec complex_normal_cov(const Mat& C) {
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (C + C.adjoint()));
        RVec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        Vec z = complex_normal_vec(C.rows());
        return es.eigenvectors() * (ev.cast<cplx>().asDiagonal() * z);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace pfc
