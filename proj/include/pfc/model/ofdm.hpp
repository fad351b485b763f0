#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pfc/core/linalg.hpp"
#include "pfc/core/types.hpp"

namespace pfc {

/// Which subcarrier-mapping constraint a binary matrix violates.
enum class MappingViolation { None, NotBinary, BandwidthUtilization, DisjointMapping, BijectiveMapping, OutOfRange };

inline std::string to_string(MappingViolation v) {
    switch (v) {
        case MappingViolation::None: return "ok";
        case MappingViolation::NotBinary: return "entries must be 0 or 1";
        case MappingViolation::BandwidthUtilization: return "bandwidth utilization constraint";
        case MappingViolation::DisjointMapping: return "disjoint mapping constraint";
        case MappingViolation::BijectiveMapping: return "bijective mapping constraint";
        case MappingViolation::OutOfRange: return "subcarrier index out of range";
    }
    return "unknown";
}

/// perm[i] is the (0-based) subcarrier carrying control component i.
/// A bijection satisfies all three mapping constraints at once.
inline MappingViolation validate_permutation(const std::vector<int>& perm) {
    const auto n = static_cast<int>(perm.size());
    std::vector<bool> used(perm.size(), false);
    for (int p : perm) {
        if (p < 0 || p >= n) return MappingViolation::OutOfRange;
        if (used[p]) return MappingViolation::DisjointMapping;
        used[p] = true;
    }
    return MappingViolation::None;
}

/// Checks a raw N×N 0/1 matrix P (column i = mapping of component i) constraint by constraint.
inline MappingViolation validate_permutation(const Eigen::MatrixXi& P) {
    const auto n = P.rows();
    if (P.cols() != n) return MappingViolation::BijectiveMapping;
    if (((P.array() != 0) && (P.array() != 1)).any()) return MappingViolation::NotBinary;
    if (P.sum() != n) return MappingViolation::BandwidthUtilization;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (P.col(i).dot(P.col(j)) != 0) return MappingViolation::DisjointMapping;
    for (Eigen::Index i = 0; i < n; ++i)
        if (P.col(i).sum() != 1 || P.row(i).sum() != 1) return MappingViolation::BijectiveMapping;
    return MappingViolation::None;
}

inline Eigen::MatrixXi permutation_matrix(const std::vector<int>& perm) {
    const auto n = static_cast<Eigen::Index>(perm.size());
    Eigen::MatrixXi P = Eigen::MatrixXi::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) P(perm[i], i) = 1;
    return P;
}

inline std::vector<int> identity_permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    return p;
}

/// One OFDM link: subcarrier map, unitary IDFT, cyclic prefix, multipath taps, AWGN.
class OfdmLink {
public:
    OfdmLink(int n_sub, int l_cp, std::vector<int> perm, double sigma_n2, Vec taps)
        : n_(n_sub), l_cp_(l_cp), perm_(std::move(perm)), sigma_n2_(sigma_n2), taps_(std::move(taps)),
          F_(linalg::dft_matrix(n_sub)) {
        if (n_ <= 0) throw ConfigError("ofdm: subcarrier count must be positive");
        if (l_cp_ < 0) throw ConfigError("ofdm: CP length must be nonnegative");
        if (static_cast<int>(perm_.size()) != n_) throw ConfigError("ofdm: permutation length must equal N");
        if (auto v = validate_permutation(perm_); v != MappingViolation::None)
            throw ConfigError("ofdm: invalid subcarrier map (" + to_string(v) + ")");
        if (!(sigma_n2_ >= 0.0)) throw ConfigError("ofdm: noise variance must be nonnegative");
        set_taps(taps_);
    }

    int n_sub() const { return n_; }
    int l_cp() const { return l_cp_; }
    int l_h() const { return static_cast<int>(taps_.size()); }
    int block_length() const { return n_ + l_cp_; }
    double sigma_n2() const { return sigma_n2_; }
    const std::vector<int>& perm() const { return perm_; }
    const Vec& taps() const { return taps_; }
    const Mat& dft() const { return F_; }

    void set_sigma_n2(double s2) { sigma_n2_ = s2; }

    /// Replace the impulse response; rejects l_h > l_cp + 1.
    void set_taps(Vec taps) {
        if (taps.size() < 1) throw ConfigError("ofdm: at least one tap required");
        if (taps.size() > l_cp_ + 1) throw ConfigError("ofdm: CP shorter than channel memory (l_cp >= l_h - 1 violated)");
        taps_ = std::move(taps);
    }

    /// Subcarrier gains: the N-point (unnormalized) DFT of the zero-padded taps.
    Vec frequency_response() const {
        Vec padded = Vec::Zero(n_);
        padded.head(taps_.size()) = taps_;
        return std::sqrt(static_cast<double>(n_)) * (F_ * padded);
    }

    /// Diagonal gains seen by the control components (subcarrier gains reordered by the map).
    Vec effective_gains() const {
        const Vec lambda = frequency_response();
        Vec g(n_);
        for (int i = 0; i < n_; ++i) g(i) = lambda(perm_[i]);
        return g;
    }

    /// Taps (length N) whose frequency response places gain g(i) on subcarrier perm[i].
    Vec taps_for_gains(const Vec& g) const {
        require_dims(g.size() == n_, "gain vector vs subcarriers");
        Vec lambda(n_);
        for (int i = 0; i < n_; ++i) lambda(perm_[i]) = g(i);
        return (F_.adjoint() * lambda) / std::sqrt(static_cast<double>(n_));
    }

    /// Map, unitary IDFT, prepend the last l_cp samples.
    Vec modulate(const Vec& u) const {
        require_dims(u.size() == n_, "control vs subcarriers");
        Vec sf(n_);
        for (int i = 0; i < n_; ++i) sf(perm_[i]) = u(i);
        const Vec t = F_.adjoint() * sf;
        Vec out(n_ + l_cp_);
        out.head(l_cp_) = t.tail(l_cp_);
        out.tail(n_) = t;
        return out;
    }

    /// Block-local linear convolution with the taps (no memory from the previous block), plus noise.
    Vec apply_time_channel(const Vec& s_cp, const Vec& n_t) const {
        require_dims(s_cp.size() == block_length() && n_t.size() == block_length(), "time-domain block length");
        Vec r = n_t;
        for (Eigen::Index n = 0; n < s_cp.size(); ++n)
            for (Eigen::Index t = 0; t < taps_.size() && t <= n; ++t) r(n) += taps_(t) * s_cp(n - t);
        return r;
    }

    /// Drop CP, unitary DFT, inverse map.
    Vec demodulate(const Vec& r) const {
        require_dims(r.size() == block_length(), "received block length");
        const Vec sf = F_ * r.tail(n_);
        Vec u(n_);
        for (int i = 0; i < n_; ++i) u(i) = sf(perm_[i]);
        return u;
    }

    /// Frequency-domain noise after the receiver, Pᵀ F R n_t; matches the full chain's noise exactly.
    Vec effective_noise(const Vec& n_t) const {
        require_dims(n_t.size() == block_length(), "time-domain noise length");
        return demodulate(n_t);
    }

    /// Full chain: modulate, convolve, add noise, demodulate.
    Vec transmit(const Vec& u, const Vec& n_t) const { return demodulate(apply_time_channel(modulate(u), n_t)); }

private:
    int n_;
    int l_cp_;
    std::vector<int> perm_;
    double sigma_n2_;
    Vec taps_;
    Mat F_;
};

/// Diagonal-domain shortcut û = H u + n.
inline Vec effective_link(const Mat& H_diag, const Vec& u, const Vec& n) {
    require_dims(H_diag.rows() == H_diag.cols() && H_diag.cols() == u.size() && n.size() == u.size(),
                 "effective link shapes");
    Mat off = H_diag;
    off.diagonal().setZero();
    if (off.cwiseAbs().maxCoeff() > 0.0) throw DimensionError("effective link requires a diagonal channel");
    return H_diag.diagonal().cwiseProduct(u) + n;
}

}  // namespace pfc
