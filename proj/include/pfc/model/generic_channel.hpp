#pragma once

#include "pfc/core/linalg.hpp"
#include "pfc/core/types.hpp"

namespace pfc {

/// Generic linear channel transforms: plain MIMO, or a channel conjugated by a
/// caller-supplied unitary (symplectic Fourier for OTFS, affine Fourier for AFDM).
struct ChannelTransform {
    enum class Kind { Mimo, Conjugated };
    Kind kind = Kind::Mimo;
    Mat U;  ///< only for Conjugated

    static ChannelTransform mimo() { return {}; }

    static ChannelTransform conjugated(Mat U) {
        if (U.rows() != U.cols()) throw DimensionError("conjugating transform must be square");
        if (linalg::unitarity_defect(U) > 1e-9) throw ConfigError("conjugating transform is not unitary");
        return {Kind::Conjugated, std::move(U)};
    }
};

/// mimo: H u. conjugated: U⁻¹ H U u (U⁻¹ = Uᴴ).
inline Vec generic_channel_apply(const ChannelTransform& t, const Mat& H, const Vec& u) {
    if (t.kind == ChannelTransform::Kind::Mimo) {
        require_dims(H.cols() == u.size(), "channel vs control");
        return H * u;
    }
    require_dims(H.rows() == t.U.rows() && H.cols() == t.U.cols() && u.size() == t.U.cols(), "conjugated channel shapes");
    return t.U.adjoint() * (H * (t.U * u));
}

}  // namespace pfc
