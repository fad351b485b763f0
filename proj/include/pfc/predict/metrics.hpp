#pragma once

#include <vector>

#include "pfc/core/types.hpp"

namespace pfc {

/// Σ‖Ĥ − H‖²_F / Σ‖H‖²_F.
inline double nmse(const std::vector<Mat>& predictions, const std::vector<Mat>& truths) {
    require_dims(predictions.size() == truths.size(), "nmse sequence lengths");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        require_dims(predictions[i].rows() == truths[i].rows() && predictions[i].cols() == truths[i].cols(),
                     "nmse element shapes");
        num += (predictions[i] - truths[i]).squaredNorm();
        den += truths[i].squaredNorm();
    }
    if (den == 0.0) throw NumericError("nmse: truths have zero total power");
    return num / den;
}

}  // namespace pfc
