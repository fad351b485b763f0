#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pfc {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid model parameters or configuration text.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Ill-conditioned solve, divergence, or non-convergence.
class NumericError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

inline void require_dims(bool ok, const std::string& what) {
    if (!ok) throw DimensionError("dimension mismatch: " + what);
}

}  // namespace pfc
