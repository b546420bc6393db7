#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <stdexcept>
#include <string>

namespace reslab {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<cplx, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<cplx, int>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

// Entries below this magnitude are not stored in sparse operators.
inline constexpr double kDropTolerance = 1e-14;

// Error taxonomy. The CLI maps these onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid input: bad configuration, precondition violated by the caller.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Requested truncation or dense problem exceeds a configured cap.
class CapacityError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// A numerical procedure failed (singular solve, non-convergence, branch loss).
class NumericalError : public Error {
public:
    NumericalError(std::string module, const std::string& what)
        : Error(module + ": " + what), module_(std::move(module)) {}
    const std::string& module() const { return module_; }

private:
    std::string module_;
};

} // namespace reslab
