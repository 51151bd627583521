#ifndef QGS_ERROR_HPP
#define QGS_ERROR_HPP

#include <stdexcept>
#include <string>

namespace qgs {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A covariance matrix failed its Cholesky factorization.
class DegenerateCovarianceError : public Error {
public:
    DegenerateCovarianceError(const std::string& what, int pivot)
        : Error(what + " (pivot " + std::to_string(pivot) + ")"), pivot_index(pivot) {}
    /// Index of the first non-positive pivot encountered.
    int pivot_index;
};

/// The innovation covariance R + C*Q*C^T is singular.
class DegenerateInnovationError : public Error {
public:
    using Error::Error;
};

/// A backward-form component cannot be converted to a Gaussian in the state
/// (observation stack is rank deficient or too ill conditioned).
class UnreducibleBackwardFormError : public Error {
public:
    using Error::Error;
};

/// A measurement is inconsistent with every branch image and quantization set.
class NoLikelihoodSupportError : public Error {
public:
    using Error::Error;
};

/// A point falls outside every piece of a piecewise nonlinearity.
class UncoveredDomainError : public Error {
public:
    using Error::Error;
};

/// All particle weights vanished.
class ParticleDegeneracyError : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Dimension mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

} // namespace qgs

#endif // QGS_ERROR_HPP
