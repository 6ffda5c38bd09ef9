#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace ftd {

using Vec3 = Eigen::Vector3d;
using Index3 = Eigen::Vector3i;

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed file content (header syntax, bad values).
class FormatError : public Error {
public:
  using Error::Error;
};

/// Payload shorter or longer than the header promises.
class TruncationError : public FormatError {
public:
  using FormatError::FormatError;
};

class IndexError : public Error {
public:
  using Error::Error;
};

/// Inputs outside an operation's domain (empty masks, mismatched grids, ...).
class DomainError : public Error {
public:
  using Error::Error;
};

class ConnectivityError : public DomainError {
public:
  using DomainError::DomainError;
};

class GeometryError : public DomainError {
public:
  using DomainError::DomainError;
};

class EmptyTractError : public DomainError {
public:
  using DomainError::DomainError;
};

/// Numerical failures of the constrained fit.
class NumericalError : public Error {
public:
  using Error::Error;
};

class UnderdeterminedError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class ConditioningError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

} // namespace ftd
