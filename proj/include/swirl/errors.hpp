#pragma once

#include <stdexcept>
#include <string>

namespace swirl {

/// Raised when a velocity field is evaluated within r_min of an
/// unregularized rotlet singularity.
class SingularEvaluation : public std::runtime_error {
 public:
  explicit SingularEvaluation(const std::string& what) : std::runtime_error(what) {}
};

class DimensionMismatch : public std::invalid_argument {
 public:
  explicit DimensionMismatch(const std::string& what) : std::invalid_argument(what) {}
};

/// Backward-pass signal: the regularized Q_uu failed its Cholesky test.
/// The solver responds by raising the regularization, never by aborting.
class NotPositiveDefinite : public std::runtime_error {
 public:
  explicit NotPositiveDefinite(const std::string& what) : std::runtime_error(what) {}
};

class NonDiagonalWeight : public std::invalid_argument {
 public:
  explicit NonDiagonalWeight(const std::string& what) : std::invalid_argument(what) {}
};

class NegativeEigenvalue : public std::runtime_error {
 public:
  explicit NegativeEigenvalue(const std::string& what) : std::runtime_error(what) {}
};

class WindowOutOfRange : public std::invalid_argument {
 public:
  explicit WindowOutOfRange(const std::string& what) : std::invalid_argument(what) {}
};

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

class MissingArtifact : public std::runtime_error {
 public:
  explicit MissingArtifact(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace swirl
