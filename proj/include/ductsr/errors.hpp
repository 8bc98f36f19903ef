#pragma once

#include <stdexcept>
#include <string>

namespace ductsr {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// File could not be read or written; message carries the path.
class IoError : public Error {
public:
  IoError(const std::string& path, const std::string& detail)
      : Error(path + ": " + detail), path_(path) {}
  const std::string& path() const { return path_; }

private:
  std::string path_;
};

/// Iterative solver failed to reach the requested residual.
class SolverError : public Error {
public:
  SolverError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

private:
  double residual_ = 0.0;
};

}  // namespace ductsr
