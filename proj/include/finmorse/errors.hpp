#pragma once

#include <stdexcept>
#include <string>

namespace finmorse {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GraphError : public Error {
 public:
  using Error::Error;
};

class ProfileViolation : public GraphError {
 public:
  using GraphError::GraphError;
};

class CapExceeded : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// Precondition on numeric input violated (negative potential in Green
// theory, bad radii, too few levels, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class SingularError : public Error {
 public:
  using Error::Error;
};

class Disconnected : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class InsufficientDepth : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(const std::string& what, double eigenvalue)
      : Error(what), eigenvalue_(eigenvalue) {}
  double eigenvalue() const { return eigenvalue_; }

 private:
  double eigenvalue_;
};

class PositivityError : public Error {
 public:
  PositivityError(const std::string& what, std::string vertex, double value)
      : Error(what), vertex_(std::move(vertex)), value_(value) {}
  const std::string& vertex() const { return vertex_; }
  double value() const { return value_; }

 private:
  std::string vertex_;
  double value_;
};

class CertificateInapplicable : public Error {
 public:
  CertificateInapplicable(const std::string& what, double form_value)
      : Error(what), form_value_(form_value) {}
  double form_value() const { return form_value_; }

 private:
  double form_value_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& path, const std::string& msg)
      : Error(path + ": " + msg), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

}  // namespace finmorse
