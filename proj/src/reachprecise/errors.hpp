#pragma once

#include <stdexcept>
#include <string>

namespace rp {

enum class ErrorKind {
  invalid_argument,
  domain,
  out_of_view,
  degenerate_geometry,
  numeric,
  io,
  config,
  audit,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Joint angle (or post-motion configuration) outside its configured range.
class DomainError : public Error {
 public:
  DomainError(int joint, const std::string& what)
      : Error(ErrorKind::domain, what), joint_(joint) {}

  // -1 when the failure is not tied to one joint.
  int joint() const noexcept { return joint_; }

 private:
  int joint_;
};

class OutOfViewError : public Error {
 public:
  explicit OutOfViewError(const std::string& what)
      : Error(ErrorKind::out_of_view, what) {}
};

class DegenerateGeometryError : public Error {
 public:
  explicit DegenerateGeometryError(const std::string& what)
      : Error(ErrorKind::degenerate_geometry, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorKind::numeric, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::config, what) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorKind::invalid_argument, what) {}
};

}  // namespace rp
