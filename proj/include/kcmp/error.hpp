#pragma once

#include <stdexcept>
#include <string>

namespace kcmp {

// Base of every error raised by the toolkit. The CLI maps subclasses to
// process exit codes (see tools/kcmp_main.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

// A backend call failed permanently. `status` is the HTTP status when one
// exists, 0 otherwise.
class BackendError : public Error {
 public:
  BackendError(const std::string& what, int status = 0, std::string request_key = {})
      : Error(what), status_(status), request_key_(std::move(request_key)) {}

  int status() const noexcept { return status_; }
  const std::string& request_key() const noexcept { return request_key_; }

 private:
  int status_;
  std::string request_key_;
};

// Transport-level failure worth retrying (timeouts, 429, 5xx).
class TransientBackendError : public BackendError {
 public:
  using BackendError::BackendError;
};

// Backend answered, but the response does not fit the request role.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class ProbeConstructionError : public Error {
 public:
  using Error::Error;
};

class DegenerateEmbedding : public Error {
 public:
  using Error::Error;
};

class RationalityUnavailable : public Error {
 public:
  using Error::Error;
};

class ProbeEvaluationError : public Error {
 public:
  using Error::Error;
};

}  // namespace kcmp
