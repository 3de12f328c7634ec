#pragma once

#include <stdexcept>
#include <string>

namespace uiharvest {

enum class ErrorKind {
  rejected_scheme,
  malformed_url,
  stale_lease,
  service_unavailable,
  snapshot_failed,
  storage,
  corrupt_sample,
  validation,
  size,
  empty_corpus,
  empty_table,
  exhaustion,
  parse,
  decode,
  config,
  capture_failed,
  nav_timeout,
};

const char* to_string(ErrorKind kind);

// Domain error. Every failure the library reports to callers is one of these;
// anything else escaping is a bug.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace uiharvest
