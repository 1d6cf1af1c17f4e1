#pragma once

#include <stdexcept>
#include <string>

namespace truex {

// Malformed or inconsistent input files and artifacts (CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Any failure reaching or replaying a language-model provider (exit code 3).
class ProviderError : public std::runtime_error {
 public:
  enum class Kind {
    template_missing,  // unknown template id or unfilled slot
    mock_miss,         // unscripted request under the error fallback
    network,           // connection refused, timeout, TLS failure
    rate_limited,      // HTTP 429
    server,            // HTTP 5xx
    rejected,          // other HTTP 4xx, e.g. a bad key
    bad_response,      // reply could not be decoded
  };

  ProviderError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }
  bool retryable() const noexcept {
    return kind_ == Kind::network || kind_ == Kind::rate_limited || kind_ == Kind::server;
  }

 private:
  Kind kind_;
};

}  // namespace truex
