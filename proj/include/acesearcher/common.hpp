#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace acesearcher {

/// Failure categories. The CLI prints the category name as the machine-readable
/// error code, so names are part of the exit-status contract.
enum class ErrorCode {
  io,
  parse,
  invalid_argument,
  duplicate_id,
  unknown_id,
  precondition,
  auth,
  request,
  retries_exhausted,
  schema,
  executor,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

std::string_view trim(std::string_view s) noexcept;
std::string trim_copy(std::string_view s);

/// 64-bit FNV-1a; stable across platforms and runs.
std::uint64_t stable_hash(std::string_view data,
                          std::uint64_t basis = 14695981039346656037ULL) noexcept;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace acesearcher
