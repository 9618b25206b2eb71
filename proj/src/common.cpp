#include "acesearcher/common.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

namespace acesearcher {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::io: return "io";
    case ErrorCode::parse: return "parse";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::duplicate_id: return "duplicate_id";
    case ErrorCode::unknown_id: return "unknown_id";
    case ErrorCode::precondition: return "precondition";
    case ErrorCode::auth: return "auth";
    case ErrorCode::request: return "request";
    case ErrorCode::retries_exhausted: return "retries_exhausted";
    case ErrorCode::schema: return "schema";
    case ErrorCode::executor: return "executor";
  }
  return "unknown";
}

namespace {
constexpr bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
}  // namespace

std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string trim_copy(std::string_view s) { return std::string(trim(s)); }

std::uint64_t stable_hash(std::string_view data, std::uint64_t basis) noexcept {
  std::uint64_t h = basis;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) return std::to_string(value);
  return std::string(buf, ptr);
}

}  // namespace acesearcher
