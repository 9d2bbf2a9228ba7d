#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mtg {

inline constexpr const char* kVersion = "0.1.0";

// Mirrors the status codes of the C API one-to-one.
enum class Status {
  Ok = 0,
  Io,
  Schema,
  Geometry,
  Degenerate,
  Singular,
  NonConvergence,
  Unstable,
  Invalid,
  Internal,
};

inline const char* status_name(Status s) {
  switch (s) {
    case Status::Ok: return "ok";
    case Status::Io: return "io-error";
    case Status::Schema: return "schema-error";
    case Status::Geometry: return "geometry-error";
    case Status::Degenerate: return "degenerate-geometry";
    case Status::Singular: return "singular-design";
    case Status::NonConvergence: return "non-convergence";
    case Status::Unstable: return "unstable-model";
    case Status::Invalid: return "invalid-argument";
    case Status::Internal: return "internal-error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Status status, const std::string& what)
      : std::runtime_error(what), status_(status) {}
  Status status() const noexcept { return status_; }

 private:
  Status status_;
};

[[noreturn]] inline void fail(Status s, const std::string& msg) {
  throw Error(s, msg);
}

inline void require(bool cond, Status s, const std::string& msg) {
  if (!cond) fail(s, msg);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v);

}  // namespace mtg
