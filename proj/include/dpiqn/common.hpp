#pragma once

#include <cstdint>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace dpiqn {

// Contract violations throw; the CLI turns them into nonzero exits.
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline void check_fail(const char* expr, const char* file, int line, const std::string& msg) {
  std::ostringstream os;
  os << "contract violation: " << expr << " (" << file << ":" << line << ")";
  if (!msg.empty()) os << ": " << msg;
  throw ContractError(os.str());
}
}  // namespace detail

#define DPIQN_CHECK(cond, ...)                                                   \
  do {                                                                           \
    if (!(cond)) ::dpiqn::detail::check_fail(#cond, __FILE__, __LINE__,          \
                                             ::dpiqn::detail::msg_(__VA_ARGS__)); \
  } while (0)

namespace detail {
inline std::string msg_() { return {}; }
inline std::string msg_(const std::string& s) { return s; }
template <typename... Ts>
inline std::string msg_(Ts&&... parts) {
  std::ostringstream os;
  (os << ... << parts);
  return os.str();
}
}  // namespace detail

using Rng = std::mt19937_64;

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Decorrelated per-purpose seed from a master seed.
inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 0x632be59bd9b4e019ull));
}

inline int uniform_index(Rng& rng, int n) { return static_cast<int>(rng() % static_cast<uint64_t>(n)); }
inline double uniform_real(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::string rng_to_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline Rng rng_from_string(const std::string& s) {
  Rng rng;
  std::istringstream is(s);
  is >> rng;
  return rng;
}

// Stable shortest-roundtrip-ish float formatting for CSV output.
inline std::string fmt_float(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace dpiqn
