#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"
#include "mafl/error.hpp"

namespace mafl::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(MAFL_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Backend detect() {
  if (const char* env = std::getenv("MAFL_SIMD"); env != nullptr && *env != '\0') {
    const Backend b = parse_backend(env);
    if (!supported(b)) throw ParameterError("MAFL_SIMD=" + std::string(env) + " not supported");
    return b;
  }
  if (supported(Backend::kAvx2)) return Backend::kAvx2;
  if (supported(Backend::kNeon)) return Backend::kNeon;
  return Backend::kScalar;
}

std::atomic<int>& active_slot() {
  static std::atomic<int> slot{static_cast<int>(detect())};
  return slot;
}

void check(std::size_t a, std::size_t b) {
  if (a != b) throw DimensionError("kernel operands differ in length");
}

}  // namespace

std::string_view name(Backend b) {
  switch (b) {
    case Backend::kScalar: return "scalar";
    case Backend::kAvx2: return "avx2";
    case Backend::kNeon: return "neon";
  }
  return "?";
}

Backend parse_backend(std::string_view s) {
  if (s == "scalar") return Backend::kScalar;
  if (s == "avx2") return Backend::kAvx2;
  if (s == "neon") return Backend::kNeon;
  throw ParameterError("unknown SIMD backend: " + std::string(s));
}

bool supported(Backend b) {
  switch (b) {
    case Backend::kScalar: return true;
    case Backend::kAvx2: return cpu_has_avx2();
    case Backend::kNeon:
#if defined(MAFL_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Backend b) {
  if (!supported(b)) throw ParameterError("backend not available: " + std::string(name(b)));
  switch (b) {
#if defined(MAFL_HAVE_AVX2)
    case Backend::kAvx2: return avx2::table();
#endif
#if defined(MAFL_HAVE_NEON)
    case Backend::kNeon: return neon::table();
#endif
    default: return scalar::table();
  }
}

Backend active_backend() { return static_cast<Backend>(active_slot().load()); }

void set_backend(Backend b) {
  if (!supported(b)) throw ParameterError("backend not available: " + std::string(name(b)));
  active_slot().store(static_cast<int>(b));
}

namespace {
const KernelTable& active() { return table(active_backend()); }
}  // namespace

void axpy(double a, std::span<const double> x, std::span<double> y) {
  check(x.size(), y.size());
  active().axpy(a, x.data(), y.data(), x.size());
}

void scale(double a, std::span<double> x) { active().scale(a, x.data(), x.size()); }

void add(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  check(a.size(), b.size());
  check(a.size(), out.size());
  active().add(a.data(), b.data(), out.data(), a.size());
}

void sub(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  check(a.size(), b.size());
  check(a.size(), out.size());
  active().sub(a.data(), b.data(), out.data(), a.size());
}

double dot(std::span<const double> a, std::span<const double> b) {
  check(a.size(), b.size());
  return active().dot(a.data(), b.data(), a.size());
}

double norm2(std::span<const double> x) { return active().norm2(x.data(), x.size()); }

double dist2(std::span<const double> a, std::span<const double> b) {
  check(a.size(), b.size());
  return active().dist2(a.data(), b.data(), a.size());
}

}  // namespace mafl::kernels
