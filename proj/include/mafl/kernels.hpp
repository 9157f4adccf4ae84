#pragma once

// Dense double-precision kernels behind a runtime-selected backend.
//
// Every backend computes element-wise operations (axpy, add, sub, scale)
// with exactly the same IEEE rounding as the scalar reference, so protocol
// state is bit-identical whichever backend runs. Reductions (dot, norm2,
// dist2) use a backend-specific summation order and agree with the scalar
// reference only to rounding.

#include <cstddef>
#include <span>
#include <string_view>

namespace mafl::kernels {

enum class Backend { kScalar, kAvx2, kNeon };

struct KernelTable {
  void (*axpy)(double a, const double* x, double* y, std::size_t n);  // y += a*x
  void (*scale)(double a, double* x, std::size_t n);                  // x *= a
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*norm2)(const double* x, std::size_t n);
  double (*dist2)(const double* a, const double* b, std::size_t n);  // ||a-b||^2
};

std::string_view name(Backend b);
// Parses "scalar", "avx2", "neon"; throws ParameterError otherwise.
Backend parse_backend(std::string_view s);

// Compiled in and usable on this CPU.
bool supported(Backend b);

const KernelTable& table(Backend b);

// Best supported backend, unless overridden by MAFL_SIMD or set_backend().
Backend active_backend();
void set_backend(Backend b);

// Span wrappers over the active backend. Sizes must match.
void axpy(double a, std::span<const double> x, std::span<double> y);
void scale(double a, std::span<double> x);
void add(std::span<const double> a, std::span<const double> b, std::span<double> out);
void sub(std::span<const double> a, std::span<const double> b, std::span<double> out);
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> x);
double dist2(std::span<const double> a, std::span<const double> b);

}  // namespace mafl::kernels
