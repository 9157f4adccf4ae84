#pragma once

// Top-k sparsification with error-feedback residuals.

#include <cstdint>
#include <span>
#include <vector>

namespace mafl {

using Vector = std::vector<double>;

namespace sparsify {

struct SparseUpdate {
  std::vector<std::uint32_t> indices;  // strictly increasing
  std::vector<double> values;          // aligned with indices
  std::size_t dimension = 0;           // s
};

// k entries of largest magnitude; equal magnitudes go to the lower index.
SparseUpdate top_k(std::span<const double> x, std::int64_t k);

// ceil(log2 s) for s >= 1.
int index_bits(std::int64_t s);

// Bits per transmitted element, u + ceil(log2 s).
int element_bits(std::int64_t s, int u_bits);

// k * (u + ceil(log2 s)).
double payload_bits(std::int64_t k, std::int64_t s, int u_bits);

Vector densify(const SparseUpdate& sp);

// x minus densify(sp); zero at the selected indices.
Vector residual(std::span<const double> x, const SparseUpdate& sp);

// out[idx] += scale * value for each entry.
void scatter_add(const SparseUpdate& sp, double scale, std::span<double> out);

double norm2(const SparseUpdate& sp);

}  // namespace sparsify
}  // namespace mafl
