#include "mafl/sparsify.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "mafl/error.hpp"

namespace mafl::sparsify {

SparseUpdate top_k(std::span<const double> x, std::int64_t k) {
  const auto s = static_cast<std::int64_t>(x.size());
  if (k < 0 || k > s) throw ParameterError("top_k: k must lie in [0, s]");
  SparseUpdate out;
  out.dimension = x.size();
  if (k == 0) return out;

  std::vector<std::uint32_t> order(x.size());
  std::iota(order.begin(), order.end(), 0u);
  auto before = [&](std::uint32_t a, std::uint32_t b) {
    const double ma = std::abs(x[a]);
    const double mb = std::abs(x[b]);
    return ma != mb ? ma > mb : a < b;
  };
  if (k < s) std::nth_element(order.begin(), order.begin() + (k - 1), order.end(), before);
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());

  out.indices = std::move(order);
  out.values.reserve(out.indices.size());
  for (auto i : out.indices) out.values.push_back(x[i]);
  return out;
}

int index_bits(std::int64_t s) {
  if (s < 1) throw ParameterError("model dimension must be >= 1");
  return static_cast<int>(std::bit_width(static_cast<std::uint64_t>(s - 1)));
}

int element_bits(std::int64_t s, int u_bits) { return u_bits + index_bits(s); }

double payload_bits(std::int64_t k, std::int64_t s, int u_bits) {
  if (k < 0) throw ParameterError("k must be >= 0");
  return static_cast<double>(k) * static_cast<double>(element_bits(s, u_bits));
}

Vector densify(const SparseUpdate& sp) {
  Vector out(sp.dimension, 0.0);
  for (std::size_t j = 0; j < sp.indices.size(); ++j) out[sp.indices[j]] = sp.values[j];
  return out;
}

Vector residual(std::span<const double> x, const SparseUpdate& sp) {
  if (x.size() != sp.dimension) throw DimensionError("residual: dimension mismatch");
  Vector out(x.begin(), x.end());
  for (std::size_t j = 0; j < sp.indices.size(); ++j) out[sp.indices[j]] -= sp.values[j];
  return out;
}

void scatter_add(const SparseUpdate& sp, double scale, std::span<double> out) {
  if (out.size() != sp.dimension) throw DimensionError("scatter_add: dimension mismatch");
  for (std::size_t j = 0; j < sp.indices.size(); ++j) out[sp.indices[j]] += scale * sp.values[j];
}

double norm2(const SparseUpdate& sp) {
  double s = 0.0;
  for (double v : sp.values) s += v * v;
  return s;
}

}  // namespace mafl::sparsify
