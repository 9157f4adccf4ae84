#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "mafl/error.hpp"
#include "mafl/kernels.hpp"

using namespace mafl;
using kernels::Backend;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_int_distribution<int> ex(-20, 20);
  std::vector<double> v(n);
  for (auto& x : v) x = std::ldexp(nd(rng), ex(rng));
  return v;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::vector<Backend> simd_backends() {
  std::vector<Backend> out;
  for (auto b : {Backend::kAvx2, Backend::kNeon})
    if (kernels::supported(b)) out.push_back(b);
  return out;
}

}  // namespace

TEST_CASE("scalar reference values") {
  const auto& t = kernels::table(Backend::kScalar);
  std::vector<double> x{1, 2, 3}, y{10, 20, 30}, out(3);
  t.axpy(2.0, x.data(), y.data(), 3);
  CHECK(y == std::vector<double>{12, 24, 36});
  t.add(x.data(), y.data(), out.data(), 3);
  CHECK(out == std::vector<double>{13, 26, 39});
  t.sub(y.data(), x.data(), out.data(), 3);
  CHECK(out == std::vector<double>{11, 22, 33});
  t.scale(0.5, x.data(), 3);
  CHECK(x == std::vector<double>{0.5, 1, 1.5});
  CHECK(t.dot(x.data(), x.data(), 3) == 3.5);
  CHECK(t.norm2(x.data(), 3) == 3.5);
  std::vector<double> a{1, 1}, b{4, 5};
  CHECK(t.dist2(a.data(), b.data(), 2) == 25.0);
  CHECK(t.dot(a.data(), b.data(), 0) == 0.0);
}

TEST_CASE("backend names round-trip") {
  for (auto b : {Backend::kScalar, Backend::kAvx2, Backend::kNeon})
    CHECK(kernels::parse_backend(kernels::name(b)) == b);
  CHECK_THROWS_AS(kernels::parse_backend("sse9"), ParameterError);
  CHECK(kernels::supported(Backend::kScalar));
}

TEST_CASE("simd backends match the scalar reference") {
  const auto& ref = kernels::table(Backend::kScalar);
  std::mt19937_64 rng(5);
  for (auto backend : simd_backends()) {
    CAPTURE(kernels::name(backend));
    const auto& t = kernels::table(backend);
    for (std::size_t n : {0, 1, 3, 4, 5, 7, 8, 15, 16, 17, 31, 64, 1000, 1023}) {
      CAPTURE(n);
      const auto x = random_vec(n, rng), y = random_vec(n, rng);
      const double a = std::normal_distribution<double>(0.0, 3.0)(rng);

      auto y1 = y, y2 = y;
      ref.axpy(a, x.data(), y1.data(), n);
      t.axpy(a, x.data(), y2.data(), n);
      CHECK(bit_equal(y1, y2));

      auto s1 = x, s2 = x;
      ref.scale(a, s1.data(), n);
      t.scale(a, s2.data(), n);
      CHECK(bit_equal(s1, s2));

      std::vector<double> o1(n), o2(n);
      ref.add(x.data(), y.data(), o1.data(), n);
      t.add(x.data(), y.data(), o2.data(), n);
      CHECK(bit_equal(o1, o2));
      ref.sub(x.data(), y.data(), o1.data(), n);
      t.sub(x.data(), y.data(), o2.data(), n);
      CHECK(bit_equal(o1, o2));

      const double scale = std::max(1e-300, ref.norm2(x.data(), n) + ref.norm2(y.data(), n));
      CHECK(std::abs(ref.dot(x.data(), y.data(), n) - t.dot(x.data(), y.data(), n)) <= 1e-12 * scale);
      CHECK(std::abs(ref.norm2(x.data(), n) - t.norm2(x.data(), n)) <= 1e-12 * scale);
      CHECK(std::abs(ref.dist2(x.data(), y.data(), n) - t.dist2(x.data(), y.data(), n)) <=
            1e-12 * 2.0 * scale);
    }
  }
}

TEST_CASE("unaligned views match too") {
  const auto& ref = kernels::table(Backend::kScalar);
  std::mt19937_64 rng(11);
  for (auto backend : simd_backends()) {
    const auto& t = kernels::table(backend);
    const auto x = random_vec(130, rng);
    auto y1 = random_vec(130, rng);
    auto y2 = y1;
    ref.axpy(-0.3, x.data() + 1, y1.data() + 3, 101);
    t.axpy(-0.3, x.data() + 1, y2.data() + 3, 101);
    CHECK(bit_equal(y1, y2));
  }
}

TEST_CASE("span wrappers use the selected backend and check sizes") {
  const auto saved = kernels::active_backend();
  std::vector<double> x{1, 2}, y{3, 4, 5};
  CHECK_THROWS_AS(kernels::axpy(1.0, x, y), DimensionError);
  kernels::set_backend(Backend::kScalar);
  CHECK(kernels::active_backend() == Backend::kScalar);
  std::vector<double> z{3, 4};
  kernels::axpy(1.0, x, z);
  CHECK(z == std::vector<double>{4, 6});
  CHECK(kernels::norm2(z) == 52.0);
  kernels::set_backend(saved);
}
