#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "mafl/controller.hpp"
#include "mafl/error.hpp"
#include "mafl/sparsify.hpp"

using namespace mafl;
using namespace mafl::controller;

namespace {

channel::ChannelParams narrow_band() {
  auto ch = channel::default_params();
  ch.bandwidth_hz = 1e4;
  return ch;
}

channel::LinkState link_with_gain(double g) {
  channel::LinkState l;
  l.gain_h2 = g;
  return l;
}

// Objective written out independently of the library.
double objective(double p, double V, double theta, double tau, double x2, double q, double B,
                 double N0, double h2, double s, double b) {
  const double A = B * std::log2(1.0 + p * h2 / (B * N0));
  return -3.0 * V * theta * tau * A * x2 / (s * b) + 5.0 * V * theta * x2 + tau * p * q;
}

}  // namespace

TEST_CASE("queue update examples") {
  CHECK(queue_update({5.0, 30.0, 10}, 2.0).q == doctest::Approx(4.0));
  CHECK(queue_update({0.0, 20.0, 10}, 1.0).q == 0.0);
  CHECK(queue_update({1.5, 1.0, 10}, 0.5).q == doctest::Approx(1.9));
  CHECK(queue_update({0.0, std::numeric_limits<double>::infinity(), 10}, 1e9).q == 0.0);
  CHECK_THROWS_AS(queue_update({0.0, 1.0, 1}, -1.0), ParameterError);
}

TEST_CASE("utility term examples") {
  CHECK(utility_term(true, 2, 10, 10, 1.0) == 4.0);
  CHECK(utility_term(false, 2, 10, 10, 1.0) == 0.0);
  CHECK(utility_term(true, 1, 0, 10, 2.0) == 10.0);
  CHECK_THROWS_AS(utility_term(true, 1, 11, 10, 1.0), RangeError);
}

TEST_CASE("fill power limits") {
  const auto ch = narrow_band();
  const auto link = link_with_gain(1e-9);
  const double floor = ch.bandwidth_hz * ch.noise_psd_w_per_hz / link.gain_h2;
  const std::int64_t s = 1000;
  const double bits = sparsify::payload_bits(s, s, 32);
  // exponent exactly 1
  CHECK(fill_power(link, ch, bits / ch.bandwidth_hz, s, 32) == doctest::Approx(floor).epsilon(1e-12));
  CHECK(fill_power(link, ch, 1e300, s, 32) == doctest::Approx(0.0));
  CHECK(fill_power(link_with_gain(1e300), ch, 1.0, s, 32) < 1e-200);
  CHECK(power_cap(link, ch, 1e-9, s, 32) == ch.p_max_w);
  CHECK_THROWS_AS(fill_power(link, ch, 0.0, s, 32), ParameterError);
}

TEST_CASE("optimal power closed-form cases") {
  const auto ch = narrow_band();
  const auto link = link_with_gain(1e-9);
  const double floor = ch.bandwidth_hz * ch.noise_psd_w_per_hz / link.gain_h2;
  const MadsParams mp{0.5, 32, 1000};
  ContactContext ctx{true, 3, 2.0, 1.0, link};
  const double cap = power_cap(link, ch, ctx.tau, mp.s, mp.u_bits);
  REQUIRE(cap > 2.0 * floor);

  CHECK(optimal_power(mp, ctx, 0.0, ch) == cap);
  CHECK(optimal_power(mp, ctx, 1e-13, ch) == cap);

  // first term equal to twice the noise floor
  const double b = sparsify::element_bits(mp.s, mp.u_bits);
  const double q = 3.0 * mp.V * 3.0 * ch.bandwidth_hz * 2.0 / (2.0 * floor * 1000.0 * b * std::log(2.0));
  CHECK(optimal_power(mp, ctx, q, ch) == doctest::Approx(floor).epsilon(1e-9));

  CHECK(optimal_power(mp, ctx, 1e300, ch) == 0.0);
  ctx.zeta = false;
  CHECK(optimal_power(mp, ctx, 1.0, ch) == 0.0);
}

TEST_CASE("sparsification degree examples") {
  const std::int64_t s = 1 << 20;
  CHECK(sparsification_degree(1.0, 5200.0, 32, s) == 100);
  CHECK(sparsification_degree(0.0, 5200.0, 32, s) == 0);
  CHECK(sparsification_degree(1e12, 1e12, 32, s) == s);
  CHECK_THROWS_AS(sparsification_degree(-1.0, 1.0, 32, s), ParameterError);
}

TEST_CASE("mads decision basics") {
  const auto ch = narrow_band();
  const MadsParams mp{1.0, 32, 1000};
  ContactContext ctx{false, 1, 1.0, 5.0, link_with_gain(1e-9)};
  auto d = mads_decide(ctx, 1.0, mp, ch);
  CHECK(d.k == 0);
  CHECK(d.p == 0.0);
  CHECK(d.energy_E == 0.0);

  ctx.zeta = true;
  ctx.tau = 10.0;
  d = mads_decide(ctx, 0.0, mp, ch);
  CHECK(d.k == mp.s);
  CHECK(d.p <= power_cap(ctx.link, ch, ctx.tau, mp.s, mp.u_bits) * (1.0 + 1e-12));
  CHECK(d.energy_E == doctest::Approx(d.p * sparsify::payload_bits(d.k, mp.s, 32) / d.rate_A));
  CHECK(d.utility_U == doctest::Approx(utility_term(true, 1, d.k, mp.s, 1.0)));
}

TEST_CASE("decisions always fit in the contact") {
  auto rng = SeedTree(17).engine();
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto logu = [&](double lo, double hi) { return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * u01(rng)); };
  for (int i = 0; i < 10000; ++i) {
    auto ch = channel::default_params();
    ch.bandwidth_hz = logu(10.0, 1e6);
    const MadsParams mp{logu(1e-6, 1e3), 32, static_cast<std::int64_t>(logu(1.0, 1e5))};
    const ContactContext ctx{true, 1 + static_cast<long>(u01(rng) * 50), logu(1e-6, 1e3), logu(1e-3, 20.0),
                             link_with_gain(logu(1e-13, 1e-5))};
    const double q = u01(rng) < 0.2 ? 0.0 : logu(1e-6, 1e3);
    const auto d = mads_decide(ctx, q, mp, ch);
    CHECK(d.k >= 0);
    CHECK(d.k <= mp.s);
    CHECK(d.p >= 0.0);
    CHECK(d.p <= ch.p_max_w);
    CHECK(sparsify::payload_bits(d.k, mp.s, mp.u_bits) <= ctx.tau * d.rate_A);
  }
}

TEST_CASE("closed form ties a grid search") {
  auto rng = SeedTree(23).engine();
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    auto ch = channel::default_params();
    ch.bandwidth_hz = std::pow(10.0, 2.0 + 4.0 * u01(rng));
    const MadsParams mp{std::pow(10.0, -3.0 + 3.0 * u01(rng)), 32, 64 + static_cast<std::int64_t>(u01(rng) * 4000)};
    const ContactContext ctx{true, 1 + static_cast<long>(u01(rng) * 20), 0.1 + 10.0 * u01(rng),
                             0.5 + 10.0 * u01(rng), link_with_gain(std::pow(10.0, -12.0 + 4.0 * u01(rng)))};
    const double q = std::pow(10.0, -4.0 + 6.0 * u01(rng));
    const double cap = power_cap(ctx.link, ch, ctx.tau, mp.s, mp.u_bits);
    const double b = sparsify::element_bits(mp.s, mp.u_bits);
    auto f = [&](double p) {
      return objective(p, mp.V, static_cast<double>(ctx.theta), ctx.tau, ctx.x_norm2, q, ch.bandwidth_hz,
                       ch.noise_psd_w_per_hz, ctx.link.gain_h2, static_cast<double>(mp.s), b);
    };
    double best = INFINITY;
    const int grid = 10000;
    for (int j = 0; j <= grid; ++j) best = std::min(best, f(cap * j / grid));
    const double p = optimal_power(mp, ctx, q, ch);
    CHECK(p >= 0.0);
    CHECK(p <= cap);
    CHECK(f(p) <= best + 1e-6 * std::max(1.0, std::abs(best)));
  }
}
