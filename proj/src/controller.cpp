#include "mafl/controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mafl/error.hpp"
#include "mafl/sparsify.hpp"

namespace mafl::controller {

EnergyQueue queue_update(EnergyQueue queue, double energy_j) {
  if (!(energy_j >= 0.0)) throw ParameterError("round energy must be >= 0");
  if (std::isinf(queue.budget_j)) {
    queue.q = 0.0;
    return queue;
  }
  queue.q = std::max(queue.q + energy_j - queue.per_round_allowance(), 0.0);
  return queue;
}

double utility_term(bool zeta, long theta, std::int64_t k, std::int64_t s, double x_norm2) {
  if (k < 0 || k > s) throw RangeError("k must lie in [0, s]");
  if (x_norm2 < 0.0) throw ParameterError("x_norm2 must be >= 0");
  if (!zeta) return 0.0;
  const double frac = static_cast<double>(k) / static_cast<double>(s);
  return static_cast<double>(theta) * (5.0 - 3.0 * frac) * x_norm2;
}

void validate(const MadsParams& p) {
  if (!(p.V > 0.0)) throw ParameterError("controller.V must be > 0");
  if (p.u_bits <= 0) throw ParameterError("controller.u_bits must be > 0");
  if (p.s < 1) throw ParameterError("model size s must be >= 1");
}

namespace {

double noise_floor(const channel::LinkState& link, const channel::ChannelParams& ch) {
  return ch.bandwidth_hz * ch.noise_psd_w_per_hz / link.gain_h2;
}

}  // namespace

double fill_power(const channel::LinkState& link, const channel::ChannelParams& ch, double tau,
                  std::int64_t s, int u_bits) {
  if (!(tau > 0.0)) throw ParameterError("contact time must be > 0");
  const double exponent = sparsify::payload_bits(s, s, u_bits) / (tau * ch.bandwidth_hz);
  const double growth = std::expm1(exponent * std::numbers::ln2);
  return noise_floor(link, ch) * growth;
}

double power_cap(const channel::LinkState& link, const channel::ChannelParams& ch, double tau,
                 std::int64_t s, int u_bits) {
  const double fill = fill_power(link, ch, tau, s, u_bits);
  if (!std::isfinite(fill)) return ch.p_max_w;
  return std::min(ch.p_max_w, fill);
}

double optimal_power(const MadsParams& mp, const ContactContext& ctx, double q,
                     const channel::ChannelParams& ch) {
  if (!ctx.zeta) return 0.0;
  const double cap = power_cap(ctx.link, ch, ctx.tau, mp.s, mp.u_bits);
  if (q < kQueueEpsilon) return cap;
  const double b = sparsify::element_bits(mp.s, mp.u_bits);
  const double interior = 3.0 * mp.V * static_cast<double>(ctx.theta) * ch.bandwidth_hz * ctx.x_norm2 /
                              (q * static_cast<double>(mp.s) * b * std::numbers::ln2) -
                          noise_floor(ctx.link, ch);
  return std::clamp(interior, 0.0, cap);
}

std::int64_t sparsification_degree(double tau, double rate_bps, int u_bits, std::int64_t s) {
  if (tau < 0.0 || rate_bps < 0.0) throw ParameterError("tau and rate must be >= 0");
  const double bits = tau * rate_bps;
  const double per = sparsify::element_bits(s, u_bits);
  std::int64_t k = s;
  if (bits / per < static_cast<double>(s)) k = static_cast<std::int64_t>(std::floor(bits / per));
  // the quotient can round up across an integer
  while (k > 0 && static_cast<double>(k) * per > bits) --k;
  return std::clamp<std::int64_t>(k, 0, s);
}

double p3_objective(double p, const MadsParams& mp, const ContactContext& ctx, double q,
                    const channel::ChannelParams& ch) {
  const double zt = ctx.zeta ? static_cast<double>(ctx.theta) : 0.0;
  const double A = channel::transmission_rate(p, ctx.link, ch);
  const double b = sparsify::element_bits(mp.s, mp.u_bits);
  return -3.0 * mp.V * zt * ctx.tau * A * ctx.x_norm2 / (static_cast<double>(mp.s) * b) +
         5.0 * mp.V * zt * ctx.x_norm2 + ctx.tau * p * q;
}

ControlDecision mads_decide(const ContactContext& ctx, double q, const MadsParams& mp,
                            const channel::ChannelParams& ch) {
  ControlDecision d;
  if (!ctx.zeta || !(ctx.tau > 0.0)) return d;
  d.p = optimal_power(mp, ctx, q, ch);
  d.rate_A = channel::transmission_rate(d.p, ctx.link, ch);
  // At the fill power rounding can leave tau*A a hair below s elements.
  if (d.p > 0.0 && d.p < ch.p_max_w &&
      d.p == fill_power(ctx.link, ch, ctx.tau, mp.s, mp.u_bits)) {
    const double need = sparsify::payload_bits(mp.s, mp.s, mp.u_bits);
    for (int i = 0; i < 64 && ctx.tau * d.rate_A < need && d.p < ch.p_max_w; ++i) {
      d.p = std::nextafter(d.p, std::numeric_limits<double>::infinity());
      d.rate_A = channel::transmission_rate(d.p, ctx.link, ch);
    }
  }
  d.k = sparsification_degree(ctx.tau, d.rate_A, mp.u_bits, mp.s);
  d.energy_E = d.k > 0 ? channel::upload_energy(d.p, d.k, mp.s, mp.u_bits, d.rate_A) : 0.0;
  d.utility_U = utility_term(true, ctx.theta, d.k, mp.s, ctx.x_norm2);
  return d;
}

}  // namespace mafl::controller
