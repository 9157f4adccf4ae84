#pragma once

// MADS: per-device virtual energy queues and the closed-form
// sparsification / power decision for one contact.

#include <cstdint>

#include "mafl/channel.hpp"

namespace mafl::controller {

struct EnergyQueue {
  double q = 0.0;
  double budget_j = 0.0;  // E^con
  long rounds = 1;        // R

  double per_round_allowance() const { return budget_j / static_cast<double>(rounds); }
};

// max(q + E - budget/R, 0). An infinite budget keeps q at 0.
EnergyQueue queue_update(EnergyQueue queue, double energy_j);

// zeta * theta * (5 - 3k/s) * ||x||^2
double utility_term(bool zeta, long theta, std::int64_t k, std::int64_t s, double x_norm2);

struct MadsParams {
  double V = 1.0;
  int u_bits = 32;
  std::int64_t s = 1;
};

void validate(const MadsParams& p);

struct ContactContext {
  bool zeta = false;
  long theta = 1;
  double x_norm2 = 0.0;
  double tau = 0.0;  // usable contact time this round, seconds
  channel::LinkState link;
};

struct ControlDecision {
  std::int64_t k = 0;
  double p = 0.0;
  double rate_A = 0.0;
  double energy_E = 0.0;
  double utility_U = 0.0;
};

// Below this the queue is treated as empty and energy as unpriced.
inline constexpr double kQueueEpsilon = 1e-12;

// Power at which all s elements fit in tau seconds.
double fill_power(const channel::LinkState& link, const channel::ChannelParams& ch, double tau,
                  std::int64_t s, int u_bits);

// min(p_max, fill_power); p_max when the fill power overflows.
double power_cap(const channel::LinkState& link, const channel::ChannelParams& ch, double tau,
                 std::int64_t s, int u_bits);

// Stationary point of the per-contact objective clamped to [0, power_cap].
double optimal_power(const MadsParams& mp, const ContactContext& ctx, double q,
                     const channel::ChannelParams& ch);

// floor(tau * A / (u + ceil(log2 s))) clamped to [0, s].
std::int64_t sparsification_degree(double tau, double rate_bps, int u_bits, std::int64_t s);

// Per-contact drift-plus-penalty objective with k at its continuous tight value.
double p3_objective(double p, const MadsParams& mp, const ContactContext& ctx, double q,
                    const channel::ChannelParams& ch);

ControlDecision mads_decide(const ContactContext& ctx, double q, const MadsParams& mp,
                            const channel::ChannelParams& ch);

}  // namespace mafl::controller
