#include "mafl/harness/policies.hpp"

#include <cmath>
#include <limits>

#include "mafl/error.hpp"
#include "mafl/sparsify.hpp"

namespace mafl::harness {

MadsPolicy::MadsPolicy(controller::MadsParams params, channel::ChannelParams ch,
                       const std::vector<double>& budgets, long rounds)
    : params_(params), channel_(ch) {
  controller::validate(params_);
  for (double b : budgets) queues_.push_back({0.0, b, std::max(1L, rounds)});
}

controller::ControlDecision MadsPolicy::decide(const protocol::DecisionContext& ctx) {
  return controller::mads_decide(ctx.contact, queues_.at(ctx.device).q, params_, channel_);
}

void MadsPolicy::end_round(std::span<const double> energy) {
  for (std::size_t n = 0; n < queues_.size(); ++n)
    queues_[n] = controller::queue_update(queues_[n], energy[n]);
}

SparsePolicy::SparsePolicy(controller::MadsParams params, channel::ChannelParams ch,
                           std::vector<double> allowance, bool synchronous)
    : params_(params), channel_(ch), allowance_(std::move(allowance)), synchronous_(synchronous) {}

controller::ControlDecision SparsePolicy::decide(const protocol::DecisionContext& ctx) {
  controller::ControlDecision d;
  const auto& c = ctx.contact;
  if (!c.zeta || !(c.tau > 0.0)) return d;
  d.p = channel_.p_max_w;
  d.rate_A = channel::transmission_rate(d.p, c.link, channel_);
  d.k = controller::sparsification_degree(c.tau, d.rate_A, params_.u_bits, params_.s);
  const double per_element = d.p * sparsify::element_bits(params_.s, params_.u_bits) / d.rate_A;
  const double allowed = allowance_.at(ctx.device) / per_element;
  if (allowed < static_cast<double>(d.k)) d.k = static_cast<std::int64_t>(std::floor(allowed));
  d.energy_E = d.k > 0 ? channel::upload_energy(d.p, d.k, params_.s, params_.u_bits, d.rate_A) : 0.0;
  d.utility_U = controller::utility_term(true, c.theta, d.k, params_.s, c.x_norm2);
  return d;
}

DensePolicy::DensePolicy(controller::MadsParams params, channel::ChannelParams ch)
    : params_(params), channel_(ch) {}

controller::ControlDecision DensePolicy::decide(const protocol::DecisionContext& ctx) {
  controller::ControlDecision d;
  const auto& c = ctx.contact;
  if (!c.zeta) return d;
  const double p = channel_.p_max_w;
  const double A = channel::transmission_rate(p, c.link, channel_);
  d.p = p;
  d.rate_A = A;
  d.k = params_.s;
  d.energy_E = channel::upload_energy(p, params_.s, params_.s, params_.u_bits, A);
  d.utility_U = controller::utility_term(true, c.theta, d.k, params_.s, c.x_norm2);
  return d;
}

std::unique_ptr<protocol::Policy> make_policy(const PolicyInputs& in) {
  if (in.name == "mads")
    return std::make_unique<MadsPolicy>(in.mads, in.channel, in.budgets, in.rounds);
  if (in.name == "optimal") {
    std::vector<double> unlimited(in.budgets.size(), std::numeric_limits<double>::infinity());
    return std::make_unique<MadsPolicy>(in.mads, in.channel, unlimited, in.rounds);
  }
  if (in.name == "afl_spar") return std::make_unique<SparsePolicy>(in.mads, in.channel, in.allowance, false);
  if (in.name == "sfl_spar") return std::make_unique<SparsePolicy>(in.mads, in.channel, in.allowance, true);
  if (in.name == "afl") return std::make_unique<DensePolicy>(in.mads, in.channel);
  throw ConfigError("controller.policy: unknown policy '" + in.name + "'");
}

}  // namespace mafl::harness
