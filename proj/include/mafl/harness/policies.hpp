#pragma once

// MADS and the baseline upload policies.

#include <memory>
#include <string>
#include <vector>

#include "mafl/channel.hpp"
#include "mafl/controller.hpp"
#include "mafl/protocol.hpp"

namespace mafl::harness {

struct PolicyInputs {
  std::string name = "mads";
  controller::MadsParams mads;
  channel::ChannelParams channel;
  long rounds = 1;
  std::vector<double> budgets;    // E^con per device
  std::vector<double> allowance;  // static per-contact energy allowance per device
};

// mads, optimal, afl, afl_spar or sfl_spar. Throws ConfigError otherwise.
std::unique_ptr<protocol::Policy> make_policy(const PolicyInputs& in);

// Drift-plus-penalty controller; infinite budgets keep every queue at zero.
class MadsPolicy : public protocol::Policy {
 public:
  MadsPolicy(controller::MadsParams params, channel::ChannelParams ch,
             const std::vector<double>& budgets, long rounds);
  controller::ControlDecision decide(const protocol::DecisionContext& ctx) override;
  void end_round(std::span<const double> energy) override;
  double queue(std::size_t device) const override { return queues_.at(device).q; }

 private:
  controller::MadsParams params_;
  channel::ChannelParams channel_;
  std::vector<controller::EnergyQueue> queues_;
};

// p = p_max and k at the contact-time limit, further capped so one upload
// never spends more than the device's per-contact allowance. `synchronous`
// selects the barrier variant.
class SparsePolicy : public protocol::Policy {
 public:
  SparsePolicy(controller::MadsParams params, channel::ChannelParams ch,
               std::vector<double> allowance, bool synchronous);
  controller::ControlDecision decide(const protocol::DecisionContext& ctx) override;
  bool synchronous() const override { return synchronous_; }

 private:
  controller::MadsParams params_;
  channel::ChannelParams channel_;
  std::vector<double> allowance_;
  bool synchronous_;
};

// Full model at p_max; uploads that do not fit in the contact are left to fail.
class DensePolicy : public protocol::Policy {
 public:
  DensePolicy(controller::MadsParams params, channel::ChannelParams ch);
  controller::ControlDecision decide(const protocol::DecisionContext& ctx) override;

 private:
  controller::MadsParams params_;
  channel::ChannelParams channel_;
};

}  // namespace mafl::harness
