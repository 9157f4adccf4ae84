#pragma once

// Asynchronous FL with error-feedback sparsified uploads, plus the
// synchronous-barrier variant used by the SFL baseline.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mafl/channel.hpp"
#include "mafl/controller.hpp"
#include "mafl/mobility.hpp"
#include "mafl/rng.hpp"
#include "mafl/sparsify.hpp"
#include "mafl/workloads.hpp"

namespace mafl::protocol {

struct DeviceState {
  Vector w;        // local model
  Vector g;        // gradients accumulated since the last download
  Vector e;        // error-feedback memory
  long kappa = 0;  // round of the last download
  std::size_t id = 0;
};

struct ServerState {
  Vector w;
  long round = 0;
  long version = 0;  // number of aggregations that changed w
};

DeviceState make_device(std::size_t id, std::span<const double> w0);

// g += eta * grad; w -= eta * grad unless the device is in contact.
void local_step(DeviceState& dev, std::span<const double> grad, double eta, bool contacting);

// e + g, without touching the device.
Vector prepare_upload(const DeviceState& dev);

// Top-k of x; the residual becomes the new memory.
sparsify::SparseUpdate commit_upload(DeviceState& dev, std::span<const double> x, std::int64_t k);

// w -= (1/N) * sum of updates, accumulated in the given order.
void aggregate(ServerState& server, std::span<const sparsify::SparseUpdate> updates,
               std::size_t num_devices);

void download(DeviceState& dev, const ServerState& server, long round);

// r - kappa, read before this round's download.
long staleness(const DeviceState& dev, long round);

struct DecisionContext {
  std::size_t device = 0;
  long round = 0;
  controller::ContactContext contact;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual controller::ControlDecision decide(const DecisionContext& ctx) = 0;
  // Energy spent by every device this round, in device order.
  virtual void end_round(std::span<const double> energy) { (void)energy; }
  virtual double queue(std::size_t device) const {
    (void)device;
    return 0.0;
  }
  // Aggregate only once every device holds an unconsumed upload; devices
  // stay idle between contacts.
  virtual bool synchronous() const { return false; }
};

// Read-only taps for oracles and diagnostics.
class Observer {
 public:
  virtual ~Observer() = default;
  virtual void on_gradient(std::size_t device, long round, std::span<const double> grad) {
    (void)device, (void)round, (void)grad;
  }
  virtual void on_upload(std::size_t device, long round, const sparsify::SparseUpdate& update) {
    (void)device, (void)round, (void)update;
  }
  virtual void on_aggregate(long round, std::span<const sparsify::SparseUpdate> updates) {
    (void)round, (void)updates;
  }
};

struct DeviceRound {
  bool zeta = false;
  double tau = 0.0;
  long theta = 0;
  std::int64_t k = 0;
  double p = 0.0;
  double energy = 0.0;
  double x_norm2 = 0.0;
  double queue = 0.0;
  bool uploaded = false;  // an update reached the server
  bool failed = false;    // decided payload did not fit in tau * A
};

struct RoundRecord {
  long round = 0;
  std::size_t contacts = 0;
  std::vector<DeviceRound> devices;
  bool aggregated = false;
  double global_loss = 0.0;
  double test_metric = 0.0;
  std::vector<double> cumulative_energy;  // per device, Joules
};

struct WorldSetup {
  workloads::ModelSpec model;
  std::vector<workloads::Dataset> shards;  // one per device
  workloads::Dataset train;                // union of shards, for the global loss
  workloads::Dataset test;
  Vector w0;
  double eta = 0.1;
  std::size_t batch_size = 16;
  channel::ChannelParams channel;
  int u_bits = 32;
  // [device][round - 1]
  std::vector<std::vector<mobility::RoundContact>> contacts;
  std::vector<std::vector<double>> distance_m;
  SeedTree seeds{0};
  bool evaluate = true;  // compute losses each round
};

// Streams shared by every policy so paired runs see the same draws.
Engine batch_engine(const SeedTree& seeds, std::size_t device, long round);
Engine link_engine(const SeedTree& seeds, std::size_t device, long round);

class World {
 public:
  explicit World(WorldSetup setup);

  // Rounds are 1-based and must be run in order.
  RoundRecord run_round(Policy& policy);

  const ServerState& server() const { return server_; }
  const std::vector<DeviceState>& devices() const { return devices_; }
  const WorldSetup& setup() const { return setup_; }
  long rounds_available() const;
  void set_observer(Observer* observer) { observer_ = observer; }

  double global_loss() const;
  double test_metric() const;

 private:
  void run_async(Policy& policy, RoundRecord& rec);
  void run_sync(Policy& policy, RoundRecord& rec);
  Vector gradient(std::size_t device, long round) const;
  controller::ContactContext contact_context(std::size_t device, long round,
                                             const mobility::RoundContact& rc, double x_norm2) const;
  bool feasible(const controller::ControlDecision& d, double tau) const;

  void aggregate_updates(std::span<const sparsify::SparseUpdate> updates, long round);

  WorldSetup setup_;
  Observer* observer_ = nullptr;
  ServerState server_;
  std::vector<DeviceState> devices_;
  std::vector<double> cumulative_energy_;
  // synchronous mode
  std::vector<long> device_version_;
  std::vector<bool> pending_;
  std::vector<bool> unsent_;  // last upload attempt failed; g still holds it
  std::vector<sparsify::SparseUpdate> pending_updates_;
};

}  // namespace mafl::protocol
