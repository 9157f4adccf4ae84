#include "mafl/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "mafl/error.hpp"
#include "mafl/kernels.hpp"

namespace mafl::protocol {

DeviceState make_device(std::size_t id, std::span<const double> w0) {
  DeviceState d;
  d.id = id;
  d.w.assign(w0.begin(), w0.end());
  d.g.assign(w0.size(), 0.0);
  d.e.assign(w0.size(), 0.0);
  return d;
}

void local_step(DeviceState& dev, std::span<const double> grad, double eta, bool contacting) {
  if (!(eta > 0.0)) throw ParameterError("task.eta must be > 0");
  kernels::axpy(eta, grad, dev.g);
  if (!contacting) kernels::axpy(-eta, grad, dev.w);
}

Vector prepare_upload(const DeviceState& dev) {
  Vector x(dev.e.size());
  kernels::add(dev.e, dev.g, x);
  return x;
}

sparsify::SparseUpdate commit_upload(DeviceState& dev, std::span<const double> x, std::int64_t k) {
  auto sp = sparsify::top_k(x, k);
  dev.e = sparsify::residual(x, sp);
  return sp;
}

void aggregate(ServerState& server, std::span<const sparsify::SparseUpdate> updates,
               std::size_t num_devices) {
  if (num_devices == 0) throw ParameterError("aggregation needs N >= 1");
  if (updates.empty()) return;
  Vector sum(server.w.size(), 0.0);
  for (const auto& u : updates) {
    if (u.dimension != server.w.size()) throw DimensionError("update dimension != model size");
    sparsify::scatter_add(u, 1.0, sum);
  }
  kernels::axpy(-1.0 / static_cast<double>(num_devices), sum, server.w);
  ++server.version;
}

void download(DeviceState& dev, const ServerState& server, long round) {
  dev.w = server.w;
  std::fill(dev.g.begin(), dev.g.end(), 0.0);
  dev.kappa = round;
}

long staleness(const DeviceState& dev, long round) {
  if (round < dev.kappa) throw RangeError("staleness queried before the last download");
  return round - dev.kappa;
}

Engine batch_engine(const SeedTree& seeds, std::size_t device, long round) {
  return seeds.child("batch").child(device).child(static_cast<std::uint64_t>(round)).engine();
}

Engine link_engine(const SeedTree& seeds, std::size_t device, long round) {
  return seeds.child("link").child(device).child(static_cast<std::uint64_t>(round)).engine();
}

World::World(WorldSetup setup) : setup_(std::move(setup)) {
  const std::size_t n = setup_.shards.size();
  if (n == 0) throw ParameterError("run.devices must be >= 1");
  if (setup_.contacts.size() != n || setup_.distance_m.size() != n)
    throw DimensionError("mobility schedule must cover every device");
  if (setup_.w0.size() != workloads::parameter_count(setup_.model))
    throw DimensionError("initial model has the wrong length");
  if (!(setup_.eta > 0.0)) throw ParameterError("task.eta must be > 0");
  if (setup_.batch_size == 0) throw ParameterError("task.batch_size must be >= 1");
  server_.w = setup_.w0;
  for (std::size_t i = 0; i < n; ++i) devices_.push_back(make_device(i, setup_.w0));
  cumulative_energy_.assign(n, 0.0);
  device_version_.assign(n, 0);
  pending_.assign(n, false);
  unsent_.assign(n, false);
  pending_updates_.resize(n);
}

long World::rounds_available() const {
  long r = std::numeric_limits<long>::max();
  for (const auto& c : setup_.contacts) r = std::min(r, static_cast<long>(c.size()));
  return r;
}

Vector World::gradient(std::size_t device, long round) const {
  auto rng = batch_engine(setup_.seeds, device, round);
  const auto batch = workloads::sample_batch(setup_.shards[device], setup_.batch_size, rng);
  auto g = workloads::grad(setup_.model, devices_[device].w, batch);
  if (observer_) observer_->on_gradient(device, round, g);
  return g;
}

void World::aggregate_updates(std::span<const sparsify::SparseUpdate> updates, long round) {
  aggregate(server_, updates, devices_.size());
  if (observer_ && !updates.empty()) observer_->on_aggregate(round, updates);
}

controller::ContactContext World::contact_context(std::size_t device, long round,
                                                  const mobility::RoundContact& rc,
                                                  double x_norm2) const {
  controller::ContactContext ctx;
  ctx.zeta = true;
  ctx.tau = rc.tau;
  ctx.theta = staleness(devices_[device], round);
  ctx.x_norm2 = x_norm2;
  auto rng = link_engine(setup_.seeds, device, round);
  ctx.link = channel::sample_link(setup_.channel, setup_.distance_m[device][round - 1], rng);
  return ctx;
}

bool World::feasible(const controller::ControlDecision& d, double tau) const {
  if (d.k == 0) return true;
  const double bits = sparsify::payload_bits(d.k, static_cast<std::int64_t>(setup_.w0.size()),
                                             setup_.u_bits);
  return bits <= tau * d.rate_A * (1.0 + 1e-12);
}

RoundRecord World::run_round(Policy& policy) {
  const long r = server_.round + 1;
  if (r > rounds_available()) throw RangeError("no mobility schedule for round " + std::to_string(r));
  RoundRecord rec;
  rec.round = r;
  rec.devices.resize(devices_.size());
  if (policy.synchronous())
    run_sync(policy, rec);
  else
    run_async(policy, rec);
  server_.round = r;

  std::vector<double> energy(devices_.size());
  for (std::size_t i = 0; i < devices_.size(); ++i) {
    energy[i] = rec.devices[i].energy;
    cumulative_energy_[i] += energy[i];
    if (rec.devices[i].zeta) ++rec.contacts;
  }
  policy.end_round(energy);
  for (std::size_t i = 0; i < devices_.size(); ++i) rec.devices[i].queue = policy.queue(i);
  rec.cumulative_energy = cumulative_energy_;
  if (setup_.evaluate) {
    rec.global_loss = global_loss();
    rec.test_metric = test_metric();
  } else {
    rec.global_loss = rec.test_metric = std::nan("");
  }
  return rec;
}

void World::run_async(Policy& policy, RoundRecord& rec) {
  const long r = rec.round;
  std::vector<sparsify::SparseUpdate> updates;
  std::vector<std::size_t> downloaders;
  for (std::size_t n = 0; n < devices_.size(); ++n) {
    auto& dev = devices_[n];
    auto& out = rec.devices[n];
    const auto rc = setup_.contacts[n][r - 1];
    const Vector grad = gradient(n, r);
    out.zeta = rc.contact;
    out.tau = rc.tau;
    out.theta = staleness(dev, r);
    if (!rc.contact) {
      local_step(dev, grad, setup_.eta, false);
      continue;
    }
    Vector g_next = dev.g;
    kernels::axpy(setup_.eta, grad, g_next);
    Vector x(dev.e.size());
    kernels::add(dev.e, g_next, x);
    out.x_norm2 = kernels::norm2(x);

    const auto ctx = contact_context(n, r, rc, out.x_norm2);
    const auto d = policy.decide({n, r, ctx});
    out.k = d.k;
    out.p = d.p;
    if (!feasible(d, rc.tau)) {
      out.failed = true;
      out.k = 0;
      local_step(dev, grad, setup_.eta, false);
      continue;
    }
    out.energy = d.energy_E;
    local_step(dev, grad, setup_.eta, true);
    updates.push_back(commit_upload(dev, prepare_upload(dev), d.k));
    if (observer_) observer_->on_upload(n, r, updates.back());
    out.uploaded = d.k > 0;
    downloaders.push_back(n);
  }
  aggregate_updates(updates, r);
  rec.aggregated = !updates.empty();
  for (auto n : downloaders) download(devices_[n], server_, r);
}

void World::run_sync(Policy& policy, RoundRecord& rec) {
  const long r = rec.round;
  std::vector<std::size_t> contacting;
  for (std::size_t n = 0; n < devices_.size(); ++n) {
    auto& dev = devices_[n];
    auto& out = rec.devices[n];
    const auto rc = setup_.contacts[n][r - 1];
    out.zeta = rc.contact;
    out.tau = rc.tau;
    out.theta = staleness(dev, r);
    if (!rc.contact) continue;
    contacting.push_back(n);
    if (pending_[n]) continue;
    // a failed upload is retried before the device takes a newer model
    if (!unsent_[n]) {
      if (device_version_[n] < server_.version) {
        download(dev, server_, r);
        device_version_[n] = server_.version;
      }
      const Vector grad = gradient(n, r);
      local_step(dev, grad, setup_.eta, true);
    }
    Vector x = prepare_upload(dev);
    out.x_norm2 = kernels::norm2(x);
    const auto ctx = contact_context(n, r, rc, out.x_norm2);
    const auto d = policy.decide({n, r, ctx});
    out.k = d.k;
    out.p = d.p;
    if (!feasible(d, rc.tau) || d.k == 0) {
      out.failed = d.k > 0;
      out.k = 0;
      unsent_[n] = true;
      continue;
    }
    unsent_[n] = false;
    out.energy = d.energy_E;
    pending_updates_[n] = commit_upload(dev, x, d.k);
    if (observer_) observer_->on_upload(n, r, pending_updates_[n]);
    std::fill(dev.g.begin(), dev.g.end(), 0.0);
    pending_[n] = true;
    out.uploaded = true;
  }
  for (bool p : pending_)
    if (!p) return;
  aggregate_updates(pending_updates_, r);
  rec.aggregated = true;
  std::fill(pending_.begin(), pending_.end(), false);
  for (auto n : contacting) {
    download(devices_[n], server_, r);
    device_version_[n] = server_.version;
  }
}

double World::global_loss() const {
  return workloads::loss(setup_.model, server_.w, setup_.train);
}

double World::test_metric() const {
  if (setup_.model.kind == workloads::ModelKind::kQuadratic)
    return workloads::loss(setup_.model, server_.w, setup_.test);
  return workloads::accuracy(setup_.model, server_.w, setup_.test);
}

}  // namespace mafl::protocol
