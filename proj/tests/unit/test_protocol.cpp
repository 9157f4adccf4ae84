#include <doctest.h>

#include <cmath>
#include <cstring>
#include <map>
#include <random>

#include "mafl/error.hpp"
#include "mafl/protocol.hpp"
#include "mafl/theory.hpp"

using namespace mafl;
using namespace mafl::protocol;

namespace {

// Uploads a fixed fraction of the model at an effectively unlimited rate.
class FixedPolicy : public Policy {
 public:
  FixedPolicy(std::int64_t s, double fraction, bool sync = false) : s_(s), fraction_(fraction), sync_(sync) {}
  controller::ControlDecision decide(const DecisionContext& ctx) override {
    controller::ControlDecision d;
    if (!ctx.contact.zeta) return d;
    d.k = static_cast<std::int64_t>(std::floor(fraction_ * static_cast<double>(s_)));
    d.p = 0.1;
    d.rate_A = 1e15;
    d.energy_E = d.k > 0 ? 0.5 : 0.0;
    return d;
  }
  bool synchronous() const override { return sync_; }

 private:
  std::int64_t s_;
  double fraction_;
  bool sync_;
};

workloads::Dataset shard(std::size_t dim, std::size_t rows, std::uint64_t seed) {
  auto m = SeedTree(seed).child("m").engine();
  auto s = SeedTree(seed).child("s").engine();
  return workloads::make_gaussian_clusters({2, dim, rows, 1.0, 1.0}, m, s);
}

WorldSetup make_setup(std::size_t devices, long rounds, std::size_t dim,
                      const std::vector<std::vector<bool>>& contact) {
  WorldSetup ws;
  ws.model = {workloads::ModelKind::kQuadratic, dim, 0, 0};
  for (std::size_t n = 0; n < devices; ++n) ws.shards.push_back(shard(dim, 20, 100 + n));
  ws.train = shard(dim, 40, 99);
  ws.test = shard(dim, 40, 98);
  ws.w0.assign(dim, 0.5);
  ws.eta = 0.1;
  ws.batch_size = 4;
  ws.channel = channel::default_params();
  ws.contacts.resize(devices);
  ws.distance_m.assign(devices, std::vector<double>(static_cast<std::size_t>(rounds), 50.0));
  for (std::size_t n = 0; n < devices; ++n)
    for (long r = 0; r < rounds; ++r) {
      const bool c = contact[n][static_cast<std::size_t>(r)];
      ws.contacts[n].push_back({c, c ? 5.0 : 0.0});
    }
  ws.seeds = SeedTree(5);
  return ws;
}

std::vector<std::vector<bool>> random_contacts(std::size_t devices, long rounds, double p, std::uint64_t seed) {
  auto rng = SeedTree(seed).engine();
  std::bernoulli_distribution b(p);
  std::vector<std::vector<bool>> out(devices, std::vector<bool>(static_cast<std::size_t>(rounds)));
  for (auto& row : out)
    for (std::size_t r = 0; r < row.size(); ++r) row[r] = b(rng);
  return out;
}

// Tracks eta * sum of gradients and the dense sum of uploads per device.
class Ledger : public Observer {
 public:
  Ledger(std::size_t devices, std::size_t dim, double eta)
      : eta_(eta), grads_(devices, Vector(dim, 0.0)), uploads_(devices, Vector(dim, 0.0)) {}
  void on_gradient(std::size_t n, long, std::span<const double> g) override {
    for (std::size_t i = 0; i < g.size(); ++i) grads_[n][i] += eta_ * g[i];
  }
  void on_upload(std::size_t n, long, const sparsify::SparseUpdate& u) override {
    for (std::size_t j = 0; j < u.indices.size(); ++j) uploads_[n][u.indices[j]] += u.values[j];
  }
  double worst(const std::vector<DeviceState>& devs) const {
    double worst = 0.0;
    for (std::size_t n = 0; n < devs.size(); ++n)
      for (std::size_t i = 0; i < devs[n].w.size(); ++i) {
        const double lhs = uploads_[n][i] + devs[n].e[i] + devs[n].g[i];
        worst = std::max(worst, std::abs(lhs - grads_[n][i]) / std::max(1.0, std::abs(grads_[n][i])));
      }
    return worst;
  }

 private:
  double eta_;
  std::vector<Vector> grads_, uploads_;
};

}  // namespace

TEST_CASE("local step") {
  auto dev = make_device(0, Vector{1.0, 1.0});
  local_step(dev, Vector{1.0, 0.0}, 0.1, false);
  CHECK(dev.g == Vector{0.1, 0.0});
  CHECK(dev.w[0] == doctest::Approx(0.9));
  CHECK(dev.w[1] == 1.0);
  local_step(dev, Vector{0.0, 2.0}, 0.1, true);
  CHECK(dev.w[1] == 1.0);
  CHECK(dev.g[0] == doctest::Approx(0.1));
  CHECK(dev.g[1] == doctest::Approx(0.2));
  CHECK_THROWS_AS(local_step(dev, Vector{0.0, 0.0}, 0.0, true), ParameterError);
}

TEST_CASE("prepare and commit upload") {
  auto dev = make_device(0, Vector{0.0, 0.0});
  dev.e = {1.0, 0.0};
  dev.g = {0.0, 2.0};
  const auto x = prepare_upload(dev);
  CHECK(x == Vector{1.0, 2.0});
  CHECK(prepare_upload(make_device(1, Vector{3.0, 4.0})) == Vector{0.0, 0.0});
  CHECK(x[0] * x[0] + x[1] * x[1] <= 2.0 * (1.0 + 4.0));

  auto full = commit_upload(dev, x, 2);
  CHECK(sparsify::densify(full) == x);
  CHECK(dev.e == Vector{0.0, 0.0});
  auto none = commit_upload(dev, x, 0);
  CHECK(none.indices.empty());
  CHECK(dev.e == x);
}

TEST_CASE("aggregation") {
  ServerState s{{1.0, 2.0}, 0, 0};
  aggregate(s, std::vector<sparsify::SparseUpdate>{}, 3);
  CHECK(s.w == Vector{1.0, 2.0});
  CHECK(s.version == 0);

  const auto u = sparsify::top_k(Vector{0.5, -1.0}, 2);
  ServerState one = s;
  aggregate(one, std::vector{u}, 1);
  CHECK(one.w == Vector{0.5, 3.0});
  ServerState two = s;
  aggregate(two, std::vector{u}, 2);
  CHECK(two.w == Vector{0.75, 2.5});
  CHECK(two.version == 1);
}

TEST_CASE("download and staleness") {
  ServerState s{{0.1, 0.2, 0.3}, 4, 2};
  auto dev = make_device(0, Vector{9.0, 9.0, 9.0});
  dev.g = {1.0, 1.0, 1.0};
  CHECK(staleness(dev, 7) == 7);
  download(dev, s, 4);
  CHECK(std::memcmp(dev.w.data(), s.w.data(), 3 * sizeof(double)) == 0);
  CHECK(dev.g == Vector{0.0, 0.0, 0.0});
  CHECK(staleness(dev, 5) == 1);
  CHECK(staleness(dev, 6) == 2);
  CHECK_THROWS_AS(staleness(dev, 3), RangeError);
}

TEST_CASE("no contacts leave the server untouched") {
  const long R = 6;
  World world(make_setup(3, R, 4, std::vector<std::vector<bool>>(3, std::vector<bool>(R, false))));
  FixedPolicy pol(4, 1.0);
  for (long r = 1; r <= R; ++r) {
    const auto rec = world.run_round(pol);
    CHECK_FALSE(rec.aggregated);
    for (const auto& d : rec.devices) CHECK(d.theta == r);
  }
  CHECK(world.server().w == Vector(4, 0.5));
  CHECK(world.server().version == 0);
  CHECK_THROWS_AS(world.run_round(pol), RangeError);
}

TEST_CASE("alternating contacts give staleness two") {
  const long R = 12;
  std::vector<std::vector<bool>> c(1, std::vector<bool>(R));
  for (long r = 0; r < R; ++r) c[0][static_cast<std::size_t>(r)] = r % 2 == 0;
  World world(make_setup(1, R, 3, c));
  FixedPolicy pol(3, 1.0);
  int uploads = 0;
  for (long r = 1; r <= R; ++r) {
    const auto rec = world.run_round(pol);
    if (rec.devices[0].uploaded) {
      if (++uploads >= 2) CHECK(rec.devices[0].theta == 2);
    }
  }
  CHECK(uploads == 6);
}

TEST_CASE("per-device ledger is conserved") {
  const long R = 50;
  const std::size_t N = 4, dim = 6;
  for (double frac : {0.0, 0.34, 1.0}) {
    for (bool sync : {false, true}) {
      World world(make_setup(N, R, dim, random_contacts(N, R, 0.4, 21)));
      Ledger ledger(N, dim, 0.1);
      world.set_observer(&ledger);
      FixedPolicy pol(static_cast<std::int64_t>(dim), frac, sync);
      for (long r = 1; r <= R; ++r) {
        world.run_round(pol);
        CHECK(ledger.worst(world.devices()) <= 1e-9);
      }
    }
  }
}

TEST_CASE("virtual model equals the server model under full dense connectivity") {
  const long R = 30;
  const std::size_t N = 3, dim = 5;
  World world(make_setup(N, R, dim, std::vector<std::vector<bool>>(N, std::vector<bool>(R, true))));
  theory::VirtualModelTracker tracker(world.setup().w0, N);
  struct Tap : Observer {
    theory::VirtualModelTracker* t;
    void on_gradient(std::size_t n, long, std::span<const double> g) override { t->track(n, g, 0.1); }
  } tap;
  tap.t = &tracker;
  world.set_observer(&tap);
  FixedPolicy pol(dim, 1.0);
  for (long r = 1; r <= R; ++r) {
    world.run_round(pol);
    for (std::size_t i = 0; i < dim; ++i) CHECK(std::abs(tracker.model()[i] - world.server().w[i]) <= 1e-9);
  }
}

TEST_CASE("synchronous barrier aggregates only when all devices hold an upload") {
  const long R = 40;
  const std::size_t N = 3;
  const auto contacts = random_contacts(N, R, 0.3, 22);
  World world(make_setup(N, R, 4, contacts));
  FixedPolicy pol(4, 0.5, true);
  std::vector<bool> pending(N, false);
  for (long r = 1; r <= R; ++r) {
    const auto rec = world.run_round(pol);
    for (std::size_t n = 0; n < N; ++n)
      if (rec.devices[n].uploaded) {
        CHECK_FALSE(pending[n]);
        pending[n] = true;
      }
    const bool all = std::all_of(pending.begin(), pending.end(), [](bool b) { return b; });
    CHECK(rec.aggregated == all);
    if (all) pending.assign(N, false);
  }
}

TEST_CASE("world rejects inconsistent setups") {
  auto ws = make_setup(2, 3, 4, std::vector<std::vector<bool>>(2, std::vector<bool>(3, true)));
  auto bad = ws;
  bad.contacts.pop_back();
  CHECK_THROWS_AS(World{bad}, DimensionError);
  bad = ws;
  bad.w0.push_back(0.0);
  CHECK_THROWS_AS(World{bad}, DimensionError);
  bad = ws;
  bad.eta = 0.0;
  CHECK_THROWS_AS(World{bad}, ParameterError);
}

TEST_CASE("failed synchronous uploads are retried, not dropped") {
  // every other decision does not fit in the contact
  class Flaky : public Policy {
   public:
    controller::ControlDecision decide(const DecisionContext& ctx) override {
      controller::ControlDecision d;
      if (!ctx.contact.zeta) return d;
      d.k = 2;
      d.p = 0.1;
      d.rate_A = (calls_++ % 2 == 0) ? 1e-9 : 1e15;
      return d;
    }
    bool synchronous() const override { return true; }

   private:
    long calls_ = 0;
  } pol;
  const long R = 60;
  const std::size_t N = 3, dim = 4;
  World world(make_setup(N, R, dim, random_contacts(N, R, 0.5, 23)));
  Ledger ledger(N, dim, 0.1);
  world.set_observer(&ledger);
  std::size_t failed = 0, aggregated = 0;
  for (long r = 1; r <= R; ++r) {
    const auto rec = world.run_round(pol);
    for (const auto& d : rec.devices) failed += d.failed ? 1 : 0;
    aggregated += rec.aggregated ? 1 : 0;
    CHECK(ledger.worst(world.devices()) <= 1e-9);
  }
  CHECK(failed > 0);
  CHECK(aggregated > 0);
}
