#include "mafl/validation/suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "mafl/channel.hpp"
#include "mafl/controller.hpp"
#include "mafl/harness/experiment.hpp"
#include "mafl/harness/policies.hpp"
#include "mafl/kernels.hpp"
#include "mafl/mobility.hpp"
#include "mafl/protocol.hpp"
#include "mafl/sparsify.hpp"
#include "mafl/theory.hpp"
#include "mafl/workloads.hpp"

namespace mafl::validation {

namespace {

using Clock = std::chrono::steady_clock;

class Timer {
 public:
  Timer() : start_(Clock::now()) {}
  double seconds() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

 private:
  Clock::time_point start_;
};

CheckResult finish(CheckResult r, const Timer& t) {
  r.seconds = t.seconds();
  while (r.detail.size() >= 2 && r.detail.compare(r.detail.size() - 2, 2, "; ") == 0) r.detail.resize(r.detail.size() - 2);
  if (r.limit_s > 0.0 && r.seconds > r.limit_s) {
    r.pass = false;
    r.detail += "; runtime over limit";
  }
  return r;
}

std::string g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double log_uniform(Engine& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

Vector gaussian_vector(std::size_t n, Engine& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector x(n);
  for (auto& v : x) v = nd(rng);
  return x;
}

double rel_diff(std::span<const double> a, std::span<const double> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace

MomentEstimate staleness_second_moment(double lambda, double c, double delta, std::size_t samples,
                                       Engine& rng) {
  // After a contact round the next one is independent of the past, so the
  // gaps between successive contact rounds are i.i.d. Chunks keep memory flat.
  const mobility::ContactParams params{c, lambda};
  const double chunk = 20000.0 * (c + lambda) + 100.0 * delta;
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  while (n < samples) {
    const auto trace = mobility::sample_contact_trace(params, chunk, rng);
    const auto rounds = mobility::contact_rounds(trace, delta);
    for (std::size_t i = 1; i < rounds.size() && n < samples; ++i) {
      const double th = static_cast<double>(rounds[i] - rounds[i - 1]);
      sum += th * th;
      sum2 += th * th * th * th;
      ++n;
    }
  }
  MomentEstimate m;
  m.samples = n;
  m.mean = sum / static_cast<double>(n);
  const double var = std::max(0.0, sum2 / static_cast<double>(n) - m.mean * m.mean);
  m.std_error = std::sqrt(var * static_cast<double>(n) / static_cast<double>(n - 1) /
                          static_cast<double>(n));
  return m;
}

CheckResult sparsifier_contraction(std::uint64_t seed, std::size_t trials) {
  Timer timer;
  CheckResult r{1, "sparsifier contraction", true, "", 0.0, 5.0};
  auto rng = SeedTree(seed).child("contraction").engine();
  std::size_t violations = 0, split_errors = 0, total = 0;
  double worst_split = 0.0;
  for (std::size_t s : {8u, 64u, 1024u}) {
    std::uniform_int_distribution<std::int64_t> kd(0, static_cast<std::int64_t>(s));
    for (std::size_t t = 0; t < trials; ++t) {
      const Vector x = gaussian_vector(s, rng);
      const auto k = kd(rng);
      const auto sp = sparsify::top_k(x, k);
      const Vector res = sparsify::residual(x, sp);
      const double x2 = kernels::norm2(x);
      const double r2 = kernels::norm2(res);
      const double bound = (1.0 - static_cast<double>(k) / static_cast<double>(s)) * x2;
      if (r2 > bound) ++violations;
      const double split = std::abs(x2 - (sparsify::norm2(sp) + r2)) / x2;
      worst_split = std::max(worst_split, split);
      if (split > 1e-12) ++split_errors;
      ++total;
    }
  }
  r.pass = violations == 0 && split_errors == 0;
  r.detail = std::to_string(total) + " trials, " + std::to_string(violations) +
             " contraction violations, worst energy-split error " + g(worst_split);
  return finish(r, timer);
}

CheckResult power_allocation_oracle(std::uint64_t seed, std::size_t instances, std::size_t grid) {
  Timer timer;
  CheckResult r{2, "closed-form power vs grid search", true, "", 0.0, 30.0};
  auto rng = SeedTree(seed).child("power").engine();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::int64_t sizes[] = {64, 1000, 4096};
  const double bandwidths[] = {100.0, 1e4, 1e6};
  double worst_gap = -std::numeric_limits<double>::infinity();
  std::size_t gap_fail = 0, infeasible = 0, not_tight = 0;
  for (std::size_t i = 0; i < instances; ++i) {
    auto ch = channel::default_params();
    ch.bandwidth_hz = bandwidths[i % 3];
    controller::MadsParams mp{log_uniform(rng, 1e-6, 1e2), 32, sizes[(i / 3) % 3]};
    controller::ContactContext ctx;
    ctx.zeta = true;
    ctx.theta = 1 + static_cast<long>(unit(rng) * 20.0);
    ctx.x_norm2 = log_uniform(rng, 1e-4, 1e2);
    ctx.tau = 0.05 + 20.0 * unit(rng);
    ctx.link = channel::sample_link(ch, 10.0 + 300.0 * unit(rng), rng);

    const double cap = controller::power_cap(ctx.link, ch, ctx.tau, mp.s, mp.u_bits);
    const double floor_p = ch.bandwidth_hz * ch.noise_psd_w_per_hz / ctx.link.gain_h2;
    const double b = sparsify::element_bits(mp.s, mp.u_bits);
    double q = 0.0;
    if (unit(rng) > 0.1) {
      // aim the unclamped optimum somewhere around [0, cap]
      const double target = (-0.2 + 1.4 * unit(rng)) * cap + floor_p;
      q = target > 0.0 ? 3.0 * mp.V * static_cast<double>(ctx.theta) * ch.bandwidth_hz *
                             ctx.x_norm2 / (static_cast<double>(mp.s) * b * std::numbers::ln2 * target)
                       : log_uniform(rng, 1e-3, 1e3);
    }
    const auto d = controller::mads_decide(ctx, q, mp, ch);

    const double fill = controller::fill_power(ctx.link, ch, ctx.tau, mp.s, mp.u_bits);
    const bool power_ok = d.p >= 0.0 && d.p <= ch.p_max_w && d.p <= fill * (1.0 + 1e-12);
    const double bits = sparsify::payload_bits(d.k, mp.s, mp.u_bits);
    const double capacity = ctx.tau * d.rate_A;
    const bool bits_ok = d.k >= 0 && d.k <= mp.s && bits <= capacity;
    if (!power_ok || !bits_ok) ++infeasible;
    if (d.k < mp.s && !(capacity - bits < b)) ++not_tight;

    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < grid; ++j) {
      const double p = cap * static_cast<double>(j) / static_cast<double>(grid - 1);
      best = std::min(best, controller::p3_objective(p, mp, ctx, q, ch));
    }
    const double mine = controller::p3_objective(d.p, mp, ctx, q, ch);
    const double gap = (mine - best) / std::abs(best);
    worst_gap = std::max(worst_gap, gap);
    if (gap > 1e-6) ++gap_fail;
  }
  r.pass = gap_fail == 0 && infeasible == 0 && not_tight == 0;
  r.detail = std::to_string(instances) + " instances x " + std::to_string(grid) +
             " grid points; worst relative gap " + g(worst_gap) + ", " + std::to_string(gap_fail) +
             " gap failures, " + std::to_string(infeasible) + " infeasible, " +
             std::to_string(not_tight) + " not tight";
  return finish(r, timer);
}

CheckResult staleness_dominance(std::uint64_t seed, std::size_t samples) {
  Timer timer;
  CheckResult r{3, "staleness second-moment bound", true, "", 0.0, 60.0};
  const SeedTree root = SeedTree(seed).child("staleness");
  std::size_t failures = 0, point = 0;
  double worst = 0.0;
  std::string worst_at;
  for (double lambda : {10.0, 100.0, 1000.0}) {
    for (double c : {1.0, 10.0, 100.0}) {
      for (double delta : {1.0, 10.0, 100.0}) {
        auto rng = root.child(point++).engine();
        const auto m = staleness_second_moment(lambda, c, delta, samples, rng);
        const double bound = theory::staleness_bound(lambda, c, delta);
        const double z = (m.mean - bound) / m.std_error;
        if (z > 3.0) ++failures;
        if (z > worst || worst_at.empty()) {
          worst = z;
          worst_at = "lambda=" + g(lambda) + " c=" + g(c) + " delta=" + g(delta) +
                     ": E[theta^2]=" + g(m.mean) + " bound=" + g(bound);
        }
      }
    }
  }
  r.pass = failures == 0;
  r.detail = std::to_string(failures) + "/27 grid points exceed the bound by > 3 s.e.; worst " +
             worst_at + " (" + g(worst) + " s.e.)";
  return finish(r, timer);
}

CheckResult sparsification_error_dominance(std::uint64_t seed, std::size_t draws) {
  Timer timer;
  CheckResult r{4, "sparsification error bound", true, "", 0.0, 30.0};
  auto rng = SeedTree(seed).child("sparsification").engine();
  const std::int64_t s = 1000;
  const int u = 32;
  const Vector x = gaussian_vector(static_cast<std::size_t>(s), rng);
  const double x2 = kernels::norm2(x);
  std::vector<double> err(static_cast<std::size_t>(s) + 1);
  for (std::int64_t k = 0; k <= s; ++k)
    err[static_cast<std::size_t>(k)] = kernels::norm2(sparsify::residual(x, sparsify::top_k(x, k)));

  std::size_t failures = 0;
  double worst = -std::numeric_limits<double>::infinity();
  std::string worst_at;
  for (double A : {50.0, 500.0, 5000.0}) {
    for (double c : {0.5, 5.0, 50.0}) {
      std::exponential_distribution<double> tau(1.0 / c);
      double sum = 0.0, sum2 = 0.0;
      for (std::size_t i = 0; i < draws; ++i) {
        const auto k = controller::sparsification_degree(tau(rng), A, u, s);
        const double e = err[static_cast<std::size_t>(k)];
        sum += e;
        sum2 += e * e;
      }
      const double n = static_cast<double>(draws);
      const double mean = sum / n;
      const double se = std::sqrt(std::max(0.0, sum2 / n - mean * mean) / (n - 1.0));
      const double bound = theory::sparsification_error_bound(x2, theory::gamma(A, c, u, s));
      const double z = (mean - bound) / std::max(se, 1e-300);
      if (mean > bound + 3.0 * se) ++failures;
      if (z > worst) {
        worst = z;
        worst_at = "A=" + g(A) + " c=" + g(c) + ": error=" + g(mean / x2) + "|x|^2 bound=" +
                   g(bound / x2) + "|x|^2";
      }
    }
  }
  r.pass = failures == 0;
  r.detail = std::to_string(failures) + "/9 (A, c) pairs exceed the bound by > 3 s.e.; worst " + worst_at;
  return finish(r, timer);
}

namespace {

workloads::Dataset small_clusters(std::size_t classes, std::size_t dim, std::size_t samples,
                                  const SeedTree& seeds) {
  auto means = seeds.child("means").engine();
  auto draws = seeds.child("samples").engine();
  return workloads::make_gaussian_clusters({classes, dim, samples, 1.0, 1.0}, means, draws);
}

protocol::WorldSetup small_world(const SeedTree& seeds, std::size_t devices, long rounds,
                                 double mean_contact, double mean_gap) {
  protocol::WorldSetup w;
  w.model = {workloads::ModelKind::kLogistic, 9, 4, 0};
  auto data = small_clusters(4, 9, 60 * devices, seeds.child("data"));
  auto prng = seeds.child("partition").engine();
  w.shards = workloads::dirichlet_partition(data, {0.5, devices, {}}, prng).shards;
  w.train = data;
  w.test = small_clusters(4, 9, 40, seeds.child("data"));
  w.w0.assign(workloads::parameter_count(w.model), 0.0);
  w.eta = 0.2;
  w.batch_size = 8;
  w.channel = channel::default_params();
  w.channel.bandwidth_hz = 200.0;
  w.u_bits = 32;
  w.seeds = seeds.child("world");
  w.evaluate = false;
  for (std::size_t n = 0; n < devices; ++n) {
    auto rng = seeds.child("mobility").child(n).engine();
    const double delta = 10.0;
    const auto trace = mobility::sample_contact_trace({mean_contact, mean_gap},
                                                      static_cast<double>(rounds + 1) * delta, rng);
    std::vector<mobility::RoundContact> rc;
    for (long r = 0; r < rounds; ++r) rc.push_back(mobility::round_contact(trace, r, delta));
    w.contacts.push_back(std::move(rc));
    w.distance_m.emplace_back(static_cast<std::size_t>(rounds), 30.0 + 20.0 * static_cast<double>(n));
  }
  return w;
}

// Dense replay of every committed update and gradient.
class LedgerOracle : public protocol::Observer {
 public:
  LedgerOracle(std::span<const double> w0, std::size_t devices, double eta)
      : eta_(eta), w_(w0.begin(), w0.end()),
        grads_(devices, Vector(w0.size(), 0.0)),
        uploads_(devices, Vector(w0.size(), 0.0)) {}

  void on_gradient(std::size_t device, long, std::span<const double> grad) override {
    for (std::size_t i = 0; i < grad.size(); ++i) grads_[device][i] += eta_ * grad[i];
  }
  void on_upload(std::size_t device, long, const sparsify::SparseUpdate& u) override {
    for (std::size_t j = 0; j < u.indices.size(); ++j) uploads_[device][u.indices[j]] += u.values[j];
  }
  void on_aggregate(long, std::span<const sparsify::SparseUpdate> updates) override {
    Vector sum(w_.size(), 0.0);
    for (const auto& u : updates)
      for (std::size_t j = 0; j < u.indices.size(); ++j) sum[u.indices[j]] += 1.0 * u.values[j];
    const double a = -1.0 / static_cast<double>(grads_.size());
    for (std::size_t i = 0; i < w_.size(); ++i) w_[i] = w_[i] + a * sum[i];
  }

  // Worst relative ledger error over devices.
  double ledger_error(const std::vector<protocol::DeviceState>& devs) const {
    double worst = 0.0;
    for (std::size_t n = 0; n < devs.size(); ++n) {
      Vector lhs(w_.size());
      for (std::size_t i = 0; i < w_.size(); ++i) lhs[i] = uploads_[n][i] + devs[n].e[i] + devs[n].g[i];
      const double scale = std::max(kernels::norm2(grads_[n]), 1e-30);
      double diff = 0.0;
      for (std::size_t i = 0; i < w_.size(); ++i) diff += (lhs[i] - grads_[n][i]) * (lhs[i] - grads_[n][i]);
      worst = std::max(worst, std::sqrt(diff / scale));
    }
    return worst;
  }
  const Vector& server() const { return w_; }

 private:
  double eta_;
  Vector w_;
  std::vector<Vector> grads_;
  std::vector<Vector> uploads_;
};

}  // namespace

CheckResult protocol_conservation(std::uint64_t seed, long rounds, std::size_t devices) {
  Timer timer;
  CheckResult r{5, "protocol conservation", true, "", 0.0, 0.0};
  std::ostringstream detail;
  for (const std::string policy : {"mads", "sfl_spar"}) {
    const SeedTree root = SeedTree(seed).child("conservation").child(policy);
    auto setup = small_world(root, devices, rounds, 6.0, 30.0);
    protocol::World world(setup);
    LedgerOracle oracle(setup.w0, devices, setup.eta);
    world.set_observer(&oracle);
    harness::PolicyInputs in;
    in.name = policy;
    in.mads = {1e-3, 32, static_cast<std::int64_t>(setup.w0.size())};
    in.channel = setup.channel;
    in.rounds = rounds;
    in.budgets.assign(devices, 0.5);
    in.allowance.assign(devices, 0.05);
    auto pol = harness::make_policy(in);
    double worst = 0.0;
    long server_mismatch = 0;
    std::size_t uploads = 0;
    for (long t = 0; t < rounds; ++t) {
      const auto rec = world.run_round(*pol);
      for (const auto& d : rec.devices) uploads += d.uploaded ? 1 : 0;
      worst = std::max(worst, oracle.ledger_error(world.devices()));
      if (oracle.server() != world.server().w) ++server_mismatch;
    }
    if (worst > 1e-9 || server_mismatch > 0 || uploads == 0) r.pass = false;
    detail << policy << ": " << uploads << " uploads, worst ledger error " << g(worst) << ", "
           << server_mismatch << " server mismatches; ";
  }
  r.detail = detail.str();
  return finish(r, timer);
}

CheckResult dense_sync_equivalence(std::uint64_t seed, long rounds) {
  Timer timer;
  CheckResult r{6, "dense synchronous equivalence", true, "", 0.0, 0.0};
  const std::size_t N = 4;
  const SeedTree root = SeedTree(seed).child("dense");
  auto setup = small_world(root, N, rounds, 1.0, 1.0);
  for (auto& dev : setup.contacts)
    for (auto& rc : dev) rc = {true, 1e9};
  setup.channel.bandwidth_hz = 1e6;
  protocol::World world(setup);
  harness::DensePolicy policy({1.0, 32, static_cast<std::int64_t>(setup.w0.size())}, setup.channel);

  Vector w = setup.w0;
  double worst = 0.0;
  for (long t = 1; t <= rounds; ++t) {
    Vector step(w.size(), 0.0);
    for (std::size_t n = 0; n < N; ++n) {
      auto rng = protocol::batch_engine(setup.seeds, n, t);
      const auto batch = workloads::sample_batch(setup.shards[n], setup.batch_size, rng);
      const auto grad = workloads::grad(setup.model, w, batch);
      for (std::size_t i = 0; i < w.size(); ++i) step[i] += setup.eta * grad[i];
    }
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= step[i] / static_cast<double>(N);
    world.run_round(policy);
    worst = std::max(worst, rel_diff(world.server().w, w));
  }
  r.pass = worst <= 1e-9;
  r.detail = std::to_string(rounds) + " rounds, worst relative deviation " + g(worst);
  return finish(r, timer);
}

CheckResult energy_guarantee(const harness::ExperimentConfig& desk, std::size_t runs) {
  Timer timer;
  CheckResult r{7, "energy guarantee", true, "", 0.0, 0.0};
  auto base = desk;
  base.run.rounds = 500;
  base.run.devices = 10;
  base.run.evaluate = false;
  base.controller.policy = "mads";
  const double V_grid[] = {1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4, 1e6};
  const std::size_t nv = std::size(V_grid);

  std::size_t slack_violations = 0, strict_ok = 0, saturation_mismatch = 0;
  std::vector<double> mean_energy(nv, 0.0);
  double mean_optimal = 0.0, worst_ratio = 0.0;
  for (std::size_t i = 0; i < runs; ++i) {
    auto cfg = base;
    cfg.run.seed = harness::repetition_seed(desk.run.seed, i);
    const auto sc = harness::build_scenario(cfg);
    const long R = cfg.run.rounds;

    const auto t = harness::run_policy(sc, cfg, "mads");
    std::vector<double> phi(cfg.run.devices, 0.0);
    for (const auto& rec : t.rounds)
      for (std::size_t n = 0; n < phi.size(); ++n)
        phi[n] = std::max(phi[n], std::abs(rec.devices[n].energy - t.budgets[n] / static_cast<double>(R)));
    const double slack = theory::energy_slack(R, phi);
    for (std::size_t n = 0; n < phi.size(); ++n) {
      if (t.summary.energy_j[n] > t.budgets[n] + slack) ++slack_violations;
      worst_ratio = std::max(worst_ratio, t.summary.energy_j[n] / t.budgets[n]);
    }

    const auto opt = harness::run_policy(sc, cfg, "optimal");
    mean_optimal += opt.summary.total_energy_j / static_cast<double>(runs);
    for (std::size_t v = 0; v < nv; ++v) {
      auto cv = cfg;
      cv.controller.V = V_grid[v];
      const auto tv = harness::run_policy(sc, cv, "mads");
      mean_energy[v] += tv.summary.total_energy_j / static_cast<double>(runs);
      if (v == 0) {
        bool within = true;
        for (std::size_t n = 0; n < phi.size(); ++n) within = within && tv.summary.energy_j[n] <= tv.budgets[n];
        strict_ok += within ? 1 : 0;
      }
      if (v + 1 == nv && tv.summary.energy_j != opt.summary.energy_j) ++saturation_mismatch;
    }
  }
  bool monotone = true;
  for (std::size_t v = 1; v < nv; ++v) monotone = monotone && mean_energy[v] >= mean_energy[v - 1];
  r.pass = slack_violations == 0 && 10 * strict_ok >= 9 * runs && monotone && saturation_mismatch == 0;
  std::ostringstream d;
  d << slack_violations << " slack violations, worst spend " << g(worst_ratio) << "x budget; "
    << strict_ok << "/" << runs << " runs within budget at V=1e-6; mean energy over V {";
  for (std::size_t v = 0; v < nv; ++v) d << (v ? " " : "") << g(mean_energy[v]);
  d << "} J, optimal " << g(mean_optimal) << " J, " << saturation_mismatch
    << " runs where V=1e6 differs from optimal";
  r.detail = d.str();
  return finish(r, timer);
}

namespace {

struct SweepMeans {
  std::vector<double> final_loss;
  std::vector<double> rounds_to_target;
};

SweepMeans sweep_means(const harness::ExperimentConfig& cfg, harness::SweepAxis axis,
                       const std::vector<double>& values, const std::string& policy,
                       std::size_t reps) {
  const std::vector<std::string> pols{policy};
  const auto runs = harness::run_sweep(cfg, axis, values, pols, reps);
  SweepMeans m;
  m.final_loss.assign(values.size(), 0.0);
  m.rounds_to_target.assign(values.size(), 0.0);
  for (const auto& run : runs) {
    const auto i = static_cast<std::size_t>(std::find(values.begin(), values.end(), run.value) - values.begin());
    m.final_loss[i] += run.table.summary.final_loss / static_cast<double>(reps);
    m.rounds_to_target[i] += static_cast<double>(run.table.summary.rounds_to_target) / static_cast<double>(reps);
  }
  return m;
}

std::string list(const std::vector<double>& v) {
  std::string s = "{";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + g(v[i]);
  return s + "}";
}

}  // namespace

CheckResult trend_reproduction(const harness::ExperimentConfig& desk, std::size_t reps) {
  Timer timer;
  CheckResult r{8, "trend reproduction", true, "", 0.0, 600.0};
  auto base = desk;
  base.task.kind = workloads::ModelKind::kLogistic;
  base.task.rho = 0.1;
  std::ostringstream d;

  auto exp_cfg = base;
  exp_cfg.mobility.model = harness::MobilityModel::kExponential;
  const std::vector<double> contact{1.0, 4.0, 16.0};
  const auto a = sweep_means(exp_cfg, harness::SweepAxis::kContact, contact, "optimal", reps);
  const bool pass_a = a.final_loss[0] > a.final_loss[1] && a.final_loss[1] > a.final_loss[2];
  d << "(a) " << (pass_a ? "ok" : "FAIL") << " loss vs contact " << list(a.final_loss) << "; ";

  const std::vector<double> gaps{100.0, 400.0, 1600.0};
  const auto b = sweep_means(exp_cfg, harness::SweepAxis::kIntercontact, gaps, "optimal", reps);
  const bool pass_b = b.final_loss[0] < b.final_loss[1] && b.final_loss[1] < b.final_loss[2];
  d << "(b) " << (pass_b ? "ok" : "FAIL") << " loss vs inter-contact " << list(b.final_loss) << "; ";

  auto speed_cfg = base;
  speed_cfg.mobility.model = harness::MobilityModel::kSpeed;
  const std::vector<double> speeds{0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0};
  const auto c = sweep_means(speed_cfg, harness::SweepAxis::kSpeed, speeds, "optimal", reps);
  const auto& rt = c.rounds_to_target;
  const auto best = static_cast<std::size_t>(std::min_element(rt.begin(), rt.end()) - rt.begin());
  const bool pass_c = best > 0 && best + 1 < rt.size() && rt.front() > rt[best] && rt.back() > rt[best];
  d << "(c) " << (pass_c ? "ok" : "FAIL") << " rounds-to-target vs speed " << list(rt) << "; ";

  const std::vector<std::string> order{"optimal", "mads", "afl_spar", "afl", "sfl_spar"};
  std::vector<double> loss(order.size(), 0.0);
  for (std::size_t rep = 0; rep < reps; ++rep) {
    auto cfg = base;
    cfg.run.seed = harness::repetition_seed(desk.run.seed, rep);
    const auto sc = harness::build_scenario(cfg);
    for (std::size_t p = 0; p < order.size(); ++p)
      loss[p] += harness::run_policy(sc, cfg, order[p]).summary.final_loss / static_cast<double>(reps);
  }
  bool pass_d = true;
  for (std::size_t p = 1; p < order.size(); ++p) pass_d = pass_d && loss[p - 1] < loss[p];
  d << "(d) " << (pass_d ? "ok" : "FAIL") << " loss optimal/mads/afl_spar/afl/sfl_spar " << list(loss);

  r.pass = pass_a && pass_b && pass_c && pass_d;
  r.detail = d.str();
  return finish(r, timer);
}

CheckResult corollary_shape(const harness::ExperimentConfig& desk) {
  Timer timer;
  CheckResult r{9, "speed bound shape", true, "", 0.0, 0.0};
  theory::BoundParams bp{desk.bounds.L, desk.bounds.G2, desk.bounds.sigma, desk.task.eta,
                         desk.run.round_duration_s, std::max(1L, desk.run.rounds), desk.run.devices,
                         desk.bounds.F0_minus_Fstar};
  const theory::SpeedModel sm{desk.bounds.C_m, desk.bounds.Lambda_m, desk.bounds.rate_bps,
                              desk.controller.u_bits, static_cast<std::int64_t>(harness::model_size(desk))};
  const int n = 50;
  std::vector<double> f(n);
  for (int i = 0; i < n; ++i) {
    const double v = std::pow(10.0, -1.0 + 3.0 * i / (n - 1));
    f[static_cast<std::size_t>(i)] = theory::corollary1_rhs(v, sm, bp);
  }
  int changes = 0, zeros = 0;
  bool down_then_up = true;
  double prev = 0.0;
  std::size_t argmin = 0;
  for (std::size_t i = 1; i < f.size(); ++i) {
    const double diff = f[i] - f[i - 1];
    if (diff == 0.0 || !std::isfinite(diff)) ++zeros;
    if (i > 1 && (diff > 0.0) != (prev > 0.0)) {
      ++changes;
      if (prev > 0.0) down_then_up = false;
    }
    if (i == 1 && diff > 0.0) down_then_up = false;
    prev = diff;
    if (f[i] < f[argmin]) argmin = i;
  }
  r.pass = changes == 1 && zeros == 0 && down_then_up;
  r.detail = std::to_string(changes) + " sign change(s), minimum at v=" +
             g(std::pow(10.0, -1.0 + 3.0 * static_cast<double>(argmin) / (n - 1))) + " m/s";
  return finish(r, timer);
}

CheckResult gradient_check(std::uint64_t seed, std::size_t points) {
  Timer timer;
  CheckResult r{10, "analytic gradients vs finite differences", true, "", 0.0, 0.0};
  const SeedTree root = SeedTree(seed).child("gradients");
  const workloads::ModelSpec specs[] = {{workloads::ModelKind::kQuadratic, 20, 0, 0},
                                        {workloads::ModelKind::kLogistic, 6, 4, 0},
                                        {workloads::ModelKind::kMlp, 5, 3, 6}};
  std::ostringstream d;
  for (const auto& spec : specs) {
    const auto name = workloads::to_string(spec.kind);
    const auto data = small_clusters(std::max<std::size_t>(spec.classes, 2), spec.dim, 12,
                                     root.child(name));
    auto rng = root.child(name).child("points").engine();
    std::normal_distribution<double> nd(0.0, 1.0);
    double worst = 0.0;
    std::size_t failures = 0;
    for (std::size_t pt = 0; pt < points; ++pt) {
      Vector w(workloads::parameter_count(spec));
      for (auto& v : w) v = nd(rng);
      const auto analytic = workloads::grad(spec, w, data);
      Vector fd(w.size());
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double h = 1e-5 * std::max(1.0, std::abs(w[i]));
        Vector wp = w, wm = w;
        wp[i] += h;
        wm[i] -= h;
        fd[i] = (workloads::loss(spec, wp, data) - workloads::loss(spec, wm, data)) / (wp[i] - wm[i]);
      }
      const double err = rel_diff(analytic, fd);
      worst = std::max(worst, err);
      if (err > 1e-5) ++failures;
    }
    if (failures > 0) r.pass = false;
    d << name << " worst " << g(worst) << " (" << failures << " failures); ";
  }
  r.detail = std::to_string(points) + " points per model: " + d.str();
  return finish(r, timer);
}

std::vector<CheckResult> run_oracles(std::uint64_t seed, bool quick) {
  std::vector<CheckResult> out;
  out.push_back(sparsifier_contraction(seed, quick ? 1000 : 10000));
  out.push_back(power_allocation_oracle(seed, quick ? 100 : 1000, quick ? 10000 : 100000));
  out.push_back(staleness_dominance(seed, quick ? 10000 : 100000));
  out.push_back(sparsification_error_dominance(seed, quick ? 10000 : 100000));
  out.push_back(protocol_conservation(seed, quick ? 50 : 200, 5));
  out.push_back(dense_sync_equivalence(seed, quick ? 20 : 100));
  out.push_back(gradient_check(seed, quick ? 10 : 100));
  return out;
}

}  // namespace mafl::validation
