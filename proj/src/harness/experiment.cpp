#include "mafl/harness/experiment.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "mafl/error.hpp"
#include "mafl/harness/policies.hpp"
#include "mafl/mobility.hpp"

namespace mafl::harness {

namespace {

struct DataSplit {
  workloads::Dataset train;
  workloads::Dataset test;
};

DataSplit load_data(const ExperimentConfig& cfg, const SeedTree& seeds) {
  const auto& t = cfg.task;
  if (t.data_file.empty()) {
    workloads::ClusterSpec cluster{t.classes, t.dim, t.samples, t.separation, t.noise};
    auto means = seeds.child("means").engine();
    auto train_rng = seeds.child("train").engine();
    DataSplit out;
    out.train = workloads::make_gaussian_clusters(cluster, means, train_rng);
    auto means_again = seeds.child("means").engine();
    auto test_rng = seeds.child("test").engine();
    cluster.samples = t.test_samples;
    out.test = workloads::make_gaussian_clusters(cluster, means_again, test_rng);
    return out;
  }
  auto all = workloads::load_csv(t.data_file);
  if (all.dim != t.dim)
    throw ConfigError("task.dim: data file has " + std::to_string(all.dim) + " feature columns");
  if (all.num_classes > t.classes)
    throw ConfigError("task.classes: data file has " + std::to_string(all.num_classes) + " classes");
  if (t.test_samples >= all.size())
    throw ConfigError("task.test_samples: must be smaller than the data file");
  all.num_classes = t.classes;
  std::vector<std::size_t> idx(all.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto rng = seeds.child("split").engine();
  std::shuffle(idx.begin(), idx.end(), rng);
  std::span<const std::size_t> all_idx(idx);
  DataSplit out;
  out.test = all.subset(all_idx.first(t.test_samples));
  out.train = all.subset(all_idx.subspan(t.test_samples));
  return out;
}

void build_mobility(const ExperimentConfig& cfg, const SeedTree& seeds, protocol::WorldSetup& setup) {
  const auto& m = cfg.mobility;
  const std::size_t N = cfg.run.devices;
  const long R = cfg.run.rounds;
  const double delta = cfg.run.round_duration_s;
  setup.contacts.assign(N, {});
  setup.distance_m.assign(N, std::vector<double>(static_cast<std::size_t>(R), m.link_distance_m));

  if (m.model == MobilityModel::kWaypoint) {
    mobility::WaypointScenario sc;
    sc.area = {m.area_m, m.area_m};
    sc.comm_range = m.range_m;
    sc.mean_speed = m.speed_mps;
    sc.pause_max = m.pause_max_s;
    sc.dt = m.dt_s;
    const double horizon = static_cast<double>(std::max(R, 1L)) * delta;
    auto wc = mobility::simulate_waypoint_contacts(sc, N, horizon, delta, seeds);
    for (std::size_t n = 0; n < N; ++n) {
      for (long r = 0; r < R; ++r) {
        setup.contacts[n].push_back(mobility::round_contact(wc.traces[n], r, delta));
        setup.distance_m[n][static_cast<std::size_t>(r)] =
            std::max(1.0, wc.epoch_distance[n][static_cast<std::size_t>(r)]);
      }
    }
    return;
  }

  const mobility::ContactParams params =
      m.model == MobilityModel::kSpeed
          ? mobility::scaled_params({m.C_m, m.Lambda_m, m.speed_mps})
          : mobility::ContactParams{m.mean_contact_s, m.mean_intercontact_s};
  const double horizon = static_cast<double>(R + 1) * delta;
  for (std::size_t n = 0; n < N; ++n) {
    auto rng = seeds.child(n).engine();
    const auto trace = mobility::sample_contact_trace(params, horizon, rng);
    for (long r = 0; r < R; ++r) setup.contacts[n].push_back(mobility::round_contact(trace, r, delta));
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

Scenario build_scenario(const ExperimentConfig& cfg) {
  validate(cfg);
  const SeedTree root(cfg.run.seed);
  Scenario sc;
  auto& setup = sc.setup;

  auto data = load_data(cfg, root.child("data"));
  setup.model = {cfg.task.kind, cfg.task.dim, cfg.task.classes, cfg.task.hidden};
  auto part_rng = root.child("partition").engine();
  auto part = workloads::dirichlet_partition(data.train, {cfg.task.rho, cfg.run.devices, {}}, part_rng);
  for (std::size_t n = 0; n < part.shards.size(); ++n)
    if (part.shards[n].empty()) throw ConfigError("task.samples: device " + std::to_string(n) + " got no data");
  setup.shards = std::move(part.shards);
  sc.warnings = std::move(part.warnings);
  setup.train = std::move(data.train);
  setup.test = std::move(data.test);
  auto init_rng = root.child("init").engine();
  setup.w0 = workloads::init_parameters(setup.model, init_rng);
  setup.eta = cfg.task.eta;
  setup.batch_size = cfg.task.batch_size;
  setup.channel = cfg.channel;
  setup.u_bits = cfg.controller.u_bits;
  setup.seeds = root.child("world");
  setup.evaluate = cfg.run.evaluate;
  build_mobility(cfg, cfg.mobility.seed ? SeedTree(*cfg.mobility.seed) : root.child("mobility"), setup);

  const auto& c = cfg.controller;
  for (std::size_t n = 0; n < cfg.run.devices; ++n) {
    auto rng = root.child("budget").child(n).engine();
    std::uniform_real_distribution<double> draw(c.budget_min_j, c.budget_max_j);
    const double b = c.budget_min_j == c.budget_max_j ? c.budget_min_j : draw(rng);
    sc.budgets.push_back(b * c.budget_scale);
    std::size_t count = 0;
    for (const auto& rc : setup.contacts[n]) count += rc.contact ? 1 : 0;
    sc.contact_rounds.push_back(count);
    sc.allowance.push_back(sc.budgets.back() / static_cast<double>(std::max<std::size_t>(1, count)));
  }
  return sc;
}

MetricsTable run_policy(const Scenario& scenario, const ExperimentConfig& cfg,
                        const std::string& policy) {
  protocol::World world(scenario.setup);
  PolicyInputs in;
  in.name = policy;
  in.mads = {cfg.controller.V, cfg.controller.u_bits,
             static_cast<std::int64_t>(scenario.setup.w0.size())};
  in.channel = cfg.channel;
  in.rounds = cfg.run.rounds;
  in.budgets = scenario.budgets;
  in.allowance = scenario.allowance;
  auto pol = make_policy(in);

  MetricsTable t;
  t.policy = policy;
  t.seed = cfg.run.seed;
  t.budgets = scenario.budgets;
  const auto& setup = world.setup();
  const bool eval = setup.evaluate;
  auto test_loss = [&] {
    return eval ? workloads::loss(setup.model, world.server().w, setup.test) : std::nan("");
  };

  Summary& s = t.summary;
  s.rounds = cfg.run.rounds;
  s.initial_loss = eval ? world.global_loss() : std::nan("");
  s.final_loss = s.initial_loss;
  s.final_test_loss = test_loss();
  s.final_metric = eval ? world.test_metric() : std::nan("");
  s.rounds_to_target = cfg.run.rounds + 1;
  s.energy_j.assign(cfg.run.devices, 0.0);

  double theta_sum = 0.0;
  for (long r = 1; r <= cfg.run.rounds; ++r) {
    auto rec = world.run_round(*pol);
    const double tl = test_loss();
    if (s.rounds_to_target > cfg.run.rounds && tl <= cfg.run.target_loss) s.rounds_to_target = r;
    for (const auto& d : rec.devices) {
      if (!d.zeta) continue;
      ++s.contacts;
      theta_sum += static_cast<double>(d.theta);
      s.max_theta = std::max(s.max_theta, d.theta);
      s.uploads += d.uploaded ? 1 : 0;
      s.failed_uploads += d.failed ? 1 : 0;
    }
    s.final_loss = rec.global_loss;
    s.final_metric = rec.test_metric;
    s.final_test_loss = tl;
    s.energy_j = rec.cumulative_energy;
    t.test_loss.push_back(tl);
    t.rounds.push_back(std::move(rec));
  }
  s.mean_theta = s.contacts > 0 ? theta_sum / static_cast<double>(s.contacts) : 0.0;
  s.total_energy_j = std::accumulate(s.energy_j.begin(), s.energy_j.end(), 0.0);
  return t;
}

MetricsTable run_experiment(const ExperimentConfig& cfg) {
  const auto sc = build_scenario(cfg);
  return run_policy(sc, cfg, cfg.controller.policy);
}

SweepAxis parse_axis(const std::string& s) {
  if (s == "contact") return SweepAxis::kContact;
  if (s == "intercontact") return SweepAxis::kIntercontact;
  if (s == "speed") return SweepAxis::kSpeed;
  if (s == "V") return SweepAxis::kV;
  throw ConfigError("sweep.axis: expected contact, intercontact, speed or V, got '" + s + "'");
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::kContact: return "contact";
    case SweepAxis::kIntercontact: return "intercontact";
    case SweepAxis::kSpeed: return "speed";
    case SweepAxis::kV: return "V";
  }
  return "?";
}

ExperimentConfig with_axis_value(const ExperimentConfig& cfg, SweepAxis axis, double value) {
  ExperimentConfig out = cfg;
  const auto model = cfg.mobility.model;
  switch (axis) {
    case SweepAxis::kContact:
    case SweepAxis::kIntercontact:
      if (model != MobilityModel::kExponential)
        throw ConfigError("mobility.model: axis " + to_string(axis) + " needs the exponential model");
      (axis == SweepAxis::kContact ? out.mobility.mean_contact_s : out.mobility.mean_intercontact_s) =
          value;
      break;
    case SweepAxis::kSpeed:
      if (model == MobilityModel::kExponential)
        throw ConfigError("mobility.model: axis speed needs the speed or waypoint model");
      out.mobility.speed_mps = value;
      break;
    case SweepAxis::kV:
      out.controller.V = value;
      break;
  }
  validate(out);
  return out;
}

std::uint64_t repetition_seed(std::uint64_t root, std::size_t repetition) {
  return SeedTree(root).child("sweep").child(repetition).seed();
}

std::vector<SweepRun> run_sweep(const ExperimentConfig& cfg, SweepAxis axis,
                                std::span<const double> values,
                                std::span<const std::string> policies, std::size_t repetitions) {
  std::vector<SweepRun> out;
  for (double v : values) {
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
      auto c = with_axis_value(cfg, axis, v);
      c.run.seed = repetition_seed(cfg.run.seed, rep);
      const auto sc = build_scenario(c);
      for (const auto& p : policies) out.push_back({v, p, rep, run_policy(sc, c, p)});
    }
  }
  return out;
}

std::string rounds_csv(const MetricsTable& t) {
  std::ostringstream os;
  os << "round,global_loss,test_metric,contacts,mean_theta,max_theta,total_energy_j,mean_k,mean_p\n";
  for (const auto& rec : t.rounds) {
    double theta_sum = 0.0, k_sum = 0.0, p_sum = 0.0;
    long theta_max = 0;
    for (const auto& d : rec.devices) {
      theta_sum += static_cast<double>(d.theta);
      theta_max = std::max(theta_max, d.theta);
      if (d.zeta) {
        k_sum += static_cast<double>(d.k);
        p_sum += d.p;
      }
    }
    const double nd = static_cast<double>(std::max<std::size_t>(1, rec.devices.size()));
    const double nc = static_cast<double>(std::max<std::size_t>(1, rec.contacts));
    const double energy = std::accumulate(rec.cumulative_energy.begin(), rec.cumulative_energy.end(), 0.0);
    os << rec.round << ',' << fmt(rec.global_loss) << ',' << fmt(rec.test_metric) << ','
       << rec.contacts << ',' << fmt(theta_sum / nd) << ',' << theta_max << ',' << fmt(energy)
       << ',' << fmt(k_sum / nc) << ',' << fmt(p_sum / nc) << '\n';
  }
  return os.str();
}

std::string git_blob_sha1(const std::string& text) {
  const std::string header = "blob " + std::to_string(text.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("EVP_MD_CTX_new failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, text.data(), text.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-1 digest failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

namespace {

nlohmann::ordered_json summary_json(const MetricsTable& t, const ExperimentConfig& cfg,
                                    const std::string& csv) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json conf;
  std::string canon;
  for (const auto& [k, v] : echo(cfg)) {
    conf[k] = v;
    canon += k + "=" + v + "\n";
  }
  const auto& s = t.summary;
  j["policy"] = t.policy;
  j["seed"] = t.seed;
  j["rounds"] = s.rounds;
  j["summary"] = {{"initial_loss", s.initial_loss},
                  {"final_loss", s.final_loss},
                  {"final_test_loss", s.final_test_loss},
                  {"final_metric", s.final_metric},
                  {"target_loss", cfg.run.target_loss},
                  {"rounds_to_target", s.rounds_to_target},
                  {"total_energy_j", s.total_energy_j},
                  {"mean_theta", s.mean_theta},
                  {"max_theta", s.max_theta},
                  {"contacts", s.contacts},
                  {"uploads", s.uploads},
                  {"failed_uploads", s.failed_uploads}};
  j["energy_j"] = s.energy_j;
  j["budget_j"] = t.budgets;
  j["config"] = conf;
  j["fingerprint"] = git_blob_sha1(canon + "policy=" + t.policy + "\n" + csv);
  return j;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + p.string());
}

}  // namespace

void emit(const MetricsTable& table, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string csv = rounds_csv(table);
  write_file(dir / "rounds.csv", csv);
  write_file(dir / "summary.json", summary_json(table, cfg, csv).dump(2) + "\n");
}

void emit_sweep(const std::vector<SweepRun>& runs, const ExperimentConfig& cfg, SweepAxis axis,
                const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream os;
  os << "axis,value,policy,repetition,seed,final_loss,final_test_loss,final_metric,"
        "rounds_to_target,total_energy_j,mean_theta\n";
  for (const auto& r : runs) {
    const auto& s = r.table.summary;
    os << to_string(axis) << ',' << fmt(r.value) << ',' << r.policy << ',' << r.repetition << ','
       << r.table.seed << ',' << fmt(s.final_loss) << ',' << fmt(s.final_test_loss) << ','
       << fmt(s.final_metric) << ',' << s.rounds_to_target << ',' << fmt(s.total_energy_j) << ','
       << fmt(s.mean_theta) << '\n';
    auto c = with_axis_value(cfg, axis, r.value);
    c.run.seed = r.table.seed;
    emit(r.table, c, dir / (to_string(axis) + "_" + fmt(r.value) + "_" + r.policy + "_rep" +
                            std::to_string(r.repetition)));
  }
  write_file(dir / "sweep.csv", os.str());
}

}  // namespace mafl::harness
