// mafl: simulate, sweep, bounds and validate.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mafl/error.hpp"
#include "mafl/harness/config.hpp"
#include "mafl/harness/experiment.hpp"
#include "mafl/sparsify.hpp"
#include "mafl/theory.hpp"
#include "mafl/validation/suite.hpp"

namespace {

using namespace mafl;

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("--values: '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError("--values: need at least one value");
  return out;
}

std::vector<std::string> split(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::string g(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void print_summary(const harness::MetricsTable& t) {
  const auto& s = t.summary;
  std::cout << "policy=" << t.policy << " rounds=" << s.rounds << " final_loss=" << g(s.final_loss)
            << " test_metric=" << g(s.final_metric) << " rounds_to_target=" << s.rounds_to_target
            << " energy_j=" << g(s.total_energy_j) << " mean_theta=" << g(s.mean_theta)
            << " uploads=" << s.uploads << "/" << s.contacts << "\n";
}

// Rows: lambda_s, contact_s, delta_s, rate_bps, speed_mps (header optional).
int run_bounds(const harness::ExperimentConfig& cfg, const std::string& grid_path) {
  std::ifstream in(grid_path);
  if (!in) throw std::runtime_error("cannot open grid file: " + grid_path);
  const auto s = static_cast<std::int64_t>(harness::model_size(cfg));
  const int u = cfg.controller.u_bits;
  std::cout << "lambda_s,contact_s,delta_s,rate_bps,speed_mps,Theta,gamma,memory_bound,theorem2,"
               "corollary1,diagnostic\n";
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> v;
    try {
      for (const auto& cell : split(line)) v.push_back(std::stod(cell));
    } catch (const std::exception&) {
      continue;  // header
    }
    if (v.size() != 5) throw ConfigError("bounds grid: each row needs 5 columns");
    const double lambda = v[0], c = v[1], delta = v[2], rate = v[3], speed = v[4];

    theory::BoundParams bp{cfg.bounds.L,     cfg.bounds.G2, cfg.bounds.sigma,
                           cfg.task.eta,     delta,         std::max(1L, cfg.run.rounds),
                           cfg.run.devices,  cfg.bounds.F0_minus_Fstar};
    std::string diag;
    const double Theta = theory::staleness_bound(lambda, c, delta, &diag);
    const double gam = theory::gamma(rate, c, u, s);
    const double mem = theory::memory_bound(gam, Theta, cfg.task.eta, cfg.bounds.G2, &diag);
    std::vector<double> gammas(bp.N, gam), Thetas(bp.N, Theta);
    const double t2 = gam > 0.0 ? theory::theorem2_rhs(bp, gammas, Thetas) : INFINITY;
    theory::SpeedModel sm{cfg.bounds.C_m, cfg.bounds.Lambda_m, rate, u, s};
    const double c1 = theory::corollary1_rhs(speed, sm, bp);
    std::cout << g(lambda) << ',' << g(c) << ',' << g(delta) << ',' << g(rate) << ',' << g(speed)
              << ',' << g(Theta) << ',' << g(gam) << ',' << g(mem) << ',' << g(t2) << ','
              << g(c1) << ',' << diag << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mobility-aware asynchronous federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", config_path, "experiment config file");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--set", sets, "override, section.key=value");
  };

  auto* sim = app.add_subcommand("simulate", "run one experiment and write rounds.csv/summary.json");
  add_common(sim, true);
  std::string policy;
  std::uint64_t seed = 0;
  std::string out_dir;
  sim->add_option("--policy", policy, "mads, afl, afl_spar, sfl_spar or optimal");
  sim->add_option("--seed", seed, "root seed");
  sim->add_option("--out", out_dir, "output directory (default run.output_path)");

  auto* sweep = app.add_subcommand("sweep", "run one axis over several values and policies");
  add_common(sweep, true);
  std::string axis, values, policies = "mads";
  std::size_t seeds = 1;
  sweep->add_option("--axis", axis, "contact, intercontact, speed or V")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("--policies", policies, "comma-separated policies");
  sweep->add_option("--seeds", seeds, "repetitions per value")->check(CLI::PositiveNumber);
  sweep->add_option("--out", out_dir, "output directory (default run.output_path)");

  auto* bounds = app.add_subcommand("bounds", "evaluate the closed-form bounds on a grid");
  add_common(bounds, true);
  std::string grid;
  bounds->add_option("--grid", grid, "CSV: lambda_s,contact_s,delta_s,rate_bps,speed_mps")
      ->required()
      ->check(CLI::ExistingFile);

  auto* val = app.add_subcommand("validate", "run the oracle suites");
  std::uint64_t val_seed = 20240601;
  bool quick = false;
  val->add_option("--seed", val_seed, "root seed for the oracles");
  val->add_flag("--quick", quick, "reduced sample counts");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*val) {
      const auto results = validation::run_oracles(val_seed, quick);
      bool ok = true;
      for (const auto& r : results) {
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << "  " << r.detail << "\n";
        ok = ok && r.pass;
      }
      return ok ? 0 : 1;
    }

    auto cfg = harness::load_config(config_path, sets);
    if (*sim) {
      if (!policy.empty()) harness::apply_setting(cfg, "controller.policy", policy);
      if (sim->count("--seed")) cfg.run.seed = seed;
      harness::validate(cfg);
      const auto sc = harness::build_scenario(cfg);
      for (const auto& w : sc.warnings) std::cerr << "warning: " << w << "\n";
      const auto t = harness::run_policy(sc, cfg, cfg.controller.policy);
      harness::emit(t, cfg, out_dir.empty() ? cfg.run.output_path : out_dir);
      print_summary(t);
      return 0;
    }
    if (*sweep) {
      const auto ax = harness::parse_axis(axis);
      const auto vals = parse_values(values);
      const auto pols = split(policies);
      const auto runs = harness::run_sweep(cfg, ax, vals, pols, seeds);
      harness::emit_sweep(runs, cfg, ax, out_dir.empty() ? cfg.run.output_path : out_dir);
      for (const auto& r : runs) {
        std::cout << harness::to_string(ax) << "=" << g(r.value) << " rep=" << r.repetition << " ";
        print_summary(r.table);
      }
      return 0;
    }
    if (*bounds) return run_bounds(cfg, grid);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
