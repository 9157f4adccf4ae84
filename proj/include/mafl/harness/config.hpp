#pragma once

// Flat-sectioned `key = value` experiment configuration.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mafl/channel.hpp"
#include "mafl/workloads.hpp"

namespace mafl::harness {

enum class MobilityModel { kExponential, kSpeed, kWaypoint };

struct RunConfig {
  long rounds = 100;
  std::size_t devices = 10;
  std::uint64_t seed = 1;
  double round_duration_s = 10.0;
  std::string output_path = "out";
  double target_loss = 0.5;  // rounds-to-target threshold on held-out loss
  bool evaluate = true;
};

struct TaskConfig {
  workloads::ModelKind kind = workloads::ModelKind::kLogistic;
  std::size_t s = 0;  // optional; must equal the derived parameter count when set
  std::size_t dim = 99;
  std::size_t classes = 10;
  std::size_t hidden = 16;
  std::size_t samples = 2000;
  std::size_t test_samples = 1000;
  double separation = 0.35;
  double noise = 1.0;
  double rho = 0.1;
  std::size_t batch_size = 16;
  double eta = 0.1;
  std::string data_file;  // CSV; replaces the synthetic clusters
};

struct MobilityConfig {
  MobilityModel model = MobilityModel::kExponential;
  double mean_contact_s = 4.0;
  double mean_intercontact_s = 400.0;
  double speed_mps = 10.0;
  double C_m = 40.0;
  double Lambda_m = 4000.0;
  double link_distance_m = 50.0;
  double area_m = 1000.0;
  double range_m = 100.0;
  double pause_max_s = 10.0;
  double dt_s = 0.1;
  std::optional<std::uint64_t> seed;  // unset: derived from run.seed
};

struct ControllerConfig {
  std::string policy = "mads";
  double V = 1e-2;
  double budget_min_j = 50.0;
  double budget_max_j = 150.0;
  double budget_scale = 1.0;  // multiplies drawn budgets
  int u_bits = 32;
};

struct BoundsConfig {
  double L = 1.0;
  double G2 = 1.0;
  double sigma = 0.5;
  double F0_minus_Fstar = 1.0;
  double C_m = 4.0;
  double Lambda_m = 400.0;
  double rate_bps = 200.0;
};

struct ExperimentConfig {
  RunConfig run;
  TaskConfig task;
  MobilityConfig mobility;
  channel::ChannelParams channel = channel::default_params();
  double noise_dbm_hz = -174.0;
  ControllerConfig controller;
  BoundsConfig bounds;
};

// Parses a config file. Unknown sections or keys and malformed values raise
// ConfigError naming the field.
ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides = {});

// Same, from text.
ExperimentConfig parse_config(const std::string& text,
                              const std::vector<std::string>& overrides = {});

// Apply one `section.key=value` assignment.
void apply_setting(ExperimentConfig& cfg, const std::string& section_key, const std::string& value);

void validate(const ExperimentConfig& cfg);

// Canonical `section.key -> value` echo, sorted; stable across runs.
std::map<std::string, std::string> echo(const ExperimentConfig& cfg);

std::string to_string(MobilityModel m);

std::size_t model_size(const ExperimentConfig& cfg);

}  // namespace mafl::harness
