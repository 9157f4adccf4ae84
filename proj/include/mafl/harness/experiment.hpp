#pragma once

// Scenario construction, single runs, sweeps and result files.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mafl/harness/config.hpp"
#include "mafl/protocol.hpp"

namespace mafl::harness {

// Everything a run needs except the policy. Built once and shared across
// policies so their data, mobility and channel draws coincide.
struct Scenario {
  protocol::WorldSetup setup;
  std::vector<double> budgets;             // E^con per device, Joules
  std::vector<double> allowance;           // budget / number of contact rounds
  std::vector<std::size_t> contact_rounds; // per device, over the run
  std::vector<std::string> warnings;
};

Scenario build_scenario(const ExperimentConfig& cfg);

struct Summary {
  long rounds = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double final_test_loss = 0.0;
  double final_metric = 0.0;
  long rounds_to_target = 0;  // first round with held-out loss <= target; rounds + 1 if never
  std::vector<double> energy_j;  // per device
  double total_energy_j = 0.0;
  double mean_theta = 0.0;  // over contact events
  long max_theta = 0;
  std::size_t contacts = 0;
  std::size_t uploads = 0;
  std::size_t failed_uploads = 0;
};

struct MetricsTable {
  std::string policy;
  std::uint64_t seed = 0;
  std::vector<protocol::RoundRecord> rounds;
  std::vector<double> test_loss;  // held-out loss per round
  std::vector<double> budgets;
  Summary summary;
};

MetricsTable run_policy(const Scenario& scenario, const ExperimentConfig& cfg,
                        const std::string& policy);

// Uses cfg.controller.policy.
MetricsTable run_experiment(const ExperimentConfig& cfg);

enum class SweepAxis { kContact, kIntercontact, kSpeed, kV };

SweepAxis parse_axis(const std::string& s);
std::string to_string(SweepAxis a);

// Sets the swept quantity on a copy of the config.
ExperimentConfig with_axis_value(const ExperimentConfig& cfg, SweepAxis axis, double value);

struct SweepRun {
  double value = 0.0;
  std::string policy;
  std::size_t repetition = 0;
  MetricsTable table;
};

// One run per (value, policy, repetition). Repetition i uses the same child
// seed for every value and policy, so comparisons are paired.
std::vector<SweepRun> run_sweep(const ExperimentConfig& cfg, SweepAxis axis,
                                std::span<const double> values,
                                std::span<const std::string> policies, std::size_t repetitions);

std::uint64_t repetition_seed(std::uint64_t root, std::size_t repetition);

// 9-column per-round table.
std::string rounds_csv(const MetricsTable& table);

// Hex SHA-1 of a git blob holding `text`.
std::string git_blob_sha1(const std::string& text);

// Writes rounds.csv and summary.json into `dir`.
void emit(const MetricsTable& table, const ExperimentConfig& cfg, const std::filesystem::path& dir);

// Writes sweep.csv (one row per run) and a subdirectory per run.
void emit_sweep(const std::vector<SweepRun>& runs, const ExperimentConfig& cfg, SweepAxis axis,
                const std::filesystem::path& dir);

}  // namespace mafl::harness
