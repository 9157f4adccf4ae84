#pragma once

// Oracle suites shared by `mafl validate` and the acceptance binary.

#include <cstdint>
#include <string>
#include <vector>

#include "mafl/harness/config.hpp"
#include "mafl/rng.hpp"

namespace mafl::validation {

struct CheckResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  double limit_s = 0.0;  // 0: no runtime limit
};

struct MomentEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

// E[theta^2] at contact rounds, pre-download, from the renewal contact model.
MomentEstimate staleness_second_moment(double lambda, double c, double delta, std::size_t samples,
                                       Engine& rng);

CheckResult sparsifier_contraction(std::uint64_t seed, std::size_t trials_per_size);
CheckResult power_allocation_oracle(std::uint64_t seed, std::size_t instances, std::size_t grid_points);
CheckResult staleness_dominance(std::uint64_t seed, std::size_t samples);
CheckResult sparsification_error_dominance(std::uint64_t seed, std::size_t draws);
CheckResult protocol_conservation(std::uint64_t seed, long rounds, std::size_t devices);
CheckResult dense_sync_equivalence(std::uint64_t seed, long rounds);
CheckResult energy_guarantee(const harness::ExperimentConfig& desk, std::size_t runs);
CheckResult trend_reproduction(const harness::ExperimentConfig& desk, std::size_t repetitions);
CheckResult corollary_shape(const harness::ExperimentConfig& desk);
CheckResult gradient_check(std::uint64_t seed, std::size_t points);

// Sample-based suites only (no full training sweeps).
std::vector<CheckResult> run_oracles(std::uint64_t seed, bool quick);

}  // namespace mafl::validation
