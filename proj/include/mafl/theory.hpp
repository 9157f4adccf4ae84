#pragma once

// Closed-form convergence, staleness, sparsification and energy bounds.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mafl/sparsify.hpp"

namespace mafl::theory {

struct BoundParams {
  double L = 1.0;
  double G2 = 1.0;
  double sigma = 1.0;
  double eta = 0.1;
  double delta = 10.0;
  long R = 1;
  std::size_t N = 1;
  double F0_minus_Fstar = 1.0;
};

void validate(const BoundParams& p);

// Second-moment bound on staleness. Returns +inf (and fills `diagnostic`)
// when delta/lambda is too small for the denominator to be representable.
double staleness_bound(double lambda, double c, double delta, std::string* diagnostic = nullptr);

// exp(-(u + ceil(log2 s)) / (A c))
double gamma(double rate_bps, double c, int u_bits, std::int64_t s);

double sparsification_error_bound(double x_norm2, double gamma);

// 4 (1 - gamma^2) / gamma^2 * Theta * eta^2 * G2; +inf at gamma = 0.
double memory_bound(double gamma, double Theta, double eta, double G2,
                    std::string* diagnostic = nullptr);

struct TrajectoryPoint {
  bool zeta = false;
  long theta = 0;
  std::int64_t k = 0;
  double x_norm2 = 0.0;
};

// Running sums of the trajectory-dependent convergence terms.
class BoundAccumulator {
 public:
  explicit BoundAccumulator(std::int64_t s) : s_(s) {}
  void add_round(std::span<const TrajectoryPoint> devices);
  double utility_sum() const { return utility_sum_; }
  double theta2_sum() const { return theta2_sum_; }
  long rounds() const { return rounds_; }
  std::int64_t s() const { return s_; }

 private:
  std::int64_t s_;
  double utility_sum_ = 0.0;
  double theta2_sum_ = 0.0;
  long rounds_ = 0;
};

double theorem1_rhs(const BoundAccumulator& acc, const BoundParams& p);

// Direct double loop over [round][device].
double theorem1_rhs(const std::vector<std::vector<TrajectoryPoint>>& trajectory, std::int64_t s,
                    const BoundParams& p);

// (16 - 8g - 11g^2 + 6g^3) / g^2
double theorem2_factor(double gamma);

double theorem2_rhs(const BoundParams& p, std::span<const double> gammas,
                    std::span<const double> Thetas);

struct SpeedModel {
  double C = 4.0;        // contact constant, m
  double Lambda = 400.0; // inter-contact constant, m
  double rate_bps = 200.0;
  int u_bits = 32;
  std::int64_t s = 1000;
};

// Speed-parameterised bound; +inf in the v -> 0 and v -> inf limits.
double corollary1_rhs(double v, const SpeedModel& m, const BoundParams& p);

// sqrt(max(0, 2 R^2 Phi - 2 V sum U*)), Phi = sum_n phi_n^2.
double energy_slack(long R, std::span<const double> phi, double V = 0.0,
                    double optimal_utility_sum = 0.0);

class VirtualModelTracker {
 public:
  VirtualModelTracker(std::span<const double> w0, std::size_t num_devices);
  void track(std::size_t device, std::span<const double> grad, double eta);
  const Vector& model() const { return v_; }
  // eta * sum of gradients taken at the device.
  const Vector& device_sum(std::size_t device) const { return sums_.at(device); }

 private:
  Vector v_;
  std::vector<Vector> sums_;
};

}  // namespace mafl::theory
