#include "mafl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mafl/error.hpp"
#include "mafl/kernels.hpp"

namespace mafl::theory {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void note(std::string* diagnostic, const char* msg) {
  if (diagnostic) *diagnostic = msg;
}

// (a^4 - 3a^3 + 4a^2) / (1 - a)^2 with a = exp(-x).
double staleness_fraction(double x, std::string* diagnostic) {
  const double a = std::exp(-x);
  const double one_minus_a = -std::expm1(-x);
  const double den = one_minus_a * one_minus_a;
  if (!(den > 0.0) || !std::isfinite(den)) {
    note(diagnostic, "staleness bound diverges: delta/lambda underflows the denominator");
    return kInf;
  }
  const double a2 = a * a;
  return (a2 * a2 - 3.0 * a2 * a + 4.0 * a2) / den;
}

}  // namespace

void validate(const BoundParams& p) {
  if (!(p.L > 0.0)) throw ParameterError("bounds.L must be > 0");
  if (!(p.G2 > 0.0)) throw ParameterError("bounds.G2 must be > 0");
  if (!(p.sigma > 0.0)) throw ParameterError("bounds.sigma must be > 0");
  if (!(p.eta > 0.0)) throw ParameterError("bounds.eta must be > 0");
  if (!(p.delta > 0.0)) throw ParameterError("bounds.delta must be > 0");
  if (p.R < 1) throw ParameterError("bounds.R must be >= 1");
  if (p.N < 1) throw ParameterError("bounds.N must be >= 1");
  if (!(p.F0_minus_Fstar > 0.0)) throw ParameterError("bounds.F0_minus_Fstar must be > 0");
  if (p.sigma * p.sigma > p.G2) throw ParameterError("bounds.sigma: sigma^2 must not exceed G2");
}

double staleness_bound(double lambda, double c, double delta, std::string* diagnostic) {
  if (!(lambda > 0.0) || !(c > 0.0) || !(delta > 0.0))
    throw ParameterError("lambda, c and delta must be > 0");
  const double frac = staleness_fraction(delta / lambda, diagnostic);
  if (std::isinf(frac)) return kInf;
  return 1.0 + lambda / (lambda + c) * frac;
}

double gamma(double rate_bps, double c, int u_bits, std::int64_t s) {
  if (!(rate_bps > 0.0) || !(c > 0.0)) throw ParameterError("rate and mean contact must be > 0");
  return std::exp(-sparsify::element_bits(s, u_bits) / (rate_bps * c));
}

double sparsification_error_bound(double x_norm2, double g) {
  if (g < 0.0 || g > 1.0) throw ParameterError("gamma must lie in [0, 1]");
  return (1.0 - g) * x_norm2;
}

double memory_bound(double g, double Theta, double eta, double G2, std::string* diagnostic) {
  if (g < 0.0 || g > 1.0) throw ParameterError("gamma must lie in [0, 1]");
  if (g == 0.0) {
    note(diagnostic, "memory bound diverges at gamma = 0");
    return kInf;
  }
  return 4.0 * (1.0 - g * g) / (g * g) * Theta * eta * eta * G2;
}

void BoundAccumulator::add_round(std::span<const TrajectoryPoint> devices) {
  for (const auto& d : devices) {
    if (d.zeta) {
      const double frac = static_cast<double>(d.k) / static_cast<double>(s_);
      utility_sum_ += static_cast<double>(d.theta) * (5.0 - 3.0 * frac) * d.x_norm2;
    }
    theta2_sum_ += static_cast<double>(d.theta) * static_cast<double>(d.theta);
  }
  ++rounds_;
}

namespace {

double theorem1_combine(double usum, double t2sum, const BoundParams& p) {
  const double NR = static_cast<double>(p.N) * static_cast<double>(p.R);
  return 4.0 * p.F0_minus_Fstar / (p.eta * static_cast<double>(p.R)) +
         4.0 * p.L * p.L / NR * usum + 8.0 * p.eta * p.eta * p.L * p.L * p.G2 / NR * t2sum +
         4.0 * p.eta * p.L * p.sigma / static_cast<double>(p.N);
}

}  // namespace

double theorem1_rhs(const BoundAccumulator& acc, const BoundParams& p) {
  return theorem1_combine(acc.utility_sum(), acc.theta2_sum(), p);
}

double theorem1_rhs(const std::vector<std::vector<TrajectoryPoint>>& trajectory, std::int64_t s,
                    const BoundParams& p) {
  double usum = 0.0;
  double t2sum = 0.0;
  for (std::size_t r = 0; r < trajectory.size(); ++r) {
    for (std::size_t n = 0; n < trajectory[r].size(); ++n) {
      const auto& d = trajectory[r][n];
      const double z = d.zeta ? 1.0 : 0.0;
      const double th = static_cast<double>(d.theta);
      usum += z * th * (5.0 - 3.0 * static_cast<double>(d.k) / static_cast<double>(s)) * d.x_norm2;
      t2sum += th * th;
    }
  }
  return theorem1_combine(usum, t2sum, p);
}

double theorem2_factor(double g) {
  if (!(g > 0.0) || g > 1.0) throw ParameterError("gamma must lie in (0, 1]");
  return (16.0 - 8.0 * g - 11.0 * g * g + 6.0 * g * g * g) / (g * g);
}

double theorem2_rhs(const BoundParams& p, std::span<const double> gammas,
                    std::span<const double> Thetas) {
  if (gammas.size() != p.N || Thetas.size() != p.N)
    throw DimensionError("need one gamma and one Theta per device");
  const double sqrtR = std::sqrt(static_cast<double>(p.R));
  double sum = 0.0;
  for (std::size_t n = 0; n < p.N; ++n) sum += theorem2_factor(gammas[n]) * Thetas[n];
  const double NR = static_cast<double>(p.N) * static_cast<double>(p.R);
  return 8.0 * p.L * p.F0_minus_Fstar / sqrtR + 2.0 * p.sigma / (static_cast<double>(p.N) * sqrtR) +
         p.G2 / NR * sum;
}

double corollary1_rhs(double v, const SpeedModel& m, const BoundParams& p) {
  if (!(v > 0.0)) throw ParameterError("speed must be > 0");
  if (!(m.C > 0.0) || !(m.Lambda > 0.0) || !(m.rate_bps > 0.0))
    throw ParameterError("C, Lambda and rate must be > 0");
  const double sqrtR = std::sqrt(static_cast<double>(p.R));
  const double b = sparsify::element_bits(m.s, m.u_bits);
  const double growth = std::exp(2.0 * b * v / (m.rate_bps * m.C));
  const double frac = staleness_fraction(p.delta * v / m.Lambda, nullptr);
  const double staleness = 1.0 + m.Lambda / (m.Lambda + m.C) * frac;
  const double third = 16.0 * p.G2 * growth / static_cast<double>(p.R) * staleness;
  return 8.0 * p.L * p.F0_minus_Fstar / sqrtR + 2.0 * p.sigma / (static_cast<double>(p.N) * sqrtR) +
         third;
}

double energy_slack(long R, std::span<const double> phi, double V, double optimal_utility_sum) {
  double Phi = 0.0;
  for (double f : phi) Phi += f * f;
  const double Rd = static_cast<double>(R);
  return std::sqrt(std::max(0.0, 2.0 * Rd * Rd * Phi - 2.0 * V * optimal_utility_sum));
}

VirtualModelTracker::VirtualModelTracker(std::span<const double> w0, std::size_t num_devices)
    : v_(w0.begin(), w0.end()), sums_(num_devices, Vector(w0.size(), 0.0)) {
  if (num_devices == 0) throw ParameterError("tracker needs N >= 1");
}

void VirtualModelTracker::track(std::size_t device, std::span<const double> grad, double eta) {
  if (grad.size() != v_.size()) throw DimensionError("gradient length != model size");
  kernels::axpy(-eta / static_cast<double>(sums_.size()), grad, v_);
  kernels::axpy(eta, grad, sums_.at(device));
}

}  // namespace mafl::theory
