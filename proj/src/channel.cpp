#include "mafl/channel.hpp"

#include <cmath>

#include "mafl/error.hpp"
#include "mafl/sparsify.hpp"

namespace mafl::channel {

double noise_psd_from_dbm_hz(double dbm_per_hz) { return std::pow(10.0, (dbm_per_hz - 30.0) / 10.0); }

ChannelParams default_params() {
  ChannelParams p;
  p.noise_psd_w_per_hz = noise_psd_from_dbm_hz(-174.0);
  return p;
}

void validate(const ChannelParams& p) {
  if (!(p.bandwidth_hz > 0.0)) throw ParameterError("channel.bandwidth_hz must be > 0");
  if (!(p.carrier_ghz > 0.0)) throw ParameterError("channel.carrier_ghz must be > 0");
  if (!(p.noise_psd_w_per_hz > 0.0)) throw ParameterError("channel noise PSD must be > 0");
  if (!(p.p_max_w > 0.0)) throw ParameterError("channel.p_max_w must be > 0");
  if (p.shadow_sigma_los_db < 0.0 || p.shadow_sigma_nlos_db < 0.0)
    throw ParameterError("shadowing sigma must be >= 0");
  if (!(p.los_probability >= 0.0 && p.los_probability <= 1.0))
    throw ParameterError("channel.los_prob must lie in [0, 1]");
}

double pathloss_db(double distance_m, double carrier_ghz, bool los) {
  if (!(distance_m > 0.0) || !(carrier_ghz > 0.0))
    throw ParameterError("pathloss needs positive distance and carrier");
  const double slope = los ? 21.0 : 31.9;
  return 32.4 + slope * std::log10(distance_m) + 20.0 * std::log10(carrier_ghz);
}

LinkState sample_link(const ChannelParams& params, double distance_m, Engine& rng) {
  if (!(distance_m > 0.0)) throw ParameterError("link distance must be positive");
  std::bernoulli_distribution los(params.los_probability);
  LinkState link;
  link.distance_m = distance_m;
  link.is_los = los(rng);
  const double sigma = link.is_los ? params.shadow_sigma_los_db : params.shadow_sigma_nlos_db;
  if (sigma > 0.0) {
    std::normal_distribution<double> shadow(0.0, sigma);
    link.shadowing_db = shadow(rng);
  }
  const double loss = pathloss_db(distance_m, params.carrier_ghz, link.is_los) + link.shadowing_db;
  link.gain_h2 = std::pow(10.0, -loss / 10.0);
  return link;
}

double transmission_rate(double power_w, const LinkState& link, const ChannelParams& params) {
  if (power_w < 0.0) throw ParameterError("transmit power must be >= 0");
  const double snr = power_w * link.gain_h2 / (params.bandwidth_hz * params.noise_psd_w_per_hz);
  return params.bandwidth_hz * std::log2(1.0 + snr);
}

double upload_energy(double power_w, std::int64_t k, std::int64_t s, int u_bits, double rate_bps) {
  if (k < 0) throw ParameterError("k must be >= 0");
  if (k == 0) return 0.0;
  if (!(rate_bps > 0.0)) throw InfeasibleTransmission("k > 0 elements over a zero-rate link");
  return power_w * sparsify::payload_bits(k, s, u_bits) / rate_bps;
}

}  // namespace mafl::channel
