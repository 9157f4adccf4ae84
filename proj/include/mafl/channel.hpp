#pragma once

// Uplink budget for one device-MES pair: UMi street-canyon pathloss,
// log-normal shadowing, Shannon rate and upload energy.

#include <cstdint>

#include "mafl/rng.hpp"

namespace mafl::channel {

struct ChannelParams {
  double bandwidth_hz = 1e6;         // B
  double carrier_ghz = 3.5;          // beta
  double noise_psd_w_per_hz = 0.0;   // N0; see noise_psd_from_dbm_hz
  double shadow_sigma_los_db = 4.0;
  double shadow_sigma_nlos_db = 8.2;
  double los_probability = 0.5;
  double p_max_w = 0.2;
};

double noise_psd_from_dbm_hz(double dbm_per_hz);
ChannelParams default_params();
void validate(const ChannelParams& p);

struct LinkState {
  double distance_m = 1.0;
  bool is_los = true;
  double shadowing_db = 0.0;
  double gain_h2 = 1.0;  // linear power gain |h|^2
};

// LOS: 32.4 + 21 log10 d + 20 log10 beta; NLOS: 32.4 + 31.9 log10 d + 20 log10 beta.
double pathloss_db(double distance_m, double carrier_ghz, bool los);

LinkState sample_link(const ChannelParams& params, double distance_m, Engine& rng);

// B log2(1 + p |h|^2 / (B N0)), bits/s.
double transmission_rate(double power_w, const LinkState& link, const ChannelParams& params);

// p * payload_bits(k, s, u) / A; zero when k == 0.
double upload_energy(double power_w, std::int64_t k, std::int64_t s, int u_bits, double rate_bps);

}  // namespace mafl::channel
