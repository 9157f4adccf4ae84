#pragma once

// Device mobility: the alternating contact/inter-contact renewal process and
// a random-waypoint simulator that produces the same trace type.

#include <cstddef>
#include <vector>

#include "mafl/rng.hpp"

namespace mafl::mobility {

enum class Phase { kContact, kGap };

struct Interval {
  Phase kind;
  double duration;  // seconds, > 0
};

struct ContactParams {
  double mean_contact;       // c, seconds
  double mean_intercontact;  // lambda, seconds
};

void validate(const ContactParams& p);

// Immutable sequence of strictly alternating CONTACT/GAP intervals starting at
// t = 0 whose cumulative duration reaches at least the horizon. Intervals are
// half-open: [start, start + duration).
class ContactTrace {
 public:
  ContactTrace(std::vector<Interval> intervals, double horizon);

  const std::vector<Interval>& intervals() const { return intervals_; }
  double horizon() const { return horizon_; }
  double total_duration() const { return starts_.back(); }
  double start(std::size_t i) const { return starts_[i]; }

  // Index of the interval containing time t, 0 <= t < total_duration().
  std::size_t locate(double t) const;

 private:
  std::vector<Interval> intervals_;
  std::vector<double> starts_;  // size intervals_ + 1, last entry is the total
  double horizon_;
};

// First phase is CONTACT with the stationary probability c/(c+lambda); all
// durations are exponential with the phase mean.
ContactTrace sample_contact_trace(const ContactParams& params, double horizon, Engine& rng);

struct RoundContact {
  bool contact = false;  // zeta
  double tau = 0.0;      // usable upload window, seconds
};

// Round r (0-based) uploads at the epoch (r+1)*delta. Contact iff the epoch
// lies in a CONTACT interval; tau is the rest of that interval capped at delta.
RoundContact round_contact(const ContactTrace& trace, long round, double round_duration);

// 0-based indices of every contact round whose epoch lies within the horizon,
// in increasing order. Equivalent to scanning round_contact but linear in the
// number of intervals plus contact rounds.
std::vector<long> contact_rounds(const ContactTrace& trace, double round_duration);

struct SpeedScaling {
  double C;       // contact constant, meters
  double Lambda;  // inter-contact constant, meters
  double v;       // mean speed, m/s
};

// (C/v, Lambda/v)
ContactParams scaled_params(const SpeedScaling& s);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

double distance(Vec2 a, Vec2 b);

struct WaypointState {
  Vec2 position;
  Vec2 destination;
  double speed = 0.0;  // current leg, m/s
  double pause_remaining = 0.0;
  Vec2 area;                // width, height in meters
  double comm_range = 100;  // meters
  double mean_speed = 1.0;  // legs draw speed uniformly on [0.5, 1.5] * mean_speed
  double pause_max = 10.0;  // pauses are uniform on [0, pause_max]
};

// Uniform position and destination, fresh leg speed, no pause.
WaypointState make_waypoint(Vec2 area, double comm_range, double mean_speed, double pause_max,
                            Engine& rng);

WaypointState advance_waypoint(WaypointState state, double dt, Engine& rng);

// Distance <= comm_range (boundary inclusive).
bool waypoint_contact(const WaypointState& a, const WaypointState& b);

struct WaypointScenario {
  Vec2 area{1000.0, 1000.0};
  double comm_range = 100.0;
  double mean_speed = 10.0;
  double pause_max = 10.0;
  double dt = 0.1;  // simulation step, seconds
};

struct WaypointContacts {
  std::vector<ContactTrace> traces;                   // per device
  std::vector<std::vector<double>> epoch_distance;    // per device, per 0-based round
};

// One MES walker and `devices` walkers, each with its own stream. The contact
// indicator is sampled every dt; the traces cover horizon + round_duration so
// tau at the last epoch is not truncated.
WaypointContacts simulate_waypoint_contacts(const WaypointScenario& scenario, std::size_t devices,
                                            double horizon, double round_duration,
                                            const SeedTree& seeds);

}  // namespace mafl::mobility
