#include "mafl/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mafl/error.hpp"

namespace mafl::mobility {

void validate(const ContactParams& p) {
  auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!ok(p.mean_contact)) throw ParameterError("mean contact time must be positive and finite");
  if (!ok(p.mean_intercontact))
    throw ParameterError("mean inter-contact time must be positive and finite");
}

ContactTrace::ContactTrace(std::vector<Interval> intervals, double horizon)
    : intervals_(std::move(intervals)), horizon_(horizon) {
  if (intervals_.empty()) throw ParameterError("contact trace needs at least one interval");
  starts_.reserve(intervals_.size() + 1);
  double t = 0.0;
  starts_.push_back(t);
  for (std::size_t i = 0; i < intervals_.size(); ++i) {
    if (!(intervals_[i].duration > 0.0)) throw ParameterError("interval durations must be > 0");
    if (i > 0 && intervals_[i].kind == intervals_[i - 1].kind)
      throw ParameterError("contact trace intervals must alternate");
    t += intervals_[i].duration;
    starts_.push_back(t);
  }
  if (t < horizon_) throw ParameterError("contact trace does not cover its horizon");
}

std::size_t ContactTrace::locate(double t) const {
  if (t < 0.0 || t >= starts_.back()) throw RangeError("time outside contact trace");
  auto it = std::upper_bound(starts_.begin(), starts_.end(), t);
  return static_cast<std::size_t>(it - starts_.begin()) - 1;
}

ContactTrace sample_contact_trace(const ContactParams& params, double horizon, Engine& rng) {
  validate(params);
  if (!(horizon > 0.0)) throw ParameterError("horizon must be positive");
  const double c = params.mean_contact;
  const double lambda = params.mean_intercontact;
  std::bernoulli_distribution start_in_contact(c / (c + lambda));
  std::exponential_distribution<double> contact_len(1.0 / c);
  std::exponential_distribution<double> gap_len(1.0 / lambda);

  std::vector<Interval> out;
  Phase phase = start_in_contact(rng) ? Phase::kContact : Phase::kGap;
  double t = 0.0;
  while (t < horizon || out.empty()) {
    double d = phase == Phase::kContact ? contact_len(rng) : gap_len(rng);
    // exponential_distribution may return exactly 0
    if (!(d > 0.0)) d = std::numeric_limits<double>::min();
    out.push_back({phase, d});
    t += d;
    phase = phase == Phase::kContact ? Phase::kGap : Phase::kContact;
  }
  return ContactTrace(std::move(out), horizon);
}

RoundContact round_contact(const ContactTrace& trace, long round, double round_duration) {
  if (round < 0 || !(round_duration > 0.0)) throw ParameterError("invalid round query");
  const double epoch = static_cast<double>(round + 1) * round_duration;
  if (epoch > trace.horizon()) throw RangeError("round epoch beyond trace horizon");
  const std::size_t i = trace.locate(epoch);
  const Interval& iv = trace.intervals()[i];
  if (iv.kind != Phase::kContact) return {};
  const double remaining = trace.start(i + 1) - epoch;
  return {true, std::min(remaining, round_duration)};
}

std::vector<long> contact_rounds(const ContactTrace& trace, double round_duration) {
  if (!(round_duration > 0.0)) throw ParameterError("round duration must be positive");
  std::vector<long> out;
  const long last = static_cast<long>(std::floor(trace.horizon() / round_duration)) - 1;
  const auto& ivs = trace.intervals();
  for (std::size_t i = 0; i < ivs.size(); ++i) {
    if (ivs[i].kind != Phase::kContact) continue;
    const double a = trace.start(i);
    const double b = trace.start(i + 1);
    // epochs (r+1)*delta with a <= epoch < b
    long r = static_cast<long>(std::ceil(a / round_duration)) - 1;
    if (r < 0) r = 0;
    while (static_cast<double>(r + 1) * round_duration < a) ++r;
    for (; r <= last; ++r) {
      const double epoch = static_cast<double>(r + 1) * round_duration;
      if (epoch >= b) break;
      if (epoch > trace.horizon()) break;
      out.push_back(r);
    }
    if (a > trace.horizon()) break;
  }
  return out;
}

ContactParams scaled_params(const SpeedScaling& s) {
  if (!(s.v > 0.0) || !std::isfinite(s.v)) throw ParameterError("speed must be positive");
  if (!(s.C > 0.0) || !(s.Lambda > 0.0)) throw ParameterError("C and Lambda must be positive");
  return {s.C / s.v, s.Lambda / s.v};
}

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

namespace {

Vec2 uniform_point(Vec2 area, Engine& rng) {
  std::uniform_real_distribution<double> ux(0.0, area.x);
  std::uniform_real_distribution<double> uy(0.0, area.y);
  const double x = ux(rng);
  return {x, uy(rng)};
}

double leg_speed(double mean_speed, Engine& rng) {
  std::uniform_real_distribution<double> u(0.5 * mean_speed, 1.5 * mean_speed);
  return u(rng);
}

void new_leg(WaypointState& s, Engine& rng) {
  s.destination = uniform_point(s.area, rng);
  s.speed = leg_speed(s.mean_speed, rng);
}

}  // namespace

WaypointState make_waypoint(Vec2 area, double comm_range, double mean_speed, double pause_max,
                            Engine& rng) {
  if (!(area.x > 0.0) || !(area.y > 0.0)) throw ParameterError("waypoint area must be positive");
  if (!(comm_range > 0.0)) throw ParameterError("communication range must be positive");
  if (!(mean_speed > 0.0)) throw ParameterError("mean speed must be positive");
  if (pause_max < 0.0) throw ParameterError("pause_max must be >= 0");
  WaypointState s;
  s.area = area;
  s.comm_range = comm_range;
  s.mean_speed = mean_speed;
  s.pause_max = pause_max;
  s.position = uniform_point(area, rng);
  new_leg(s, rng);
  return s;
}

WaypointState advance_waypoint(WaypointState s, double dt, Engine& rng) {
  double remaining = dt;
  std::uniform_real_distribution<double> pause(0.0, s.pause_max);
  // Bounded number of legs per call; each arrival consumes travel or pause time.
  for (int guard = 0; remaining > 0.0 && guard < 1'000'000; ++guard) {
    if (s.pause_remaining > 0.0) {
      const double used = std::min(remaining, s.pause_remaining);
      s.pause_remaining -= used;
      remaining -= used;
      if (s.pause_remaining <= 0.0) {
        s.pause_remaining = 0.0;
        new_leg(s, rng);
      }
      continue;
    }
    if (!(s.speed > 0.0)) break;
    const double dist = distance(s.position, s.destination);
    if (dist <= s.speed * remaining) {
      s.position = s.destination;
      remaining -= dist / s.speed;
      s.pause_remaining = s.pause_max > 0.0 ? pause(rng) : 0.0;
      if (s.pause_remaining <= 0.0) {
        s.pause_remaining = 0.0;
        new_leg(s, rng);
      }
    } else {
      const double f = s.speed * remaining / dist;
      s.position.x += (s.destination.x - s.position.x) * f;
      s.position.y += (s.destination.y - s.position.y) * f;
      remaining = 0.0;
    }
  }
  return s;
}

bool waypoint_contact(const WaypointState& a, const WaypointState& b) {
  return distance(a.position, b.position) <= a.comm_range;
}

WaypointContacts simulate_waypoint_contacts(const WaypointScenario& sc, std::size_t devices,
                                            double horizon, double round_duration,
                                            const SeedTree& seeds) {
  if (!(sc.dt > 0.0)) throw ParameterError("waypoint dt must be positive");
  if (!(horizon > 0.0) || !(round_duration > 0.0))
    throw ParameterError("horizon and round duration must be positive");

  Engine mes_rng = seeds.child("mes").engine();
  WaypointState mes = make_waypoint(sc.area, sc.comm_range, sc.mean_speed, sc.pause_max, mes_rng);
  std::vector<Engine> rngs;
  std::vector<WaypointState> walkers;
  for (std::size_t n = 0; n < devices; ++n) {
    rngs.push_back(seeds.child(n).engine());
    walkers.push_back(make_waypoint(sc.area, sc.comm_range, sc.mean_speed, sc.pause_max, rngs[n]));
  }

  const double end = horizon + round_duration;
  const auto steps = static_cast<long>(std::ceil(end / sc.dt));
  const long rounds = static_cast<long>(std::floor(horizon / round_duration));

  std::vector<std::vector<Interval>> ivs(devices);
  WaypointContacts out;
  out.epoch_distance.assign(devices, std::vector<double>(static_cast<std::size_t>(rounds), 0.0));

  auto record = [&](std::size_t n, bool in_contact) {
    const Phase ph = in_contact ? Phase::kContact : Phase::kGap;
    auto& v = ivs[n];
    if (!v.empty() && v.back().kind == ph) {
      v.back().duration += sc.dt;
    } else {
      v.push_back({ph, sc.dt});
    }
  };

  long next_epoch = 0;  // 0-based round whose epoch is next to be recorded
  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * sc.dt;
    while (next_epoch < rounds && static_cast<double>(next_epoch + 1) * round_duration < t + sc.dt) {
      for (std::size_t n = 0; n < devices; ++n)
        out.epoch_distance[n][static_cast<std::size_t>(next_epoch)] =
            distance(walkers[n].position, mes.position);
      ++next_epoch;
    }
    for (std::size_t n = 0; n < devices; ++n) record(n, waypoint_contact(walkers[n], mes));
    mes = advance_waypoint(mes, sc.dt, mes_rng);
    for (std::size_t n = 0; n < devices; ++n)
      walkers[n] = advance_waypoint(walkers[n], sc.dt, rngs[n]);
  }
  for (; next_epoch < rounds; ++next_epoch)
    for (std::size_t n = 0; n < devices; ++n)
      out.epoch_distance[n][static_cast<std::size_t>(next_epoch)] =
          distance(walkers[n].position, mes.position);

  out.traces.reserve(devices);
  for (std::size_t n = 0; n < devices; ++n) out.traces.emplace_back(std::move(ivs[n]), horizon);
  return out;
}

}  // namespace mafl::mobility
