#include <doctest.h>

#include <cmath>
#include <vector>

#include "mafl/error.hpp"
#include "mafl/mobility.hpp"

using namespace mafl;
using namespace mafl::mobility;

TEST_CASE("trace covers even a tiny horizon") {
  auto rng = SeedTree(1).engine();
  const auto t = sample_contact_trace({10.0, 10.0}, 0.001, rng);
  CHECK(t.intervals().size() >= 1);
  CHECK(t.total_duration() >= 0.001);
}

TEST_CASE("trace phases alternate and durations are positive") {
  auto rng = SeedTree(2).engine();
  const auto t = sample_contact_trace({4.0, 40.0}, 5000.0, rng);
  const auto& iv = t.intervals();
  for (std::size_t i = 0; i < iv.size(); ++i) {
    CHECK(iv[i].duration > 0.0);
    if (i > 0) CHECK(iv[i].kind != iv[i - 1].kind);
  }
  CHECK(t.locate(0.0) == 0);
  CHECK(t.locate(t.start(1)) == 1);
}

TEST_CASE("invalid parameters are rejected") {
  auto rng = SeedTree(3).engine();
  CHECK_THROWS_AS(sample_contact_trace({0.0, 1.0}, 10.0, rng), ParameterError);
  CHECK_THROWS_AS(sample_contact_trace({1.0, -1.0}, 10.0, rng), ParameterError);
}

TEST_CASE("mean contact duration matches c") {
  auto rng = SeedTree(4).engine();
  // about 10^6 contact intervals with gaps of mean 1
  const auto t = sample_contact_trace({10.0, 1.0}, 1.1e7, rng);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& iv : t.intervals())
    if (iv.kind == Phase::kContact) {
      sum += iv.duration;
      ++n;
    }
  CHECK(n > 900000);
  CHECK(std::abs(sum / static_cast<double>(n) - 10.0) < 0.05);
}

TEST_CASE("stationary start with c = lambda begins in contact half the time") {
  auto rng = SeedTree(5).engine();
  std::size_t contact = 0;
  const std::size_t n = 100000;
  for (std::size_t i = 0; i < n; ++i)
    if (sample_contact_trace({7.0, 7.0}, 1.0, rng).intervals()[0].kind == Phase::kContact) ++contact;
  CHECK(std::abs(static_cast<double>(contact) / n - 0.5) < 0.01);
}

TEST_CASE("round_contact examples") {
  const ContactTrace one({{Phase::kContact, 100.0}}, 100.0);
  auto rc = round_contact(one, 0, 10.0);
  CHECK(rc.contact);
  CHECK(rc.tau == 10.0);

  const ContactTrace gap({{Phase::kGap, 100.0}, {Phase::kContact, 5.0}}, 100.0);
  rc = round_contact(gap, 0, 10.0);
  CHECK_FALSE(rc.contact);
  CHECK(rc.tau == 0.0);

  const ContactTrace short_contact({{Phase::kContact, 12.0}, {Phase::kGap, 100.0}}, 100.0);
  rc = round_contact(short_contact, 0, 10.0);
  CHECK(rc.contact);
  CHECK(rc.tau == doctest::Approx(2.0).epsilon(1e-12));

  CHECK_THROWS_AS(round_contact(one, 10, 10.0), RangeError);
  CHECK_THROWS_AS(round_contact(one, -1, 10.0), ParameterError);
}

TEST_CASE("residual contact time is memoryless") {
  auto rng = SeedTree(6).engine();
  const double c = 10.0, delta = 200.0;
  double sum = 0.0, sum2 = 0.0;
  std::size_t n = 0;
  while (n < 100000) {
    const auto t = sample_contact_trace({c, 10.0}, delta, rng);
    const auto rc = round_contact(t, 0, delta);
    if (!rc.contact) continue;
    sum += rc.tau;
    sum2 += rc.tau * rc.tau;
    ++n;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum2 / n - mean * mean) / (n - 1.0));
  CHECK(std::abs(mean - c) <= 3.0 * se);
}

TEST_CASE("contact_rounds agrees with scanning round_contact") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto rng = SeedTree(seed).child("cr").engine();
    const double delta = 1.0 + static_cast<double>(seed % 7);
    const auto t = sample_contact_trace({3.0, 20.0}, 2000.0, rng);
    std::vector<long> scan;
    for (long r = 0; static_cast<double>(r + 1) * delta <= t.horizon(); ++r)
      if (round_contact(t, r, delta).contact) scan.push_back(r);
    CHECK(contact_rounds(t, delta) == scan);
  }
}

TEST_CASE("speed scaling") {
  auto p = scaled_params({100.0, 1000.0, 10.0});
  CHECK(p.mean_contact == 10.0);
  CHECK(p.mean_intercontact == 100.0);
  p = scaled_params({100.0, 1000.0, 1.0});
  CHECK(p.mean_contact == 100.0);
  CHECK(p.mean_intercontact == 1000.0);
  const auto a = scaled_params({37.0, 910.0, 3.0});
  const auto b = scaled_params({37.0, 910.0, 6.0});
  CHECK(b.mean_contact == doctest::Approx(a.mean_contact / 2.0));
  CHECK(b.mean_intercontact == doctest::Approx(a.mean_intercontact / 2.0));
}

TEST_CASE("waypoint leg advance") {
  auto rng = SeedTree(7).engine();
  WaypointState s;
  s.area = {1000.0, 1000.0};
  s.position = {0.0, 0.0};
  s.destination = {30.0, 40.0};
  s.speed = 5.0;
  s.pause_max = 10.0;
  const auto moved = advance_waypoint(s, 1.0, rng);
  CHECK(moved.position.x == doctest::Approx(3.0));
  CHECK(moved.position.y == doctest::Approx(4.0));

  const auto arrived = advance_waypoint(s, 10.0, rng);
  CHECK(arrived.position.x == 30.0);
  CHECK(arrived.position.y == 40.0);
  CHECK(arrived.pause_remaining > 0.0);
}

TEST_CASE("waypoint contact boundary is inclusive") {
  WaypointState a, b;
  a.comm_range = b.comm_range = 100.0;
  a.position = {0.0, 0.0};
  b.position = {60.0, 80.0};
  CHECK(waypoint_contact(a, b));
  b.position = {60.0, 80.1};
  CHECK_FALSE(waypoint_contact(a, b));
  b.position = a.position;
  CHECK(waypoint_contact(a, b));
}

TEST_CASE("waypoint contacts get shorter as walkers speed up") {
  auto mean_contact = [](double v) {
    WaypointScenario sc;
    sc.mean_speed = v;
    sc.pause_max = 0.0;
    sc.dt = 0.5;
    const auto wc = simulate_waypoint_contacts(sc, 20, 1e4, 10.0, SeedTree(8).child("wp"));
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& t : wc.traces)
      for (const auto& iv : t.intervals())
        if (iv.kind == Phase::kContact) {
          sum += iv.duration;
          ++n;
        }
    REQUIRE(n > 0);
    return sum / static_cast<double>(n);
  };
  const double slow = mean_contact(2.0), mid = mean_contact(8.0), fast = mean_contact(32.0);
  CHECK(slow > mid);
  CHECK(mid > fast);
}

TEST_CASE("waypoint simulation is deterministic and sized") {
  WaypointScenario sc;
  sc.dt = 1.0;
  const auto a = simulate_waypoint_contacts(sc, 3, 500.0, 10.0, SeedTree(9));
  const auto b = simulate_waypoint_contacts(sc, 3, 500.0, 10.0, SeedTree(9));
  REQUIRE(a.traces.size() == 3);
  CHECK(a.epoch_distance == b.epoch_distance);
  CHECK(a.epoch_distance[0].size() == 50);
  for (const auto& t : a.traces) CHECK(t.total_duration() >= 500.0);
}
