#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <json.hpp>
#include <sstream>

#include "mafl/error.hpp"
#include "mafl/harness/config.hpp"
#include "mafl/harness/experiment.hpp"
#include "mafl/harness/policies.hpp"

using namespace mafl;
using namespace mafl::harness;

namespace {

const char* kTiny = R"(
[run]
rounds = 30
devices = 4
seed = 3
round_duration_s = 10
target_loss = 1.5

[task]
kind = logistic
dim = 7
classes = 3
samples = 120
test_samples = 60
rho = 0.5
batch_size = 8
eta = 0.1

[mobility]
model = exponential
mean_contact_s = 8
mean_intercontact_s = 20

[channel]
bandwidth_hz = 200
p_max_w = 0.2

[controller]
policy = mads
V = 0.01
energy_budget_j = [1, 3]
)";

ExperimentConfig tiny(const std::vector<std::string>& sets = {}) { return parse_config(kTiny, sets); }

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::size_t count_char(const std::string& s, char c) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), c)); }

}  // namespace

TEST_CASE("config parsing and overrides") {
  const auto cfg = tiny({"controller.V=0.5", "run.devices=5"});
  CHECK(cfg.run.rounds == 30);
  CHECK(cfg.run.devices == 5);
  CHECK(cfg.controller.V == 0.5);
  CHECK(cfg.controller.budget_min_j == 1.0);
  CHECK(cfg.controller.budget_max_j == 3.0);
  CHECK(cfg.channel.bandwidth_hz == 200.0);
  CHECK(model_size(cfg) == 24);
  CHECK_NOTHROW(validate(cfg));

  auto c = cfg;
  apply_setting(c, "controller.energy_budget_j", "7");
  CHECK(c.controller.budget_min_j == 7.0);
  CHECK(c.controller.budget_max_j == 7.0);
  apply_setting(c, "controller.energy_budget_j", "2,4");
  CHECK(c.controller.budget_max_j == 4.0);
  apply_setting(c, "mobility.seed", "99");
  REQUIRE(c.mobility.seed.has_value());
  CHECK(*c.mobility.seed == 99);
}

TEST_CASE("config errors name the field") {
  CHECK(message_of([] { tiny({"run.nope=1"}); }).rfind("run.nope:", 0) == 0);
  CHECK(message_of([] { tiny({"run.rounds=abc"}); }).rfind("run.rounds:", 0) == 0);
  CHECK(message_of([] { tiny({"mobility.model=teleport"}); }).rfind("mobility.model:", 0) == 0);
  CHECK(message_of([] { validate(tiny({"task.s=5"})); }).rfind("task.s:", 0) == 0);
  CHECK(message_of([] { validate(tiny({"controller.policy=greedy"})); }).rfind("controller.policy:", 0) == 0);
  CHECK(message_of([] { validate(tiny({"channel.los_prob=2"})); }).rfind("channel.los_prob:", 0) == 0);
  CHECK(message_of([] { validate(tiny({"run.rounds=-1"})); }).rfind("run.rounds:", 0) == 0);
  CHECK_THROWS_AS(tiny({"novalue"}), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/mafl.ini"), ConfigError);
}

TEST_CASE("config echo is canonical") {
  const auto a = echo(tiny());
  const auto b = echo(parse_config(kTiny));
  CHECK(a == b);
  CHECK(a.at("run.rounds") == "30");
  CHECK(a.count("controller.energy_budget_j") == 1);
  // the echo parses back to the same config
  std::vector<std::string> sets;
  for (const auto& [k, v] : a)
    if (!v.empty()) sets.push_back(k + "=" + v);
  CHECK(echo(parse_config("", sets)) == a);
}

TEST_CASE("runs are deterministic and the table has nine columns") {
  const auto cfg = tiny();
  const auto a = run_experiment(cfg);
  const auto b = run_experiment(cfg);
  const auto csv = rounds_csv(a);
  CHECK(csv == rounds_csv(b));
  std::istringstream in(csv);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    CHECK(count_char(line, ',') == 8);
    ++lines;
  }
  CHECK(lines == 31);
  CHECK(a.summary.rounds == 30);
  CHECK(a.rounds.size() == 30);
}

TEST_CASE("zero rounds give an empty table") {
  const auto cfg = tiny({"run.rounds=0"});
  const auto sc = build_scenario(cfg);
  const auto t = run_policy(sc, cfg, "mads");
  CHECK(t.rounds.empty());
  CHECK(t.summary.rounds == 0);
  CHECK(t.summary.total_energy_j == 0.0);
  const auto csv = rounds_csv(t);
  CHECK(count_char(csv, '\n') == 1);
}

TEST_CASE("emitted files") {
  const auto cfg = tiny({"run.rounds=5"});
  const auto t = run_experiment(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "mafl_emit_test";
  std::filesystem::remove_all(dir);
  emit(t, cfg, dir);
  std::ifstream js(dir / "summary.json");
  const auto j = nlohmann::json::parse(js);
  CHECK(j.at("rounds").get<long>() == 5);
  CHECK(j.at("policy").get<std::string>() == "mads");
  std::ifstream csv(dir / "rounds.csv");
  std::stringstream ss;
  ss << csv.rdbuf();
  CHECK(ss.str() == rounds_csv(t));
  std::filesystem::remove_all(dir);
}

TEST_CASE("git blob hashes") {
  CHECK(git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("optimal policy equals mads with unlimited budgets") {
  auto cfg = tiny();
  auto sc = build_scenario(cfg);
  const auto opt = run_policy(sc, cfg, "optimal");
  sc.budgets.assign(sc.budgets.size(), std::numeric_limits<double>::infinity());
  const auto mads = run_policy(sc, cfg, "mads");
  CHECK(rounds_csv(opt) == rounds_csv(mads));
  for (const auto& r : mads.rounds)
    for (const auto& d : r.devices) CHECK(d.queue == 0.0);
}

TEST_CASE("very large V spends like the optimal benchmark") {
  const auto cfg = tiny({"controller.V=1e6"});
  const auto sc = build_scenario(cfg);
  CHECK(run_policy(sc, cfg, "mads").summary.total_energy_j == run_policy(sc, cfg, "optimal").summary.total_energy_j);
}

TEST_CASE("policies isolate their state") {
  const auto cfg = tiny();
  const auto sc = build_scenario(cfg);
  const auto first = rounds_csv(run_policy(sc, cfg, "mads"));
  (void)run_policy(sc, cfg, "afl_spar");
  (void)run_policy(sc, cfg, "sfl_spar");
  CHECK(rounds_csv(run_policy(sc, cfg, "mads")) == first);
  CHECK_THROWS_AS(run_policy(sc, cfg, "greedy"), ConfigError);
}

TEST_CASE("sparse baseline decisions do not depend on history") {
  controller::MadsParams mp{0.01, 32, 1000};
  auto ch = channel::default_params();
  ch.bandwidth_hz = 200.0;
  SparsePolicy pol(mp, ch, {0.3}, false);
  protocol::DecisionContext ctx{0, 5, {true, 3, 2.0, 4.0, {}}};
  ctx.contact.link.gain_h2 = 1e-8;
  const auto a = pol.decide(ctx);
  pol.end_round(std::vector<double>{100.0});
  const auto b = pol.decide(ctx);
  CHECK(a.k == b.k);
  CHECK(a.energy_E == b.energy_E);
  CHECK(a.p == ch.p_max_w);
  CHECK(a.energy_E <= 0.3 * (1.0 + 1e-12));
  CHECK(sparsify::payload_bits(a.k, mp.s, 32) <= ctx.contact.tau * a.rate_A);
}

TEST_CASE("dense baseline sends the full model at full power") {
  controller::MadsParams mp{0.01, 32, 1000};
  auto ch = channel::default_params();
  DensePolicy pol(mp, ch);
  protocol::DecisionContext ctx{0, 1, {true, 1, 1.0, 4.0, {}}};
  ctx.contact.link.gain_h2 = 1e-8;
  const auto d = pol.decide(ctx);
  CHECK(d.k == mp.s);
  CHECK(d.p == ch.p_max_w);
  ctx.contact.zeta = false;
  CHECK(pol.decide(ctx).k == 0);
}

TEST_CASE("synchronous baseline aggregates only on a full barrier") {
  const auto cfg = tiny({"run.rounds=60"});
  const auto sc = build_scenario(cfg);
  const auto t = run_policy(sc, cfg, "sfl_spar");
  std::vector<bool> pending(cfg.run.devices, false);
  std::size_t aggregations = 0;
  for (const auto& r : t.rounds) {
    for (std::size_t n = 0; n < pending.size(); ++n)
      if (r.devices[n].uploaded) pending[n] = true;
    const bool all = std::all_of(pending.begin(), pending.end(), [](bool b) { return b; });
    CHECK(r.aggregated == all);
    if (all) {
      pending.assign(pending.size(), false);
      ++aggregations;
    }
  }
  CHECK(aggregations > 0);
}

TEST_CASE("sweeps are paired across values and policies") {
  const auto cfg = tiny({"run.rounds=5"});
  const std::vector<double> values{4.0, 16.0};
  const std::vector<std::string> pols{"mads", "afl"};
  const auto runs = run_sweep(cfg, SweepAxis::kContact, values, pols, 2);
  CHECK(runs.size() == 8);
  for (const auto& r : runs) CHECK(r.table.seed == repetition_seed(cfg.run.seed, r.repetition));
  CHECK(repetition_seed(3, 0) != repetition_seed(3, 1));
  CHECK(with_axis_value(cfg, SweepAxis::kContact, 2.5).mobility.mean_contact_s == 2.5);
  CHECK(with_axis_value(cfg, SweepAxis::kV, 7.0).controller.V == 7.0);
  CHECK_THROWS_AS(with_axis_value(cfg, SweepAxis::kSpeed, 3.0), ConfigError);
  for (auto a : {SweepAxis::kContact, SweepAxis::kIntercontact, SweepAxis::kSpeed, SweepAxis::kV})
    CHECK(parse_axis(to_string(a)) == a);
  CHECK_THROWS_AS(parse_axis("colour"), ConfigError);
}

TEST_CASE("mobility seed override changes only the contact schedule") {
  const auto a = build_scenario(tiny({"mobility.seed=11"}));
  const auto b = build_scenario(tiny({"mobility.seed=11", "run.seed=4"}));
  const auto c = build_scenario(tiny({"mobility.seed=12"}));
  auto same = [](const Scenario& x, const Scenario& y) {
    for (std::size_t n = 0; n < x.setup.contacts.size(); ++n)
      for (std::size_t r = 0; r < x.setup.contacts[n].size(); ++r)
        if (x.setup.contacts[n][r].contact != y.setup.contacts[n][r].contact ||
            x.setup.contacts[n][r].tau != y.setup.contacts[n][r].tau)
          return false;
    return true;
  };
  CHECK(same(a, b));
  CHECK_FALSE(same(a, c));
}

TEST_CASE("speed and waypoint mobility build") {
  const auto s = build_scenario(tiny({"mobility.model=speed", "mobility.speed_mps=5"}));
  CHECK(s.setup.contacts.size() == 4);
  const auto w = build_scenario(tiny({"mobility.model=waypoint", "mobility.dt_s=1", "mobility.area_m=300"}));
  CHECK(w.setup.contacts[0].size() == 30);
  CHECK(w.setup.distance_m[0].size() == 30);
}
