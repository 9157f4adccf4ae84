#include "mafl/harness/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "mafl/error.hpp"

namespace mafl::harness {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& field, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "inf" || v == "+inf") return INFINITY;
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(field + ": expected a number, got '" + raw + "'");
}

template <class Int>
Int parse_int(const std::string& field, const std::string& raw) {
  const std::string v = trim(raw);
  Int out{};
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size() || v.empty())
    throw ConfigError(field + ": expected an integer, got '" + raw + "'");
  return out;
}

bool parse_bool(const std::string& field, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(field + ": expected true/false, got '" + raw + "'");
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
Field num(T ExperimentConfig::*section, double T::*member) {
  return {[=](ExperimentConfig& c, const std::string& f, const std::string& v) {
            (c.*section).*member = parse_double(f, v);
          },
          [=](const ExperimentConfig& c) { return fmt_double((c.*section).*member); }};
}

template <class T, class Int>
Field integer(T ExperimentConfig::*section, Int T::*member) {
  return {[=](ExperimentConfig& c, const std::string& f, const std::string& v) {
            (c.*section).*member = parse_int<Int>(f, v);
          },
          [=](const ExperimentConfig& c) { return std::to_string((c.*section).*member); }};
}

template <class T>
Field text(T ExperimentConfig::*section, std::string T::*member) {
  return {[=](ExperimentConfig& c, const std::string&, const std::string& v) {
            (c.*section).*member = trim(v);
          },
          [=](const ExperimentConfig& c) { return (c.*section).*member; }};
}

Field chan(double channel::ChannelParams::*member) {
  return {[=](ExperimentConfig& c, const std::string& f, const std::string& v) {
            c.channel.*member = parse_double(f, v);
          },
          [=](const ExperimentConfig& c) { return fmt_double(c.channel.*member); }};
}

MobilityModel parse_mobility(const std::string& field, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "exponential") return MobilityModel::kExponential;
  if (v == "speed") return MobilityModel::kSpeed;
  if (v == "waypoint") return MobilityModel::kWaypoint;
  throw ConfigError(field + ": expected exponential, speed or waypoint, got '" + raw + "'");
}

// "x", "[a,b]" or "a,b"
void parse_budget(ExperimentConfig& c, const std::string& field, const std::string& raw) {
  std::string v = trim(raw);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') throw ConfigError(field + ": unterminated range '" + raw + "'");
    v = v.substr(1, v.size() - 2);
  }
  const auto comma = v.find(',');
  if (comma == std::string::npos) {
    c.controller.budget_min_j = c.controller.budget_max_j = parse_double(field, v);
  } else {
    c.controller.budget_min_j = parse_double(field, v.substr(0, comma));
    c.controller.budget_max_j = parse_double(field, v.substr(comma + 1));
  }
}

const std::map<std::string, Field>& registry() {
  static const std::map<std::string, Field> fields = [] {
    using E = ExperimentConfig;
    std::map<std::string, Field> f;
    f["run.rounds"] = integer(&E::run, &RunConfig::rounds);
    f["run.devices"] = integer(&E::run, &RunConfig::devices);
    f["run.seed"] = integer(&E::run, &RunConfig::seed);
    f["run.round_duration_s"] = num(&E::run, &RunConfig::round_duration_s);
    f["run.output_path"] = text(&E::run, &RunConfig::output_path);
    f["run.target_loss"] = num(&E::run, &RunConfig::target_loss);
    f["run.evaluate"] = {[](E& c, const std::string& k, const std::string& v) {
                           c.run.evaluate = parse_bool(k, v);
                         },
                         [](const E& c) { return std::string(c.run.evaluate ? "true" : "false"); }};

    f["task.kind"] = {[](E& c, const std::string&, const std::string& v) {
                        c.task.kind = workloads::parse_model_kind(trim(v));
                      },
                      [](const E& c) { return workloads::to_string(c.task.kind); }};
    f["task.s"] = integer(&E::task, &TaskConfig::s);
    f["task.dim"] = integer(&E::task, &TaskConfig::dim);
    f["task.classes"] = integer(&E::task, &TaskConfig::classes);
    f["task.hidden"] = integer(&E::task, &TaskConfig::hidden);
    f["task.samples"] = integer(&E::task, &TaskConfig::samples);
    f["task.test_samples"] = integer(&E::task, &TaskConfig::test_samples);
    f["task.separation"] = num(&E::task, &TaskConfig::separation);
    f["task.noise"] = num(&E::task, &TaskConfig::noise);
    f["task.rho"] = num(&E::task, &TaskConfig::rho);
    f["task.batch_size"] = integer(&E::task, &TaskConfig::batch_size);
    f["task.eta"] = num(&E::task, &TaskConfig::eta);
    f["task.data_file"] = text(&E::task, &TaskConfig::data_file);

    f["mobility.model"] = {[](E& c, const std::string& k, const std::string& v) {
                             c.mobility.model = parse_mobility(k, v);
                           },
                           [](const E& c) { return to_string(c.mobility.model); }};
    f["mobility.mean_contact_s"] = num(&E::mobility, &MobilityConfig::mean_contact_s);
    f["mobility.mean_intercontact_s"] = num(&E::mobility, &MobilityConfig::mean_intercontact_s);
    f["mobility.speed_mps"] = num(&E::mobility, &MobilityConfig::speed_mps);
    f["mobility.C"] = num(&E::mobility, &MobilityConfig::C_m);
    f["mobility.Lambda"] = num(&E::mobility, &MobilityConfig::Lambda_m);
    f["mobility.link_distance_m"] = num(&E::mobility, &MobilityConfig::link_distance_m);
    f["mobility.area_m"] = num(&E::mobility, &MobilityConfig::area_m);
    f["mobility.range_m"] = num(&E::mobility, &MobilityConfig::range_m);
    f["mobility.pause_max_s"] = num(&E::mobility, &MobilityConfig::pause_max_s);
    f["mobility.dt_s"] = num(&E::mobility, &MobilityConfig::dt_s);
    f["mobility.seed"] = {[](E& c, const std::string& k, const std::string& v) {
                            c.mobility.seed = trim(v).empty() ? std::nullopt
                                                              : std::optional(parse_int<std::uint64_t>(k, v));
                          },
                          [](const E& c) {
                            return c.mobility.seed ? std::to_string(*c.mobility.seed) : std::string();
                          }};

    f["channel.bandwidth_hz"] = chan(&channel::ChannelParams::bandwidth_hz);
    f["channel.carrier_ghz"] = chan(&channel::ChannelParams::carrier_ghz);
    f["channel.shadow_sigma_los_db"] = chan(&channel::ChannelParams::shadow_sigma_los_db);
    f["channel.shadow_sigma_nlos_db"] = chan(&channel::ChannelParams::shadow_sigma_nlos_db);
    f["channel.los_prob"] = chan(&channel::ChannelParams::los_probability);
    f["channel.p_max_w"] = chan(&channel::ChannelParams::p_max_w);
    f["channel.noise_dbm_hz"] = {[](E& c, const std::string& k, const std::string& v) {
                                   c.noise_dbm_hz = parse_double(k, v);
                                   c.channel.noise_psd_w_per_hz =
                                       channel::noise_psd_from_dbm_hz(c.noise_dbm_hz);
                                 },
                                 [](const E& c) { return fmt_double(c.noise_dbm_hz); }};

    f["controller.policy"] = text(&E::controller, &ControllerConfig::policy);
    f["controller.V"] = num(&E::controller, &ControllerConfig::V);
    f["controller.energy_budget_j"] = {
        parse_budget, [](const E& c) {
          return "[" + fmt_double(c.controller.budget_min_j) + "," +
                 fmt_double(c.controller.budget_max_j) + "]";
        }};
    f["controller.budget_scale"] = num(&E::controller, &ControllerConfig::budget_scale);
    f["controller.u_bits"] = integer(&E::controller, &ControllerConfig::u_bits);

    f["bounds.L"] = num(&E::bounds, &BoundsConfig::L);
    f["bounds.G2"] = num(&E::bounds, &BoundsConfig::G2);
    f["bounds.sigma"] = num(&E::bounds, &BoundsConfig::sigma);
    f["bounds.F0_minus_Fstar"] = num(&E::bounds, &BoundsConfig::F0_minus_Fstar);
    f["bounds.C"] = num(&E::bounds, &BoundsConfig::C_m);
    f["bounds.Lambda"] = num(&E::bounds, &BoundsConfig::Lambda_m);
    f["bounds.rate_bps"] = num(&E::bounds, &BoundsConfig::rate_bps);
    return f;
  }();
  return fields;
}

ExperimentConfig finish(ExperimentConfig cfg, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError(o + ": override must look like section.key=value");
    apply_setting(cfg, trim(o.substr(0, eq)), o.substr(eq + 1));
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig from_tree(const boost::property_tree::ptree& tree,
                           const std::vector<std::string>& overrides) {
  ExperimentConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(section + ": keys must live inside a [section]");
    for (const auto& [key, value] : body) apply_setting(cfg, section + "." + key, value.data());
  }
  return finish(std::move(cfg), overrides);
}

}  // namespace

std::string to_string(MobilityModel m) {
  switch (m) {
    case MobilityModel::kExponential: return "exponential";
    case MobilityModel::kSpeed: return "speed";
    case MobilityModel::kWaypoint: return "waypoint";
  }
  return "?";
}

void apply_setting(ExperimentConfig& cfg, const std::string& section_key, const std::string& value) {
  const auto& fields = registry();
  const auto it = fields.find(section_key);
  if (it == fields.end()) throw ConfigError(section_key + ": unknown configuration key");
  it->second.set(cfg, section_key, value);
}

ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  std::istringstream in(text);
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return from_tree(tree, overrides);
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return from_tree(tree, overrides);
}

std::size_t model_size(const ExperimentConfig& cfg) {
  return workloads::parameter_count(
      {cfg.task.kind, cfg.task.dim, cfg.task.classes, cfg.task.hidden});
}

void validate(const ExperimentConfig& c) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(c.run.rounds >= 0, "run.rounds: must be >= 0");
  require(c.run.devices >= 1, "run.devices: must be >= 1");
  require(c.run.round_duration_s > 0.0, "run.round_duration_s: must be > 0");
  require(!c.run.output_path.empty(), "run.output_path: must not be empty");

  require(c.task.dim >= 1, "task.dim: must be >= 1");
  require(c.task.kind == workloads::ModelKind::kQuadratic || c.task.classes >= 2,
          "task.classes: must be >= 2");
  require(c.task.kind != workloads::ModelKind::kMlp || c.task.hidden >= 1,
          "task.hidden: must be >= 1");
  require(c.task.samples >= c.run.devices, "task.samples: need at least one sample per device");
  require(c.task.test_samples >= 1, "task.test_samples: must be >= 1");
  require(c.task.rho > 0.0, "task.rho: must be > 0");
  require(c.task.batch_size >= 1, "task.batch_size: must be >= 1");
  require(c.task.eta > 0.0, "task.eta: must be > 0");
  require(c.task.separation >= 0.0, "task.separation: must be >= 0");
  require(c.task.noise > 0.0, "task.noise: must be > 0");
  require(c.task.s == 0 || c.task.s == model_size(c),
          "task.s: " + std::to_string(c.task.s) + " does not match the model's " +
              std::to_string(model_size(c)) + " parameters");

  const auto& m = c.mobility;
  require(m.mean_contact_s > 0.0, "mobility.mean_contact_s: must be > 0");
  require(m.mean_intercontact_s > 0.0, "mobility.mean_intercontact_s: must be > 0");
  require(m.speed_mps > 0.0, "mobility.speed_mps: must be > 0");
  require(m.C_m > 0.0, "mobility.C: must be > 0");
  require(m.Lambda_m > 0.0, "mobility.Lambda: must be > 0");
  require(m.link_distance_m >= 1.0, "mobility.link_distance_m: must be >= 1");
  require(m.area_m > 0.0, "mobility.area_m: must be > 0");
  require(m.range_m > 0.0, "mobility.range_m: must be > 0");
  require(m.pause_max_s >= 0.0, "mobility.pause_max_s: must be >= 0");
  require(m.dt_s > 0.0, "mobility.dt_s: must be > 0");

  require(c.channel.bandwidth_hz > 0.0, "channel.bandwidth_hz: must be > 0");
  require(c.channel.carrier_ghz > 0.0, "channel.carrier_ghz: must be > 0");
  require(c.channel.p_max_w > 0.0, "channel.p_max_w: must be > 0");
  require(c.channel.los_probability >= 0.0 && c.channel.los_probability <= 1.0,
          "channel.los_prob: must lie in [0, 1]");
  require(c.channel.shadow_sigma_los_db >= 0.0, "channel.shadow_sigma_los_db: must be >= 0");
  require(c.channel.shadow_sigma_nlos_db >= 0.0, "channel.shadow_sigma_nlos_db: must be >= 0");

  const auto& k = c.controller;
  static const char* policies[] = {"mads", "afl", "afl_spar", "sfl_spar", "optimal"};
  require(std::find(std::begin(policies), std::end(policies), k.policy) != std::end(policies),
          "controller.policy: unknown policy '" + k.policy + "'");
  require(k.V > 0.0, "controller.V: must be > 0");
  require(k.budget_min_j > 0.0 && k.budget_min_j <= k.budget_max_j,
          "controller.energy_budget_j: need 0 < min <= max");
  require(k.budget_scale > 0.0, "controller.budget_scale: must be > 0");
  require(k.u_bits >= 1, "controller.u_bits: must be >= 1");

  const auto& b = c.bounds;
  require(b.L > 0.0, "bounds.L: must be > 0");
  require(b.G2 > 0.0, "bounds.G2: must be > 0");
  require(b.sigma > 0.0 && b.sigma * b.sigma <= b.G2, "bounds.sigma: need 0 < sigma^2 <= G2");
  require(b.F0_minus_Fstar > 0.0, "bounds.F0_minus_Fstar: must be > 0");
  require(b.C_m > 0.0 && b.Lambda_m > 0.0 && b.rate_bps > 0.0,
          "bounds.C: C, Lambda and rate_bps must be > 0");
}

std::map<std::string, std::string> echo(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& [key, field] : registry()) out[key] = field.get(cfg);
  return out;
}

}  // namespace mafl::harness
