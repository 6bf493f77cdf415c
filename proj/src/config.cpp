#include "vecoff/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "vecoff/errors.hpp"

namespace vecoff {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  std::uint64_t x = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

// "lo:hi", or a single number for a degenerate range.
Range to_range(const std::string& key, const std::string& v) {
  const auto colon = v.find(':');
  if (colon == std::string::npos) {
    const double x = to_double(key, v);
    return {x, x};
  }
  return {to_double(key, v.substr(0, colon)), to_double(key, v.substr(colon + 1))};
}

std::string from_range(const Range& r) { return format_double(r.lo) + ":" + format_double(r.hi); }

Topology to_topology(const std::string& key, const std::string& v) {
  const auto slash = v.find('/');
  if (slash == std::string::npos)
    throw ConfigError("config key '" + key + "': expected density/fat, got '" + v + "'");
  return {to_double(key, v.substr(0, slash)), to_double(key, v.substr(slash + 1))};
}

std::string from_topology(const Topology& t) {
  return format_double(t.density) + "/" + format_double(t.fat);
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
  bool flag = false;
};

using Table = std::vector<std::pair<std::string, Field>>;

Table build_table() {
  Table t;
  auto str = [&](const char* name, std::string RunConfig::*m) {
    t.emplace_back(name, Field{[m](const RunConfig& c) { return c.*m; },
                               [m](RunConfig& c, const std::string& v) { c.*m = trim(v); }});
  };
  auto num = [&](const char* name, auto getter) {
    t.emplace_back(name,
                   Field{[getter](const RunConfig& c) {
                           return format_double(getter(const_cast<RunConfig&>(c)));
                         },
                         [getter, name](RunConfig& c, const std::string& v) {
                           getter(c) = to_double(name, v);
                         }});
  };
  auto count = [&](const char* name, auto getter) {
    t.emplace_back(name,
                   Field{[getter](const RunConfig& c) {
                           return std::to_string(getter(const_cast<RunConfig&>(c)));
                         },
                         [getter, name](RunConfig& c, const std::string& v) {
                           using T = std::remove_reference_t<decltype(getter(c))>;
                           getter(c) = static_cast<T>(to_u64(name, v));
                         }});
  };
  auto range = [&](const char* name, Range ScenarioDistribution::*m) {
    t.emplace_back(name, Field{[m](const RunConfig& c) { return from_range(c.dist.*m); },
                               [m, name](RunConfig& c, const std::string& v) {
                                 c.dist.*m = to_range(name, v);
                               }});
  };
  auto flag = [&](const char* name, bool RunConfig::*m) {
    t.emplace_back(name, Field{[m](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); },
                               [m, name](RunConfig& c, const std::string& v) { c.*m = to_bool(name, v); },
                               true});
  };

  str("command", &RunConfig::command);
  str("out", &RunConfig::out);
  str("out_dir", &RunConfig::out_dir);
  str("scenario", &RunConfig::scenario);
  str("assignment", &RunConfig::assignment);
  str("checkpoint", &RunConfig::checkpoint);
  count("seed", [](RunConfig& c) -> std::uint64_t& { return c.seed; });
  count("threads", [](RunConfig& c) -> std::size_t& { return c.threads; });

  count("vehicles", [](RunConfig& c) -> std::size_t& { return c.dist.vehicles; });
  count("channels", [](RunConfig& c) -> std::size_t& { return c.dist.channels; });
  count("processors", [](RunConfig& c) -> std::size_t& { return c.dist.processors; });
  range("uplink_bw_hz", &ScenarioDistribution::uplink_bw_hz);
  range("downlink_bw_hz", &ScenarioDistribution::downlink_bw_hz);
  range("mec_tx_power_mw", &ScenarioDistribution::mec_tx_power_mw);
  range("edge_freq_hz", &ScenarioDistribution::edge_freq);
  range("local_freq_hz", &ScenarioDistribution::local_freq);
  range("tx_power_mw", &ScenarioDistribution::tx_power_mw);
  range("gain", &ScenarioDistribution::gain);
  range("noise_mw", &ScenarioDistribution::noise_mw);

  count("n", [](RunConfig& c) -> std::size_t& { return c.dist.dag.n; });
  num("density", [](RunConfig& c) -> double& { return c.dist.dag.density; });
  num("fat", [](RunConfig& c) -> double& { return c.dist.dag.fat; });
  num("ccr", [](RunConfig& c) -> double& { return c.dist.dag.ccr; });
  t.emplace_back("size_bits", Field{[](const RunConfig& c) {
                                      return from_range({c.dist.dag.size_lo_bits, c.dist.dag.size_hi_bits});
                                    },
                                    [](RunConfig& c, const std::string& v) {
                                      const Range r = to_range("size_bits", v);
                                      c.dist.dag.size_lo_bits = r.lo;
                                      c.dist.dag.size_hi_bits = r.hi;
                                    }});
  t.emplace_back("cycles", Field{[](const RunConfig& c) {
                                   return from_range({c.dist.dag.cycles_lo, c.dist.dag.cycles_hi});
                                 },
                                 [](RunConfig& c, const std::string& v) {
                                   const Range r = to_range("cycles", v);
                                   c.dist.dag.cycles_lo = r.lo;
                                   c.dist.dag.cycles_hi = r.hi;
                                 }});

  count("servers", [](RunConfig& c) -> std::size_t& { return c.servers; });
  count("scenarios_per_round", [](RunConfig& c) -> std::size_t& { return c.scenarios_per_round; });
  count("rounds", [](RunConfig& c) -> std::size_t& { return c.rounds; });
  num("beta_meta", [](RunConfig& c) -> double& { return c.beta_meta; });
  t.emplace_back("server_topologies",
                 Field{[](const RunConfig& c) {
                         std::string s;
                         for (std::size_t i = 0; i < c.server_topologies.size(); ++i)
                           s += (i ? "," : "") + from_topology(c.server_topologies[i]);
                         return s;
                       },
                       [](RunConfig& c, const std::string& v) {
                         c.server_topologies.clear();
                         std::stringstream ss(v);
                         std::string item;
                         while (std::getline(ss, item, ','))
                           c.server_topologies.push_back(to_topology("server_topologies", item));
                       }});
  t.emplace_back("heldout_topology",
                 Field{[](const RunConfig& c) { return from_topology(c.heldout_topology); },
                       [](RunConfig& c, const std::string& v) {
                         c.heldout_topology = to_topology("heldout_topology", v);
                       }});
  count("heldout_scenarios", [](RunConfig& c) -> std::size_t& { return c.heldout_scenarios; });
  count("checkpoint_every", [](RunConfig& c) -> std::size_t& { return c.checkpoint_every; });

  num("clip", [](RunConfig& c) -> double& { return c.ppo.clip; });
  num("kl_coef", [](RunConfig& c) -> double& { return c.ppo.kl_coef; });
  num("gamma", [](RunConfig& c) -> double& { return c.ppo.gamma; });
  num("gae_lambda", [](RunConfig& c) -> double& { return c.ppo.gae_lambda; });
  count("epochs", [](RunConfig& c) -> std::size_t& { return c.ppo.epochs; });
  num("lr", [](RunConfig& c) -> double& { return c.ppo.lr; });
  count("minibatch", [](RunConfig& c) -> std::size_t& { return c.ppo.minibatch; });
  count("episodes", [](RunConfig& c) -> std::size_t& { return c.ppo.episodes; });

  count("heads", [](RunConfig& c) -> std::size_t& { return c.dims.heads; });
  count("head_dim", [](RunConfig& c) -> std::size_t& { return c.dims.head_dim; });
  count("max_parents", [](RunConfig& c) -> std::size_t& { return c.dims.max_parents; });
  count("enc_hidden", [](RunConfig& c) -> std::size_t& { return c.dims.enc_hidden; });
  count("dec_hidden", [](RunConfig& c) -> std::size_t& { return c.dims.dec_hidden; });
  count("action_embed", [](RunConfig& c) -> std::size_t& { return c.dims.action_embed; });
  flag("no_gat", &RunConfig::no_gat);
  flag("no_fed", &RunConfig::no_fed);

  str("scheduler", &RunConfig::scheduler);
  num("exhaustive_cap", [](RunConfig& c) -> double& { return c.exhaustive_cap; });
  count("adapt_steps", [](RunConfig& c) -> std::size_t& { return c.adapt_steps; });
  count("adapt_scenarios", [](RunConfig& c) -> std::size_t& { return c.adapt_scenarios; });
  return t;
}

const Table& table() {
  static const Table t = build_table();
  return t;
}

const Field& field(const std::string& key) {
  for (const auto& [name, f] : table())
    if (name == key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, value); }

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [name, f] : table()) out.push_back(name);
    return out;
  }();
  return k;
}

bool RunConfig::is_flag(const std::string& key) { return field(key).flag; }

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (threads < 1) fail("threads must be >= 1");
  if (server_topologies.size() != servers)
    fail("server_topologies lists " + std::to_string(server_topologies.size()) +
         " entries but servers = " + std::to_string(servers));
  if (checkpoint_every < 1) fail("checkpoint_every must be >= 1");
  if (!(exhaustive_cap >= 1.0)) fail("exhaustive_cap must be >= 1");
  if (adapt_scenarios < 1) fail("adapt_scenarios must be >= 1");
  dist.validate();
  parse_scheduler_kind(scheduler);
  fed_config().validate();
}

nn::PolicyDims RunConfig::policy_dims() const {
  nn::PolicyDims d = dims;
  d.channels = dist.channels;
  d.processors = dist.processors;
  d.use_gat = !no_gat;
  return d;
}

ScenarioDistribution RunConfig::distribution_for(const Topology& topo) const {
  ScenarioDistribution d = dist;
  d.dag.density = topo.density;
  d.dag.fat = topo.fat;
  return d;
}

fed::FedConfig RunConfig::fed_config() const {
  fed::FedConfig f;
  f.servers = servers;
  f.scenarios_per_round = scenarios_per_round;
  f.rounds = rounds;
  f.beta_meta = beta_meta;
  f.ppo = ppo;
  f.dims = policy_dims();
  for (const auto& t : server_topologies) f.server_dists.push_back(distribution_for(t));
  f.heldout_dist = distribution_for(heldout_topology);
  f.heldout_scenarios = heldout_scenarios;
  f.seed = seed;
  f.threads = threads;
  return f;
}

SchedulerOptions RunConfig::scheduler_options() const {
  SchedulerOptions o;
  o.seed = seed;
  o.exhaustive_cap = exhaustive_cap;
  o.threads = threads;
  return o;
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [name, f] : table()) out += name + " = " + f.get(cfg) + "\n";
  return out;
}

std::string serialize_portable_config(const RunConfig& cfg) {
  RunConfig c = cfg;
  const RunConfig def;
  c.command = def.command;
  c.out = def.out;
  c.out_dir = def.out_dir;
  c.scenario = def.scenario;
  c.assignment = def.assignment;
  c.checkpoint = def.checkpoint;
  c.threads = def.threads;
  return serialize_config(c);
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

RunConfig load_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

}  // namespace vecoff
