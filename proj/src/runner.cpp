#include "vecoff/runner.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "vecoff/errors.hpp"
#include "vecoff/fed.hpp"
#include "vecoff/rng.hpp"
#include "vecoff/schedulers.hpp"

namespace vecoff::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kCheckpointMagic[8] = {'V', 'E', 'C', 'O', 'F', 'F', 'C', 'K'};

void put_u64(std::ostream& out, std::uint64_t x) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw InputError("truncated checkpoint");
  std::uint64_t x = 0;
  for (int i = 7; i >= 0; --i) x = (x << 8) | b[i];
  return x;
}

json read_json(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("missing input: set --") + what);
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + std::string(what) + " file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("malformed JSON in '" + path + "': " + e.what());
  }
}

// Writes to cfg.out, or to `fallback` if no output file is configured.
void emit(const RunConfig& cfg, std::ostream& fallback, const std::string& text) {
  if (cfg.out.empty()) {
    fallback << text;
    return;
  }
  std::ofstream f(cfg.out, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + cfg.out + "'");
  f << text;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + p.string() + "'");
  return f;
}

std::string num(double x) { return format_double(x); }

Scenario load_or_sample_scenario(const RunConfig& cfg) {
  if (!cfg.scenario.empty()) {
    Scenario scn = scenario_from_json(read_json(cfg.scenario, "scenario"));
    scn.validate();
    return scn;
  }
  ScenarioDistribution d = cfg.dist;
  d.seed = cfg.seed;
  return sample_scenario(d);
}

std::string schedule_json(const Scenario& scn, const Assignment& asg, const std::string& name) {
  json j = assignment_to_json(asg);
  j["scheduler"] = name;
  j["aet"] = aet(scn, asg);
  return j.dump(2) + "\n";
}

std::string update_line(const fed::UpdateRecord& u) {
  return "{\"update\":" + std::to_string(u.update) + ",\"round\":" + std::to_string(u.round) +
         ",\"server\":" + std::to_string(u.server) + ",\"scenario\":" + std::to_string(u.scenario) +
         ",\"mean_AET\":" + num(u.report.mean_aet) + ",\"actor_loss\":" + num(u.report.actor_loss) +
         ",\"critic_loss\":" + num(u.report.critic_loss) + ",\"kl\":" + num(u.report.kl) +
         ",\"entropy\":" + num(u.report.entropy) + "}\n";
}

std::string round_line(const fed::RoundReport& r) {
  std::string norms;
  for (std::size_t i = 0; i < r.server_delta_norm.size(); ++i)
    norms += (i ? "," : "") + num(r.server_delta_norm[i]);
  return "{\"round\":" + std::to_string(r.round) + ",\"heldout_aet\":" + num(r.heldout_aet) +
         ",\"heldout_ci95\":" + num(r.heldout_ci95) + ",\"server_delta_norm\":[" + norms + "]}\n";
}

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u64(out, ckpt.round);
  put_u64(out, ckpt.config_text.size());
  out.write(ckpt.config_text.data(), static_cast<std::streamsize>(ckpt.config_text.size()));
  put_u64(out, ckpt.params.size());
  for (const auto& p : ckpt.params) nn::write_params(out, p);
}

Checkpoint read_checkpoint(const std::string& path, const nn::ParamRegistry& registry) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint '" + path + "'");
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw InputError("'" + path + "' is not a checkpoint");
  Checkpoint ckpt;
  ckpt.round = get_u64(in);
  const std::uint64_t len = get_u64(in);
  if (len > (1u << 24)) throw InputError("checkpoint config block too large");
  ckpt.config_text.assign(len, '\0');
  if (!in.read(ckpt.config_text.data(), static_cast<std::streamsize>(len)))
    throw InputError("truncated checkpoint");
  const std::uint64_t count = get_u64(in);
  if (count == 0 || count > 1024) throw InputError("bad replica count in checkpoint");
  for (std::uint64_t i = 0; i < count; ++i) ckpt.params.push_back(nn::read_params(in, registry));
  return ckpt;
}

void cmd_generate(const RunConfig& cfg, std::ostream& out) {
  DagGenParams p = cfg.dist.dag;
  p.seed = cfg.seed;
  if (p.ref_rate == 0.0) p.ref_rate = cfg.dist.reference_rate();
  if (p.ref_freq == 0.0) p.ref_freq = cfg.dist.reference_freq();
  emit(cfg, out, dag_to_json(generate_dag(p)).dump(2) + "\n");
}

void cmd_scenario(const RunConfig& cfg, std::ostream& out) {
  ScenarioDistribution d = cfg.dist;
  d.seed = cfg.seed;
  emit(cfg, out, scenario_to_json(sample_scenario(d)).dump(2) + "\n");
}

void cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  Scenario scn = scenario_from_json(read_json(cfg.scenario, "scenario"));
  scn.validate();
  const Assignment asg = assignment_from_json(read_json(cfg.assignment, "assignment"));
  emit(cfg, out, timeline_to_json(simulate(scn, asg)).dump(2) + "\n");
}

void cmd_schedule(const RunConfig& cfg, std::ostream& out) {
  const Scenario scn = load_or_sample_scenario(cfg);
  const SchedulerKind kind = parse_scheduler_kind(cfg.scheduler);
  const Assignment asg = schedule(kind, scn, cfg.scheduler_options());
  emit(cfg, out, schedule_json(scn, asg, scheduler_name(kind)));
}

void cmd_oracle(const RunConfig& cfg, std::ostream& out) {
  const Scenario scn = load_or_sample_scenario(cfg);
  const Assignment asg = schedule(SchedulerKind::Exhaustive, scn, cfg.scheduler_options());
  emit(cfg, out, schedule_json(scn, asg, scheduler_name(SchedulerKind::Exhaustive)));
}

void cmd_train(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fed::FedConfig fc = cfg.fed_config();
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir / "checkpoints");
  open_out(dir / "config.txt") << serialize_config(cfg);
  // Checkpoints carry only the result-determining keys, so they compare
  // byte-for-byte across output directories and thread counts.
  const std::string config_text = serialize_portable_config(cfg);

  // Reference points for the learning curves.
  const auto heldout = fed::heldout_set(fc);
  {
    json b = json::object();
    for (SchedulerKind k : {SchedulerKind::AllLocal, SchedulerKind::AllEdgeRoundRobin,
                            SchedulerKind::Random, SchedulerKind::GreedyEFT}) {
      std::vector<double> values;
      for (std::size_t i = 0; i < heldout.size(); ++i) {
        SchedulerOptions o = cfg.scheduler_options();
        o.seed = derive_seed(cfg.seed, 0xba5e, i);
        values.push_back(aet(heldout[i], schedule(k, heldout[i], o)));
      }
      const auto ev = rl::summarize(values);
      b[scheduler_name(k)] = {{"mean_aet", ev.mean_aet}, {"ci95", ev.ci95}};
    }
    open_out(dir / "baselines.json") << b.dump(2) << "\n";
  }

  auto metrics = open_out(dir / "metrics.jsonl");
  auto rounds = open_out(dir / "rounds.jsonl");
  auto timing = open_out(dir / "timing.jsonl");
  fed::TrainHooks hooks;
  hooks.on_update = [&](const fed::UpdateRecord& u) { metrics << update_line(u); };
  hooks.on_round = [&](const fed::RoundReport& r, std::span<const nn::ParamVector> params) {
    rounds << round_line(r);
    rounds.flush();
    metrics.flush();
    timing << "{\"round\":" << r.round << ",\"wall_seconds\":" << num(r.wall_seconds) << "}\n";
    const bool last = r.round + 1 == cfg.rounds;
    if ((r.round + 1) % cfg.checkpoint_every == 0 || last) {
      char name[32];
      std::snprintf(name, sizeof name, "round_%04zu.ckpt", r.round);
      write_checkpoint((dir / "checkpoints" / name).string(),
                       {r.round, config_text, {params.begin(), params.end()}});
    }
    log << "round " << r.round << " heldout_aet " << num(r.heldout_aet) << "\n";
  };
  const fed::TrainResult result =
      cfg.no_fed ? fed::train_independent(fc, hooks) : fed::train_federated(fc, hooks);
  if (cfg.rounds == 0)
    write_checkpoint((dir / "checkpoints" / "initial.ckpt").string(), {0, config_text, result.params});
}

std::vector<AdaptFamily> adapt_families(const RunConfig& cfg) {
  std::vector<AdaptFamily> out;
  const Topology base{cfg.dist.dag.density, cfg.dist.dag.fat};
  for (std::size_t n : {10, 15, 25, 30}) {
    ScenarioDistribution d = cfg.distribution_for(base);
    d.dag.n = n;
    out.push_back({"n" + std::to_string(n), d});
  }
  const Topology topologies[] = {{0.7, 0.4}, {0.7, 0.6}, {0.9, 0.4}, {0.9, 0.6}};
  for (std::size_t i = 0; i < 4; ++i)
    out.push_back({"Topology" + std::to_string(i + 1), cfg.distribution_for(topologies[i])});
  return out;
}

void cmd_adapt(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const fed::FedConfig fc = cfg.fed_config();
  const nn::PolicyLayout layout(fc.dims);
  nn::ParamVector meta;
  if (!cfg.checkpoint.empty()) {
    meta = read_checkpoint(cfg.checkpoint, nn::make_registry(fc.dims)).params.front();
  } else {
    log << "no checkpoint given; training meta-parameters first\n";
    meta = cfg.no_fed ? fed::train_independent(fc).params.front() : fed::train_federated(fc).params.front();
  }
  const nn::ParamVector scratch = nn::init_policy(fc.dims, derive_seed(cfg.seed, 0x5c7a));

  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  auto csv = open_out(dir / "adapt.csv");
  csv << "family,variant,step,mean_aet,ci95\n";
  auto row = [&](const std::string& family, const std::string& variant, std::size_t step,
                 const rl::Evaluation& ev) {
    csv << family << ',' << variant << ',' << step << ',' << num(ev.mean_aet) << ','
        << num(ev.ci95) << '\n';
  };

  const auto families = adapt_families(cfg);
  for (std::size_t f = 0; f < families.size(); ++f) {
    const auto& fam = families[f];
    std::vector<std::shared_ptr<const Scenario>> scenarios;
    for (std::size_t i = 0; i < cfg.adapt_scenarios; ++i) {
      ScenarioDistribution d = fam.dist;
      d.seed = derive_seed(cfg.seed, 0xada97, f, i);
      scenarios.push_back(std::make_shared<const Scenario>(sample_scenario(d)));
    }
    for (const auto& [variant, init] :
         {std::pair<std::string, const nn::ParamVector*>{"meta", &meta}, {"scratch", &scratch}}) {
      std::vector<std::vector<double>> per_step(cfg.adapt_steps + 1);
      for (std::size_t i = 0; i < scenarios.size(); ++i) {
        const auto curve = fed::fast_adapt(*init, layout, scenarios[i], cfg.adapt_steps, cfg.ppo,
                                           derive_seed(cfg.seed, 0xfa, f, i));
        for (std::size_t s = 0; s < curve.aet.size(); ++s) per_step[s].push_back(curve.aet[s]);
      }
      for (std::size_t s = 0; s < per_step.size(); ++s)
        row(fam.name, variant, s, rl::summarize(per_step[s]));
    }
    for (SchedulerKind k : {SchedulerKind::AllLocal, SchedulerKind::AllEdgeRoundRobin,
                            SchedulerKind::Random, SchedulerKind::GreedyEFT}) {
      std::vector<double> values;
      for (std::size_t i = 0; i < scenarios.size(); ++i) {
        SchedulerOptions o = cfg.scheduler_options();
        o.seed = derive_seed(cfg.seed, 0xba5e, f, i);
        values.push_back(aet(*scenarios[i], schedule(k, *scenarios[i], o)));
      }
      const auto ev = rl::summarize(values);
      for (std::size_t s = 0; s <= cfg.adapt_steps; ++s) row(fam.name, scheduler_name(k), s, ev);
    }
    log << "family " << fam.name << " done\n";
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Vehicular edge computing DAG offloading workbench", "vecoff"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "key = value config file");
  app.add_option("--set", sets, "override, key=value (repeatable)");

  // One option per config key; hyphens and underscores both accepted.
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
  std::vector<std::string> order;
  for (const auto& key : RunConfig::keys()) {
    if (key == "command") continue;
    std::string hyphen = key;
    for (char& c : hyphen)
      if (c == '_') c = '-';
    std::string names = "--" + hyphen;
    if (hyphen != key) names += ",--" + key;
    if (RunConfig::is_flag(key)) {
      flags[key] = false;
      app.add_flag(names, flags[key], "config key " + key);
    } else {
      app.add_option(names, values[key], "config key " + key);
    }
    order.push_back(key);
  }

  const std::vector<std::pair<std::string, std::string>> commands{
      {"generate", "emit one random DAG as JSON"},
      {"scenario", "sample a scenario as JSON"},
      {"simulate", "evaluate an assignment on a scenario, emit the timeline"},
      {"schedule", "run a baseline scheduler"},
      {"oracle", "exhaustive optimum under the cap"},
      {"train", "federated meta-training (or independent PPO with --no-fed)"},
      {"adapt", "fast-adaptation sweeps over subtask counts and topologies"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path, cfg);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& key : order) {
      const std::string hyphen = [&] {
        std::string h = key;
        for (char& c : h)
          if (c == '_') c = '-';
        return h;
      }();
      if (app.count("--" + hyphen) == 0) continue;
      if (RunConfig::is_flag(key))
        cfg.set(key, flags[key] ? "true" : "false");
      else
        cfg.set(key, values[key]);
    }
    cfg.command = app.get_subcommands().front()->get_name();
    cfg.validate();

    if (cfg.command == "generate") cmd_generate(cfg, out);
    else if (cfg.command == "scenario") cmd_scenario(cfg, out);
    else if (cfg.command == "simulate") cmd_simulate(cfg, out);
    else if (cfg.command == "schedule") cmd_schedule(cfg, out);
    else if (cfg.command == "oracle") cmd_oracle(cfg, out);
    else if (cfg.command == "train") cmd_train(cfg, err);
    else if (cfg.command == "adapt") cmd_adapt(cfg, err);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const CapExceeded& e) {
    err << "cap exceeded: " << e.what() << "\n";
    return kExitCap;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace vecoff::cli
