#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vecoff/config.hpp"
#include "vecoff/params.hpp"

namespace vecoff::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInput = 3;
inline constexpr int kExitCap = 4;

// Single-artifact commands write to cfg.out, or to `out` when cfg.out is empty.
void cmd_generate(const RunConfig& cfg, std::ostream& out);
void cmd_scenario(const RunConfig& cfg, std::ostream& out);
void cmd_simulate(const RunConfig& cfg, std::ostream& out);
void cmd_schedule(const RunConfig& cfg, std::ostream& out);
void cmd_oracle(const RunConfig& cfg, std::ostream& out);

// Writes into cfg.out_dir:
//   config.txt         the effective configuration
//   metrics.jsonl      one record per local update
//   rounds.jsonl       one record per outer round (held-out AET, delta norms)
//   baselines.json     scheduler AETs on the held-out set
//   checkpoints/       round_NNNN.ckpt every cfg.checkpoint_every rounds, plus the last round
//   timing.jsonl       wall-clock seconds per round (not reproducible, kept apart)
void cmd_train(const RunConfig& cfg, std::ostream& log);

// Writes cfg.out_dir/adapt.csv with columns family,variant,step,mean_aet,ci95.
void cmd_adapt(const RunConfig& cfg, std::ostream& log);

struct Checkpoint {
  std::size_t round = 0;
  std::string config_text;
  std::vector<nn::ParamVector> params;  // one meta vector, or one per server without federation
};

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
// Parameters are checked against `registry`; throws InputError on any mismatch.
Checkpoint read_checkpoint(const std::string& path, const nn::ParamRegistry& registry);

struct AdaptFamily {
  std::string name;
  ScenarioDistribution dist;
};
// n in {10, 15, 25, 30} with the base topology, then Topology1..4 with the base n.
std::vector<AdaptFamily> adapt_families(const RunConfig& cfg);

// Parses argv, runs the command and maps exceptions to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vecoff::cli
