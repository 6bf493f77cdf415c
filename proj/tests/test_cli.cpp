#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vecoff/errors.hpp"
#include "vecoff/runner.hpp"

namespace fs = std::filesystem;
using namespace vecoff;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string fixture(const std::string& name) { return std::string(VECOFF_FIXTURE_DIR) + "/" + name; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vecoff_cli_" + name);
  fs::remove_all(p);
  return p;
}

// Small policy and workload so the training commands finish quickly.
const std::vector<std::string> kTiny{"--n",          "4",  "--channels",   "2", "--processors", "2",
                                     "--episodes",   "2",  "--epochs",     "1", "--heads",      "2",
                                     "--head-dim",   "4",  "--enc-hidden", "8", "--dec-hidden", "8",
                                     "--heldout-scenarios", "2"};

std::vector<std::string> with_tiny(std::vector<std::string> args) {
  args.insert(args.end(), kTiny.begin(), kTiny.end());
  return args;
}

}  // namespace

TEST_CASE("exit codes") {
  CHECK(invoke({"--help"}).code == cli::kExitOk);
  CHECK(invoke({}).code == cli::kExitConfig);
  CHECK(invoke({"frobnicate"}).code == cli::kExitConfig);
  CHECK(invoke({"generate", "--no-such-option"}).code == cli::kExitConfig);
  CHECK(invoke({"generate", "--set", "bogus=1"}).code == cli::kExitConfig);
  CHECK(invoke({"generate", "--n", "zero"}).code == cli::kExitConfig);
  CHECK(invoke({"generate", "--config", "/nonexistent.cfg"}).code == cli::kExitConfig);
  CHECK(invoke({"simulate", "--scenario", "/nonexistent.json", "--assignment", fixture("diamond_assignment.json")})
            .code == cli::kExitInput);
  CHECK(invoke({"simulate", "--scenario", fixture("diamond_scenario.json"), "--assignment",
             fixture("diamond_scenario.json")})
            .code == cli::kExitInput);
  CHECK(invoke({"simulate", "--scenario", fixture("diamond_scenario.json")}).code == cli::kExitConfig);
  CHECK(invoke({"oracle", "--n", "20"}).code == cli::kExitCap);
  CHECK(invoke({"oracle", "--n", "4", "--exhaustive-cap", "10"}).code == cli::kExitCap);
}

TEST_CASE("generate is a pure function of the seed") {
  const auto a = invoke({"generate", "--seed", "5", "--n", "12"});
  const auto b = invoke({"generate", "--seed", "5", "--n", "12"});
  const auto c = invoke({"generate", "--seed", "6", "--n", "12"});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out != c.out);
  const auto j = nlohmann::json::parse(a.out);
  CHECK(j.at("nodes").size() == 12);
}

TEST_CASE("simulate reproduces the stored diamond timeline") {
  const auto r = invoke({"simulate", "--scenario", fixture("diamond_scenario.json"), "--assignment",
                      fixture("diamond_assignment.json")});
  REQUIRE(r.code == 0);
  const auto got = nlohmann::json::parse(r.out);
  CHECK(got == nlohmann::json::parse(slurp(fixture("diamond_timeline.json"))));
  CHECK(got.at("aet").get<double>() == 6.25);
  const std::vector<std::vector<double>> expect{{0, 0, 1}, {4, 4, 5}, {3, 3, 3.25}, {5.25, 5.25, 6.25}};
  for (std::size_t p = 0; p < 4; ++p) {
    const auto& s = got.at("subtasks").at(p);
    CHECK(s.at("TE").get<double>() == expect[p][0]);
    CHECK(s.at("CS").get<double>() == expect[p][1]);
    CHECK(s.at("CE").get<double>() == expect[p][2]);
  }
}

TEST_CASE("output goes to --out when given") {
  const fs::path dir = scratch("out");
  fs::create_directories(dir);
  const auto file = (dir / "dag.json").string();
  REQUIRE(invoke({"generate", "--seed", "3", "--out", file}).code == 0);
  CHECK(slurp(file) == invoke({"generate", "--seed", "3"}).out);
  fs::remove_all(dir);
}

TEST_CASE("oracle never loses to a heuristic") {
  for (const char* seed : {"1", "2", "3"}) {
    const std::vector<std::string> common{"--seed", seed, "--n", "4", "--vehicles", "1",
                                          "--channels", "2", "--processors", "2"};
    auto oracle_args = common;
    oracle_args.insert(oracle_args.begin(), "oracle");
    const auto o = invoke(oracle_args);
    REQUIRE(o.code == 0);
    const double best = nlohmann::json::parse(o.out).at("aet").get<double>();
    for (const char* s : {"all-local", "round-robin", "random", "greedy-eft"}) {
      auto args = common;
      args.insert(args.begin(), "schedule");
      args.push_back("--scheduler");
      args.push_back(s);
      const auto h = invoke(args);
      REQUIRE(h.code == 0);
      const auto j = nlohmann::json::parse(h.out);
      CHECK(j.at("scheduler").get<std::string>() == s);
      CHECK(best <= j.at("aet").get<double>());
    }
  }
}

TEST_CASE("config file and overrides") {
  const fs::path dir = scratch("cfg");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "run.cfg");
    f << "n = 6\nseed = 4\n";
  }
  const auto file = (dir / "run.cfg").string();
  const auto from_file = invoke({"generate", "--config", file});
  CHECK(nlohmann::json::parse(from_file.out).at("nodes").size() == 6);
  CHECK(from_file.out == invoke({"generate", "--n", "6", "--seed", "4"}).out);
  // --set beats the file, a dedicated option beats --set.
  CHECK(nlohmann::json::parse(invoke({"generate", "--config", file, "--set", "n=3"}).out).at("nodes").size() == 3);
  CHECK(nlohmann::json::parse(invoke({"generate", "--config", file, "--set", "n=3", "--n", "2"}).out)
            .at("nodes")
            .size() == 2);
  fs::remove_all(dir);
}

TEST_CASE("train without federation or GAT") {
  const fs::path dir = scratch("train");
  const auto r = invoke(with_tiny({"train", "--out-dir", dir.string(), "--rounds", "2", "--servers", "2",
                                "--server-topologies", "0.7/0.4,0.9/0.6", "--scenarios-per-round", "2",
                                "--no-fed", "--no-gat"}));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto metrics = lines(dir / "metrics.jsonl");
  REQUIRE(metrics.size() == 2 * 2 * 2);
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    const auto j = nlohmann::json::parse(metrics[i]);
    CHECK(j.at("update").get<std::size_t>() == i);
    for (const char* k : {"round", "server", "scenario", "mean_AET", "actor_loss", "critic_loss", "kl", "entropy"})
      CHECK(j.contains(k));
  }
  const auto rounds = lines(dir / "rounds.jsonl");
  REQUIRE(rounds.size() == 2);
  CHECK(nlohmann::json::parse(rounds[1]).at("server_delta_norm").size() == 2);
  CHECK(fs::exists(dir / "checkpoints" / "round_0001.ckpt"));
  CHECK(fs::exists(dir / "baselines.json"));
  CHECK(lines(dir / "timing.jsonl").size() == 2);

  // Without federation the checkpoint holds one vector per server.
  const RunConfig cfg = load_config((dir / "config.txt").string());
  const auto reg = nn::make_registry(cfg.policy_dims());
  const auto ckpt = cli::read_checkpoint((dir / "checkpoints" / "round_0001.ckpt").string(), reg);
  CHECK(ckpt.round == 1);
  CHECK(ckpt.params.size() == 2);
  CHECK(ckpt.params[0].values != ckpt.params[1].values);
  RunConfig stored = parse_config(ckpt.config_text);
  CHECK(stored.out_dir == RunConfig{}.out_dir);
  stored.out_dir = cfg.out_dir;
  stored.command = cfg.command;
  CHECK(stored == cfg);

  nn::PolicyDims other = cfg.policy_dims();
  other.dec_hidden = 9;
  CHECK_THROWS_AS(cli::read_checkpoint((dir / "checkpoints" / "round_0001.ckpt").string(),
                                       nn::make_registry(other)),
                  InputError);
  fs::remove_all(dir);
}

TEST_CASE("adapt writes one row per family, variant and step") {
  const fs::path dir = scratch("adapt");
  const auto train = invoke(with_tiny({"train", "--out-dir", dir.string(), "--rounds", "1", "--servers", "1",
                                    "--server-topologies", "0.7/0.4", "--scenarios-per-round", "1"}));
  REQUIRE_MESSAGE(train.code == 0, train.err);
  const auto r = invoke(with_tiny({"adapt", "--out-dir", dir.string(), "--servers", "1", "--server-topologies",
                                "0.7/0.4", "--checkpoint", (dir / "checkpoints" / "round_0000.ckpt").string(),
                                "--adapt-steps", "2", "--adapt-scenarios", "2"}));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rows = lines(dir / "adapt.csv");
  REQUIRE(!rows.empty());
  CHECK(rows[0] == "family,variant,step,mean_aet,ci95");
  // 8 families x (meta, scratch, 4 schedulers) x 3 steps.
  CHECK(rows.size() == 1 + 8 * 6 * 3);

  std::map<std::string, std::vector<std::string>> sched;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::vector<std::string> f;
    std::stringstream ss(rows[i]);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    REQUIRE(f.size() == 5);
    if (f[1] != "meta" && f[1] != "scratch") sched[f[0] + "/" + f[1]].push_back(f[3] + "," + f[4]);
  }
  CHECK(sched.size() == 8 * 4);
  for (const auto& [key, vals] : sched) {
    CHECK(vals.size() == 3);
    for (const auto& v : vals) CHECK(v == vals[0]);
  }
  fs::remove_all(dir);
}

TEST_CASE("default training run ends at or below the all-local baseline") {
  const fs::path dir = scratch("default");
  const auto r = invoke({"train", "--out-dir", dir.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rounds = lines(dir / "rounds.jsonl");
  REQUIRE(rounds.size() == RunConfig{}.rounds);
  const double final_aet = nlohmann::json::parse(rounds.back()).at("heldout_aet").get<double>();
  const auto baselines = nlohmann::json::parse(slurp(dir / "baselines.json"));
  const double all_local = baselines.at("all-local").at("mean_aet").get<double>();
  CHECK(final_aet <= all_local);
  fs::remove_all(dir);
}
