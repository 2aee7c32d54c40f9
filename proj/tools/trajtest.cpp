// Copyright 2026 The trajtest Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// trajtest command-line interface: gen, run, agree, protocol-check, validate.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "trajtest.hpp"

namespace fs = std::filesystem;
using namespace trajtest;

namespace
{

enum ExitCode : int { kOk = 0, kUsage = 1, kSceneErrors = 2, kIo = 3 };

class UsageError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct ShapeOptions
{
  bool long_term{false};
  std::optional<std::size_t> history;
  std::optional<std::size_t> horizon;
  std::optional<double> dt;

  void add(CLI::App & app)
  {
    app.add_flag("--long-term", long_term, "long-term setting: n=5, T=30 at 1 FPS");
    app.add_option("--history", history, "history length n")->check(CLI::PositiveNumber);
    app.add_option("--horizon", horizon, "prediction horizon T")->check(CLI::PositiveNumber);
    app.add_option("--dt", dt, "seconds per step")->check(CLI::PositiveNumber);
  }

  ScenarioShape shape() const
  {
    ScenarioShape s = long_term ? HarnessConfig::long_term().shape : ScenarioShape{};
    if (history) {s.history_length = *history;}
    if (horizon) {s.horizon = *horizon;}
    if (dt) {s.dt = *dt;}
    return s;
  }
};

std::uint64_t effective_seed(std::uint64_t flag)
{
  const char * env = std::getenv("TRAJTEST_SEED");
  if (env == nullptr || *env == '\0') {return flag;}
  char * end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno != 0 || *end != '\0' || *env == '-') {
    throw UsageError(std::string("TRAJTEST_SEED is not an unsigned integer: '") + env + "'");
  }
  return v;
}

PredictorFactory make_factory(const std::string & sut, std::chrono::milliseconds timeout)
{
  if (sut == "equivariant") {return [] {return std::make_unique<EquivariantReference>();};}
  if (sut == "mutant") {return [] {return std::make_unique<BiasedMutant>();};}
  if (sut == "map-aware") {return [] {return std::make_unique<MapAwareReference>();};}
  if (sut.rfind("cmd:", 0) == 0 && sut.size() > 4) {
    const std::string command = sut.substr(4);
    return [command, timeout] {return std::make_unique<ExternalProcessSut>(command, timeout);};
  }
  throw UsageError("unknown SUT '" + sut + "': expected equivariant, mutant, map-aware or "
          "cmd:<command>");
}

/// Loads and lints scene packages; prints one line per rejected package.
std::vector<TestCase> load_valid(const fs::path & root, const ScenarioShape & shape,
  std::size_t & rejected)
{
  std::vector<TestCase> out;
  for (auto & ls : io::load_scenes(root, shape)) {
    if (ls.scene) {
      out.push_back(std::move(*ls.scene));
      continue;
    }
    ++rejected;
    for (const auto & e : ls.errors) {std::cerr << "invalid " << ls.path.string() << ": " << e << '\n';}
  }
  return out;
}

int cmd_gen(std::size_t count, std::uint64_t seed, const fs::path & out,
  const std::optional<fs::path> & recipe_path, const ScenarioShape & shape)
{
  SceneRecipe recipe;
  if (recipe_path) {
    const auto text = io::read_file(*recipe_path);
    io::json j;
    try {
      j = io::json::parse(text);
    } catch (const io::json::parse_error & e) {
      throw ParseError(recipe_path->string() + " byte " + std::to_string(e.byte), e.what());
    }
    recipe = io::recipe_from_json(j, recipe_path->string());
  }
  try {
    recipe.validate();
  } catch (const ContractError & e) {
    throw UsageError(e.what());
  }
  std::size_t failed = 0;
  for (std::size_t i = 0; i < count; ++i) {
    SceneRecipe r = recipe;
    r.seed = mix_seed({seed, static_cast<std::uint64_t>(i)});
    const auto id = corpus_scene_id(i);
    try {
      io::save_scene(out / id, generate_scene(r, shape, id));
    } catch (const GenerationError & e) {
      ++failed;
      std::cerr << e.what() << '\n';
    }
  }
  std::cout << "wrote " << count - failed << " scenes to " << out.string() << '\n';
  return failed > 0 ? kSceneErrors : kOk;
}

struct RunOptions
{
  fs::path scenes;
  std::string sut{"equivariant"};
  std::string mr{"label-preserving"};
  std::size_t n{8};
  std::size_t k{20};
  double alpha{0.05};
  std::uint64_t seed{0};
  fs::path out;
  std::size_t parallel{1};
  std::optional<fs::path> transitions;
  double timeout_s{120.0};
  ShapeOptions shape;
};

int cmd_run(const RunOptions & o)
{
  HarnessConfig cfg;
  cfg.shape = o.shape.shape();
  cfg.n_runs = o.n;
  cfg.k = o.k;
  cfg.alpha = o.alpha;
  cfg.seed = effective_seed(o.seed);
  cfg.parallelism = o.parallel;
  const auto table = o.transitions ? io::load_transitions(*o.transitions) :
    TransitionTable::standard();
  try {
    cfg.mrs = parse_mr_list(o.mr, table);
    cfg.validate();
  } catch (const ContractError & e) {
    throw UsageError(e.what());
  }
  const auto timeout = std::chrono::milliseconds(static_cast<long long>(o.timeout_s * 1000.0));
  const auto factory = make_factory(o.sut, timeout);

  std::size_t rejected = 0;
  const auto scenes = load_valid(o.scenes, cfg.shape, rejected);
  if (scenes.empty()) {
    std::cerr << "no valid scenes under " << o.scenes.string() << '\n';
    return kSceneErrors;
  }
  const auto results = run_campaign(scenes, factory, cfg);
  report::write_campaign(o.out, results, cfg, o.sut);

  std::size_t errored = 0;
  std::size_t skipped = 0;
  for (const auto & r : results) {
    if (r.status == SceneStatus::errored) {
      ++errored;
      std::cerr << "errored " << r.scene_id << " " << r.mr.label() << ": " << r.note << '\n';
    }
    skipped += r.status == SceneStatus::skipped;
  }
  std::cout << report::aggregate_csv(aggregate(results, cfg.mrs));
  std::cout << scenes.size() << " scenes, " << results.size() << " pairs, " << skipped <<
    " skipped, " << errored << " errored, " << rejected << " rejected; report in " <<
    o.out.string() << '\n';
  return errored > 0 || rejected > 0 ? kSceneErrors : kOk;
}

int cmd_agree(const fs::path & results_path, const std::vector<double> & thresholds,
  const std::string & label, const std::optional<fs::path> & out)
{
  for (double t : thresholds) {
    if (!(t > 0.0 && t <= 1.0)) {throw UsageError("thresholds must lie in (0, 1]");}
  }
  const auto results = report::load_results(results_path);
  std::vector<Criterion> labels;
  if (label == "mean-ade" || label == "both") {labels.push_back(Criterion::mean_ade);}
  if (label == "mean-fde" || label == "both") {labels.push_back(Criterion::mean_fde);}
  std::vector<AgreementReport> reports;
  try {
    for (Criterion c : labels) {reports.push_back(agreement_analysis(results, thresholds, c));}
  } catch (const ContractError & e) {
    std::cerr << e.what() << '\n';
    return kSceneErrors;
  }
  const auto csv = report::agreement_csv(reports);
  if (out) {
    io::write_file(*out, csv);
  } else {
    std::cout << csv;
  }
  return kOk;
}

int cmd_protocol_check(std::string command, double timeout_s, std::uint64_t seed)
{
  if (command.rfind("cmd:", 0) == 0) {command = command.substr(4);}
  const auto timeout = std::chrono::milliseconds(static_cast<long long>(timeout_s * 1000.0));
  int failures = 0;
  const auto check = [&](const std::string & what, auto && body) {
      try {
        body();
        std::cout << "PASS " << what << '\n';
        return true;
      } catch (const std::exception & e) {
        ++failures;
        std::cout << "FAIL " << what << ": " << e.what() << '\n';
        return false;
      }
    };

  std::unique_ptr<ExternalProcessSut> sut;
  if (!check("handshake", [&] {sut = std::make_unique<ExternalProcessSut>(command, timeout);})) {
    return kSceneErrors;
  }
  std::cout << "     provides_prob_map=" << (sut->provides_prob_map() ? "true" : "false") << '\n';

  HarnessConfig cfg;
  cfg.seed = effective_seed(seed);
  const auto tc = generate_corpus(1, cfg.shape, cfg.seed).front();
  const auto req = detail::make_request(tc, cfg, source_seed(cfg.seed, tc.scene_id, 0));
  SutResponse first;
  check("short-term prediction (k=20, T=12)", [&] {first = detail::call(*sut, req);});
  check("prob_map matches the handshake", [&] {
      if (first.prediction.prob_map.has_value() != sut->provides_prob_map()) {
        throw SutError(req.scene_id, "prob_map presence differs from the ready message");
      }
    });
  check("same request and seed reproduce the response", [&] {
      if (!(detail::call(*sut, req).prediction == first.prediction)) {
        throw SutError(req.scene_id, "responses differ");
      }
    });
  check("long-term prediction (k=5, T=30)", [&] {
      auto lt = HarnessConfig::long_term();
      lt.k = 5;
      const auto ltc = generate_corpus(1, lt.shape, cfg.seed).front();
      detail::call(*sut, detail::make_request(ltc, lt, 1));
    });
  check("survives an invalid request", [&] {
      auto bad = req;
      bad.history.points.assign(1, bad.history.points.front());
      try {
        detail::call(*sut, bad);
      } catch (const SutError &) {
        detail::call(*sut, req);
        return;
      }
    });
  std::cout << (failures == 0 ? "conformant" : "not conformant") << '\n';
  return failures == 0 ? kOk : kSceneErrors;
}

int cmd_validate(const fs::path & root, const ScenarioShape & shape)
{
  std::size_t bad = 0;
  const auto loaded = io::load_scenes(root, shape);
  for (const auto & ls : loaded) {
    if (ls.scene) {
      std::cout << "ok      " << ls.path.string() << '\n';
      continue;
    }
    ++bad;
    std::cout << "invalid " << ls.path.string() << '\n';
    for (const auto & e : ls.errors) {std::cout << "        " << e << '\n';}
  }
  std::cout << loaded.size() - bad << " valid, " << bad << " invalid\n";
  return bad > 0 || loaded.empty() ? kSceneErrors : kOk;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"metamorphic testing of stochastic trajectory predictors"};
  app.require_subcommand(1);

  auto * gen = app.add_subcommand("gen", "generate a synthetic scene corpus");
  std::size_t gen_count = 50;
  std::uint64_t gen_seed = 0;
  fs::path gen_out;
  std::optional<fs::path> gen_recipe;
  ShapeOptions gen_shape;
  gen->add_option("--count", gen_count, "number of scenes")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "corpus seed");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--recipe", gen_recipe, "JSON recipe overriding the defaults")
  ->check(CLI::ExistingFile);
  gen_shape.add(*gen);

  auto * run = app.add_subcommand("run", "run a metamorphic test campaign");
  RunOptions ro;
  run->add_option("--scenes", ro.scenes, "scene package or directory of packages")->required();
  run->add_option("--sut", ro.sut, "equivariant | mutant | map-aware | cmd:<command>");
  run->add_option("--mr", ro.mr, "comma-separated relations, 'label-preserving' or 'map'");
  run->add_option("--n", ro.n, "source repetitions N");
  run->add_option("--k", ro.k, "trajectories per prediction");
  run->add_option("--alpha", ro.alpha, "significance level");
  run->add_option("--seed", ro.seed, "master seed");
  run->add_option("--out", ro.out, "report directory")->required();
  run->add_option("--parallel", ro.parallel, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--transitions", ro.transitions, "class-change transition table (JSON)")
  ->check(CLI::ExistingFile);
  run->add_option("--timeout", ro.timeout_s, "seconds per external SUT request")
  ->check(CLI::PositiveNumber);
  ro.shape.add(*run);

  auto * agree = app.add_subcommand("agree", "WVC vs displacement-error agreement");
  fs::path agree_results;
  std::vector<double> agree_thresholds = default_thresholds();
  std::string agree_label = "both";
  std::optional<fs::path> agree_out;
  agree->add_option("--results", agree_results, "results.json of a campaign")->required();
  agree->add_option("--thresholds", agree_thresholds, "comma-separated p-value thresholds")
  ->delimiter(',');
  agree->add_option("--label", agree_label, "mean-ade | mean-fde | both")
  ->check(CLI::IsMember({"mean-ade", "mean-fde", "both"}));
  agree->add_option("--out", agree_out, "CSV output file (default stdout)");

  auto * pc = app.add_subcommand("protocol-check", "probe an external SUT for conformance");
  std::string pc_sut;
  double pc_timeout = 30.0;
  std::uint64_t pc_seed = 0;
  pc->add_option("--sut", pc_sut, "command line of the SUT (optionally prefixed with cmd:)")
  ->required();
  pc->add_option("--timeout", pc_timeout, "seconds per request")->check(CLI::PositiveNumber);
  pc->add_option("--seed", pc_seed, "probe seed");

  auto * val = app.add_subcommand("validate", "lint scene packages");
  fs::path val_scenes;
  ShapeOptions val_shape;
  val->add_option("--scenes", val_scenes, "scene package or directory of packages")->required();
  val_shape.add(*val);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {return cmd_gen(gen_count, effective_seed(gen_seed), gen_out, gen_recipe,
                 gen_shape.shape());}
    if (*run) {return cmd_run(ro);}
    if (*agree) {return cmd_agree(agree_results, agree_thresholds, agree_label, agree_out);}
    if (*pc) {return cmd_protocol_check(pc_sut, pc_timeout, pc_seed);}
    if (*val) {return cmd_validate(val_scenes, val_shape.shape());}
  } catch (const UsageError & e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError & e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const ParseError & e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSceneErrors;
  }
  return kUsage;
}
