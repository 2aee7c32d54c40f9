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

#include <gtest/gtest.h>

#include <atomic>
#include <set>

#include "trajtest/harness.hpp"
#include "trajtest/scenegen.hpp"

using namespace trajtest;

namespace
{

/// Forwards to a wrapped predictor and records every request seed.
class Recording : public Predictor
{
public:
  explicit Recording(std::unique_ptr<Predictor> inner) : inner_(std::move(inner)) {}

  SutResponse predict(const SutRequest & req) override
  {
    seeds.push_back(req.seed);
    return inner_->predict(req);
  }
  bool provides_prob_map() const override {return inner_->provides_prob_map();}
  std::string name() const override {return "recording";}

  std::vector<std::uint64_t> seeds;

private:
  std::unique_ptr<Predictor> inner_;
};

class Failing : public Predictor
{
public:
  explicit Failing(std::size_t ok_calls) : ok_calls_(ok_calls) {}

  SutResponse predict(const SutRequest & req) override
  {
    if (calls_++ >= ok_calls_) {throw SutError(req.scene_id, "boom");}
    return EquivariantReference().predict(req);
  }
  bool provides_prob_map() const override {return true;}
  std::string name() const override {return "failing";}

private:
  std::size_t ok_calls_;
  std::size_t calls_{0};
};

class NoMap : public Predictor
{
public:
  SutResponse predict(const SutRequest & req) override
  {
    auto r = EquivariantReference().predict(req);
    r.prediction.prob_map.reset();
    return r;
  }
  bool provides_prob_map() const override {return false;}
  std::string name() const override {return "no-map";}
};

std::vector<TestCase> corpus(std::size_t n) {return generate_corpus(n, ScenarioShape{}, 99);}

}  // namespace

TEST(Seeds, DerivedFromMasterSceneAndRun)
{
  EXPECT_EQ(source_seed(5, "a", 2), mix_seed({5, fnv1a("a"), 2}));
  EXPECT_EQ(follow_up_seed(5, "a"), mix_seed({5, fnv1a("a"), fnv1a("follow-up")}));
  std::set<std::uint64_t> seen;
  for (std::size_t i = 0; i < 8; ++i) {seen.insert(source_seed(5, "a", i));}
  seen.insert(follow_up_seed(5, "a"));
  EXPECT_EQ(seen.size(), 9u);
  EXPECT_NE(source_seed(5, "a", 0), source_seed(5, "b", 0));
  EXPECT_NE(source_seed(5, "a", 0), source_seed(6, "a", 0));
}

TEST(Config, Validation)
{
  HarnessConfig c;
  EXPECT_NO_THROW(c.validate());
  c.n_runs = 1;
  EXPECT_THROW(c.validate(), ContractError);
  c = {};
  c.alpha = 1.0;
  EXPECT_THROW(c.validate(), ContractError);
  c = {};
  c.mrs.clear();
  EXPECT_THROW(c.validate(), ContractError);
  const auto lt = HarnessConfig::long_term();
  EXPECT_EQ(lt.shape.history_length, 5u);
  EXPECT_EQ(lt.shape.horizon, 30u);
}

TEST(RunScene, CallsSutNPlusOneTimesWithDerivedSeeds)
{
  const auto tc = corpus(1).front();
  HarnessConfig cfg;
  cfg.seed = 11;
  for (const auto & mr : {MRSpec::mirror(MirrorAxis::vertical), MRSpec::obstacle()}) {
    Recording sut(std::make_unique<EquivariantReference>());
    const auto r = run_scene(tc, mr, sut, cfg);
    ASSERT_EQ(sut.seeds.size(), cfg.n_runs + 1) << mr.label();
    EXPECT_EQ(r.sut_calls, cfg.n_runs + 1);
    for (std::size_t i = 0; i < cfg.n_runs; ++i) {
      EXPECT_EQ(sut.seeds[i], source_seed(11, tc.scene_id, i));
    }
    EXPECT_EQ(sut.seeds.back(), follow_up_seed(11, tc.scene_id));
  }
}

TEST(RunScene, EquivariantSutIsNeverFlagged)
{
  HarnessConfig cfg;
  EquivariantReference sut;
  for (const auto & tc : corpus(3)) {
    for (const auto & mr : label_preserving_suite()) {
      const auto r = run_scene(tc, mr, sut, cfg);
      ASSERT_EQ(r.status, SceneStatus::ok) << r.note;
      ASSERT_EQ(r.wvc.size(), cfg.n_runs);
      EXPECT_EQ(r.wvc_rate, 0.0) << mr.label();
      ASSERT_TRUE(r.hvc);
      // Rescaled maps are resampled, so only cell permutations reproduce them exactly.
      if (mr.kind() != MRKind::rescale) {EXPECT_EQ(r.hvc->violation_rate, 0.0);}
      EXPECT_EQ(r.displacement_verdicts.size(), 4u);
      for (const auto & v : r.displacement_verdicts) {EXPECT_FALSE(v.violated);}
    }
  }
}

TEST(RunScene, MutantIsFlaggedUnderRotation)
{
  HarnessConfig cfg;
  BiasedMutant sut;
  for (const auto & tc : corpus(3)) {
    const auto r = run_scene(tc, MRSpec::rotate(180), sut, cfg);
    ASSERT_EQ(r.status, SceneStatus::ok);
    EXPECT_EQ(r.wvc_rate, 1.0);
    // Drifts of opposite sign: the follow-up is 2 * 24 px away from every transformed source.
    EXPECT_GT(r.wvc.front().distance, 40.0);
    EXPECT_EQ(run_scene(tc, MRSpec::identity(), sut, cfg).wvc_rate, 0.0);
  }
}

TEST(RunScene, MapRelationsRecordHtcAndIntersections)
{
  HarnessConfig cfg;
  MapAwareReference sut;
  const auto tc = corpus(1).front();
  const auto road = run_scene(tc, MRSpec::class_change("terrain", "road"), sut, cfg);
  if (road.status == SceneStatus::ok) {
    ASSERT_TRUE(road.htc);
    EXPECT_EQ(*road.expected_effect, ExpectedEffect::decrease);
    EXPECT_EQ(road.expectation_met, road.htc->violated);
    EXPECT_GT(road.roi_cells, 0u);
    EXPECT_TRUE(road.wvc.empty());
  } else {
    EXPECT_EQ(road.status, SceneStatus::skipped);
  }
  const auto obs = run_scene(tc, MRSpec::obstacle(), sut, cfg);
  ASSERT_EQ(obs.status, SceneStatus::ok) << obs.note;
  ASSERT_TRUE(obs.follow_up_intersection);
  ASSERT_TRUE(obs.source_intersection);
  EXPECT_GE(*obs.follow_up_intersection, 0.0);
  EXPECT_LE(*obs.follow_up_intersection, 1.0);
}

TEST(RunScene, SutFailureIsRecordedNotThrown)
{
  HarnessConfig cfg;
  const auto tc = corpus(1).front();
  Failing early(3);
  const auto a = run_scene(tc, MRSpec::rotate(90), early, cfg);
  EXPECT_EQ(a.status, SceneStatus::errored);
  EXPECT_NE(a.note.find("boom"), std::string::npos);
  Failing late(cfg.n_runs);
  const auto b = run_scene(tc, MRSpec::rotate(90), late, cfg);
  EXPECT_EQ(b.status, SceneStatus::errored);
  EXPECT_TRUE(b.wvc.empty());
  EXPECT_FALSE(b.hvc);
  EXPECT_TRUE(b.displacement_verdicts.empty());
}

TEST(RunScene, MissingProbMapSkipsHvc)
{
  HarnessConfig cfg;
  NoMap sut;
  const auto tc = corpus(1).front();
  const auto r = run_scene(tc, MRSpec::mirror(MirrorAxis::horizontal), sut, cfg);
  ASSERT_EQ(r.status, SceneStatus::ok);
  EXPECT_FALSE(r.hvc);
  EXPECT_NE(r.note.find("HVC skipped"), std::string::npos);
  EXPECT_EQ(r.wvc.size(), cfg.n_runs);
  const auto m = run_scene(tc, MRSpec::class_change("terrain", "pavement"), sut, cfg);
  EXPECT_FALSE(m.htc);
}

TEST(Campaign, DeterministicAndIndependentOfParallelism)
{
  const auto scenes = corpus(4);
  HarnessConfig cfg;
  cfg.mrs = {MRSpec::mirror(MirrorAxis::vertical), MRSpec::rotate(180), MRSpec::obstacle()};
  cfg.seed = 3;
  const PredictorFactory f = [] {return std::make_unique<BiasedMutant>();};
  const auto a = run_campaign(scenes, f, cfg);
  const auto b = run_campaign(scenes, f, cfg);
  cfg.parallelism = 3;
  const auto c = run_campaign(scenes, f, cfg);
  ASSERT_EQ(a.size(), scenes.size() * cfg.mrs.size());
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].scene_id, scenes[i / 3].scene_id);
    EXPECT_EQ(a[i].mr, cfg.mrs[i % 3]);
  }
}

TEST(Campaign, SharesSourceRunsAcrossRelations)
{
  const auto scenes = corpus(2);
  HarnessConfig cfg;
  cfg.mrs = {MRSpec::mirror(MirrorAxis::vertical), MRSpec::rotate(90)};
  auto calls = std::make_shared<std::atomic<std::size_t>>(0);
  const PredictorFactory f = [calls] {
      struct Counting : EquivariantReference
      {
        std::shared_ptr<std::atomic<std::size_t>> n;
        SutResponse predict(const SutRequest & r) override
        {
          ++*n;
          return EquivariantReference::predict(r);
        }
      };
      auto p = std::make_unique<Counting>();
      p->n = calls;
      return p;
    };
  run_campaign(scenes, f, cfg);
  EXPECT_EQ(calls->load(), scenes.size() * (cfg.n_runs + cfg.mrs.size()));
}

TEST(Aggregate, UnweightedMeansOverCompletedScenes)
{
  const auto mr = MRSpec::rotate(90);
  std::vector<SceneResult> rs(4);
  for (auto & r : rs) {r.mr = mr;}
  rs[0].wvc_rate = 0.25;
  rs[1].wvc_rate = 0.75;
  rs[0].hvc = HvcSummary{{Verdict::make(Criterion::hvc, 0.1, 1.0, 0.05, false),
    Verdict::make(Criterion::hvc, 0.3, 1.0, 0.05, false)}, {}, 0.0, 0.2, 0.1};
  rs[1].hvc = HvcSummary{{Verdict::make(Criterion::hvc, 0.5, 1.0, 0.05, false)}, {}, 0.0, 0.5, 0.0};
  rs[2].status = SceneStatus::skipped;
  rs[3].status = SceneStatus::errored;
  rs[3].wvc_rate = 1.0;
  const std::vector<MRSpec> mrs{mr, MRSpec::mirror(MirrorAxis::vertical)};
  const auto rows = aggregate(rs, mrs);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].mr, "Rotate-90");
  EXPECT_EQ(rows[0].scenes, 2u);
  EXPECT_EQ(rows[0].skipped, 1u);
  EXPECT_EQ(rows[0].errored, 1u);
  EXPECT_DOUBLE_EQ(*rows[0].wvc_pct, 50.0);
  // Pooled over the three distances 0.1, 0.3, 0.5.
  EXPECT_DOUBLE_EQ(*rows[0].hvc_mean, 0.3);
  EXPECT_NEAR(*rows[0].hvc_std, 0.2, 1e-15);
  EXPECT_FALSE(rows[0].htc_pct);
  EXPECT_FALSE(rows[0].made_pct);
  EXPECT_EQ(rows[1].scenes, 0u);
  EXPECT_FALSE(rows[1].wvc_pct);
}

TEST(Aggregate, MapRows)
{
  const auto mr = MRSpec::obstacle();
  std::vector<SceneResult> rs(3);
  for (auto & r : rs) {r.mr = mr;}
  rs[0].expectation_met = true;
  rs[1].expectation_met = false;
  rs[2].expectation_met = true;
  rs[0].follow_up_intersection = 0.0;
  rs[1].follow_up_intersection = 0.1;
  rs[2].follow_up_intersection = 0.05;
  const std::vector<MRSpec> mrs{mr};
  const auto row = aggregate(rs, mrs).front();
  EXPECT_NEAR(*row.htc_pct, 200.0 / 3.0, 1e-12);
  EXPECT_NEAR(*row.intersection_pct, 5.0, 1e-12);
  EXPECT_FALSE(row.wvc_pct);
}
