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

#include "test_util.hpp"
#include "trajtest/sut.hpp"

using namespace trajtest;

namespace
{

SutRequest request_for(const TestCase & tc, std::uint64_t seed = 99)
{
  return {tc.scene_id, tc.history, tc.map, 20, 12, seed};
}

double max_coordinate_gap(const PredictionSet & a, const PredictionSet & b)
{
  double gap = 0.0;
  for (std::size_t k = 0; k < a.trajectories.size(); ++k) {
    for (std::size_t t = 0; t < a.trajectories[k].size(); ++t) {
      const Point2 d = a.trajectories[k].points[t] - b.trajectories[k].points[t];
      gap = std::max({gap, std::abs(d.x), std::abs(d.y)});
    }
  }
  return gap;
}

TestCase corridor_case()
{
  TestCase tc;
  tc.scene_id = "corridor";
  tc.map = SegmentationMap(Raster<ClassId>(80, 60, classes::pavement), ClassLegend::standard());
  for (int i = 0; i < 8; ++i) {
    tc.history.points.push_back({10.0 + 3.0 * i, 30.0 + 0.05 * i * i});
  }
  return tc;
}

}  // namespace

TEST(Equivariant, CommutesWithLabelPreservingRelations)
{
  SplitMix64 rng(51);
  EquivariantReference sut;
  for (int trial = 0; trial < 20; ++trial) {
    const auto tc = trajtest::testing::random_case(rng, 192, 160);
    const auto source = sut.predict(request_for(tc)).prediction;
    for (const auto & mr : label_preserving_suite()) {
      const auto tr = apply_mr(tc, mr);
      const auto follow = sut.predict(request_for(tr.follow_up, 12345)).prediction;
      const auto expected = transform_prediction(source, tr);
      EXPECT_LE(max_coordinate_gap(follow, expected), 1e-9) << mr.label();
    }
  }
}

TEST(Equivariant, RequestSeedOnlyMattersWhenAsked)
{
  const auto tc = corridor_case();
  EquivariantReference canonical;
  EXPECT_EQ(canonical.predict(request_for(tc, 1)).prediction.trajectories,
    canonical.predict(request_for(tc, 2)).prediction.trajectories);
  ReferenceOptions opt;
  opt.noise_key = NoiseKey::canonical_and_request;
  EquivariantReference seeded(opt);
  EXPECT_NE(seeded.predict(request_for(tc, 1)).prediction.trajectories,
    seeded.predict(request_for(tc, 2)).prediction.trajectories);
  EXPECT_EQ(seeded.predict(request_for(tc, 1)).prediction,
    seeded.predict(request_for(tc, 1)).prediction);
}

TEST(Equivariant, ExtrapolatesTheVelocity)
{
  const auto tc = corridor_case();
  ReferenceOptions opt;
  opt.jitter_px = 0.0;
  EquivariantReference sut(opt);
  const auto p = sut.predict(request_for(tc)).prediction;
  const Point2 v = (1.0 / 7.0) * (tc.history.back() - tc.history.points.front());
  EXPECT_NEAR(p.trajectories[0].points[11].x, tc.history.back().x + 12.0 * v.x, 1e-9);
  EXPECT_NEAR(p.trajectories[0].points[11].y, tc.history.back().y + 12.0 * v.y, 1e-9);
  validate_response(request_for(tc), {p});
}

TEST(Mutant, BreaksMirrorEquivariance)
{
  const auto tc = corridor_case();
  BiasedMutant sut;
  const auto source = sut.predict(request_for(tc)).prediction;
  const auto tr = mr_mirror(tc, MirrorAxis::vertical);
  const auto follow = sut.predict(request_for(tr.follow_up)).prediction;
  // Drift of 2 px per step keeps its world direction, so the gap at step t is 4 t.
  EXPECT_NEAR(max_coordinate_gap(follow, transform_prediction(source, tr)), 48.0, 1e-9);
  const auto flip = mr_mirror(tc, MirrorAxis::horizontal);
  EXPECT_LE(max_coordinate_gap(sut.predict(request_for(flip.follow_up)).prediction,
    transform_prediction(source, flip)), 1e-9);
}

TEST(MapAware, DetoursAroundAWall)
{
  auto tc = corridor_case();
  for (int r = 15; r < 46; ++r) {
    for (int c = 46; c < 50; ++c) {tc.map.cells(c, r) = classes::structure;}
  }
  MapAwareReference sut;
  const auto req = request_for(tc);
  const auto p = sut.predict(req).prediction;
  validate_response(req, {p});
  EXPECT_EQ(intersection_rate(p, tc.map, impassable_classes(tc.map.legend)), 0.0);
  EquivariantReference straight;
  EXPECT_GT(intersection_rate(straight.predict(req).prediction, tc.map,
    impassable_classes(tc.map.legend)), 0.8);
}

TEST(MapAware, GoalMapFollowsWalkability)
{
  auto tc = corridor_case();
  for (int r = 0; r < 60; ++r) {
    for (int c = 60; c < 80; ++c) {tc.map.cells(c, r) = classes::road;}
  }
  MapAwareReference sut;
  const auto before = sut.predict(request_for(tc)).prediction;
  auto changed = tc;
  for (auto & c : changed.map.cells.data()) {
    if (c == classes::road) {c = classes::pavement;}
  }
  const auto after = sut.predict(request_for(changed)).prediction;
  ASSERT_TRUE(before.prob_map.has_value() && after.prob_map.has_value());
  const Raster<double> & pb = before.prob_map->values();
  const Raster<double> & pa = after.prob_map->values();
  double mass_before = 0.0;
  double mass_after = 0.0;
  for (int r = 0; r < 60; ++r) {
    for (int c = 60; c < 80; ++c) {
      mass_before += pb(c, r);
      mass_after += pa(c, r);
    }
  }
  EXPECT_GT(mass_after, mass_before);
  EXPECT_EQ(sut.predict(request_for(tc)).prediction, before);
}

TEST(Validation, RejectsBrokenResponses)
{
  const auto tc = corridor_case();
  EquivariantReference sut;
  const auto req = request_for(tc);
  auto resp = sut.predict(req);
  resp.prediction.trajectories.pop_back();
  EXPECT_THROW(validate_response(req, resp), SutError);
  resp = sut.predict(req);
  resp.prediction.trajectories[3].points[2].x = std::nan("");
  EXPECT_THROW(validate_response(req, resp), SutError);
  resp = sut.predict(req);
  resp.prediction.trajectories[0].points.pop_back();
  try {
    validate_response(req, resp, "{raw}");
    FAIL();
  } catch (const SutError & e) {
    EXPECT_EQ(e.raw_payload(), "{raw}");
    EXPECT_EQ(e.scene_id(), "corridor");
  }
}

TEST(CanonicalFrame, MirrorFlipsHandednessAndKeepsKey)
{
  const auto tc = corridor_case();
  const auto f = canonical_frame(tc.history, 80, 60);
  EXPECT_NEAR(dot(f.u, f.v), 0.0, 1e-15);
  EXPECT_NEAR(norm(f.v), 1.0, 1e-15);
  const auto m = mr_mirror(tc, MirrorAxis::horizontal);
  const auto g = canonical_frame(m.follow_up.history, 80, 60);
  EXPECT_NEAR(g.v.y, -f.v.y, 1e-12);
  EXPECT_NEAR(g.v.x, f.v.x, 1e-12);
  EXPECT_EQ(f.key, g.key);
  EXPECT_NE(f.key, canonical_frame(Trajectory{{{1.0, 1.0}, {2.0, 1.0}}, 0.4}, 80, 60).key);
}
