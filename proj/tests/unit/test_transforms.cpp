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

#include <algorithm>
#include <cmath>
#include <map>

#include "test_util.hpp"
#include "trajtest/transforms.hpp"

using namespace trajtest;
using trajtest::testing::random_case;

namespace
{

/// Crossing-number point-in-polygon, independent of the convex half-plane test.
bool crossing_number_inside(const std::vector<Point2> & poly, Point2 p)
{
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point2 a = poly[i];
    const Point2 b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) {inside = !inside;}
    }
  }
  return inside;
}

TestCase fixed_case()
{
  SplitMix64 rng(7);
  return random_case(rng, 24, 16);
}

}  // namespace

TEST(Mirror, IsAnExactInvolution)
{
  SplitMix64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto tc = random_case(rng, 20 + static_cast<int>(rng() % 40), 20 + static_cast<int>(rng() % 40));
    for (auto axis : {MirrorAxis::vertical, MirrorAxis::horizontal}) {
      const auto once = mr_mirror(tc, axis);
      const auto twice = mr_mirror(once.follow_up, axis);
      EXPECT_EQ(twice.follow_up, tc);
    }
  }
}

TEST(Mirror, VerticalFlipsColumns)
{
  const auto tc = fixed_case();
  const auto m = mr_mirror(tc, MirrorAxis::vertical);
  for (int row = 0; row < 16; ++row) {
    for (int col = 0; col < 24; ++col) {
      EXPECT_EQ(m.follow_up.map.cells(23 - col, row), tc.map.cells(col, row));
    }
  }
  EXPECT_EQ(m.follow_up.history.points[0].x, 24.0 - tc.history.points[0].x);
  EXPECT_EQ(m.follow_up.history.points[0].y, tc.history.points[0].y);
}

TEST(Rotate, FourQuarterTurnsAreIdentity)
{
  SplitMix64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto tc = random_case(rng, 10 + static_cast<int>(rng() % 50), 10 + static_cast<int>(rng() % 50));
    TestCase cur = tc;
    for (int i = 0; i < 4; ++i) {cur = mr_rotate(cur, 90).follow_up;}
    EXPECT_EQ(cur, tc);
    EXPECT_EQ(mr_rotate(mr_rotate(tc, 90).follow_up, 270).follow_up, tc);
    EXPECT_EQ(mr_rotate(mr_rotate(tc, 90).follow_up, 90).follow_up, mr_rotate(tc, 180).follow_up);
  }
}

TEST(Rotate, QuarterTurnIsClockwiseAndSwapsDims)
{
  const auto tc = fixed_case();
  const auto r = mr_rotate(tc, 90);
  EXPECT_EQ(r.follow_up.map.width(), 16);
  EXPECT_EQ(r.follow_up.map.height(), 24);
  // Top-left source cell ends up in the top-right corner.
  EXPECT_EQ(r.follow_up.map.cells(15, 0), tc.map.cells(0, 0));
  EXPECT_EQ(r.follow_up.map.cells(0, 0), tc.map.cells(0, 15));
  const Point2 p{3.0, 1.0};
  EXPECT_EQ(r.forward(p), (Point2{15.0, 3.0}));
  EXPECT_EQ((*r.inverse)(r.forward(p)), p);
  EXPECT_THROW(mr_rotate(tc, 45), ContractError);
}

TEST(Composition, MirrorVThenMirrorHIsHalfTurn)
{
  SplitMix64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto tc = random_case(rng, 12 + static_cast<int>(rng() % 40), 12 + static_cast<int>(rng() % 40));
    const auto vh = mr_mirror(mr_mirror(tc, MirrorAxis::vertical).follow_up, MirrorAxis::horizontal);
    EXPECT_EQ(vh.follow_up, mr_rotate(tc, 180).follow_up);
  }
}

TEST(Rescale, DimensionsAndInverse)
{
  const auto tc = fixed_case();
  const auto down = mr_rescale(tc, 0.25, 0.2);
  EXPECT_EQ(down.follow_up.map.width(), 19);
  EXPECT_EQ(down.follow_up.map.height(), 13);
  EXPECT_FALSE(down.permutes_cells);
  for (std::size_t i = 0; i < tc.history.size(); ++i) {
    const Point2 back = (*down.inverse)(down.follow_up.history.points[i]);
    EXPECT_NEAR(back.x, tc.history.points[i].x, 1e-9);
    EXPECT_NEAR(back.y, tc.history.points[i].y, 1e-9);
  }
  const auto same = mr_rescale(tc, 0.25, 0.25);
  EXPECT_TRUE(same.permutes_cells);
  EXPECT_EQ(same.follow_up, tc);
}

TEST(Rescale, RejectsTinyResults)
{
  SplitMix64 rng(4);
  const auto tc = random_case(rng, 9, 9);
  EXPECT_THROW(mr_rescale(tc, 0.25, 0.2), DegenerateInputError);
  EXPECT_THROW(mr_rescale(tc, 0.0, 0.2), ContractError);
}

TEST(ClassChange, RoiIsExactlyTheReplacedCells)
{
  const auto tc = fixed_case();
  const auto terrain = tc.map.count(classes::terrain);
  ASSERT_GT(terrain, 0u);
  const auto tr = mr_class_change(tc, {"terrain", "road", ExpectedEffect::decrease});
  EXPECT_EQ(tr.roi->size(), terrain);
  EXPECT_EQ(tr.follow_up.map.count(classes::terrain), 0u);
  EXPECT_EQ(tr.follow_up.map.count(classes::road), tc.map.count(classes::road) + terrain);
  for (Cell c : *tr.roi) {EXPECT_EQ(tc.map.cells[c], classes::terrain);}
  EXPECT_EQ(tr.follow_up.history, tc.history);
  EXPECT_EQ(tr.expected_effect, ExpectedEffect::decrease);
}

TEST(ClassChange, SkipsWhenSourceClassIsAbsent)
{
  auto tc = fixed_case();
  for (auto & c : tc.map.cells.data()) {c = classes::pavement;}
  EXPECT_THROW(mr_class_change(tc, {"terrain", "road", ExpectedEffect::decrease}), SkipCase);
}

TEST(Obstacle, RoiMatchesCrossingNumberBruteForce)
{
  SplitMix64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const Point2 c{80.0 * rng.uniform(), 60.0 * rng.uniform()};
    const double radius = 2.0 + 10.0 * rng.uniform();
    const auto poly = regular_polygon(c, radius, 12);
    const auto roi = rasterize_convex(poly, 80, 60);
    std::vector<Cell> brute;
    for (int row = 0; row < 60; ++row) {
      for (int col = 0; col < 80; ++col) {
        if (crossing_number_inside(poly, cell_center({col, row}))) {brute.push_back({col, row});}
      }
    }
    EXPECT_EQ(roi, brute);
  }
}

TEST(Obstacle, PlacedAlongFirstSourceTrajectory)
{
  TestCase tc;
  tc.scene_id = "o";
  tc.map = SegmentationMap(Raster<ClassId>(64, 64, classes::pavement), ClassLegend::standard());
  tc.history = Trajectory{{{2.0, 32.0}, {4.0, 32.0}, {6.0, 32.0}, {8.0, 32.0}}, 0.4};
  PredictionSet pred;
  pred.trajectories.push_back({{{20.0, 32.0}, {40.0, 32.0}}, 0.4});
  const auto tr = mr_obstacle(tc, pred, {"structure", 5.0, 0.5});
  ASSERT_TRUE(tr.roi);
  EXPECT_EQ(tr.follow_up.map.cells(30, 32), classes::structure);
  EXPECT_EQ(tr.follow_up.map.cells(36, 32), classes::pavement);
  for (Cell c : *tr.roi) {
    EXPECT_LE(norm(cell_center(c) - Point2{30.0, 32.0}), 5.0);
  }
  EXPECT_THROW(mr_obstacle(tc, pred, {"structure", 25.0, 0.5}), PlacementError);
}

TEST(PointAlong, UsesArcLength)
{
  Trajectory t{{{0.0, 0.0}, {3.0, 0.0}, {3.0, 1.0}}, 1.0};
  EXPECT_EQ(point_along(t, 0.5), (Point2{2.0, 0.0}));
  EXPECT_EQ(point_along(t, 1.0), (Point2{3.0, 1.0}));
  EXPECT_EQ(point_along(t, 0.0), (Point2{0.0, 0.0}));
}

TEST(MRSpec, TokensRoundTrip)
{
  for (const char * tok : {"mirror-v", "mirror-h", "rotate-90", "rotate-180", "rotate-270",
      "identity", "resize-0.2", "resize-0.3", "class:terrain>road:decrease", "obstacle"})
  {
    const auto mr = MRSpec::parse(tok);
    EXPECT_EQ(MRSpec::parse(mr.token()).token(), mr.token()) << tok;
  }
  EXPECT_EQ(MRSpec::parse("resize-0.2").label(), "Resize-0.2");
  EXPECT_EQ(MRSpec::parse("rotate-270").label(), "Rotate-270");
  EXPECT_THROW(MRSpec::parse("rotate-45"), ContractError);
  EXPECT_THROW(MRSpec::parse("spin"), ContractError);
}

TEST(MRSpec, ClassChangeEffectComesFromTable)
{
  const auto inc = MRSpec::parse("class:terrain>pavement");
  const auto & p = std::get<ClassChangeParams>(inc.params);
  EXPECT_EQ(p.effect, ExpectedEffect::increase);
  EXPECT_EQ(std::get<ClassChangeParams>(MRSpec::parse("class:terrain>road").params).effect,
    ExpectedEffect::decrease);
  EXPECT_FALSE(inc.label_preserving());
}

TEST(MRSpec, SuiteAndAliases)
{
  EXPECT_EQ(label_preserving_suite().size(), 7u);
  EXPECT_EQ(parse_mr_list("label-preserving").size(), 7u);
  EXPECT_EQ(parse_mr_list("mirror-v,rotate-90").size(), 2u);
  EXPECT_EQ(TransitionTable::standard().rows().size(), 18u);
}

TEST(TransformPrediction, MirrorMovesTrajectoriesAndMap)
{
  const auto tc = fixed_case();
  PredictionSet pred;
  pred.trajectories.push_back({{{1.0, 2.0}, {3.0, 4.0}}, 0.4});
  Raster<double> w(24, 16, 0.0);
  w(0, 0) = 1.0;
  pred.prob_map = ProbabilityMap::from_weights(w);
  const auto tr = mr_mirror(tc, MirrorAxis::vertical);
  const auto out = transform_prediction(pred, tr);
  EXPECT_EQ(out.trajectories[0].points[1], (Point2{21.0, 4.0}));
  EXPECT_EQ((*out.prob_map)[(Cell{23, 0})], 1.0);
  const auto cc = mr_class_change(tc, {"terrain", "road", ExpectedEffect::decrease});
  EXPECT_THROW(transform_prediction(pred, cc), ContractError);
}
