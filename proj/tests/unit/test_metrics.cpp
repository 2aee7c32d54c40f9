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

#include <cmath>

#include "trajtest/metrics.hpp"
#include "trajtest/rng.hpp"

using namespace trajtest;

namespace
{

ProbabilityMap map_of(std::vector<double> v)
{
  const int n = static_cast<int>(v.size());
  return ProbabilityMap::from_weights(Raster<double>(n, 1, std::move(v)));
}

ProbabilityMap random_map(SplitMix64 & rng, int n)
{
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto & x : v) {x = rng.uniform() < 0.2 ? 0.0 : rng.uniform();}
  v[0] += 1e-3;
  return map_of(std::move(v));
}

}  // namespace

TEST(Hellinger, HandValue)
{
  EXPECT_NEAR(hellinger(map_of({1.0, 0.0}), map_of({0.5, 0.5})), 0.54120, 1e-4);
  EXPECT_DOUBLE_EQ(hellinger(map_of({1.0, 0.0}), map_of({0.0, 1.0})), 1.0);
  EXPECT_EQ(hellinger(map_of({0.3, 0.7}), map_of({0.3, 0.7})), 0.0);
}

TEST(Hellinger, MetricAxioms)
{
  SplitMix64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 30);
    const auto p = random_map(rng, n);
    const auto q = random_map(rng, n);
    const auto r = random_map(rng, n);
    const double pq = hellinger(p, q);
    EXPECT_EQ(pq, hellinger(q, p));
    EXPECT_GE(pq, 0.0);
    EXPECT_LE(pq, 1.0);
    EXPECT_LE(pq, hellinger(p, r) + hellinger(r, q) + 1e-12);
  }
  EXPECT_THROW(hellinger(map_of({1.0, 1.0}), map_of({1.0, 1.0, 1.0})), ContractError);
}

TEST(DisplacementErrors, HandValues)
{
  const Trajectory gt{{{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}}, 0.4};
  PredictionSet p;
  p.trajectories.push_back({{{0.0, 1.0}, {1.0, 1.0}, {2.0, 1.0}}, 0.4});  // ade 1, fde 1
  p.trajectories.push_back({{{0.0, 0.0}, {1.0, 0.0}, {2.0, 3.0}}, 0.4});  // ade 1, fde 3
  p.trajectories.push_back({{{3.0, 4.0}, {4.0, 4.0}, {5.0, 4.0}}, 0.4});  // ade 5, fde 5
  const auto e = ade_fde(p, gt);
  EXPECT_DOUBLE_EQ(e.bon_ade, 1.0);
  EXPECT_DOUBLE_EQ(e.bon_fde, 1.0);
  EXPECT_DOUBLE_EQ(e.mean_ade, 7.0 / 3.0);
  EXPECT_DOUBLE_EQ(e.mean_fde, 3.0);
  EXPECT_THROW(ade_fde(p, Trajectory{{{0.0, 0.0}}, 0.4}), ContractError);
}

TEST(Pairwise, OrderAndCount)
{
  std::vector<int> v{1, 4, 9, 16};
  const auto d = pairwise_distances(std::span<const int>(v),
      [](int a, int b) {return static_cast<double>(b - a);});
  EXPECT_EQ(d, (std::vector<double>{3, 8, 15, 5, 12, 7}));
  EXPECT_THROW(pairwise_distances(std::span<const int>(v.data(), 1),
    [](int, int) {return 0.0;}), ContractError);
}
