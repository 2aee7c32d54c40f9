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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "trajtest/core.hpp"
#include "trajtest/error.hpp"
#include "trajtest/rng.hpp"

namespace trajtest
{

/// Layout parameters for one synthetic scene. Lengths are in cells (= pixels).
struct SceneRecipe
{
  int width{192};
  int height{160};
  int horizontal_roads{1};
  int vertical_roads{1};
  int road_width_min{10};
  int road_width_max{16};
  int pavement_width{6};
  int terrain_patches{3};
  int terrain_radius_min{10};
  int terrain_radius_max{24};
  int structure_blobs{4};
  int structure_radius_min{5};
  int structure_radius_max{12};
  int tree_blobs{5};
  int tree_radius_min{2};
  int tree_radius_max{5};
  /// Walking speed in pixels per second; converted to per-step with the scenario dt.
  double speed_min{8.0};
  double speed_max{12.0};
  std::optional<Point2> start;
  std::optional<double> heading;  ///< radians
  std::uint64_t seed{0};

  void validate() const
  {
    if (width < 64 || height < 64) {throw ContractError("scene dimensions must be at least 64x64");}
    if (road_width_min < 1 || road_width_max < road_width_min || pavement_width < 1) {
      throw ContractError("invalid road or pavement widths");
    }
    if (!(speed_min > 0.0) || speed_max < speed_min) {throw ContractError("invalid speed range");}
    if (horizontal_roads + vertical_roads < 1 && !start) {
      throw ContractError("a scene without roads needs an explicit start");
    }
  }
};

namespace detail
{

inline double snap(double v) {return std::round(v * 256.0) / 256.0;}

inline int uniform_int(SplitMix64 & rng, int lo, int hi)
{
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

template<typename Pred>
void paint_disc(Raster<ClassId> & cells, Point2 c, double r, ClassId cls, Pred && allowed)
{
  for (int row = std::max(0, static_cast<int>(c.y - r)); row <= std::min(cells.height() - 1,
    static_cast<int>(c.y + r)); ++row)
  {
    for (int col = std::max(0, static_cast<int>(c.x - r)); col <= std::min(cells.width() - 1,
      static_cast<int>(c.x + r)); ++col)
    {
      const Point2 d = cell_center({col, row}) - c;
      if (dot(d, d) <= r * r && allowed(cells(col, row))) {cells(col, row) = cls;}
    }
  }
}

struct Band
{
  bool horizontal{true};
  double center{0.0};  ///< centre line of one pavement strip
};

}  // namespace detail

/// Deterministic scene: roads with pavement strips, terrain patches, structure and tree blobs,
/// and an agent walking along a pavement strip. Throws GenerationError when no walkable
/// corridor is found.
inline TestCase generate_scene(const SceneRecipe & recipe, const ScenarioShape & shape,
  std::string scene_id)
{
  recipe.validate();
  SplitMix64 rng(mix_seed({recipe.seed, fnv1a("scene")}));
  const int w = recipe.width;
  const int h = recipe.height;
  Raster<ClassId> cells(w, h, classes::background);

  for (int i = 0; i < recipe.terrain_patches; ++i) {
    const Point2 c{w * rng.uniform(), h * rng.uniform()};
    const double r = detail::uniform_int(rng, recipe.terrain_radius_min, recipe.terrain_radius_max);
    detail::paint_disc(cells, c, r, classes::terrain, [](ClassId) {return true;});
  }

  std::vector<detail::Band> bands;
  const auto lay_road = [&](bool horizontal) {
      const int extent = horizontal ? h : w;
      const int rw = detail::uniform_int(rng, recipe.road_width_min, recipe.road_width_max);
      const int pw = recipe.pavement_width;
      const int lo = pw + 8;
      const int hi = extent - rw - pw - 8;
      const int start = detail::uniform_int(rng, lo, std::max(lo, hi));
      for (int o = start - pw; o < start + rw + pw; ++o) {
        const ClassId cls = (o < start || o >= start + rw) ? classes::pavement : classes::road;
        const int len = horizontal ? w : h;
        for (int s = 0; s < len; ++s) {
          auto & cell = horizontal ? cells(s, o) : cells(o, s);
          // Crossing roads keep their asphalt.
          if (!(cls == classes::pavement && cell == classes::road)) {cell = cls;}
        }
      }
      bands.push_back({horizontal, start - 0.5 * pw});
      bands.push_back({horizontal, start + rw + 0.5 * pw});
    };
  for (int i = 0; i < recipe.horizontal_roads; ++i) {lay_road(true);}
  for (int i = 0; i < recipe.vertical_roads; ++i) {lay_road(false);}

  const auto off_street = [](ClassId c) {return c != classes::road && c != classes::pavement;};
  for (int i = 0; i < recipe.structure_blobs; ++i) {
    const Point2 c{w * rng.uniform(), h * rng.uniform()};
    const double r = detail::uniform_int(rng, recipe.structure_radius_min,
        recipe.structure_radius_max);
    detail::paint_disc(cells, c, r, classes::structure, off_street);
  }
  for (int i = 0; i < recipe.tree_blobs; ++i) {
    const Point2 c{w * rng.uniform(), h * rng.uniform()};
    const double r = detail::uniform_int(rng, recipe.tree_radius_min, recipe.tree_radius_max);
    detail::paint_disc(cells, c, r, classes::tree, off_street);
  }

  SegmentationMap map(std::move(cells), ClassLegend::standard());
  const std::size_t n = shape.history_length;
  const std::size_t steps = shape.history_length + shape.horizon;
  const auto walkable = [&](Point2 p) {
      return p.x >= 2.0 && p.y >= 2.0 && p.x <= w - 2.0 && p.y <= h - 2.0 &&
             map.legend.walkability(map.cells[map.cells.cell_of(p)]) > 0.0;
    };

  for (int attempt = 0; attempt < 400; ++attempt) {
    Point2 p;
    double heading = 0.0;
    if (recipe.start) {
      p = *recipe.start;
      heading = recipe.heading.value_or(2.0 * std::numbers::pi * rng.uniform());
    } else {
      const auto & band = bands[rng() % bands.size()];
      const double along = (band.horizontal ? w : h) * (0.1 + 0.8 * rng.uniform());
      const bool forward = rng() % 2 == 0;
      p = band.horizontal ? Point2{along, band.center} : Point2{band.center, along};
      heading = (band.horizontal ? 0.0 : 0.5 * std::numbers::pi) +
        (forward ? 0.0 : std::numbers::pi) + 0.15 * (rng.uniform() - 0.5);
    }
    const double speed_px_s = recipe.speed_min + (recipe.speed_max - recipe.speed_min) * rng.uniform();
    const double max_step = 0.75 * std::min(w, h) / static_cast<double>(steps);
    const double step = std::min(speed_px_s * shape.dt, max_step);
    // Gentle bend over the history, a sharper turn and a speed change over the future.
    const double bend = (rng() % 2 == 0 ? 1.0 : -1.0) * (0.01 + 0.02 * rng.uniform());
    const double turn = (rng() % 2 == 0 ? 1.0 : -1.0) * (0.03 + 0.07 * rng.uniform());
    const double accel = 0.97 + 0.06 * rng.uniform();

    std::vector<Point2> pts;
    pts.push_back({detail::snap(p.x), detail::snap(p.y)});
    double v = step;
    bool ok = walkable(pts.back());
    for (std::size_t i = 1; i < steps && ok; ++i) {
      const bool future = i >= n;
      heading += future ? turn : bend;
      if (future) {v *= accel;}
      p = p + v * Point2{std::cos(heading), std::sin(heading)};
      pts.push_back({detail::snap(p.x), detail::snap(p.y)});
      ok = walkable(pts.back());
    }
    if (!ok) {continue;}
    TestCase tc;
    tc.scene_id = std::move(scene_id);
    tc.map = std::move(map);
    tc.history = Trajectory{{pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(n)}, shape.dt};
    tc.ground_truth = Trajectory{{pts.begin() + static_cast<std::ptrdiff_t>(n), pts.end()},
      shape.dt};
    return tc;
  }
  throw GenerationError("no walkable corridor of " + std::to_string(steps) +
          " steps found for scene " + scene_id);
}

inline std::string corpus_scene_id(std::size_t index)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%03zu", index);
  return buf;
}

/// `count` scenes whose recipes differ only in their seed.
inline std::vector<TestCase> generate_corpus(std::size_t count, const ScenarioShape & shape,
  std::uint64_t seed, SceneRecipe base = {})
{
  std::vector<TestCase> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    base.seed = mix_seed({seed, static_cast<std::uint64_t>(i)});
    out.push_back(generate_scene(base, shape, corpus_scene_id(i)));
  }
  return out;
}

}  // namespace trajtest
