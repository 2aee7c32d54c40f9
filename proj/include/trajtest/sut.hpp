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
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "trajtest/core.hpp"
#include "trajtest/rng.hpp"
#include "trajtest/stats.hpp"
#include "trajtest/transforms.hpp"

namespace trajtest
{

struct SutRequest
{
  std::string scene_id;
  Trajectory history;
  SegmentationMap map;
  std::size_t k{20};
  std::size_t horizon{12};
  std::uint64_t seed{0};
};

struct SutResponse
{
  PredictionSet prediction;
};

/// Contract every system under test implements. Implementations must be a pure function of
/// (request, seed).
class Predictor
{
public:
  virtual ~Predictor() = default;
  virtual SutResponse predict(const SutRequest & request) = 0;
  virtual bool provides_prob_map() const = 0;
  virtual std::string name() const = 0;
};

/// Creates one predictor per worker thread.
using PredictorFactory = std::function<std::unique_ptr<Predictor>()>;

inline void validate_request(const SutRequest & req)
{
  if (req.k < 1 || req.horizon < 1) {
    throw ContractError("request needs k >= 1 and horizon >= 1");
  }
}

/// Throws SutError when the response breaks the PredictionSet invariants for this request.
inline void validate_response(const SutRequest & req, const SutResponse & resp,
  const std::string & raw = {})
{
  const auto fail = [&](const std::string & why) {
      throw SutError(req.scene_id, "invariant breach: " + why, raw);
    };
  const auto & p = resp.prediction;
  if (p.trajectories.size() != req.k) {
    fail("expected " + std::to_string(req.k) + " trajectories, got " +
      std::to_string(p.trajectories.size()));
  }
  for (std::size_t i = 0; i < p.trajectories.size(); ++i) {
    const auto & t = p.trajectories[i];
    if (t.size() != req.horizon) {
      fail("trajectory " + std::to_string(i) + " has " + std::to_string(t.size()) +
        " points, expected " + std::to_string(req.horizon));
    }
    for (Point2 q : t.points) {
      if (!is_finite(q)) {fail("trajectory " + std::to_string(i) + " has a non-finite point");}
    }
  }
  if (p.prob_map) {
    if (p.prob_map->width() != req.map.width() || p.prob_map->height() != req.map.height()) {
      fail("probability map dimensions differ from the scene map");
    }
    double total = 0.0;
    for (double v : p.prob_map->values().data()) {
      if (!std::isfinite(v) || v < 0.0) {fail("probability map has a negative or non-finite value");}
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-6) {fail("probability map does not sum to 1");}
  }
}

/// Whether reference predictors key their noise on the scene geometry alone or also on the
/// request seed.
enum class NoiseKey { canonical, canonical_and_request };

/// History-attached frame: origin at the last position, first axis along the overall
/// displacement, second axis oriented by the turning direction of the history. Mirroring,
/// rotating or rescaling the history transforms the frame the same way.
struct CanonicalFrame
{
  Point2 origin;
  Point2 u{1.0, 0.0};
  Point2 v{0.0, 1.0};
  double step{0.0};  ///< mean step length of the history
  std::uint64_t key{0};
};

inline CanonicalFrame canonical_frame(const Trajectory & history, int map_width, int map_height)
{
  if (history.size() < 2) {
    throw ContractError("history needs at least 2 points");
  }
  const auto & pts = history.points;
  const std::size_t n = pts.size();
  CanonicalFrame f;
  f.origin = pts.back();
  double path = 0.0;
  for (std::size_t i = 1; i < n; ++i) {path += norm(pts[i] - pts[i - 1]);}
  f.step = path / static_cast<double>(n - 1);

  const Point2 center{0.5 * map_width, 0.5 * map_height};
  const Point2 disp = pts.back() - pts.front();
  if (norm(disp) > 0.0) {
    f.u = (1.0 / norm(disp)) * disp;
  } else if (norm(center - f.origin) > 0.0) {
    f.u = (1.0 / norm(center - f.origin)) * (center - f.origin);
  }
  double turn = 0.0;
  double spread = 0.0;
  for (Point2 p : pts) {
    turn += cross(f.u, p - f.origin);
    spread += norm(p - f.origin);
  }
  double hand = 1.0;
  if (std::abs(turn) > 1e-7 * spread) {
    hand = turn > 0.0 ? 1.0 : -1.0;
  } else if (const double side = cross(f.u, center - f.origin); std::abs(side) > 1.0) {
    hand = side > 0.0 ? 1.0 : -1.0;
  }
  f.v = hand * Point2{-f.u.y, f.u.x};

  std::uint64_t key = mix_seed({static_cast<std::uint64_t>(n)});
  if (f.step > 0.0) {
    for (Point2 p : pts) {
      const Point2 r = p - f.origin;
      const auto q1 = static_cast<std::int64_t>(std::llround(1e3 * dot(r, f.u) / f.step));
      const auto q2 = static_cast<std::int64_t>(std::llround(1e3 * dot(r, f.v) / f.step));
      key = mix_seed({key, static_cast<std::uint64_t>(q1), static_cast<std::uint64_t>(q2)});
    }
  }
  f.key = key;
  return f;
}

struct ReferenceOptions
{
  /// Random-walk jitter per step at the nominal walking speed; scales with the history speed.
  double jitter_px{1.5};
  double nominal_step_px{4.0};
  /// Standard deviation of the goal bump in the probability map, scaled like the jitter.
  double bump_sigma_px{6.0};
  NoiseKey noise_key{NoiseKey::canonical};
};

/// Constant-velocity extrapolation with random-walk jitter drawn in the canonical frame, so
/// predict(g . request) = g . predict(request) for mirror, rotation and rescale.
class EquivariantReference : public Predictor
{
public:
  explicit EquivariantReference(ReferenceOptions opt = {}) : opt_(opt) {}

  SutResponse predict(const SutRequest & req) override {return predict_with_drift(req, {});}
  bool provides_prob_map() const override {return true;}
  std::string name() const override {return "equivariant";}

  const ReferenceOptions & options() const noexcept {return opt_;}

protected:
  SutResponse predict_with_drift(const SutRequest & req, Point2 drift) const
  {
    validate_request(req);
    const auto frame = canonical_frame(req.history, req.map.width(), req.map.height());
    const auto & pts = req.history.points;
    const Point2 vel = (1.0 / static_cast<double>(pts.size() - 1)) * (pts.back() - pts.front());
    const double factor = frame.step > 0.0 ? frame.step / opt_.nominal_step_px : 1.0;
    const double jitter = opt_.jitter_px * factor;
    const std::uint64_t seed = opt_.noise_key == NoiseKey::canonical ? frame.key :
      mix_seed({frame.key, req.seed});
    SplitMix64 rng(seed);

    SutResponse resp;
    resp.prediction.sut_seed = req.seed;
    resp.prediction.trajectories.reserve(req.k);
    for (std::size_t k = 0; k < req.k; ++k) {
      Trajectory t{{}, req.history.dt};
      t.points.reserve(req.horizon);
      double a = 0.0;
      double b = 0.0;
      for (std::size_t step = 1; step <= req.horizon; ++step) {
        a += rng.normal();
        b += rng.normal();
        const double s = static_cast<double>(step);
        t.points.push_back(frame.origin + s * vel + jitter * (a * frame.u + b * frame.v) +
          s * drift);
      }
      resp.prediction.trajectories.push_back(std::move(t));
    }

    const double horizon = static_cast<double>(req.horizon);
    const Point2 goal = frame.origin + horizon * vel + horizon * drift;
    const double sigma = opt_.bump_sigma_px * factor;
    Raster<double> w(req.map.width(), req.map.height());
    double total = 0.0;
    for (int row = 0; row < w.height(); ++row) {
      for (int col = 0; col < w.width(); ++col) {
        const Point2 d = cell_center({col, row}) - goal;
        total += w(col, row) = std::exp(-dot(d, d) / (2.0 * sigma * sigma));
      }
    }
    if (!(total > 0.0)) {
      std::fill(w.data().begin(), w.data().end(), 1.0);
    }
    resp.prediction.prob_map = ProbabilityMap::from_weights(std::move(w));
    return resp;
  }

private:
  ReferenceOptions opt_;
};

/// The equivariant reference plus a constant world-frame drift per step; breaks mirror and
/// rotation equivariance on purpose.
class BiasedMutant : public EquivariantReference
{
public:
  explicit BiasedMutant(Point2 drift = {2.0, 0.0}, ReferenceOptions opt = {})
  : EquivariantReference(opt), drift_(drift) {}

  SutResponse predict(const SutRequest & req) override {return predict_with_drift(req, drift_);}
  std::string name() const override {return "mutant";}
  Point2 drift() const noexcept {return drift_;}

private:
  Point2 drift_;
};

struct MapAwareOptions
{
  double jitter_px{1.5};
  double prior_sigma_min_px{4.0};
  /// Prior width as a fraction of the extrapolated travel distance.
  double prior_sigma_fraction{0.15};
  /// Planning keeps this many cells away from impassable cells when it can.
  int clearance_cells{1};
};

namespace detail
{

inline Raster<char> dilate(const Raster<char> & blocked, int radius)
{
  if (radius <= 0) {return blocked;}
  Raster<char> out(blocked.width(), blocked.height(), 0);
  for (int row = 0; row < blocked.height(); ++row) {
    for (int col = 0; col < blocked.width(); ++col) {
      if (!blocked(col, row)) {continue;}
      for (int dr = -radius; dr <= radius; ++dr) {
        for (int dc = -radius; dc <= radius; ++dc) {
          const Cell c{col + dc, row + dr};
          if (out.contains(c)) {out[c] = 1;}
        }
      }
    }
  }
  return out;
}

inline bool segment_clear(Point2 a, Point2 b, const Raster<char> & blocked)
{
  for (Cell c : traversed_cells(a, b, blocked.width(), blocked.height())) {
    if (blocked[c]) {return false;}
  }
  return true;
}

/// Greedy best-first search over the 8-connected grid (no corner cutting). Start and goal
/// cells are always enterable.
inline std::optional<std::vector<Cell>> greedy_search(const Raster<char> & blocked, Cell start,
  Cell goal)
{
  const auto h = [&](Cell c) {return std::hypot(c.col - goal.col, c.row - goal.row);};
  const auto free = [&](Cell c) {
      return blocked.contains(c) && (!blocked[c] || c == goal || c == start);
    };
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  std::vector<std::int64_t> parent(blocked.size(), -1);
  std::vector<char> seen(blocked.size(), 0);
  const std::size_t s = blocked.index(start);
  seen[s] = 1;
  open.push({h(start), s});
  while (!open.empty()) {
    const std::size_t idx = open.top().second;
    open.pop();
    const Cell cur = blocked.cell_at(idx);
    if (cur == goal) {
      std::vector<Cell> path;
      for (std::int64_t i = static_cast<std::int64_t>(idx); i >= 0;
        i = parent[static_cast<std::size_t>(i)])
      {
        path.push_back(blocked.cell_at(static_cast<std::size_t>(i)));
        if (static_cast<std::size_t>(i) == s) {break;}
      }
      std::reverse(path.begin(), path.end());
      return path;
    }
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) {continue;}
        const Cell nb{cur.col + dc, cur.row + dr};
        if (!free(nb)) {continue;}
        if (dr != 0 && dc != 0 &&
          (!free({cur.col + dc, cur.row}) || !free({cur.col, cur.row + dr})))
        {
          continue;
        }
        const std::size_t ni = blocked.index(nb);
        if (seen[ni]) {continue;}
        seen[ni] = 1;
        parent[ni] = static_cast<std::int64_t>(idx);
        open.push({h(nb), ni});
      }
    }
  }
  return std::nullopt;
}

/// Straight line when clear, otherwise a grid detour shortened by line-of-sight pulls.
inline std::vector<Point2> plan_path(Point2 start, Point2 goal, const Raster<char> & blocked,
  const Raster<char> & inflated)
{
  if (segment_clear(start, goal, blocked)) {return {start, goal};}
  const Cell s = blocked.cell_of(start);
  const Cell g = blocked.cell_of(goal);
  const Raster<char> * grid = &inflated;
  auto cells = greedy_search(inflated, s, g);
  if (!cells) {
    grid = &blocked;
    cells = greedy_search(blocked, s, g);
  }
  if (!cells) {return {start, goal};}
  std::vector<Point2> raw{start};
  for (std::size_t i = 1; i + 1 < cells->size(); ++i) {raw.push_back(cell_center((*cells)[i]));}
  raw.push_back(goal);
  std::vector<Point2> pulled{raw.front()};
  std::size_t anchor = 0;
  while (anchor + 1 < raw.size()) {
    std::size_t next = anchor + 1;
    for (std::size_t j = raw.size() - 1; j > anchor + 1; --j) {
      if (segment_clear(raw[anchor], raw[j], *grid)) {
        next = j;
        break;
      }
    }
    pulled.push_back(raw[next]);
    anchor = next;
  }
  return pulled;
}

/// `count` points at arc-length fractions 1/count, ..., 1 along the polyline.
inline std::vector<Point2> resample_polyline(const std::vector<Point2> & line, std::size_t count)
{
  Trajectory t{line, 1.0};
  std::vector<Point2> out;
  out.reserve(count);
  for (std::size_t i = 1; i <= count; ++i) {
    out.push_back(point_along(t, static_cast<double>(i) / static_cast<double>(count)));
  }
  return out;
}

}  // namespace detail

/// Goal-conditioned predictor that respects the semantic map: goal probabilities are class
/// walkability times a Gaussian prior around the constant-velocity endpoint, and paths detour
/// around impassable cells.
class MapAwareReference : public Predictor
{
public:
  explicit MapAwareReference(MapAwareOptions opt = {}) : opt_(opt) {}

  bool provides_prob_map() const override {return true;}
  std::string name() const override {return "map-aware";}

  /// Walkability x Gaussian prior, before normalization.
  Raster<double> goal_weights(const SutRequest & req) const
  {
    const auto & pts = req.history.points;
    const Point2 vel = (1.0 / static_cast<double>(pts.size() - 1)) * (pts.back() - pts.front());
    const double horizon = static_cast<double>(req.horizon);
    const Point2 goal = pts.back() + horizon * vel;
    const double sigma = std::max(opt_.prior_sigma_min_px,
        opt_.prior_sigma_fraction * norm(horizon * vel));
    Raster<double> w = req.map.walkability();
    for (int row = 0; row < w.height(); ++row) {
      for (int col = 0; col < w.width(); ++col) {
        const Point2 d = cell_center({col, row}) - goal;
        w(col, row) *= std::exp(-dot(d, d) / (2.0 * sigma * sigma));
      }
    }
    return w;
  }

  SutResponse predict(const SutRequest & req) override
  {
    validate_request(req);
    if (req.history.size() < 2) {
      throw ContractError("history needs at least 2 points");
    }
    Raster<double> w = goal_weights(req);
    if (!(std::accumulate(w.data().begin(), w.data().end(), 0.0) > 0.0)) {
      w = req.map.walkability();  // nothing walkable under the prior: global fallback
      if (!(std::accumulate(w.data().begin(), w.data().end(), 0.0) > 0.0)) {
        std::fill(w.data().begin(), w.data().end(), 1.0);
      }
    }
    auto prob = ProbabilityMap::from_weights(std::move(w));

    Raster<char> blocked(req.map.width(), req.map.height(), 0);
    for (std::size_t i = 0; i < blocked.size(); ++i) {
      blocked.data()[i] = req.map.legend.walkability(req.map.cells.data()[i]) == 0.0 ? 1 : 0;
    }
    const Raster<char> inflated = detail::dilate(blocked, opt_.clearance_cells);

    std::vector<double> cumulative(prob.size());
    std::partial_sum(prob.values().data().begin(), prob.values().data().end(),
      cumulative.begin());
    const double total = cumulative.back();

    SplitMix64 rng(mix_seed({req.seed, fnv1a("map-aware")}));
    const Point2 start = req.history.back();
    SutResponse resp;
    resp.prediction.sut_seed = req.seed;
    for (std::size_t k = 0; k < req.k; ++k) {
      const double u = rng.uniform() * total;
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      if (it == cumulative.end()) {--it;}
      // Skip zero-probability cells that share a cumulative value with their successor.
      std::size_t idx = static_cast<std::size_t>(it - cumulative.begin());
      while (prob.values().data()[idx] == 0.0 && idx + 1 < cumulative.size()) {++idx;}
      const Point2 goal = cell_center(prob.values().cell_at(idx));
      const auto line = detail::plan_path(start, goal, blocked, inflated);
      auto points = detail::resample_polyline(line, req.horizon);
      Point2 prev = start;
      for (std::size_t t = 0; t < points.size(); ++t) {
        const Point2 cand = points[t] + opt_.jitter_px * Point2{rng.normal(), rng.normal()};
        const bool keeps_clear = in_bounds(cand, req.map.width(), req.map.height()) &&
          detail::segment_clear(prev, cand, blocked) &&
          (t + 1 == points.size() || detail::segment_clear(cand, points[t + 1], blocked));
        if (keeps_clear) {points[t] = cand;}
        prev = points[t];
      }
      resp.prediction.trajectories.push_back({std::move(points), req.history.dt});
    }
    resp.prediction.prob_map = std::move(prob);
    return resp;
  }

private:
  MapAwareOptions opt_;
};

}  // namespace trajtest
