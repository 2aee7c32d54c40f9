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
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "trajtest/error.hpp"

namespace trajtest
{

/// Continuous map coordinate in raster pixels. x runs along the width, y along the height.
struct Point2
{
  double x{0.0};
  double y{0.0};

  friend bool operator==(const Point2 &, const Point2 &) = default;
};

inline Point2 operator+(Point2 a, Point2 b) {return {a.x + b.x, a.y + b.y};}
inline Point2 operator-(Point2 a, Point2 b) {return {a.x - b.x, a.y - b.y};}
inline Point2 operator*(double s, Point2 p) {return {s * p.x, s * p.y};}
inline double dot(Point2 a, Point2 b) {return a.x * b.x + a.y * b.y;}
inline double cross(Point2 a, Point2 b) {return a.x * b.y - a.y * b.x;}
inline double norm(Point2 p) {return std::hypot(p.x, p.y);}
inline bool is_finite(Point2 p) {return std::isfinite(p.x) && std::isfinite(p.y);}

struct Trajectory
{
  std::vector<Point2> points;
  double dt{0.4};

  std::size_t size() const noexcept {return points.size();}
  bool empty() const noexcept {return points.empty();}
  const Point2 & back() const {return points.back();}

  friend bool operator==(const Trajectory &, const Trajectory &) = default;
};

/// Integer raster cell. Cell (col, row) covers [col, col+1) x [row, row+1).
struct Cell
{
  int col{0};
  int row{0};

  friend bool operator==(const Cell &, const Cell &) = default;
  friend auto operator<=>(const Cell &, const Cell &) = default;
};

inline Point2 cell_center(Cell c) {return {c.col + 0.5, c.row + 0.5};}

/// Row-major W x H grid (row is the outer loop).
template<typename T>
class Raster
{
public:
  using value_type = T;

  Raster() = default;
  Raster(int width, int height, T fill = T{})
  : width_(width), height_(height)
  {
    if (width <= 0 || height <= 0) {
      throw ContractError("raster dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }
  Raster(int width, int height, std::vector<T> data)
  : width_(width), height_(height), data_(std::move(data))
  {
    if (width <= 0 || height <= 0) {
      throw ContractError("raster dimensions must be positive");
    }
    if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
      throw ContractError("raster data size does not match dimensions");
    }
  }

  int width() const noexcept {return width_;}
  int height() const noexcept {return height_;}
  std::size_t size() const noexcept {return data_.size();}

  bool contains(Cell c) const noexcept
  {
    return c.col >= 0 && c.row >= 0 && c.col < width_ && c.row < height_;
  }
  std::size_t index(Cell c) const noexcept
  {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(c.col);
  }
  Cell cell_at(std::size_t index) const noexcept
  {
    return {static_cast<int>(index % static_cast<std::size_t>(width_)),
      static_cast<int>(index / static_cast<std::size_t>(width_))};
  }

  /// Cell containing `p`, clamped to the raster.
  Cell cell_of(Point2 p) const noexcept
  {
    const auto clamp_axis = [](double v, int n) {
        const double f = std::floor(v);
        if (!(f >= 0.0)) {return 0;}
        if (f >= n - 1) {return n - 1;}
        return static_cast<int>(f);
      };
    return {clamp_axis(p.x, width_), clamp_axis(p.y, height_)};
  }

  T & operator()(int col, int row) {return data_[index({col, row})];}
  const T & operator()(int col, int row) const {return data_[index({col, row})];}
  T & operator[](Cell c) {return data_[index(c)];}
  const T & operator[](Cell c) const {return data_[index(c)];}

  std::vector<T> & data() noexcept {return data_;}
  const std::vector<T> & data() const noexcept {return data_;}

  friend bool operator==(const Raster &, const Raster &) = default;

private:
  int width_{0};
  int height_{0};
  std::vector<T> data_;
};

using ClassId = std::uint8_t;

/// Standard semantic classes of the built-in legend.
namespace classes
{
inline constexpr ClassId background = 0;
inline constexpr ClassId road = 1;
inline constexpr ClassId pavement = 2;
inline constexpr ClassId structure = 3;
inline constexpr ClassId terrain = 4;
inline constexpr ClassId tree = 5;
}  // namespace classes

struct ClassEntry
{
  ClassId id{0};
  std::string name;
  double walkability{0.0};

  friend bool operator==(const ClassEntry &, const ClassEntry &) = default;
};

/// Ordered class table. Ids are contiguous from 0 and id 0 is "background".
class ClassLegend
{
public:
  ClassLegend() : ClassLegend(standard()) {}

  explicit ClassLegend(std::vector<ClassEntry> entries)
  : entries_(std::move(entries))
  {
    if (entries_.empty()) {
      throw ContractError("class legend is empty");
    }
    if (entries_.size() > 256) {
      throw ContractError("class legend has more than 256 entries");
    }
    std::sort(entries_.begin(), entries_.end(),
      [](const ClassEntry & a, const ClassEntry & b) {return a.id < b.id;});
    std::size_t backgrounds = 0;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto & e = entries_[i];
      if (e.id != i) {
        throw ContractError("class ids must be unique and contiguous from 0");
      }
      if (!(e.walkability >= 0.0 && e.walkability <= 1.0)) {
        throw ContractError("walkability of class '" + e.name + "' outside [0, 1]");
      }
      if (e.name == "background") {
        ++backgrounds;
        if (e.id != 0) {
          throw ContractError("class 'background' must have id 0");
        }
      }
    }
    if (backgrounds != 1) {
      throw ContractError("legend needs exactly one 'background' entry with id 0");
    }
  }

  /// background, road, pavement, structure, terrain, tree with the default walkability table.
  static ClassLegend standard()
  {
    return ClassLegend(std::vector<ClassEntry>{
        {classes::background, "background", 0.1},
        {classes::road, "road", 0.2},
        {classes::pavement, "pavement", 1.0},
        {classes::structure, "structure", 0.0},
        {classes::terrain, "terrain", 0.6},
        {classes::tree, "tree", 0.0},
      });
  }

  /// Walkability used for a class name when a legend arrives without one (wire protocol).
  static double default_walkability(std::string_view name)
  {
    const ClassLegend legend = standard();
    for (const auto & e : legend.entries()) {
      if (e.name == name) {return e.walkability;}
    }
    return 0.1;
  }

  const std::vector<ClassEntry> & entries() const noexcept {return entries_;}
  std::size_t size() const noexcept {return entries_.size();}
  bool contains(ClassId id) const noexcept {return id < entries_.size();}

  std::optional<ClassId> find(std::string_view name) const
  {
    for (const auto & e : entries_) {
      if (e.name == name) {return e.id;}
    }
    return std::nullopt;
  }

  ClassId id_of(std::string_view name) const
  {
    if (auto id = find(name)) {return *id;}
    throw ContractError("unknown class '" + std::string(name) + "'");
  }

  const ClassEntry & at(ClassId id) const
  {
    if (!contains(id)) {
      throw ContractError("class id " + std::to_string(id) + " not in legend");
    }
    return entries_[id];
  }

  double walkability(ClassId id) const {return at(id).walkability;}

  friend bool operator==(const ClassLegend &, const ClassLegend &) = default;

private:
  std::vector<ClassEntry> entries_;
};

struct SegmentationMap
{
  Raster<ClassId> cells;
  ClassLegend legend;

  SegmentationMap() = default;
  SegmentationMap(Raster<ClassId> c, ClassLegend l)
  : cells(std::move(c)), legend(std::move(l))
  {
    for (ClassId v : cells.data()) {
      if (!legend.contains(v)) {
        throw ContractError("cell class " + std::to_string(v) + " not in legend");
      }
    }
  }

  int width() const noexcept {return cells.width();}
  int height() const noexcept {return cells.height();}

  std::size_t count(ClassId id) const
  {
    return static_cast<std::size_t>(std::count(cells.data().begin(), cells.data().end(), id));
  }

  /// Per-cell walkability taken from the legend.
  Raster<double> walkability() const
  {
    Raster<double> out(width(), height());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out.data()[i] = legend.walkability(cells.data()[i]);
    }
    return out;
  }

  friend bool operator==(const SegmentationMap &, const SegmentationMap &) = default;
};

/// Non-negative raster summing to one.
class ProbabilityMap
{
public:
  ProbabilityMap() = default;

  /// Renormalizes a non-negative, not-all-zero raster.
  static ProbabilityMap from_weights(Raster<double> weights)
  {
    double total = 0.0;
    for (double w : weights.data()) {
      if (!std::isfinite(w) || w < 0.0) {
        throw ContractError("probability weights must be finite and non-negative");
      }
      total += w;
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw ContractError("probability weights sum to zero");
    }
    for (double & w : weights.data()) {
      w /= total;
    }
    ProbabilityMap m;
    m.values_ = std::move(weights);
    return m;
  }

  /// Adopts values that are already normalized (checked to 1e-6).
  static ProbabilityMap from_normalized(Raster<double> values)
  {
    double total = 0.0;
    for (double w : values.data()) {
      if (!std::isfinite(w) || w < 0.0) {
        throw ContractError("probability values must be finite and non-negative");
      }
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-6) {
      throw ContractError("probability values do not sum to 1");
    }
    ProbabilityMap m;
    m.values_ = std::move(values);
    return m;
  }

  int width() const noexcept {return values_.width();}
  int height() const noexcept {return values_.height();}
  std::size_t size() const noexcept {return values_.size();}
  const Raster<double> & values() const noexcept {return values_;}
  double operator[](Cell c) const {return values_[c];}

  friend bool operator==(const ProbabilityMap &, const ProbabilityMap &) = default;

private:
  Raster<double> values_;
};

struct TestCase
{
  std::string scene_id;
  SegmentationMap map;
  Trajectory history;
  std::optional<Trajectory> ground_truth;

  friend bool operator==(const TestCase &, const TestCase &) = default;
};

/// K sampled futures (and optionally the goal probability map) returned by one predictor call.
struct PredictionSet
{
  std::vector<Trajectory> trajectories;
  std::optional<ProbabilityMap> prob_map;
  std::uint64_t sut_seed{0};

  std::size_t k() const noexcept {return trajectories.size();}
  std::size_t horizon() const noexcept {return trajectories.empty() ? 0 : trajectories[0].size();}

  friend bool operator==(const PredictionSet &, const PredictionSet &) = default;
};

/// Temporal layout every scene must follow.
struct ScenarioShape
{
  std::size_t history_length{8};
  std::size_t horizon{12};
  double dt{0.4};
};

inline bool in_bounds(Point2 p, int width, int height)
{
  return p.x >= 0.0 && p.y >= 0.0 && p.x <= width && p.y <= height;
}

/// One message per invariant breach; empty when the test case is valid.
inline std::vector<std::string> validate_test_case(const TestCase & tc, const ScenarioShape & shape)
{
  std::vector<std::string> out;
  const int w = tc.map.width();
  const int h = tc.map.height();
  if (w <= 0 || h <= 0) {
    out.emplace_back("map has no cells");
  }
  if (tc.scene_id.empty()) {
    out.emplace_back("scene_id is empty");
  }
  if (tc.history.empty()) {
    out.emplace_back("history is empty");
  } else if (tc.history.size() != shape.history_length) {
    out.push_back("history length " + std::to_string(tc.history.size()) + " ≠ history_length " +
      std::to_string(shape.history_length));
  }
  if (!(tc.history.dt > 0.0)) {
    out.emplace_back("history dt must be positive");
  }
  for (std::size_t i = 0; i < tc.history.size(); ++i) {
    const Point2 p = tc.history.points[i];
    if (!is_finite(p)) {
      out.push_back("history point " + std::to_string(i) + " not finite");
    } else if (!in_bounds(p, w, h)) {
      out.push_back("history point " + std::to_string(i) + " outside map bounds");
    }
  }
  if (tc.ground_truth) {
    const auto & gt = *tc.ground_truth;
    if (gt.size() != shape.horizon) {
      out.push_back("ground_truth length " + std::to_string(gt.size()) + " ≠ horizon " +
        std::to_string(shape.horizon));
    }
    if (!(gt.dt > 0.0)) {
      out.emplace_back("ground_truth dt must be positive");
    }
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (!is_finite(gt.points[i])) {
        out.push_back("ground_truth point " + std::to_string(i) + " not finite");
      }
    }
  }
  for (std::size_t i = 0; i < tc.map.cells.size(); ++i) {
    if (!tc.map.legend.contains(tc.map.cells.data()[i])) {
      out.push_back("map cell " + std::to_string(i) + " has class outside legend");
      break;
    }
  }
  return out;
}

}  // namespace trajtest
