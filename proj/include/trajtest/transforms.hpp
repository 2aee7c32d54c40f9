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

#include <array>
#include <charconv>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "trajtest/core.hpp"

namespace trajtest
{

/// x' = a*x + b*y + tx, y' = c*x + d*y + ty.
struct Affine2
{
  double a{1.0};
  double b{0.0};
  double c{0.0};
  double d{1.0};
  double tx{0.0};
  double ty{0.0};

  Point2 operator()(Point2 p) const noexcept
  {
    return {(a * p.x + b * p.y) + tx, (c * p.x + d * p.y) + ty};
  }

  /// Sign of the linear part's determinant: -1 for reflections.
  double determinant() const noexcept {return a * d - b * c;}

  friend bool operator==(const Affine2 &, const Affine2 &) = default;
};

enum class MirrorAxis { vertical, horizontal };
enum class ExpectedEffect { increase, decrease, avoidance };
enum class MRKind { mirror, rotate, rescale, class_change, obstacle };

inline std::string_view to_string(ExpectedEffect e)
{
  switch (e) {
    case ExpectedEffect::increase: return "increase";
    case ExpectedEffect::decrease: return "decrease";
    case ExpectedEffect::avoidance: return "avoidance";
  }
  return "?";
}

inline std::optional<ExpectedEffect> parse_effect(std::string_view s)
{
  if (s == "increase") {return ExpectedEffect::increase;}
  if (s == "decrease") {return ExpectedEffect::decrease;}
  if (s == "avoidance") {return ExpectedEffect::avoidance;}
  return std::nullopt;
}

struct Transition
{
  std::string from;
  std::string to;
  ExpectedEffect effect{ExpectedEffect::decrease};

  friend bool operator==(const Transition &, const Transition &) = default;
};

/// Class-change transitions and the likelihood effect they are expected to cause.
class TransitionTable
{
public:
  TransitionTable() = default;
  explicit TransitionTable(std::vector<Transition> rows) : rows_(std::move(rows)) {}

  /// Walkability ordering road < terrain < pavement, structure/tree impassable.
  static TransitionTable standard()
  {
    std::vector<Transition> rows;
    const auto add = [&rows](std::initializer_list<const char *> from,
        std::initializer_list<const char *> to, ExpectedEffect e) {
        for (const char * f : from) {
          for (const char * t : to) {
            rows.push_back({f, t, e});
          }
        }
      };
    add({"pavement", "terrain"}, {"road"}, ExpectedEffect::decrease);
    add({"road"}, {"pavement", "terrain"}, ExpectedEffect::increase);
    add({"road", "pavement", "terrain"}, {"structure", "tree"}, ExpectedEffect::avoidance);
    add({"structure", "tree"}, {"road", "pavement", "terrain"}, ExpectedEffect::increase);
    add({"terrain"}, {"pavement"}, ExpectedEffect::increase);
    add({"pavement"}, {"terrain"}, ExpectedEffect::decrease);
    return TransitionTable(std::move(rows));
  }

  std::optional<ExpectedEffect> lookup(std::string_view from, std::string_view to) const
  {
    for (const auto & r : rows_) {
      if (r.from == from && r.to == to) {return r.effect;}
    }
    return std::nullopt;
  }

  const std::vector<Transition> & rows() const noexcept {return rows_;}

private:
  std::vector<Transition> rows_;
};

struct MirrorParams
{
  MirrorAxis axis{MirrorAxis::vertical};
  friend bool operator==(const MirrorParams &, const MirrorParams &) = default;
};

struct RotateParams
{
  int degrees{90};  // clockwise
  friend bool operator==(const RotateParams &, const RotateParams &) = default;
};

struct RescaleParams
{
  double s_old{0.25};
  double s_new{0.25};
  double ratio() const noexcept {return s_new / s_old;}
  friend bool operator==(const RescaleParams &, const RescaleParams &) = default;
};

struct ClassChangeParams
{
  std::string source_class;
  std::string target_class;
  ExpectedEffect effect{ExpectedEffect::decrease};
  friend bool operator==(const ClassChangeParams &, const ClassChangeParams &) = default;
};

struct ObstacleParams
{
  std::string class_name{"structure"};
  double radius{8.0};
  double fraction{0.5};
  friend bool operator==(const ObstacleParams &, const ObstacleParams &) = default;
};

namespace detail
{

inline std::string format_number(double v)
{
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline std::optional<double> parse_number(std::string_view s)
{
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {return std::nullopt;}
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep)
{
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos :
      pos - start));
    if (pos == std::string_view::npos) {break;}
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

/// One metamorphic relation with its parameters.
struct MRSpec
{
  using Params = std::variant<MirrorParams, RotateParams, RescaleParams, ClassChangeParams,
      ObstacleParams>;
  Params params;

  static MRSpec mirror(MirrorAxis axis) {return {MirrorParams{axis}};}
  static MRSpec rotate(int degrees) {return {RotateParams{degrees}};}
  static MRSpec rescale(double s_old, double s_new) {return {RescaleParams{s_old, s_new}};}
  static MRSpec identity() {return rescale(0.25, 0.25);}
  static MRSpec class_change(std::string from, std::string to, ExpectedEffect effect)
  {
    return {ClassChangeParams{std::move(from), std::move(to), effect}};
  }
  static MRSpec class_change(std::string from, std::string to,
    const TransitionTable & table = TransitionTable::standard())
  {
    auto effect = table.lookup(from, to);
    if (!effect) {
      throw ContractError("no expected effect configured for transition " + from + " -> " + to);
    }
    return class_change(std::move(from), std::move(to), *effect);
  }
  static MRSpec obstacle(std::string class_name = "structure", double radius = 8.0,
    double fraction = 0.5)
  {
    return {ObstacleParams{std::move(class_name), radius, fraction}};
  }

  MRKind kind() const noexcept {return static_cast<MRKind>(params.index());}
  bool label_preserving() const noexcept
  {
    return kind() == MRKind::mirror || kind() == MRKind::rotate || kind() == MRKind::rescale;
  }

  void validate() const
  {
    if (auto r = std::get_if<RotateParams>(&params)) {
      if (r->degrees != 90 && r->degrees != 180 && r->degrees != 270) {
        throw ContractError("rotation is limited to 90, 180 or 270 degrees");
      }
    } else if (auto s = std::get_if<RescaleParams>(&params)) {
      if (!(s->s_old > 0.0 && s->s_old <= 1.0 && s->s_new > 0.0 && s->s_new <= 1.0)) {
        throw ContractError("rescale factors must lie in (0, 1]");
      }
    } else if (auto c = std::get_if<ClassChangeParams>(&params)) {
      if (c->source_class.empty() || c->target_class.empty() ||
        c->source_class == c->target_class)
      {
        throw ContractError("class change needs two distinct classes");
      }
    } else if (auto o = std::get_if<ObstacleParams>(&params)) {
      if (!(o->radius >= 2.0)) {
        throw ContractError("obstacle radius must be at least 2 px");
      }
      if (!(o->fraction > 0.0 && o->fraction < 1.0)) {
        throw ContractError("obstacle placement fraction must lie in (0, 1)");
      }
      if (o->class_name.empty()) {
        throw ContractError("obstacle class is empty");
      }
    }
  }

  /// Human-readable row label, e.g. "Mirror-v", "Rotate-90", "Resize-0.2".
  std::string label() const
  {
    switch (kind()) {
      case MRKind::mirror:
        return std::get<MirrorParams>(params).axis == MirrorAxis::vertical ? "Mirror-v" :
               "Mirror-h";
      case MRKind::rotate:
        return "Rotate-" + std::to_string(std::get<RotateParams>(params).degrees);
      case MRKind::rescale: {
          const auto & s = std::get<RescaleParams>(params);
          if (s.s_old == s.s_new) {return "Identity";}
          std::string out = "Resize-" + detail::format_number(s.s_new);
          if (s.s_old != 0.25) {out += "@" + detail::format_number(s.s_old);}
          return out;
        }
      case MRKind::class_change: {
          const auto & c = std::get<ClassChangeParams>(params);
          return "ClassChange-" + c.source_class + ">" + c.target_class + " (" +
                 std::string(to_string(c.effect)) + ")";
        }
      case MRKind::obstacle: {
          const auto & o = std::get<ObstacleParams>(params);
          return "Obstacle-" + o.class_name + " r=" + detail::format_number(o.radius);
        }
    }
    return "?";
  }

  /// Machine token accepted by parse(); round-trips every parameter.
  std::string token() const
  {
    switch (kind()) {
      case MRKind::mirror:
        return std::get<MirrorParams>(params).axis == MirrorAxis::vertical ? "mirror-v" :
               "mirror-h";
      case MRKind::rotate:
        return "rotate-" + std::to_string(std::get<RotateParams>(params).degrees);
      case MRKind::rescale: {
          const auto & s = std::get<RescaleParams>(params);
          if (s.s_old == 0.25 && s.s_new == 0.25) {return "identity";}
          std::string out = "resize-" + detail::format_number(s.s_new);
          if (s.s_old != 0.25) {out += "@" + detail::format_number(s.s_old);}
          return out;
        }
      case MRKind::class_change: {
          const auto & c = std::get<ClassChangeParams>(params);
          return "class:" + c.source_class + ">" + c.target_class + ":" +
                 std::string(to_string(c.effect));
        }
      case MRKind::obstacle: {
          const auto & o = std::get<ObstacleParams>(params);
          return "obstacle:" + o.class_name + ":" + detail::format_number(o.radius) + ":" +
                 detail::format_number(o.fraction);
        }
    }
    return "?";
  }

  /// Inverse of token(). Class-change tokens without an effect take it from `table`.
  static MRSpec parse(std::string_view token,
    const TransitionTable & table = TransitionTable::standard())
  {
    const auto fail = [&]() -> MRSpec {
        throw ContractError("unrecognized metamorphic relation '" + std::string(token) + "'");
      };
    MRSpec out;
    if (token == "mirror-v") {
      out = mirror(MirrorAxis::vertical);
    } else if (token == "mirror-h") {
      out = mirror(MirrorAxis::horizontal);
    } else if (token.starts_with("rotate-")) {
      auto deg = detail::parse_number(token.substr(7));
      if (!deg || *deg != std::floor(*deg)) {return fail();}
      out = rotate(static_cast<int>(*deg));
    } else if (token == "identity") {
      out = identity();
    } else if (token.starts_with("resize-")) {
      auto body = token.substr(7);
      double s_old = 0.25;
      if (auto at = body.find('@'); at != std::string_view::npos) {
        auto old = detail::parse_number(body.substr(at + 1));
        if (!old) {return fail();}
        s_old = *old;
        body = body.substr(0, at);
      }
      auto s_new = detail::parse_number(body);
      if (!s_new) {return fail();}
      out = rescale(s_old, *s_new);
    } else if (token.starts_with("class:")) {
      auto parts = detail::split(token.substr(6), ':');
      if (parts.empty() || parts.size() > 2) {return fail();}
      auto arrow = parts[0].find('>');
      if (arrow == std::string_view::npos) {return fail();}
      std::string from(parts[0].substr(0, arrow));
      std::string to(parts[0].substr(arrow + 1));
      if (parts.size() == 2) {
        auto effect = parse_effect(parts[1]);
        if (!effect) {return fail();}
        out = class_change(std::move(from), std::move(to), *effect);
      } else {
        out = class_change(std::move(from), std::move(to), table);
      }
    } else if (token.starts_with("obstacle")) {
      ObstacleParams p;
      if (token.size() > 8) {
        if (token[8] != ':') {return fail();}
        auto parts = detail::split(token.substr(9), ':');
        if (parts.size() > 3) {return fail();}
        if (!parts[0].empty()) {p.class_name = std::string(parts[0]);}
        if (parts.size() > 1) {
          auto r = detail::parse_number(parts[1]);
          if (!r) {return fail();}
          p.radius = *r;
        }
        if (parts.size() > 2) {
          auto f = detail::parse_number(parts[2]);
          if (!f) {return fail();}
          p.fraction = *f;
        }
      }
      out = {p};
    } else {
      return fail();
    }
    out.validate();
    return out;
  }

  friend bool operator==(const MRSpec &, const MRSpec &) = default;
};

/// The seven label-preserving variants in table order.
inline std::vector<MRSpec> label_preserving_suite()
{
  return {MRSpec::mirror(MirrorAxis::vertical), MRSpec::mirror(MirrorAxis::horizontal),
    MRSpec::rotate(90), MRSpec::rotate(180), MRSpec::rotate(270),
    MRSpec::rescale(0.25, 0.2), MRSpec::rescale(0.25, 0.3)};
}

/// Expands comma-separated tokens; "label-preserving" and "map" are group aliases.
inline std::vector<MRSpec> parse_mr_list(std::string_view list,
  const TransitionTable & table = TransitionTable::standard())
{
  std::vector<MRSpec> out;
  for (auto tok : detail::split(list, ',')) {
    if (tok.empty()) {continue;}
    if (tok == "label-preserving") {
      auto suite = label_preserving_suite();
      out.insert(out.end(), suite.begin(), suite.end());
    } else if (tok == "map") {
      out.push_back(MRSpec::class_change("terrain", "road", table));
      out.push_back(MRSpec::class_change("terrain", "pavement", table));
      out.push_back(MRSpec::class_change("pavement", "structure", table));
      out.push_back(MRSpec::obstacle());
    } else {
      out.push_back(MRSpec::parse(tok, table));
    }
  }
  if (out.empty()) {
    throw ContractError("empty metamorphic relation list");
  }
  return out;
}

struct TransformResult
{
  MRKind kind{MRKind::mirror};
  TestCase follow_up;
  bool label_preserving{false};
  /// True when the raster transform is a pure permutation of cells (no renormalization needed).
  bool permutes_cells{false};
  Affine2 forward;
  std::optional<Affine2> inverse;
  std::optional<std::vector<Cell>> roi;
  std::optional<ExpectedEffect> expected_effect;
};

/// Nearest-neighbour resampling: each target cell centre is pulled back through `inverse`.
template<typename T>
Raster<T> resample_nearest(const Raster<T> & src, const Affine2 & inverse, int width, int height)
{
  Raster<T> out(width, height);
  for (int row = 0; row < height; ++row) {
    for (int col = 0; col < width; ++col) {
      const Point2 source = inverse(cell_center({col, row}));
      out(col, row) = src[src.cell_of(source)];
    }
  }
  return out;
}

namespace detail
{

inline Trajectory apply(const Affine2 & f, const Trajectory & t)
{
  Trajectory out{{}, t.dt};
  out.points.reserve(t.size());
  for (Point2 p : t.points) {out.points.push_back(f(p));}
  return out;
}

inline TransformResult geometric(const TestCase & tc, MRKind kind, const Affine2 & forward,
  const Affine2 & inverse, int new_w, int new_h, bool permutes)
{
  TransformResult tr;
  tr.kind = kind;
  tr.label_preserving = true;
  tr.permutes_cells = permutes;
  tr.forward = forward;
  tr.inverse = inverse;
  tr.follow_up.scene_id = tc.scene_id;
  tr.follow_up.map = SegmentationMap(resample_nearest(tc.map.cells, inverse, new_w, new_h),
      tc.map.legend);
  tr.follow_up.history = apply(forward, tc.history);
  if (tc.ground_truth) {
    tr.follow_up.ground_truth = apply(forward, *tc.ground_truth);
  }
  return tr;
}

}  // namespace detail

/// Reflection across the vertical (x' = W - x) or horizontal (y' = H - y) centre line.
inline TransformResult mr_mirror(const TestCase & tc, MirrorAxis axis)
{
  const double w = tc.map.width();
  const double h = tc.map.height();
  const Affine2 f = axis == MirrorAxis::vertical ?
    Affine2{-1.0, 0.0, 0.0, 1.0, w, 0.0} :
    Affine2{1.0, 0.0, 0.0, -1.0, 0.0, h};
  return detail::geometric(tc, MRKind::mirror, f, f, tc.map.width(), tc.map.height(), true);
}

/// Clockwise rotation. 90: (x, y) -> (H - y, x) with dims (H, W); 180: (W - x, H - y);
/// 270: (y, W - x) with dims (H, W).
inline TransformResult mr_rotate(const TestCase & tc, int degrees)
{
  const int wi = tc.map.width();
  const int hi = tc.map.height();
  const double w = wi;
  const double h = hi;
  switch (degrees) {
    case 90:
      return detail::geometric(tc, MRKind::rotate,
          Affine2{0.0, -1.0, 1.0, 0.0, h, 0.0}, Affine2{0.0, 1.0, -1.0, 0.0, 0.0, h},
          hi, wi, true);
    case 180: {
        const Affine2 f{-1.0, 0.0, 0.0, -1.0, w, h};
        return detail::geometric(tc, MRKind::rotate, f, f, wi, hi, true);
      }
    case 270:
      return detail::geometric(tc, MRKind::rotate,
          Affine2{0.0, 1.0, -1.0, 0.0, 0.0, w}, Affine2{0.0, -1.0, 1.0, 0.0, w, 0.0},
          hi, wi, true);
    default:
      throw ContractError("rotation is limited to multiples of 90 degrees (90, 180, 270), got " +
              std::to_string(degrees));
  }
}

/// Changes the input scale from s_old to s_new: coordinates times r = s_new / s_old, raster
/// resampled to (round(W r), round(H r)).
inline TransformResult mr_rescale(const TestCase & tc, double s_old, double s_new)
{
  if (!(s_old > 0.0 && s_old <= 1.0 && s_new > 0.0 && s_new <= 1.0)) {
    throw ContractError("rescale factors must lie in (0, 1]");
  }
  const double r = s_new / s_old;
  const int new_w = static_cast<int>(std::lround(tc.map.width() * r));
  const int new_h = static_cast<int>(std::lround(tc.map.height() * r));
  if (new_w < 8 || new_h < 8) {
    throw DegenerateInputError("rescaled map " + std::to_string(new_w) + "x" +
            std::to_string(new_h) + " is smaller than 8x8");
  }
  if (r == 1.0) {
    return detail::geometric(tc, MRKind::rescale, Affine2{}, Affine2{}, new_w, new_h, true);
  }
  const double inv = 1.0 / r;
  return detail::geometric(tc, MRKind::rescale, Affine2{r, 0.0, 0.0, r, 0.0, 0.0},
      Affine2{inv, 0.0, 0.0, inv, 0.0, 0.0}, new_w, new_h, false);
}

/// Replaces every cell of the source class by the target class. Throws SkipCase when the
/// source class does not occur.
inline TransformResult mr_class_change(const TestCase & tc, const ClassChangeParams & p)
{
  const auto & legend = tc.map.legend;
  auto from = legend.find(p.source_class);
  if (!from) {
    throw SkipCase("class '" + p.source_class + "' not in legend");
  }
  const ClassId to = legend.id_of(p.target_class);
  TransformResult tr;
  tr.kind = MRKind::class_change;
  tr.follow_up = tc;
  tr.expected_effect = p.effect;
  std::vector<Cell> roi;
  auto & cells = tr.follow_up.map.cells;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells.data()[i] == *from) {
      cells.data()[i] = to;
      roi.push_back(cells.cell_at(i));
    }
  }
  if (roi.empty()) {
    throw SkipCase("class '" + p.source_class + "' absent from scene " + tc.scene_id);
  }
  tr.roi = std::move(roi);
  return tr;
}

/// Point at arc-length fraction `f` along the polyline.
inline Point2 point_along(const Trajectory & t, double f)
{
  if (t.empty()) {throw ContractError("empty trajectory");}
  double total = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) {total += norm(t.points[i] - t.points[i - 1]);}
  if (total == 0.0) {return t.points.front();}
  double target = f * total;
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double seg = norm(t.points[i] - t.points[i - 1]);
    if (target <= seg && seg > 0.0) {
      const double u = target / seg;
      return t.points[i - 1] + u * (t.points[i] - t.points[i - 1]);
    }
    target -= seg;
  }
  return t.points.back();
}

/// Vertices of a regular polygon with one vertex due east of the centre.
inline std::vector<Point2> regular_polygon(Point2 center, double circumradius, int sides = 12)
{
  std::vector<Point2> v;
  v.reserve(static_cast<std::size_t>(sides));
  for (int k = 0; k < sides; ++k) {
    const double a = 2.0 * std::numbers::pi * k / sides;
    v.push_back({center.x + circumradius * std::cos(a), center.y + circumradius * std::sin(a)});
  }
  return v;
}

/// Convex polygon membership, boundary inclusive.
inline bool inside_convex(const std::vector<Point2> & poly, Point2 p)
{
  bool pos = false;
  bool neg = false;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2 a = poly[i];
    const Point2 b = poly[(i + 1) % poly.size()];
    const double c = cross(b - a, p - a);
    pos = pos || c > 0.0;
    neg = neg || c < 0.0;
    if (pos && neg) {return false;}
  }
  return true;
}

/// Cells whose centre lies inside the convex polygon, in row-major order.
inline std::vector<Cell> rasterize_convex(const std::vector<Point2> & poly, int width, int height)
{
  double min_x = poly[0].x, max_x = poly[0].x, min_y = poly[0].y, max_y = poly[0].y;
  for (Point2 p : poly) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const int c0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
  const int c1 = std::min(width - 1, static_cast<int>(std::ceil(max_x)));
  const int r0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
  const int r1 = std::min(height - 1, static_cast<int>(std::ceil(max_y)));
  std::vector<Cell> out;
  for (int row = r0; row <= r1; ++row) {
    for (int col = c0; col <= c1; ++col) {
      if (inside_convex(poly, cell_center({col, row}))) {out.push_back({col, row});}
    }
  }
  return out;
}

/// Places a 12-sided obstacle of circumradius `radius` at fraction `fraction` along the first
/// sampled source trajectory.
inline TransformResult mr_obstacle(const TestCase & tc, const PredictionSet & source_prediction,
  const ObstacleParams & p)
{
  if (source_prediction.trajectories.empty() || source_prediction.trajectories[0].empty()) {
    throw ContractError("obstacle placement needs a non-empty source prediction");
  }
  if (tc.history.empty()) {
    throw ContractError("obstacle placement needs a history");
  }
  MRSpec{p}.validate();
  const ClassId cls = tc.map.legend.id_of(p.class_name);
  const Point2 anchor = point_along(source_prediction.trajectories[0], p.fraction);
  if (norm(anchor - tc.history.back()) <= p.radius) {
    throw PlacementError("obstacle anchor within radius of the agent's last position");
  }
  const auto poly = regular_polygon(anchor, p.radius, 12);
  auto roi = rasterize_convex(poly, tc.map.width(), tc.map.height());
  if (roi.empty()) {
    throw PlacementError("obstacle polygon lies entirely outside the map");
  }
  TransformResult tr;
  tr.kind = MRKind::obstacle;
  tr.follow_up = tc;
  for (Cell c : roi) {tr.follow_up.map.cells[c] = cls;}
  tr.roi = std::move(roi);
  tr.expected_effect = ExpectedEffect::avoidance;
  return tr;
}

/// Applies `mr` to the source test case. Obstacle relations need the source prediction.
inline TransformResult apply_mr(const TestCase & tc, const MRSpec & mr,
  const PredictionSet * source_prediction = nullptr)
{
  mr.validate();
  return std::visit(
    [&](const auto & p) -> TransformResult {
      using P = std::decay_t<decltype(p)>;
      if constexpr (std::is_same_v<P, MirrorParams>) {
        return mr_mirror(tc, p.axis);
      } else if constexpr (std::is_same_v<P, RotateParams>) {
        return mr_rotate(tc, p.degrees);
      } else if constexpr (std::is_same_v<P, RescaleParams>) {
        return mr_rescale(tc, p.s_old, p.s_new);
      } else if constexpr (std::is_same_v<P, ClassChangeParams>) {
        return mr_class_change(tc, p);
      } else {
        if (source_prediction == nullptr) {
          throw ContractError("obstacle relation requires the source prediction");
        }
        return mr_obstacle(tc, *source_prediction, p);
      }
    }, mr.params);
}

/// Maps a source-frame prediction into the follow-up frame of a label-preserving transform.
inline PredictionSet transform_prediction(const PredictionSet & pred, const TransformResult & tr)
{
  if (!tr.label_preserving || !tr.inverse) {
    throw ContractError("transform_prediction needs a label-preserving transform");
  }
  PredictionSet out;
  out.sut_seed = pred.sut_seed;
  out.trajectories.reserve(pred.trajectories.size());
  for (const auto & t : pred.trajectories) {
    out.trajectories.push_back(detail::apply(tr.forward, t));
  }
  if (pred.prob_map) {
    auto values = resample_nearest(pred.prob_map->values(), *tr.inverse,
        tr.follow_up.map.width(), tr.follow_up.map.height());
    out.prob_map = tr.permutes_cells ? ProbabilityMap::from_normalized(std::move(values)) :
      ProbabilityMap::from_weights(std::move(values));
  }
  return out;
}

}  // namespace trajtest
