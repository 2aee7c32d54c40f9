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
#include <bit>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "trajtest/core.hpp"
#include "trajtest/error.hpp"
#include "trajtest/scenegen.hpp"
#include "trajtest/transforms.hpp"

namespace trajtest::io
{

namespace fs = std::filesystem;
using json = nlohmann::json;

inline std::string read_file(const fs::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {throw IoError("cannot open " + path.string());}
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path & path, std::string_view data)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {throw IoError("cannot write " + path.string());}
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) {throw IoError("write failed for " + path.string());}
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_exact(double v)
{
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

namespace detail
{

/// Reader for the whitespace- and comment-separated header fields of PGM/PFM files.
class HeaderReader
{
public:
  HeaderReader(std::string_view data, std::string where) : data_(data), where_(std::move(where)) {}

  std::string token()
  {
    for (;;) {
      while (pos_ < data_.size() && std::isspace(static_cast<unsigned char>(data_[pos_]))) {++pos_;}
      if (pos_ < data_.size() && data_[pos_] == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') {++pos_;}
        continue;
      }
      break;
    }
    const std::size_t start = pos_;
    while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_]))) {++pos_;}
    if (start == pos_) {fail("unexpected end of header");}
    return std::string(data_.substr(start, pos_ - start));
  }

  int integer(const char * what)
  {
    const auto t = token();
    int v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
      fail(std::string("bad ") + what + " '" + t + "'");
    }
    return v;
  }

  /// Consumes the single whitespace byte that ends the header.
  std::size_t end_of_header()
  {
    if (pos_ >= data_.size() || !std::isspace(static_cast<unsigned char>(data_[pos_]))) {
      fail("header must end with one whitespace byte");
    }
    return ++pos_;
  }

  [[noreturn]] void fail(const std::string & msg) const
  {
    throw ParseError(where_ + " byte " + std::to_string(pos_), msg);
  }

private:
  std::string_view data_;
  std::string where_;
  std::size_t pos_{0};
};

}  // namespace detail

/// Binary P5 graymap, maxval 255, one byte per cell.
inline std::string encode_pgm(const Raster<ClassId> & cells)
{
  std::string out = "P5\n" + std::to_string(cells.width()) + " " + std::to_string(cells.height()) +
    "\n255\n";
  out.append(cells.data().begin(), cells.data().end());
  return out;
}

inline Raster<ClassId> decode_pgm(std::string_view data, const std::string & where = "map.pgm")
{
  detail::HeaderReader hdr(data, where);
  if (hdr.token() != "P5") {hdr.fail("not a binary PGM (P5)");}
  const int w = hdr.integer("width");
  const int h = hdr.integer("height");
  const int maxval = hdr.integer("maxval");
  if (w <= 0 || h <= 0) {hdr.fail("dimensions must be positive");}
  if (maxval != 255) {hdr.fail("maxval must be 255, got " + std::to_string(maxval));}
  const std::size_t start = hdr.end_of_header();
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (data.size() - start < need) {
    throw ParseError(where + " byte " + std::to_string(data.size()), "truncated pixel data");
  }
  if (data.size() - start > need) {
    throw ParseError(where + " byte " + std::to_string(start + need), "trailing data after pixels");
  }
  std::vector<ClassId> cells(data.begin() + static_cast<std::ptrdiff_t>(start), data.end());
  return {w, h, std::move(cells)};
}

/// Grayscale PFM: little-endian float32 (scale -1.0), rows stored bottom to top.
inline std::string encode_pfm(const Raster<double> & values)
{
  std::string out = "Pf\n" + std::to_string(values.width()) + " " +
    std::to_string(values.height()) + "\n-1.0\n";
  for (int row = values.height() - 1; row >= 0; --row) {
    for (int col = 0; col < values.width(); ++col) {
      const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(values(col, row)));
      for (int s = 0; s < 32; s += 8) {out.push_back(static_cast<char>((u >> s) & 0xffU));}
    }
  }
  return out;
}

inline Raster<double> decode_pfm(std::string_view data, const std::string & where = "probmap.pfm")
{
  detail::HeaderReader hdr(data, where);
  if (hdr.token() != "Pf") {hdr.fail("not a grayscale PFM (Pf)");}
  const int w = hdr.integer("width");
  const int h = hdr.integer("height");
  const auto scale = hdr.token();
  if (w <= 0 || h <= 0) {hdr.fail("dimensions must be positive");}
  double s = 0.0;
  if (std::from_chars(scale.data(), scale.data() + scale.size(), s).ec != std::errc{} || !(s < 0.0)) {
    hdr.fail("only little-endian PFM (negative scale) is supported");
  }
  const std::size_t start = hdr.end_of_header();
  const std::size_t need = 4 * static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (data.size() - start != need) {
    throw ParseError(where, "expected " + std::to_string(need) + " bytes of samples, got " +
            std::to_string(data.size() - start));
  }
  Raster<double> out(w, h);
  std::size_t at = start;
  for (int row = h - 1; row >= 0; --row) {
    for (int col = 0; col < w; ++col) {
      std::uint32_t u = 0;
      for (int b = 0; b < 4; ++b) {
        u |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[at++])) << (8 * b);
      }
      out(col, row) = static_cast<double>(std::bit_cast<float>(u));
    }
  }
  return out;
}

inline json legend_to_json(const ClassLegend & legend)
{
  json classes = json::array();
  for (const auto & e : legend.entries()) {
    classes.push_back({{"id", e.id}, {"name", e.name}, {"walkability", e.walkability}});
  }
  return {{"classes", std::move(classes)}};
}

inline ClassLegend legend_from_json(const json & j, const std::string & where = "legend.json")
{
  try {
    std::vector<ClassEntry> entries;
    for (const auto & c : j.at("classes")) {
      entries.push_back({c.at("id").get<ClassId>(), c.at("name").get<std::string>(),
          c.at("walkability").get<double>()});
    }
    return ClassLegend(std::move(entries));
  } catch (const json::exception & e) {
    throw ParseError(where, e.what());
  } catch (const ContractError & e) {
    throw ParseError(where, e.what());
  }
}

inline constexpr std::string_view kTrajectoryHeader = "scene_id,role,t_index,x,y";

inline std::string encode_trajectories(const TestCase & tc)
{
  std::string out = std::string(kTrajectoryHeader) + "\n";
  const auto emit = [&](const char * role, const Trajectory & t) {
      for (std::size_t i = 0; i < t.size(); ++i) {
        out += tc.scene_id + "," + role + "," + std::to_string(i) + "," +
          format_exact(t.points[i].x) + "," + format_exact(t.points[i].y) + "\n";
      }
    };
  emit("history", tc.history);
  if (tc.ground_truth) {emit("ground_truth", *tc.ground_truth);}
  return out;
}

struct TrajectoryTable
{
  std::string scene_id;
  std::vector<Point2> history;
  std::vector<Point2> ground_truth;
};

/// Parses trajectories.csv. Rows of one role must have t_index 0, 1, 2, ... in order.
inline TrajectoryTable decode_trajectories(std::string_view data,
  const std::string & where = "trajectories.csv")
{
  TrajectoryTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < data.size()) {
    std::size_t end = data.find('\n', pos);
    if (end == std::string_view::npos) {end = data.size();}
    std::string_view line = data.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') {line.remove_suffix(1);}
    const std::string loc = where + " line " + std::to_string(line_no);
    if (!header_seen) {
      if (line != kTrajectoryHeader) {
        throw ParseError(loc, "expected header '" + std::string(kTrajectoryHeader) + "'");
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) {continue;}
    const auto fields = trajtest::detail::split(line, ',');
    if (fields.size() != 5) {throw ParseError(loc, "expected 5 fields");}
    const std::string id(fields[0]);
    if (table.scene_id.empty()) {
      table.scene_id = id;
    } else if (id != table.scene_id) {
      throw ParseError(loc, "scene_id '" + id + "' differs from '" + table.scene_id + "'");
    }
    std::vector<Point2> * dst = nullptr;
    if (fields[1] == "history") {
      dst = &table.history;
    } else if (fields[1] == "ground_truth") {
      dst = &table.ground_truth;
    } else {
      throw ParseError(loc, "role must be history or ground_truth");
    }
    std::size_t t = 0;
    const auto r = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), t);
    if (r.ec != std::errc{} || r.ptr != fields[2].data() + fields[2].size()) {
      throw ParseError(loc, "bad t_index");
    }
    if (t != dst->size()) {
      throw ParseError(loc, "t_index " + std::to_string(t) + " is not monotonic (expected " +
              std::to_string(dst->size()) + ")");
    }
    const auto x = trajtest::detail::parse_number(fields[3]);
    const auto y = trajtest::detail::parse_number(fields[4]);
    if (!x || !y) {throw ParseError(loc, "bad coordinate");}
    dst->push_back({*x, *y});
  }
  if (!header_seen) {throw ParseError(where, "empty file");}
  if (table.history.empty()) {throw ParseError(where, "no history rows");}
  return table;
}

/// One scene package: map.pgm, legend.json, trajectories.csv and an optional probmap.pfm.
inline void save_scene(const fs::path & dir, const TestCase & tc,
  const std::optional<ProbabilityMap> & prob_map = std::nullopt)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {throw IoError("cannot create " + dir.string() + ": " + ec.message());}
  write_file(dir / "map.pgm", encode_pgm(tc.map.cells));
  write_file(dir / "legend.json", legend_to_json(tc.map.legend).dump(2) + "\n");
  write_file(dir / "trajectories.csv", encode_trajectories(tc));
  if (prob_map) {write_file(dir / "probmap.pfm", encode_pfm(prob_map->values()));}
}

/// Parses one package; `dt` comes from the scenario configuration. Validation is left to
/// the caller.
inline TestCase load_scene(const fs::path & dir, double dt)
{
  const auto where = [&](const char * f) {return (dir / f).string();};
  auto cells = decode_pgm(read_file(dir / "map.pgm"), where("map.pgm"));
  json lj;
  try {
    lj = json::parse(read_file(dir / "legend.json"));
  } catch (const json::parse_error & e) {
    throw ParseError(where("legend.json") + " byte " + std::to_string(e.byte), e.what());
  }
  auto legend = legend_from_json(lj, where("legend.json"));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!legend.contains(cells.data()[i])) {
      throw ParseError(where("map.pgm") + " cell " + std::to_string(i),
              "class id " + std::to_string(cells.data()[i]) + " not in legend");
    }
  }
  const auto table = decode_trajectories(read_file(dir / "trajectories.csv"),
      where("trajectories.csv"));
  TestCase tc;
  tc.scene_id = table.scene_id;
  tc.map = SegmentationMap(std::move(cells), std::move(legend));
  tc.history = Trajectory{table.history, dt};
  if (!table.ground_truth.empty()) {tc.ground_truth = Trajectory{table.ground_truth, dt};}
  return tc;
}

inline std::optional<ProbabilityMap> load_prob_map(const fs::path & dir)
{
  if (!fs::exists(dir / "probmap.pfm")) {return std::nullopt;}
  return ProbabilityMap::from_weights(decode_pfm(read_file(dir / "probmap.pfm"),
           (dir / "probmap.pfm").string()));
}

inline bool is_scene_package(const fs::path & dir)
{
  return fs::is_regular_file(dir / "map.pgm") && fs::is_regular_file(dir / "trajectories.csv");
}

/// Result of loading one package: a valid test case or the reasons it was rejected.
struct LoadedScene
{
  fs::path path;
  std::optional<TestCase> scene;
  std::vector<std::string> errors;
};

/// A single package, or every package directly below `root` in name order.
inline std::vector<LoadedScene> load_scenes(const fs::path & root, const ScenarioShape & shape)
{
  if (!fs::exists(root)) {throw IoError("scene path does not exist: " + root.string());}
  std::vector<fs::path> dirs;
  if (is_scene_package(root)) {
    dirs.push_back(root);
  } else {
    for (const auto & entry : fs::directory_iterator(root)) {
      if (entry.is_directory() && is_scene_package(entry.path())) {dirs.push_back(entry.path());}
    }
    std::sort(dirs.begin(), dirs.end());
  }
  std::vector<LoadedScene> out;
  for (const auto & d : dirs) {
    LoadedScene ls;
    ls.path = d;
    try {
      auto tc = load_scene(d, shape.dt);
      ls.errors = validate_test_case(tc, shape);
      if (ls.errors.empty()) {ls.scene = std::move(tc);}
    } catch (const ParseError & e) {
      ls.errors.emplace_back(e.what());
    }
    out.push_back(std::move(ls));
  }
  return out;
}

/// Recipe file: any subset of the SceneRecipe fields; "start" is [x, y].
inline SceneRecipe recipe_from_json(const json & j, const std::string & where,
  SceneRecipe base = {})
{
  try {
    if (!j.is_object()) {throw ParseError(where, "recipe must be a JSON object");}
    static const std::map<std::string, int SceneRecipe::*> ints{
      {"width", &SceneRecipe::width}, {"height", &SceneRecipe::height},
      {"horizontal_roads", &SceneRecipe::horizontal_roads},
      {"vertical_roads", &SceneRecipe::vertical_roads},
      {"road_width_min", &SceneRecipe::road_width_min},
      {"road_width_max", &SceneRecipe::road_width_max},
      {"pavement_width", &SceneRecipe::pavement_width},
      {"terrain_patches", &SceneRecipe::terrain_patches},
      {"terrain_radius_min", &SceneRecipe::terrain_radius_min},
      {"terrain_radius_max", &SceneRecipe::terrain_radius_max},
      {"structure_blobs", &SceneRecipe::structure_blobs},
      {"structure_radius_min", &SceneRecipe::structure_radius_min},
      {"structure_radius_max", &SceneRecipe::structure_radius_max},
      {"tree_blobs", &SceneRecipe::tree_blobs},
      {"tree_radius_min", &SceneRecipe::tree_radius_min},
      {"tree_radius_max", &SceneRecipe::tree_radius_max}};
    for (const auto & [key, value] : j.items()) {
      if (auto it = ints.find(key); it != ints.end()) {
        base.*(it->second) = value.get<int>();
      } else if (key == "speed_min") {
        base.speed_min = value.get<double>();
      } else if (key == "speed_max") {
        base.speed_max = value.get<double>();
      } else if (key == "start") {
        base.start = Point2{value.at(0).get<double>(), value.at(1).get<double>()};
      } else if (key == "heading") {
        base.heading = value.get<double>();
      } else if (key == "seed") {
        base.seed = value.get<std::uint64_t>();
      } else {
        throw ParseError(where, "unknown recipe field '" + key + "'");
      }
    }
    return base;
  } catch (const json::exception & e) {
    throw ParseError(where, e.what());
  }
}

/// Transition table file: {"transitions": [{"from", "to", "effect"}]}.
inline TransitionTable transitions_from_json(const json & j, const std::string & where)
{
  try {
    std::vector<Transition> rows;
    for (const auto & t : j.at("transitions")) {
      const auto effect = parse_effect(t.at("effect").get<std::string>());
      if (!effect) {throw ParseError(where, "unknown effect " + t.at("effect").dump());}
      rows.push_back({t.at("from").get<std::string>(), t.at("to").get<std::string>(), *effect});
    }
    return TransitionTable(std::move(rows));
  } catch (const json::exception & e) {
    throw ParseError(where, e.what());
  }
}

inline TransitionTable load_transitions(const fs::path & path)
{
  try {
    return transitions_from_json(json::parse(read_file(path)), path.string());
  } catch (const json::parse_error & e) {
    throw ParseError(path.string() + " byte " + std::to_string(e.byte), e.what());
  }
}

}  // namespace trajtest::io
