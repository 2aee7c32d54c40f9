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

#include <cstring>
#include <filesystem>

#include "trajtest/io.hpp"
#include "trajtest/scenegen.hpp"

using namespace trajtest;
namespace fs = std::filesystem;

namespace
{

fs::path scratch(const std::string & name)
{
  const auto p = fs::temp_directory_path() / ("trajtest_io_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Pgm, RoundTripAndHandBytes)
{
  Raster<ClassId> cells(3, 2);
  for (std::size_t i = 0; i < cells.size(); ++i) {cells.data()[i] = static_cast<ClassId>(i);}
  const auto bytes = io::encode_pgm(cells);
  EXPECT_EQ(bytes, std::string("P5\n3 2\n255\n") + std::string("\0\1\2\3\4\5", 6));
  const auto back = io::decode_pgm(bytes);
  EXPECT_EQ(back.width(), 3);
  EXPECT_EQ(back.data(), cells.data());
  EXPECT_EQ(io::decode_pgm(std::string("P5 # c\n3 2\n# more\n255\n") +
    std::string("\0\1\2\3\4\5", 6)).data(), cells.data());
}

TEST(Pgm, Rejections)
{
  const std::string px(6, '\0');
  EXPECT_THROW(io::decode_pgm("P5\n3 2\n65535\n" + px), ParseError);
  EXPECT_THROW(io::decode_pgm("P2\n3 2\n255\n" + px), ParseError);
  EXPECT_THROW(io::decode_pgm("P5\n3 2\n255\n" + px + "x"), ParseError);
  EXPECT_THROW(io::decode_pgm("P5\n3 2\n255\n" + px.substr(1)), ParseError);
  try {
    io::decode_pgm("P5\n3 2\n255\n" + px + "xy");
    FAIL();
  } catch (const ParseError & e) {
    EXPECT_NE(std::string(e.what()).find("byte 17"), std::string::npos) << e.what();
  }
}

TEST(Pfm, RoundTripBottomToTop)
{
  Raster<double> v(2, 2);
  v(0, 0) = 0.5;
  v(1, 0) = 0.25;
  v(0, 1) = 0.125;
  v(1, 1) = 0.125;
  const auto bytes = io::encode_pfm(v);
  ASSERT_EQ(bytes.substr(0, 10), "Pf\n2 2\n-1.");
  const auto back = io::decode_pfm(bytes);
  EXPECT_EQ(back.data(), v.data());
  // The first stored row is the bottom one.
  float first;
  std::memcpy(&first, bytes.data() + bytes.size() - 16, 4);
  EXPECT_EQ(first, 0.125f);
  EXPECT_THROW(io::decode_pfm(bytes.substr(0, bytes.size() - 1)), ParseError);
}

TEST(Trajectories, RoundTripAndOrdering)
{
  const auto tc = generate_corpus(1, ScenarioShape{}, 3).front();
  const auto csv = io::encode_trajectories(tc);
  EXPECT_EQ(csv.substr(0, io::kTrajectoryHeader.size()), io::kTrajectoryHeader);
  const auto t = io::decode_trajectories(csv);
  EXPECT_EQ(t.scene_id, tc.scene_id);
  EXPECT_EQ(t.history, tc.history.points);
  EXPECT_EQ(t.ground_truth, tc.ground_truth->points);

  const std::string h = std::string(io::kTrajectoryHeader) + "\n";
  EXPECT_THROW(io::decode_trajectories(h + "s,history,0,1,1\ns,history,2,1,1\n"), ParseError);
  EXPECT_THROW(io::decode_trajectories(h + "s,history,1,1,1\n"), ParseError);
  EXPECT_THROW(io::decode_trajectories(h + "s,history,0,1\n"), ParseError);
  EXPECT_THROW(io::decode_trajectories(h + "s,future,0,1,1\n"), ParseError);
  EXPECT_THROW(io::decode_trajectories(h + "s,history,0,x,1\n"), ParseError);
  EXPECT_THROW(io::decode_trajectories(h + "s,history,0,1,1\nt,history,1,1,1\n"), ParseError);
  EXPECT_THROW(io::decode_trajectories("a,b\n"), ParseError);
  try {
    io::decode_trajectories(h + "s,history,0,1,1\ns,history,0,1,1\n");
    FAIL();
  } catch (const ParseError & e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(ScenePackage, SaveLoadRoundTrip)
{
  const auto dir = scratch("pkg");
  const auto tc = generate_corpus(1, ScenarioShape{}, 4).front();
  Raster<double> w(tc.map.cells.width(), tc.map.cells.height(), 1.0);
  w(3, 4) = 7.0;
  const auto pm = ProbabilityMap::from_weights(w);
  io::save_scene(dir, tc, pm);
  EXPECT_TRUE(io::is_scene_package(dir));
  const auto back = io::load_scene(dir, 0.4);
  EXPECT_EQ(back.scene_id, tc.scene_id);
  EXPECT_EQ(back.map.cells.data(), tc.map.cells.data());
  EXPECT_EQ(back.history.points, tc.history.points);
  EXPECT_EQ(back.ground_truth->points, tc.ground_truth->points);
  const auto pm2 = io::load_prob_map(dir);
  ASSERT_TRUE(pm2);
  EXPECT_NEAR((*pm2)[(Cell{3, 4})], pm[(Cell{3, 4})], 1e-7);
  fs::remove_all(dir);
}

TEST(ScenePackage, LoadScenesReportsInvalidPackages)
{
  const auto root = scratch("root");
  const ScenarioShape shape;
  const auto scenes = generate_corpus(2, shape, 5);
  io::save_scene(root / "b", scenes[1]);
  io::save_scene(root / "a", scenes[0]);
  auto bad = scenes[0];
  bad.history.points.pop_back();
  io::save_scene(root / "c", bad);
  fs::create_directories(root / "d");
  io::write_file(root / "d" / "map.pgm", "P5\n1 1\n255\n\xfe");
  io::write_file(root / "d" / "trajectories.csv", "x");
  io::write_file(root / "d" / "legend.json", io::legend_to_json(ClassLegend::standard()).dump());
  const auto loaded = io::load_scenes(root, shape);
  ASSERT_EQ(loaded.size(), 4u);
  EXPECT_EQ(loaded[0].path.filename(), "a");
  EXPECT_TRUE(loaded[0].scene);
  EXPECT_TRUE(loaded[1].scene);
  EXPECT_FALSE(loaded[2].scene);
  EXPECT_FALSE(loaded[2].errors.empty());
  EXPECT_FALSE(loaded[3].scene);
  EXPECT_THROW(io::load_scenes(root / "missing", shape), IoError);
  fs::remove_all(root);
}

TEST(Legend, RoundTrip)
{
  const auto legend = ClassLegend::standard();
  const auto back = io::legend_from_json(io::legend_to_json(legend));
  EXPECT_EQ(back.entries(), legend.entries());
  EXPECT_THROW(io::legend_from_json(io::json::parse(R"({"classes":[{"id":"x"}]})")), ParseError);
}

TEST(Transitions, ParseFile)
{
  const auto t = io::transitions_from_json(io::json::parse(
    R"({"transitions":[{"from":"road","to":"tree","effect":"avoidance"}]})"), "t");
  ASSERT_EQ(t.rows().size(), 1u);
  EXPECT_EQ(t.lookup("road", "tree"), ExpectedEffect::avoidance);
  EXPECT_THROW(io::transitions_from_json(io::json::parse(
    R"({"transitions":[{"from":"road","to":"tree","effect":"sideways"}]})"), "t"), ParseError);
}

TEST(Files, MissingFileIsIoError)
{
  EXPECT_THROW(io::read_file("/nonexistent/trajtest"), IoError);
}

TEST(Recipe, ParseFile)
{
  const auto r = io::recipe_from_json(io::json::parse(
    R"({"width": 100, "structure_blobs": 0, "speed_max": 9.5, "start": [10, 12.5]})"), "r");
  EXPECT_EQ(r.width, 100);
  EXPECT_EQ(r.height, 160);
  EXPECT_EQ(r.structure_blobs, 0);
  EXPECT_EQ(r.speed_max, 9.5);
  ASSERT_TRUE(r.start);
  EXPECT_EQ(r.start->y, 12.5);
  EXPECT_THROW(io::recipe_from_json(io::json::parse(R"({"colour": 1})"), "r"), ParseError);
  EXPECT_THROW(io::recipe_from_json(io::json::parse(R"({"width": "wide"})"), "r"), ParseError);
}
