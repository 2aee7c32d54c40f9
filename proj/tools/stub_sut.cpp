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

// Conformance stub: serves a built-in predictor over the wire protocol on stdin/stdout, with
// optional injected faults for exercising the external-process adapter.

#include <chrono>
#include <cmath>
#include <iostream>
#include <memory>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "trajtest/sut.hpp"
#include "trajtest/wire.hpp"

namespace
{

using trajtest::wire::json;

std::unique_ptr<trajtest::Predictor> make_predictor(const std::string & mode)
{
  if (mode == "equivariant") {return std::make_unique<trajtest::EquivariantReference>();}
  if (mode == "mutant") {return std::make_unique<trajtest::BiasedMutant>();}
  if (mode == "map-aware") {return std::make_unique<trajtest::MapAwareReference>();}
  return nullptr;
}

void emit(const json & msg)
{
  std::cout << msg.dump() << '\n' << std::flush;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"wire-protocol conformance stub"};
  std::string mode = "equivariant";
  std::string fault = "none";
  std::string fault_scene;
  bool no_prob_map = false;
  app.add_option("--mode", mode, "equivariant | mutant | map-aware")
  ->check(CLI::IsMember({"equivariant", "mutant", "map-aware"}));
  app.add_option("--fault", fault, "injected fault")
  ->check(CLI::IsMember({"none", "wrong-k", "nan", "crash", "hang", "garbage", "error",
      "bad-hello", "wrong-scene", "short-map"}));
  app.add_option("--fault-scene", fault_scene, "only inject the fault for this scene id");
  app.add_flag("--no-prob-map", no_prob_map, "omit probability maps");
  CLI11_PARSE(app, argc, argv);

  auto predictor = make_predictor(mode);
  std::string line;
  while (std::getline(std::cin, line)) {
    json msg;
    try {
      msg = json::parse(line);
    } catch (const json::exception & e) {
      emit(trajtest::wire::error(std::string("malformed line: ") + e.what()));
      continue;
    }
    const std::string type = msg.is_object() ? msg.value("type", "") : "";
    if (type == "hello") {
      if (fault == "bad-hello") {
        std::cout << "hello yourself\n" << std::flush;
      } else {
        emit(trajtest::wire::ready(!no_prob_map));
      }
      continue;
    }
    if (type != "predict") {
      emit(trajtest::wire::error("unknown message type '" + type + "'"));
      continue;
    }
    trajtest::SutRequest req;
    try {
      req = trajtest::wire::decode_request(msg);
    } catch (const std::exception & e) {
      emit(trajtest::wire::error(e.what()));
      continue;
    }
    const bool faulty = fault != "none" && (fault_scene.empty() || fault_scene == req.scene_id);
    if (faulty && fault == "crash") {return 3;}
    if (faulty && fault == "hang") {
      std::this_thread::sleep_for(std::chrono::hours(1));
    }
    if (faulty && fault == "garbage") {
      std::cout << "{\"type\": \"prediction\", \"trajectories\": [[[1, 2]\n" << std::flush;
      continue;
    }
    if (faulty && fault == "error") {
      emit(trajtest::wire::error("injected failure"));
      continue;
    }
    try {
      auto resp = predictor->predict(req);
      if (no_prob_map) {resp.prediction.prob_map.reset();}
      if (faulty && fault == "wrong-k") {resp.prediction.trajectories.pop_back();}
      if (faulty && fault == "nan") {resp.prediction.trajectories[0].points[0].x = std::nan("");}
      json out = trajtest::wire::encode_response(req.scene_id, resp);
      if (faulty && fault == "wrong-scene") {out["scene_id"] = req.scene_id + "-other";}
      if (faulty && fault == "short-map") {out["prob_map_b64"] = "AAAAAA==";}
      emit(out);
    } catch (const std::exception & e) {
      emit(trajtest::wire::error(e.what()));
    }
  }
  return 0;
}
