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

#include <openssl/evp.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "trajtest/core.hpp"
#include "trajtest/sut.hpp"

/// Newline-delimited JSON messages exchanged with an out-of-process predictor.
namespace trajtest::wire
{

using json = nlohmann::json;

inline constexpr int kProtocolVersion = 1;

inline std::string base64_encode(std::span<const std::uint8_t> bytes)
{
  if (bytes.empty()) {return {};}
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char *>(out.data()), bytes.data(),
      static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

inline std::vector<std::uint8_t> base64_decode(std::string_view text)
{
  if (text.empty()) {return {};}
  if (text.size() % 4 != 0) {
    throw ParseError("base64", "length is not a multiple of 4");
  }
  std::vector<std::uint8_t> out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char *>(text.data()),
      static_cast<int>(text.size()));
  if (n < 0) {
    throw ParseError("base64", "invalid character");
  }
  std::size_t pad = 0;
  if (text.back() == '=') {++pad;}
  if (text.size() >= 2 && text[text.size() - 2] == '=') {++pad;}
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

/// Float32 values, little-endian, row-major.
inline std::string encode_float_map(const Raster<double> & values)
{
  std::vector<std::uint8_t> bytes;
  bytes.reserve(4 * values.size());
  for (double v : values.data()) {
    const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int s = 0; s < 32; s += 8) {bytes.push_back(static_cast<std::uint8_t>(u >> s));}
  }
  return base64_encode(bytes);
}

inline Raster<double> decode_float_map(std::string_view b64, int width, int height)
{
  const auto bytes = base64_decode(b64);
  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() != 4 * count) {
    throw ParseError("prob_map_b64", "expected " + std::to_string(4 * count) + " bytes, got " +
            std::to_string(bytes.size()));
  }
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t u = 0;
    for (int s = 0; s < 4; ++s) {u |= static_cast<std::uint32_t>(bytes[4 * i + s]) << (8 * s);}
    values[i] = static_cast<double>(std::bit_cast<float>(u));
  }
  return {width, height, std::move(values)};
}

inline json hello() {return {{"type", "hello"}, {"version", kProtocolVersion}};}

inline json ready(bool provides_prob_map)
{
  return {{"type", "ready"}, {"provides_prob_map", provides_prob_map}};
}

inline json error(std::string_view message)
{
  return {{"type", "error"}, {"message", message}};
}

inline json encode_points(const Trajectory & t)
{
  json arr = json::array();
  for (Point2 p : t.points) {arr.push_back(json::array({p.x, p.y}));}
  return arr;
}

inline json encode_request(const SutRequest & req)
{
  json legend = json::array();
  for (const auto & e : req.map.legend.entries()) {
    legend.push_back({{"id", e.id}, {"name", e.name}});
  }
  const auto & cells = req.map.cells.data();
  return {
    {"type", "predict"},
    {"scene_id", req.scene_id},
    {"seed", req.seed},
    {"k", req.k},
    {"horizon", req.horizon},
    {"dt", req.history.dt},
    {"history", encode_points(req.history)},
    {"map", {
        {"width", req.map.width()},
        {"height", req.map.height()},
        {"legend", std::move(legend)},
        {"cells_b64", base64_encode(std::span<const std::uint8_t>(cells.data(), cells.size()))}}},
  };
}

namespace detail
{

inline const json & field(const json & obj, const char * key, const char * where)
{
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(where, std::string("missing field '") + key + "'");
  }
  return obj.at(key);
}

inline std::vector<Point2> decode_points(const json & arr, const std::string & where)
{
  if (!arr.is_array()) {throw ParseError(where, "expected an array of [x, y] pairs");}
  std::vector<Point2> out;
  out.reserve(arr.size());
  // JSON has no NaN; serializers write it as null, which is kept as NaN so that validation
  // reports it as a non-finite point.
  const auto coord = [&](const json & v) {
      if (v.is_null()) {return std::numeric_limits<double>::quiet_NaN();}
      if (!v.is_number()) {throw ParseError(where, "coordinate is not a number");}
      return v.get<double>();
    };
  for (const auto & p : arr) {
    if (!p.is_array() || p.size() != 2) {
      throw ParseError(where, "point is not an [x, y] pair");
    }
    out.push_back({coord(p[0]), coord(p[1])});
  }
  return out;
}

}  // namespace detail

/// Inverse of encode_request. Walkability is not on the wire; classes get their default.
inline SutRequest decode_request(const json & msg)
{
  if (detail::field(msg, "type", "request") != "predict") {
    throw ParseError("request", "type is not 'predict'");
  }
  try {
    SutRequest req;
    req.scene_id = detail::field(msg, "scene_id", "request").get<std::string>();
    req.seed = detail::field(msg, "seed", "request").get<std::uint64_t>();
    req.k = detail::field(msg, "k", "request").get<std::size_t>();
    req.horizon = detail::field(msg, "horizon", "request").get<std::size_t>();
    req.history = Trajectory{detail::decode_points(detail::field(msg, "history", "request"),
        "history"), detail::field(msg, "dt", "request").get<double>()};
    const auto & m = detail::field(msg, "map", "request");
    const int w = detail::field(m, "width", "map").get<int>();
    const int h = detail::field(m, "height", "map").get<int>();
    std::vector<ClassEntry> entries;
    for (const auto & e : detail::field(m, "legend", "map")) {
      const auto name = detail::field(e, "name", "legend").get<std::string>();
      entries.push_back({detail::field(e, "id", "legend").get<ClassId>(), name,
          ClassLegend::default_walkability(name)});
    }
    const auto cells = base64_decode(detail::field(m, "cells_b64", "map").get<std::string>());
    req.map = SegmentationMap(Raster<ClassId>(w, h, cells), ClassLegend(std::move(entries)));
    return req;
  } catch (const json::exception & e) {
    throw ParseError("request", e.what());
  } catch (const ContractError & e) {
    throw ParseError("request", e.what());
  }
}

inline json encode_response(const std::string & scene_id, const SutResponse & resp)
{
  json trajs = json::array();
  for (const auto & t : resp.prediction.trajectories) {trajs.push_back(encode_points(t));}
  json out{{"type", "prediction"}, {"scene_id", scene_id}, {"trajectories", std::move(trajs)}};
  if (resp.prediction.prob_map) {
    out["prob_map_b64"] = encode_float_map(resp.prediction.prob_map->values());
  }
  return out;
}

/// Decodes and validates a response to `req`; every failure becomes a SutError carrying `raw`.
inline SutResponse decode_response(const json & msg, const SutRequest & req,
  const std::string & raw = {})
{
  const auto fail = [&](const std::string & why) {throw SutError(req.scene_id, why, raw);};
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
    fail("response has no type");
  }
  const auto type = msg["type"].get<std::string>();
  if (type == "error") {
    fail("adapter error: " + msg.value("message", std::string("(no message)")));
  }
  if (type != "prediction") {fail("unexpected message type '" + type + "'");}
  SutResponse resp;
  try {
    if (detail::field(msg, "scene_id", "response").get<std::string>() != req.scene_id) {
      fail("response scene_id does not match the request");
    }
    for (const auto & t : detail::field(msg, "trajectories", "response")) {
      resp.prediction.trajectories.push_back({detail::decode_points(t, "trajectory"),
          req.history.dt});
    }
    if (msg.contains("prob_map_b64") && !msg["prob_map_b64"].is_null()) {
      auto values = decode_float_map(msg["prob_map_b64"].get<std::string>(), req.map.width(),
          req.map.height());
      resp.prediction.prob_map = ProbabilityMap::from_weights(std::move(values));
    }
  } catch (const json::exception & e) {
    fail(std::string("malformed response: ") + e.what());
  } catch (const ParseError & e) {
    fail(std::string("malformed response: ") + e.what());
  } catch (const ContractError & e) {
    fail(std::string("invalid probability map: ") + e.what());
  }
  resp.prediction.sut_seed = req.seed;
  validate_response(req, resp, raw);
  return resp;
}

}  // namespace trajtest::wire
