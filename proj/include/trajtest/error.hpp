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

#include <stdexcept>
#include <string>

namespace trajtest
{

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// A precondition of an operation was not met by the caller.
class ContractError : public Error
{
public:
  using Error::Error;
};

/// An iterative solver did not reach its tolerance.
class NumericalError : public Error
{
public:
  NumericalError(const std::string & what, double residual)
  : Error(what), residual_(residual) {}

  double residual() const noexcept {return residual_;}

private:
  double residual_;
};

/// The scene is not applicable to a metamorphic relation (e.g. the source class is absent).
class SkipCase : public Error
{
public:
  using Error::Error;
};

/// An obstacle could not be placed on the map.
class PlacementError : public Error
{
public:
  using Error::Error;
};

/// A transform would produce a raster that is too small to be meaningful.
class DegenerateInputError : public Error
{
public:
  using Error::Error;
};

/// Scene synthesis failed after its retry budget.
class GenerationError : public Error
{
public:
  using Error::Error;
};

/// Malformed input file. `location` is "file:line" or "file@byte".
class ParseError : public Error
{
public:
  ParseError(const std::string & location, const std::string & message)
  : Error(location + ": " + message), location_(location) {}

  const std::string & location() const noexcept {return location_;}

private:
  std::string location_;
};

class IoError : public Error
{
public:
  using Error::Error;
};

/// Failure of a system under test. Never turned into a violation verdict.
class SutError : public Error
{
public:
  SutError(std::string scene_id, const std::string & message, std::string raw_payload = {})
  : Error("scene '" + scene_id + "': " + message),
    scene_id_(std::move(scene_id)),
    raw_payload_(std::move(raw_payload)) {}

  const std::string & scene_id() const noexcept {return scene_id_;}
  const std::string & raw_payload() const noexcept {return raw_payload_;}

private:
  std::string scene_id_;
  std::string raw_payload_;
};

}  // namespace trajtest
