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

#include "trajtest/agreement.hpp"
#include "trajtest/core.hpp"
#include "trajtest/error.hpp"
#include "trajtest/harness.hpp"
#include "trajtest/io.hpp"
#include "trajtest/metrics.hpp"
#include "trajtest/ot.hpp"
#include "trajtest/process.hpp"
#include "trajtest/report.hpp"
#include "trajtest/rng.hpp"
#include "trajtest/scenegen.hpp"
#include "trajtest/stats.hpp"
#include "trajtest/sut.hpp"
#include "trajtest/transforms.hpp"
#include "trajtest/wire.hpp"
