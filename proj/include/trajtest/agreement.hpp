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
#include <span>
#include <vector>

#include "trajtest/error.hpp"
#include "trajtest/harness.hpp"
#include "trajtest/stats.hpp"

namespace trajtest
{

/// Confusion counts and scores at one p-value threshold. WVC is the prediction, the
/// displacement criterion the label.
struct AgreementPoint
{
  double threshold{0.05};
  std::size_t tp{0};
  std::size_t fp{0};
  std::size_t fn{0};
  std::size_t tn{0};
  double accuracy{1.0};
  double precision{1.0};  ///< 1 when nothing is predicted violated
  double recall{1.0};     ///< 1 when nothing is labeled violated

  static AgreementPoint from_counts(double threshold, std::size_t tp, std::size_t fp,
    std::size_t fn, std::size_t tn)
  {
    AgreementPoint p{threshold, tp, fp, fn, tn};
    const double total = static_cast<double>(tp + fp + fn + tn);
    p.accuracy = total > 0.0 ? static_cast<double>(tp + tn) / total : 1.0;
    p.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
    p.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0;
    return p;
  }

  friend bool operator==(const AgreementPoint &, const AgreementPoint &) = default;
};

struct AgreementReport
{
  Criterion label{Criterion::mean_ade};
  std::size_t units{0};
  std::vector<AgreementPoint> points;
};

/// Median of the N WVC p-values of a (scene, MR) pair: the pair counts as a WVC violation at
/// threshold t when at least half of its runs are violated at t.
inline double wvc_median_p(const SceneResult & r)
{
  std::vector<double> p;
  for (const auto & v : r.wvc) {p.push_back(v.p_value);}
  if (p.empty()) {throw ContractError("scene result has no WVC verdicts");}
  std::sort(p.begin(), p.end());
  const std::size_t n = p.size();
  return n % 2 == 1 ? p[n / 2] : 0.5 * (p[n / 2 - 1] + p[n / 2]);
}

inline std::vector<double> default_thresholds()
{
  return {0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
}

/// Units are completed label-preserving pairs that carry both WVC verdicts and the label
/// criterion (ground truth was present). Over an ascending sweep, recall should not fall and
/// precision should not rise.
inline AgreementReport agreement_analysis(std::span<const SceneResult> results,
  std::span<const double> thresholds, Criterion label = Criterion::mean_ade)
{
  if (label != Criterion::mean_ade && label != Criterion::mean_fde &&
    label != Criterion::bon_ade && label != Criterion::bon_fde)
  {
    throw ContractError("agreement label must be a displacement criterion");
  }
  std::vector<std::pair<double, double>> units;  // (wvc median p, label p)
  for (const auto & r : results) {
    if (r.status != SceneStatus::ok || r.wvc.empty()) {continue;}
    if (const auto * v = r.verdict(label)) {units.emplace_back(wvc_median_p(r), v->p_value);}
  }
  if (units.empty()) {
    throw ContractError("no labeled results: agreement analysis needs ground truth");
  }
  AgreementReport rep;
  rep.label = label;
  rep.units = units.size();
  for (double t : thresholds) {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (const auto & [pw, pl] : units) {
      const bool predicted = pw <= t;
      const bool actual = pl <= t;
      tp += predicted && actual;
      fp += predicted && !actual;
      fn += !predicted && actual;
      tn += !predicted && !actual;
    }
    rep.points.push_back(AgreementPoint::from_counts(t, tp, fp, fn, tn));
  }
  return rep;
}

}  // namespace trajtest
