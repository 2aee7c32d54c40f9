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
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "trajtest/core.hpp"
#include "trajtest/error.hpp"
#include "trajtest/metrics.hpp"
#include "trajtest/rng.hpp"
#include "trajtest/stats.hpp"
#include "trajtest/sut.hpp"
#include "trajtest/transforms.hpp"

namespace trajtest
{

struct HarnessConfig
{
  std::size_t n_runs{8};  ///< N source repetitions
  std::size_t k{20};
  double alpha{0.05};
  ScenarioShape shape;
  std::vector<MRSpec> mrs{label_preserving_suite()};
  std::uint64_t seed{0};
  std::size_t parallelism{1};
  OTConfig ot;

  /// n = 8, T = 12 at 2.5 FPS.
  static HarnessConfig short_term() {return {};}

  /// n = 5, T = 30 at 1 FPS.
  static HarnessConfig long_term()
  {
    HarnessConfig c;
    c.shape = {5, 30, 1.0};
    return c;
  }

  void validate() const
  {
    if (n_runs < 2) {throw ContractError("N must be at least 2");}
    if (k < 1) {throw ContractError("K must be at least 1");}
    if (!(alpha > 0.0 && alpha < 1.0)) {throw ContractError("alpha must lie in (0, 1)");}
    if (shape.history_length < 2 || shape.horizon < 1 || !(shape.dt > 0.0)) {
      throw ContractError("history length >= 2, horizon >= 1 and dt > 0 required");
    }
    if (mrs.empty()) {throw ContractError("no metamorphic relations configured");}
    for (const auto & mr : mrs) {mr.validate();}
  }
};

inline std::uint64_t source_seed(std::uint64_t master, std::string_view scene_id,
  std::size_t run)
{
  return mix_seed({master, fnv1a(scene_id), static_cast<std::uint64_t>(run)});
}

inline std::uint64_t follow_up_seed(std::uint64_t master, std::string_view scene_id)
{
  return mix_seed({master, fnv1a(scene_id), fnv1a("follow-up")});
}

enum class SceneStatus { ok, skipped, errored };

inline std::string_view to_string(SceneStatus s)
{
  switch (s) {
    case SceneStatus::ok: return "ok";
    case SceneStatus::skipped: return "skipped";
    case SceneStatus::errored: return "errored";
  }
  return "?";
}

struct HvcSummary
{
  std::vector<Verdict> verdicts;
  SourceBaseline baseline;
  double violation_rate{0.0};
  double mean{0.0};
  double std{0.0};

  friend bool operator==(const HvcSummary &, const HvcSummary &) = default;
};

/// Outcome of one (scene, MR) pair.
struct SceneResult
{
  std::string scene_id;
  MRSpec mr;
  SceneStatus status{SceneStatus::ok};
  std::string note;
  std::size_t sut_calls{0};

  // Label-preserving relations.
  std::vector<Verdict> wvc;
  SourceBaseline wvc_baseline;
  double wvc_rate{0.0};
  std::optional<HvcSummary> hvc;

  // Map relations.
  std::optional<ExpectedEffect> expected_effect;
  std::optional<Verdict> htc;
  std::optional<bool> expectation_met;
  std::size_t roi_cells{0};
  std::optional<double> source_intersection;    ///< mean over source runs, follow-up map
  std::optional<double> follow_up_intersection;

  // Ground-truth metrics; source values averaged over the N runs.
  std::optional<DisplacementErrors> source_errors;
  std::optional<DisplacementErrors> follow_up_errors;
  /// B-ADE, B-FDE, M-ADE, M-FDE follow-up values tested against the N source values.
  std::vector<Verdict> displacement_verdicts;

  const Verdict * verdict(Criterion c) const
  {
    for (const auto & v : displacement_verdicts) {
      if (v.criterion == c) {return &v;}
    }
    if (c == Criterion::htc && htc) {return &*htc;}
    return nullptr;
  }

  friend bool operator==(const SceneResult &, const SceneResult &) = default;
};

namespace detail
{

inline SutRequest make_request(const TestCase & tc, const HarnessConfig & cfg,
  std::uint64_t seed)
{
  SutRequest req;
  req.scene_id = tc.scene_id;
  req.history = tc.history;
  req.map = tc.map;
  req.k = cfg.k;
  req.horizon = cfg.shape.horizon;
  req.seed = seed;
  return req;
}

inline SutResponse call(Predictor & sut, const SutRequest & req)
{
  auto resp = sut.predict(req);
  validate_response(req, resp);
  return resp;
}

inline ProbabilityMap mean_map(std::span<const PredictionSet> runs)
{
  Raster<double> sum = runs.front().prob_map->values();
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const auto & v = runs[i].prob_map->values().data();
    for (std::size_t j = 0; j < v.size(); ++j) {sum.data()[j] += v[j];}
  }
  return ProbabilityMap::from_weights(std::move(sum));
}

inline void displacement_verdicts(SceneResult & out, std::span<const PredictionSet> sources,
  const PredictionSet & follow_up, const Trajectory & gt, double alpha)
{
  std::vector<DisplacementErrors> per_run;
  per_run.reserve(sources.size());
  for (const auto & s : sources) {per_run.push_back(ade_fde(s, gt));}
  const DisplacementErrors fu = ade_fde(follow_up, gt);
  DisplacementErrors mean;
  for (const auto & e : per_run) {
    mean.bon_ade += e.bon_ade;
    mean.bon_fde += e.bon_fde;
    mean.mean_ade += e.mean_ade;
    mean.mean_fde += e.mean_fde;
  }
  const double n = static_cast<double>(per_run.size());
  mean.bon_ade /= n;
  mean.bon_fde /= n;
  mean.mean_ade /= n;
  mean.mean_fde /= n;
  out.source_errors = mean;
  out.follow_up_errors = fu;

  const auto test = [&](Criterion c, double DisplacementErrors::* field) {
      std::vector<double> values;
      for (const auto & e : per_run) {values.push_back(e.*field);}
      const auto z = z_test(fu.*field, SourceBaseline::from(values), Alternative::two_sided);
      out.displacement_verdicts.push_back(Verdict::make(c, fu.*field, z.p_value, alpha,
        z.degenerate_baseline));
    };
  test(Criterion::bon_ade, &DisplacementErrors::bon_ade);
  test(Criterion::bon_fde, &DisplacementErrors::bon_fde);
  test(Criterion::mean_ade, &DisplacementErrors::mean_ade);
  test(Criterion::mean_fde, &DisplacementErrors::mean_fde);
}

}  // namespace detail

/// N seeded source calls for one scene.
inline std::vector<PredictionSet> source_runs(const TestCase & tc, Predictor & sut,
  const HarnessConfig & cfg)
{
  std::vector<PredictionSet> runs;
  runs.reserve(cfg.n_runs);
  for (std::size_t i = 0; i < cfg.n_runs; ++i) {
    const auto req = detail::make_request(tc, cfg, source_seed(cfg.seed, tc.scene_id, i));
    runs.push_back(detail::call(sut, req).prediction);
  }
  return runs;
}

/// Transforms, calls the SUT once on the follow-up and evaluates against precomputed source
/// runs. Errors and skips are recorded in the result.
inline SceneResult evaluate_mr(const TestCase & tc, const MRSpec & mr,
  std::span<const PredictionSet> sources, Predictor & sut, const HarnessConfig & cfg)
{
  SceneResult out;
  out.scene_id = tc.scene_id;
  out.mr = mr;
  out.sut_calls = sources.size();
  try {
    const auto tr = apply_mr(tc, mr, &sources.front());
    const auto req = detail::make_request(tr.follow_up, cfg, follow_up_seed(cfg.seed, tc.scene_id));
    ++out.sut_calls;
    const PredictionSet follow = detail::call(sut, req).prediction;
    const bool have_maps = follow.prob_map &&
      std::all_of(sources.begin(), sources.end(), [](const auto & s) {return s.prob_map.has_value();});

    if (tr.label_preserving) {
      std::vector<PredictionSet> moved;
      moved.reserve(sources.size());
      for (const auto & s : sources) {moved.push_back(transform_prediction(s, tr));}
      const auto w = wvc(moved, follow, cfg.alpha, cfg.ot);
      out.wvc = w.verdicts;
      out.wvc_baseline = w.baseline;
      out.wvc_rate = w.violation_rate;
      if (have_maps) {
        std::vector<ProbabilityMap> maps;
        for (const auto & s : moved) {maps.push_back(*s.prob_map);}
        const auto h = hvc(maps, *follow.prob_map, cfg.alpha);
        out.hvc = HvcSummary{h.verdicts, h.baseline, h.violation_rate, h.mean_distance,
          h.std_distance};
      } else {
        out.note = "no probability maps: HVC skipped";
      }
      if (tr.follow_up.ground_truth) {
        detail::displacement_verdicts(out, moved, follow, *tr.follow_up.ground_truth, cfg.alpha);
      }
    } else {
      out.expected_effect = tr.expected_effect;
      out.roi_cells = tr.roi ? tr.roi->size() : 0;
      if (have_maps && tr.roi && tr.expected_effect) {
        const auto source_map = detail::mean_map(sources);
        out.htc = htc(source_map, *follow.prob_map, *tr.roi, cfg.alpha,
            alternative_for(*tr.expected_effect));
        out.expectation_met = out.htc->violated;
      } else if (!have_maps) {
        out.note = "no probability maps: HTC skipped";
      }
      if (mr.kind() == MRKind::obstacle) {
        const auto blocked = impassable_classes(tr.follow_up.map.legend);
        double sum = 0.0;
        for (const auto & s : sources) {sum += intersection_rate(s, tr.follow_up.map, blocked);}
        out.source_intersection = sum / static_cast<double>(sources.size());
        out.follow_up_intersection = intersection_rate(follow, tr.follow_up.map, blocked);
      }
      if (tc.ground_truth) {
        detail::displacement_verdicts(out, sources, follow, *tc.ground_truth, cfg.alpha);
      }
    }
  } catch (const SkipCase & e) {
    out.status = SceneStatus::skipped;
    out.note = e.what();
  } catch (const PlacementError & e) {
    out.status = SceneStatus::skipped;
    out.note = e.what();
  } catch (const DegenerateInputError & e) {
    out.status = SceneStatus::skipped;
    out.note = e.what();
  } catch (const std::exception & e) {
    out.status = SceneStatus::errored;
    out.note = e.what();
  }
  if (out.status != SceneStatus::ok) {
    // Partial verdicts of a failed pair must not leak into the aggregates.
    SceneResult clean;
    clean.scene_id = out.scene_id;
    clean.mr = out.mr;
    clean.status = out.status;
    clean.note = out.note;
    clean.sut_calls = out.sut_calls;
    return clean;
  }
  return out;
}

/// The full test process for one (scene, MR) pair: N source calls and one follow-up call.
inline SceneResult run_scene(const TestCase & tc, const MRSpec & mr, Predictor & sut,
  const HarnessConfig & cfg)
{
  cfg.validate();
  std::vector<PredictionSet> sources;
  try {
    sources = source_runs(tc, sut, cfg);
  } catch (const std::exception & e) {
    SceneResult out;
    out.scene_id = tc.scene_id;
    out.mr = mr;
    out.status = SceneStatus::errored;
    out.note = std::string("source run failed: ") + e.what();
    return out;
  }
  return evaluate_mr(tc, mr, sources, sut, cfg);
}

/// Every (scene, MR) pair, scene-major in input order. Source runs are shared by the MRs of a
/// scene; results do not depend on scheduling.
inline std::vector<SceneResult> run_campaign(std::span<const TestCase> scenes,
  const PredictorFactory & factory, const HarnessConfig & cfg)
{
  cfg.validate();
  if (scenes.empty()) {throw ContractError("campaign needs at least one scene");}
  const std::size_t n_mr = cfg.mrs.size();
  std::vector<SceneResult> results(scenes.size() * n_mr);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  const auto worker = [&] {
      try {
        auto sut = factory();
        for (std::size_t s = next++; s < scenes.size(); s = next++) {
          const auto & tc = scenes[s];
          std::vector<PredictionSet> sources;
          std::string error;
          try {
            sources = source_runs(tc, *sut, cfg);
          } catch (const std::exception & e) {
            error = std::string("source run failed: ") + e.what();
          }
          for (std::size_t m = 0; m < n_mr; ++m) {
            auto & slot = results[s * n_mr + m];
            if (!error.empty()) {
              slot.scene_id = tc.scene_id;
              slot.mr = cfg.mrs[m];
              slot.status = SceneStatus::errored;
              slot.note = error;
              continue;
            }
            slot = evaluate_mr(tc, cfg.mrs[m], sources, *sut, cfg);
          }
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {failure = std::current_exception();}
        next = scenes.size();
      }
    };

  const std::size_t workers = std::clamp<std::size_t>(cfg.parallelism, 1, scenes.size());
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < workers; ++i) {pool.emplace_back(worker);}
  }
  if (failure) {std::rethrow_exception(failure);}
  return results;
}

/// Per-MR aggregate in the layout of the violation-rate tables. Percentages are unweighted
/// means over the scenes that completed.
struct AggregateRow
{
  std::string mr;
  std::size_t scenes{0};
  std::size_t skipped{0};
  std::size_t errored{0};
  std::optional<double> wvc_pct;
  std::optional<double> bade_pct;
  std::optional<double> bfde_pct;
  std::optional<double> made_pct;
  std::optional<double> mfde_pct;
  std::optional<double> hvc_mean;
  std::optional<double> hvc_std;
  std::optional<double> htc_pct;
  std::optional<double> intersection_pct;

  friend bool operator==(const AggregateRow &, const AggregateRow &) = default;
};

inline std::vector<AggregateRow> aggregate(std::span<const SceneResult> results,
  std::span<const MRSpec> mrs)
{
  std::vector<AggregateRow> rows;
  for (const auto & mr : mrs) {
    AggregateRow row;
    row.mr = mr.label();
    std::vector<double> wvc;
    std::vector<double> hvc;
    std::vector<double> htc;
    std::vector<double> inter;
    std::vector<double> disp[4];
    const Criterion crit[4] = {Criterion::bon_ade, Criterion::bon_fde, Criterion::mean_ade,
      Criterion::mean_fde};
    for (const auto & r : results) {
      if (!(r.mr == mr)) {continue;}
      if (r.status == SceneStatus::skipped) {++row.skipped; continue;}
      if (r.status == SceneStatus::errored) {++row.errored; continue;}
      ++row.scenes;
      if (mr.label_preserving()) {wvc.push_back(r.wvc_rate);}
      if (r.hvc) {
        for (const auto & v : r.hvc->verdicts) {hvc.push_back(v.distance);}
      }
      if (r.expectation_met) {htc.push_back(*r.expectation_met ? 1.0 : 0.0);}
      if (r.follow_up_intersection) {inter.push_back(*r.follow_up_intersection);}
      for (int i = 0; i < 4; ++i) {
        if (const auto * v = r.verdict(crit[i])) {disp[i].push_back(v->violated ? 1.0 : 0.0);}
      }
    }
    const auto pct = [](const std::vector<double> & v) -> std::optional<double> {
        if (v.empty()) {return std::nullopt;}
        double s = 0.0;
        for (double x : v) {s += x;}
        return 100.0 * s / static_cast<double>(v.size());
      };
    row.wvc_pct = pct(wvc);
    row.bade_pct = pct(disp[0]);
    row.bfde_pct = pct(disp[1]);
    row.made_pct = pct(disp[2]);
    row.mfde_pct = pct(disp[3]);
    row.htc_pct = pct(htc);
    row.intersection_pct = pct(inter);
    if (!hvc.empty()) {
      const auto b = SourceBaseline::from(hvc);
      row.hvc_mean = b.mu;
      row.hvc_std = b.sigma;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace trajtest
