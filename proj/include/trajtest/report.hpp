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

#include <cstdio>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "trajtest/agreement.hpp"
#include "trajtest/harness.hpp"
#include "trajtest/io.hpp"

namespace trajtest::report
{

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Fixed CSV number format: 6 significant digits.
inline std::string num(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string num(const std::optional<double> & v) {return v ? num(*v) : std::string();}

inline std::string csv_field(const std::string & s)
{
  if (s.find_first_of(",\"\n") == std::string::npos) {return s;}
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') {out += '"';}
    out += c;
  }
  return out + "\"";
}

inline constexpr std::string_view kAggregateHeader =
  "mr,scenes,skipped,errored,wvc_pct,bade_pct,bfde_pct,made_pct,mfde_pct,hvc_mean,hvc_std,"
  "htc_pct,intersection_pct";

inline std::string aggregate_csv(std::span<const AggregateRow> rows)
{
  std::string out = std::string(kAggregateHeader) + "\n";
  for (const auto & r : rows) {
    out += csv_field(r.mr) + "," + std::to_string(r.scenes) + "," + std::to_string(r.skipped) +
      "," + std::to_string(r.errored) + "," + num(r.wvc_pct) + "," + num(r.bade_pct) + "," +
      num(r.bfde_pct) + "," + num(r.made_pct) + "," + num(r.mfde_pct) + "," + num(r.hvc_mean) +
      "," + num(r.hvc_std) + "," + num(r.htc_pct) + "," + num(r.intersection_pct) + "\n";
  }
  return out;
}

inline constexpr std::string_view kScenesHeader =
  "scene_id,mr,status,sut_calls,wvc_rate,wvc_mu,wvc_sigma,hvc_rate,hvc_mean,hvc_std,"
  "effect,htc_p,htc_shift,expectation_met,roi_cells,source_intersection,follow_up_intersection,"
  "source_bade,source_bfde,source_made,source_mfde,follow_up_bade,follow_up_bfde,"
  "follow_up_made,follow_up_mfde,bade_p,bfde_p,made_p,mfde_p,note";

inline std::string scenes_csv(std::span<const SceneResult> results)
{
  std::string out = std::string(kScenesHeader) + "\n";
  for (const auto & r : results) {
    const bool ok = r.status == SceneStatus::ok;
    const bool lp = ok && !r.wvc.empty();
    std::vector<std::string> f;
    f.push_back(csv_field(r.scene_id));
    f.push_back(csv_field(r.mr.label()));
    f.emplace_back(to_string(r.status));
    f.push_back(std::to_string(r.sut_calls));
    f.push_back(lp ? num(r.wvc_rate) : "");
    f.push_back(lp ? num(r.wvc_baseline.mu) : "");
    f.push_back(lp ? num(r.wvc_baseline.sigma) : "");
    f.push_back(r.hvc ? num(r.hvc->violation_rate) : "");
    f.push_back(r.hvc ? num(r.hvc->mean) : "");
    f.push_back(r.hvc ? num(r.hvc->std) : "");
    f.push_back(r.expected_effect ? std::string(to_string(*r.expected_effect)) : "");
    f.push_back(r.htc ? num(r.htc->p_value) : "");
    f.push_back(r.htc ? num(r.htc->distance) : "");
    f.push_back(r.expectation_met ? (*r.expectation_met ? "1" : "0") : "");
    f.push_back(r.expected_effect ? std::to_string(r.roi_cells) : "");
    f.push_back(num(r.source_intersection));
    f.push_back(num(r.follow_up_intersection));
    const auto errs = [&](const std::optional<DisplacementErrors> & e) {
        for (double DisplacementErrors::* m : {&DisplacementErrors::bon_ade,
            &DisplacementErrors::bon_fde, &DisplacementErrors::mean_ade,
            &DisplacementErrors::mean_fde})
        {
          f.push_back(e ? num((*e).*m) : "");
        }
      };
    errs(r.source_errors);
    errs(r.follow_up_errors);
    for (Criterion c : {Criterion::bon_ade, Criterion::bon_fde, Criterion::mean_ade,
        Criterion::mean_fde})
    {
      const auto * v = r.verdict(c);
      f.push_back(v ? num(v->p_value) : "");
    }
    f.push_back(csv_field(r.note));
    for (std::size_t i = 0; i < f.size(); ++i) {
      out += (i ? "," : "") + f[i];
    }
    out += "\n";
  }
  return out;
}

inline constexpr std::string_view kAgreementHeader =
  "label,threshold,units,tp,fp,fn,tn,accuracy,precision,recall";

inline std::string agreement_csv(std::span<const AgreementReport> reports)
{
  std::string out = std::string(kAgreementHeader) + "\n";
  for (const auto & rep : reports) {
    for (const auto & p : rep.points) {
      out += std::string(to_string(rep.label)) + "," + num(p.threshold) + "," +
        std::to_string(rep.units) + "," + std::to_string(p.tp) + "," + std::to_string(p.fp) +
        "," + std::to_string(p.fn) + "," + std::to_string(p.tn) + "," + num(p.accuracy) + "," +
        num(p.precision) + "," + num(p.recall) + "\n";
    }
  }
  return out;
}

// JSON keeps full double precision so that results can be reloaded exactly.

inline json opt(const std::optional<double> & v) {return v ? json(*v) : json(nullptr);}

inline std::optional<Criterion> parse_criterion(std::string_view s)
{
  for (Criterion c : {Criterion::wvc, Criterion::hvc, Criterion::htc, Criterion::bon_ade,
      Criterion::bon_fde, Criterion::mean_ade, Criterion::mean_fde})
  {
    if (to_string(c) == s) {return c;}
  }
  return std::nullopt;
}

inline json to_json(const Verdict & v)
{
  return {{"criterion", to_string(v.criterion)}, {"distance", v.distance}, {"p_value", v.p_value},
    {"alpha", v.alpha}, {"violated", v.violated}, {"degenerate_baseline", v.degenerate_baseline}};
}

inline Verdict verdict_from_json(const json & j)
{
  const auto c = parse_criterion(j.at("criterion").get<std::string>());
  if (!c) {throw ParseError("results", "unknown criterion " + j.at("criterion").dump());}
  return {*c, j.at("distance").get<double>(), j.at("p_value").get<double>(),
    j.at("alpha").get<double>(), j.at("violated").get<bool>(),
    j.at("degenerate_baseline").get<bool>()};
}

inline json to_json(const std::vector<Verdict> & vs)
{
  json arr = json::array();
  for (const auto & v : vs) {arr.push_back(to_json(v));}
  return arr;
}

inline std::vector<Verdict> verdicts_from_json(const json & j)
{
  std::vector<Verdict> out;
  for (const auto & v : j) {out.push_back(verdict_from_json(v));}
  return out;
}

inline json to_json(const SourceBaseline & b)
{
  return {{"mu", b.mu}, {"sigma", b.sigma}, {"n_pairs", b.n_pairs}};
}

inline SourceBaseline baseline_from_json(const json & j)
{
  return {j.at("mu").get<double>(), j.at("sigma").get<double>(),
    j.at("n_pairs").get<std::size_t>()};
}

inline json to_json(const std::optional<DisplacementErrors> & e)
{
  if (!e) {return nullptr;}
  return {{"bon_ade", e->bon_ade}, {"bon_fde", e->bon_fde}, {"mean_ade", e->mean_ade},
    {"mean_fde", e->mean_fde}};
}

inline std::optional<DisplacementErrors> errors_from_json(const json & j)
{
  if (j.is_null()) {return std::nullopt;}
  return DisplacementErrors{j.at("bon_ade").get<double>(), j.at("bon_fde").get<double>(),
    j.at("mean_ade").get<double>(), j.at("mean_fde").get<double>()};
}

inline std::optional<double> opt_double(const json & j)
{
  return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

inline json to_json(const SceneResult & r)
{
  json j{
    {"scene_id", r.scene_id},
    {"mr", r.mr.token()},
    {"mr_label", r.mr.label()},
    {"status", to_string(r.status)},
    {"note", r.note},
    {"sut_calls", r.sut_calls},
    {"wvc", to_json(r.wvc)},
    {"wvc_baseline", to_json(r.wvc_baseline)},
    {"wvc_rate", r.wvc_rate},
    {"hvc", nullptr},
    {"expected_effect", r.expected_effect ? json(to_string(*r.expected_effect)) : json(nullptr)},
    {"htc", r.htc ? to_json(*r.htc) : json(nullptr)},
    {"expectation_met", r.expectation_met ? json(*r.expectation_met) : json(nullptr)},
    {"roi_cells", r.roi_cells},
    {"source_intersection", opt(r.source_intersection)},
    {"follow_up_intersection", opt(r.follow_up_intersection)},
    {"source_errors", to_json(r.source_errors)},
    {"follow_up_errors", to_json(r.follow_up_errors)},
    {"displacement_verdicts", to_json(r.displacement_verdicts)},
  };
  if (r.hvc) {
    j["hvc"] = {{"verdicts", to_json(r.hvc->verdicts)}, {"baseline", to_json(r.hvc->baseline)},
      {"violation_rate", r.hvc->violation_rate}, {"mean", r.hvc->mean}, {"std", r.hvc->std}};
  }
  return j;
}

inline SceneResult scene_result_from_json(const json & j, const TransitionTable & table)
{
  SceneResult r;
  r.scene_id = j.at("scene_id").get<std::string>();
  r.mr = MRSpec::parse(j.at("mr").get<std::string>(), table);
  const auto status = j.at("status").get<std::string>();
  if (status == "ok") {
    r.status = SceneStatus::ok;
  } else if (status == "skipped") {
    r.status = SceneStatus::skipped;
  } else if (status == "errored") {
    r.status = SceneStatus::errored;
  } else {
    throw ParseError("results", "unknown status '" + status + "'");
  }
  r.note = j.at("note").get<std::string>();
  r.sut_calls = j.at("sut_calls").get<std::size_t>();
  r.wvc = verdicts_from_json(j.at("wvc"));
  r.wvc_baseline = baseline_from_json(j.at("wvc_baseline"));
  r.wvc_rate = j.at("wvc_rate").get<double>();
  if (const auto & h = j.at("hvc"); !h.is_null()) {
    r.hvc = HvcSummary{verdicts_from_json(h.at("verdicts")), baseline_from_json(h.at("baseline")),
      h.at("violation_rate").get<double>(), h.at("mean").get<double>(), h.at("std").get<double>()};
  }
  if (const auto & e = j.at("expected_effect"); !e.is_null()) {
    r.expected_effect = parse_effect(e.get<std::string>());
    if (!r.expected_effect) {throw ParseError("results", "unknown effect " + e.dump());}
  }
  if (const auto & h = j.at("htc"); !h.is_null()) {r.htc = verdict_from_json(h);}
  if (const auto & m = j.at("expectation_met"); !m.is_null()) {r.expectation_met = m.get<bool>();}
  r.roi_cells = j.at("roi_cells").get<std::size_t>();
  r.source_intersection = opt_double(j.at("source_intersection"));
  r.follow_up_intersection = opt_double(j.at("follow_up_intersection"));
  r.source_errors = errors_from_json(j.at("source_errors"));
  r.follow_up_errors = errors_from_json(j.at("follow_up_errors"));
  r.displacement_verdicts = verdicts_from_json(j.at("displacement_verdicts"));
  return r;
}

inline json config_to_json(const HarnessConfig & cfg, const std::string & sut)
{
  json mrs = json::array();
  for (const auto & mr : cfg.mrs) {mrs.push_back(mr.token());}
  return {{"sut", sut}, {"n", cfg.n_runs}, {"k", cfg.k}, {"alpha", cfg.alpha},
    {"history_length", cfg.shape.history_length}, {"horizon", cfg.shape.horizon},
    {"dt", cfg.shape.dt}, {"seed", cfg.seed}, {"mrs", std::move(mrs)},
    {"ot", {{"epsilon_relative", cfg.ot.epsilon_relative},
      {"max_iterations", cfg.ot.max_iterations}, {"tolerance", cfg.ot.tolerance},
      {"exact_threshold", cfg.ot.exact_threshold}, {"cost_exponent", cfg.ot.cost_exponent}}}};
}

inline json results_to_json(std::span<const SceneResult> results, const json & config)
{
  json arr = json::array();
  for (const auto & r : results) {arr.push_back(to_json(r));}
  return {{"config", config}, {"results", std::move(arr)}};
}

inline std::vector<SceneResult> results_from_json(const json & j,
  const TransitionTable & table = TransitionTable::standard())
{
  try {
    std::vector<SceneResult> out;
    for (const auto & r : j.at("results")) {out.push_back(scene_result_from_json(r, table));}
    return out;
  } catch (const json::exception & e) {
    throw ParseError("results", e.what());
  } catch (const ContractError & e) {
    throw ParseError("results", e.what());
  }
}

inline std::vector<SceneResult> load_results(const fs::path & path)
{
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error & e) {
    throw ParseError(path.string() + " byte " + std::to_string(e.byte), e.what());
  }
  return results_from_json(j);
}

/// aggregate.csv, scenes.csv and results.json in `dir`.
inline void write_campaign(const fs::path & dir, std::span<const SceneResult> results,
  const HarnessConfig & cfg, const std::string & sut)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {throw IoError("cannot create " + dir.string() + ": " + ec.message());}
  const auto rows = aggregate(results, cfg.mrs);
  io::write_file(dir / "aggregate.csv", aggregate_csv(rows));
  io::write_file(dir / "scenes.csv", scenes_csv(results));
  io::write_file(dir / "results.json", results_to_json(results, config_to_json(cfg, sut)).dump(1) +
    "\n");
}

}  // namespace trajtest::report
