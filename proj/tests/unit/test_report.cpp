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

#include <filesystem>

#include "trajtest/agreement.hpp"
#include "trajtest/report.hpp"
#include "trajtest/scenegen.hpp"

using namespace trajtest;
namespace fs = std::filesystem;

namespace
{

SceneResult labeled(double wvc_p, double label_p)
{
  SceneResult r;
  r.mr = MRSpec::rotate(90);
  r.wvc = {Verdict::make(Criterion::wvc, 1.0, wvc_p, 0.05, false)};
  r.displacement_verdicts = {Verdict::make(Criterion::mean_ade, 1.0, label_p, 0.05, false)};
  return r;
}

}  // namespace

TEST(Agreement, ConfusionMatrixFormulas)
{
  const auto p = AgreementPoint::from_counts(0.05, 3, 1, 1, 5);
  EXPECT_DOUBLE_EQ(p.precision, 0.75);
  EXPECT_DOUBLE_EQ(p.recall, 0.75);
  EXPECT_DOUBLE_EQ(p.accuracy, 0.8);
  const auto empty = AgreementPoint::from_counts(0.05, 0, 0, 0, 4);
  EXPECT_EQ(empty.precision, 1.0);
  EXPECT_EQ(empty.recall, 1.0);
}

TEST(Agreement, ThresholdSweep)
{
  // (wvc p, label p): a TP at every threshold, a pair only WVC flags below 0.2, a pair only
  // the label flags below 0.1, and a quiet pair.
  const std::vector<SceneResult> rs{labeled(0.001, 0.001), labeled(0.15, 0.9),
    labeled(0.9, 0.08), labeled(0.9, 0.9)};
  const std::vector<double> th{0.01, 0.1, 0.2, 1.0};
  const auto rep = agreement_analysis(rs, th);
  ASSERT_EQ(rep.points.size(), 4u);
  EXPECT_EQ(rep.units, 4u);
  EXPECT_EQ(rep.points[0], AgreementPoint::from_counts(0.01, 1, 0, 0, 3));
  EXPECT_EQ(rep.points[1], AgreementPoint::from_counts(0.1, 1, 0, 1, 2));
  EXPECT_EQ(rep.points[2], AgreementPoint::from_counts(0.2, 1, 1, 1, 1));
  EXPECT_EQ(rep.points[3].recall, 1.0);
  EXPECT_EQ(rep.points[3].tp, 4u);

  const std::vector<SceneResult> same{labeled(0.01, 0.01), labeled(0.3, 0.3)};
  for (const auto & p : agreement_analysis(same, default_thresholds()).points) {
    EXPECT_EQ(p.accuracy, 1.0);
    EXPECT_EQ(p.precision, 1.0);
    EXPECT_EQ(p.recall, 1.0);
  }
}

TEST(Agreement, MedianOfRunsAndErrors)
{
  auto r = labeled(0.5, 0.5);
  r.wvc = {Verdict::make(Criterion::wvc, 0, 0.01, 0.05, false),
    Verdict::make(Criterion::wvc, 0, 0.03, 0.05, false),
    Verdict::make(Criterion::wvc, 0, 0.9, 0.05, false),
    Verdict::make(Criterion::wvc, 0, 0.2, 0.05, false)};
  EXPECT_DOUBLE_EQ(wvc_median_p(r), 0.115);
  auto unlabeled = labeled(0.1, 0.1);
  unlabeled.displacement_verdicts.clear();
  const std::vector<SceneResult> none{unlabeled};
  EXPECT_THROW(agreement_analysis(none, default_thresholds()), ContractError);
  const std::vector<SceneResult> one{labeled(0.1, 0.1)};
  EXPECT_THROW(agreement_analysis(one, default_thresholds(), Criterion::wvc), ContractError);
}

TEST(Report, AggregateHeaderIsStable)
{
  EXPECT_EQ(report::kAggregateHeader,
    "mr,scenes,skipped,errored,wvc_pct,bade_pct,bfde_pct,made_pct,mfde_pct,hvc_mean,hvc_std,"
    "htc_pct,intersection_pct");
  AggregateRow row;
  row.mr = "Rotate-90";
  row.scenes = 2;
  row.wvc_pct = 100.0 / 3.0;
  const std::vector<AggregateRow> rows{row};
  EXPECT_EQ(report::aggregate_csv(rows), std::string(report::kAggregateHeader) +
    "\nRotate-90,2,0,0,33.3333,,,,,,,,\n");
}

TEST(Report, CsvQuoting)
{
  EXPECT_EQ(report::csv_field("plain"), "plain");
  EXPECT_EQ(report::csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(report::csv_field("say \"x\""), "\"say \"\"x\"\"\"");
  EXPECT_EQ(report::num(0.1 + 0.2), "0.3");
  EXPECT_EQ(report::num(std::optional<double>{}), "");
}

TEST(Report, ResultsJsonRoundTrip)
{
  const auto scenes = generate_corpus(2, ScenarioShape{}, 8);
  HarnessConfig cfg;
  cfg.mrs = {MRSpec::mirror(MirrorAxis::vertical), MRSpec::rescale(0.25, 0.3),
    MRSpec::class_change("terrain", "pavement"), MRSpec::obstacle("tree", 6.5, 0.25)};
  const auto results = run_campaign(scenes,
      [] {return std::make_unique<MapAwareReference>();}, cfg);
  auto extended = results;
  SceneResult err;
  err.scene_id = "broken, \"quoted\"";
  err.mr = MRSpec::rotate(270);
  err.status = SceneStatus::errored;
  err.note = "line\nbreak";
  extended.push_back(err);
  const auto j = report::results_to_json(extended, report::config_to_json(cfg, "map-aware"));
  const auto back = report::results_from_json(report::json::parse(j.dump(1)));
  EXPECT_EQ(back, extended);
  const auto csv = report::scenes_csv(extended);
  EXPECT_NE(csv.find("\"broken, \"\"quoted\"\"\""), std::string::npos);
  EXPECT_NE(csv.find("\"line\nbreak\""), std::string::npos);
  EXPECT_THROW(report::results_from_json(report::json::parse(R"({"results":[{}]})")),
    ParseError);
}

TEST(Report, WriteCampaignIsDeterministic)
{
  const auto scenes = generate_corpus(2, ScenarioShape{}, 8);
  HarnessConfig cfg;
  cfg.seed = 77;
  const auto dir = fs::temp_directory_path() / "trajtest_report";
  fs::remove_all(dir);
  const PredictorFactory f = [] {return std::make_unique<BiasedMutant>();};
  report::write_campaign(dir / "a", run_campaign(scenes, f, cfg), cfg, "mutant");
  report::write_campaign(dir / "b", run_campaign(scenes, f, cfg), cfg, "mutant");
  for (const char * name : {"aggregate.csv", "scenes.csv", "results.json"}) {
    EXPECT_EQ(io::read_file(dir / "a" / name), io::read_file(dir / "b" / name)) << name;
  }
  const auto agg = io::read_file(dir / "a" / "aggregate.csv");
  EXPECT_EQ(std::count(agg.begin(), agg.end(), '\n'), 8);
  EXPECT_EQ(report::load_results(dir / "a" / "results.json").size(), 2u * 7u);
  fs::remove_all(dir);
}
