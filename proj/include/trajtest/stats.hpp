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
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "trajtest/core.hpp"
#include "trajtest/metrics.hpp"
#include "trajtest/transforms.hpp"

namespace trajtest
{

inline double normal_cdf(double z) {return 0.5 * std::erfc(-z / std::numbers::sqrt2);}

/// Upper tail 1 - Phi(z) without cancellation.
inline double normal_sf(double z) {return 0.5 * std::erfc(z / std::numbers::sqrt2);}

enum class Alternative { two_sided, greater, less };

inline std::string_view to_string(Alternative a)
{
  switch (a) {
    case Alternative::two_sided: return "two-sided";
    case Alternative::greater: return "greater";
    case Alternative::less: return "less";
  }
  return "?";
}

/// Mean and sample standard deviation (n - 1) of the source-run distances.
struct SourceBaseline
{
  double mu{0.0};
  double sigma{0.0};
  std::size_t n_pairs{0};

  static SourceBaseline from(std::span<const double> values)
  {
    if (values.empty()) {
      throw ContractError("baseline needs at least one value");
    }
    SourceBaseline b;
    b.n_pairs = values.size();
    if (std::all_of(values.begin(), values.end(), [&](double v) {return v == values.front();})) {
      b.mu = values.front();
      return b;
    }
    b.mu = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
      double ss = 0.0;
      for (double v : values) {ss += (v - b.mu) * (v - b.mu);}
      b.sigma = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return b;
  }

  friend bool operator==(const SourceBaseline &, const SourceBaseline &) = default;
};

/// |d - mu| at or below this counts as "no deviation" when sigma = 0.
inline constexpr double kDegenerateTolerance = 1e-9;

struct ZTestResult
{
  double p_value{1.0};
  double z{0.0};
  bool degenerate_baseline{false};
};

inline ZTestResult z_test(double d, const SourceBaseline & base,
  Alternative alternative = Alternative::greater)
{
  if (alternative == Alternative::less) {
    ZTestResult r = z_test(-d, {-base.mu, base.sigma, base.n_pairs}, Alternative::greater);
    return r;
  }
  ZTestResult r;
  if (!(base.sigma > 0.0)) {
    r.degenerate_baseline = true;
    const double dev = d - base.mu;
    const bool same = std::abs(dev) <= kDegenerateTolerance;
    if (same || (alternative == Alternative::greater && dev < 0.0)) {
      r.p_value = 1.0;
      r.z = 0.0;
    } else {
      r.p_value = 0.0;
      r.z = dev > 0.0 ? std::numeric_limits<double>::infinity() :
        -std::numeric_limits<double>::infinity();
    }
    return r;
  }
  r.z = (d - base.mu) / base.sigma;
  r.p_value = alternative == Alternative::greater ? normal_sf(r.z) :
    std::min(1.0, 2.0 * normal_sf(std::abs(r.z)));
  return r;
}

enum class Criterion { wvc, hvc, htc, bon_ade, bon_fde, mean_ade, mean_fde };

inline std::string_view to_string(Criterion c)
{
  switch (c) {
    case Criterion::wvc: return "WVC";
    case Criterion::hvc: return "HVC";
    case Criterion::htc: return "HTC";
    case Criterion::bon_ade: return "B-ADE";
    case Criterion::bon_fde: return "B-FDE";
    case Criterion::mean_ade: return "M-ADE";
    case Criterion::mean_fde: return "M-FDE";
  }
  return "?";
}

struct Verdict
{
  Criterion criterion{Criterion::wvc};
  double distance{0.0};
  double p_value{1.0};
  double alpha{0.05};
  bool violated{false};
  bool degenerate_baseline{false};

  static Verdict make(Criterion c, double distance, double p, double alpha, bool degenerate)
  {
    return {c, distance, p, alpha, p <= alpha, degenerate};
  }

  friend bool operator==(const Verdict &, const Verdict &) = default;
};

struct WilcoxonResult
{
  double p_value{1.0};
  double statistic{0.0};  ///< W+, sum of ranks of positive differences
  std::size_t n_effective{0};
  bool exact{false};
  bool no_signal{false};
};

namespace detail
{

/// Mid-ranks (1-based) of `values` sorted ascending; ties share their average rank.
inline std::vector<double> mid_ranks(const std::vector<double> & values)
{
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
    [&](std::size_t a, std::size_t b) {return values[a] < values[b];});
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) {++j;}
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {ranks[order[k]] = r;}
    i = j + 1;
  }
  return ranks;
}

}  // namespace detail

/// Exact null distribution threshold: effective n at or below this is enumerated.
inline constexpr std::size_t kWilcoxonExactLimit = 25;

enum class WilcoxonMethod { automatic, exact, normal };

/// Wilcoxon signed-rank test on paired samples with differences y - x. Zero differences are
/// dropped and tied magnitudes get mid-ranks. `greater` tests y > x.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
  Alternative alternative = Alternative::two_sided,
  WilcoxonMethod method = WilcoxonMethod::automatic)
{
  if (x.size() != y.size() || x.empty()) {
    throw ContractError("wilcoxon_signed_rank needs two non-empty samples of equal length");
  }
  std::vector<double> diffs;
  diffs.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = y[i] - x[i];
    if (d != 0.0) {diffs.push_back(d);}
  }
  WilcoxonResult res;
  res.n_effective = diffs.size();
  if (diffs.empty()) {
    res.no_signal = true;
    res.p_value = 1.0;
    return res;
  }
  std::vector<double> mags(diffs.size());
  std::transform(diffs.begin(), diffs.end(), mags.begin(), [](double d) {return std::abs(d);});
  const auto ranks = detail::mid_ranks(mags);
  double w_plus = 0.0;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    if (diffs[i] > 0.0) {w_plus += ranks[i];}
  }
  res.statistic = w_plus;
  const std::size_t n = diffs.size();
  const bool exact = method == WilcoxonMethod::exact ||
    (method == WilcoxonMethod::automatic && n <= kWilcoxonExactLimit);
  res.exact = exact;

  double p_greater = 1.0;  // P(W+ >= w)
  double p_less = 1.0;     // P(W+ <= w)
  if (exact) {
    // Mid-ranks are multiples of 1/2, so doubled ranks are integers: count sign assignments
    // per doubled rank sum.
    std::vector<int> doubled(n);
    int total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      doubled[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
      total += doubled[i];
    }
    std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
    counts[0] = 1.0;
    int reach = 0;
    for (int r : doubled) {
      for (int s = reach; s >= 0; --s) {
        if (counts[static_cast<std::size_t>(s)] != 0.0) {
          counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
        }
      }
      reach += r;
    }
    const int w2 = static_cast<int>(std::lround(2.0 * w_plus));
    const double all = std::ldexp(1.0, static_cast<int>(n));
    double ge = 0.0;
    double le = 0.0;
    for (int s = 0; s <= total; ++s) {
      if (s >= w2) {ge += counts[static_cast<std::size_t>(s)];}
      if (s <= w2) {le += counts[static_cast<std::size_t>(s)];}
    }
    p_greater = ge / all;
    p_less = le / all;
  } else {
    const double nd = static_cast<double>(n);
    const double mean = nd * (nd + 1.0) / 4.0;
    double tie_term = 0.0;
    {
      std::vector<double> sorted = mags;
      std::sort(sorted.begin(), sorted.end());
      std::size_t i = 0;
      while (i < sorted.size()) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) {++j;}
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
      }
    }
    const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
    const double sd = std::sqrt(var);
    if (!(sd > 0.0)) {
      p_greater = p_less = 1.0;
    } else {
      p_greater = normal_sf((w_plus - mean - 0.5) / sd);
      p_less = normal_cdf((w_plus - mean + 0.5) / sd);
    }
  }
  switch (alternative) {
    case Alternative::greater: res.p_value = p_greater; break;
    case Alternative::less: res.p_value = p_less; break;
    case Alternative::two_sided: res.p_value = std::min(1.0, 2.0 * std::min(p_greater, p_less));
      break;
  }
  res.p_value = std::clamp(res.p_value, 0.0, 1.0);
  return res;
}

struct WvcResult
{
  std::vector<Verdict> verdicts;
  SourceBaseline baseline;
  double violation_rate{0.0};
};

/// Wasserstein violation criterion. `source_runs` must already be in the follow-up frame; one
/// verdict per source run.
inline WvcResult wvc(std::span<const PredictionSet> source_runs, const PredictionSet & follow_up,
  double alpha, const OTConfig & ot = {})
{
  const auto pairwise = pairwise_distances(source_runs, DistanceKind::wasserstein, ot);
  WvcResult out;
  out.baseline = SourceBaseline::from(pairwise);
  std::size_t violated = 0;
  for (const auto & run : source_runs) {
    const double d = wasserstein(follow_up, run, ot);
    const auto z = z_test(d, out.baseline, Alternative::greater);
    out.verdicts.push_back(Verdict::make(Criterion::wvc, d, z.p_value, alpha,
        z.degenerate_baseline));
    violated += out.verdicts.back().violated ? 1U : 0U;
  }
  out.violation_rate = static_cast<double>(violated) / static_cast<double>(source_runs.size());
  return out;
}

struct HvcResult
{
  std::vector<Verdict> verdicts;
  SourceBaseline baseline;
  double violation_rate{0.0};
  double mean_distance{0.0};
  double std_distance{0.0};
};

/// Hellinger violation criterion; the same z-test scheme as wvc, plus mean and standard
/// deviation of the source-to-follow-up distances.
inline HvcResult hvc(std::span<const ProbabilityMap> source_maps,
  const ProbabilityMap & follow_up_map, double alpha)
{
  const auto pairwise = pairwise_distances(source_maps,
      [](const ProbabilityMap & a, const ProbabilityMap & b) {return hellinger(a, b);});
  HvcResult out;
  out.baseline = SourceBaseline::from(pairwise);
  std::vector<double> dists;
  std::size_t violated = 0;
  for (const auto & m : source_maps) {
    const double d = hellinger(follow_up_map, m);
    dists.push_back(d);
    const auto z = z_test(d, out.baseline, Alternative::greater);
    out.verdicts.push_back(Verdict::make(Criterion::hvc, d, z.p_value, alpha,
        z.degenerate_baseline));
    violated += out.verdicts.back().violated ? 1U : 0U;
  }
  const auto stats = SourceBaseline::from(dists);
  out.mean_distance = stats.mu;
  out.std_distance = stats.sigma;
  out.violation_rate = static_cast<double>(violated) / static_cast<double>(source_maps.size());
  return out;
}

/// One-sided alternative matching an expected effect: increase tests follow-up > source.
inline Alternative alternative_for(ExpectedEffect e)
{
  return e == ExpectedEffect::increase ? Alternative::greater : Alternative::less;
}

/// Hypothesis-testing criterion on the region of interest. `distance` holds the mean
/// per-cell change Q - P over the roi.
inline Verdict htc(const ProbabilityMap & p, const ProbabilityMap & q, std::span<const Cell> roi,
  double alpha, Alternative alternative)
{
  if (roi.empty()) {
    throw ContractError("htc: empty region of interest");
  }
  if (p.width() != q.width() || p.height() != q.height()) {
    throw ContractError("htc: map dimensions differ");
  }
  std::vector<double> xs;
  std::vector<double> ys;
  xs.reserve(roi.size());
  ys.reserve(roi.size());
  double shift = 0.0;
  for (Cell c : roi) {
    xs.push_back(p[c]);
    ys.push_back(q[c]);
    shift += q[c] - p[c];
  }
  const auto w = wilcoxon_signed_rank(xs, ys, alternative);
  return Verdict::make(Criterion::htc, shift / static_cast<double>(roi.size()), w.p_value, alpha,
           false);
}

/// Cells visited by the segment a -> b (Amanatides-Woo traversal), clipped to the raster.
inline std::vector<Cell> traversed_cells(Point2 a, Point2 b, int width, int height)
{
  // Liang-Barsky clip to [0, W] x [0, H].
  double t0 = 0.0;
  double t1 = 1.0;
  const Point2 d = b - a;
  const auto clip = [&](double p, double q) {
      if (p == 0.0) {return q >= 0.0;}
      const double r = q / p;
      if (p < 0.0) {
        if (r > t1) {return false;}
        t0 = std::max(t0, r);
      } else {
        if (r < t0) {return false;}
        t1 = std::min(t1, r);
      }
      return true;
    };
  if (!clip(-d.x, a.x) || !clip(d.x, width - a.x) || !clip(-d.y, a.y) ||
    !clip(d.y, height - a.y))
  {
    return {};
  }
  const Point2 s = a + t0 * d;
  const Point2 e = a + t1 * d;
  const auto cell_of = [&](Point2 p) {
      return Cell{std::clamp(static_cast<int>(std::floor(p.x)), 0, width - 1),
        std::clamp(static_cast<int>(std::floor(p.y)), 0, height - 1)};
    };
  Cell cur = cell_of(s);
  const Cell last = cell_of(e);
  std::vector<Cell> out{cur};
  const Point2 dir = e - s;
  const int step_x = dir.x > 0.0 ? 1 : (dir.x < 0.0 ? -1 : 0);
  const int step_y = dir.y > 0.0 ? 1 : (dir.y < 0.0 ? -1 : 0);
  const double inf = std::numeric_limits<double>::infinity();
  const double delta_x = step_x != 0 ? 1.0 / std::abs(dir.x) : inf;
  const double delta_y = step_y != 0 ? 1.0 / std::abs(dir.y) : inf;
  double t_max_x = step_x > 0 ? (cur.col + 1.0 - s.x) * delta_x :
    step_x < 0 ? (s.x - cur.col) * delta_x : inf;
  double t_max_y = step_y > 0 ? (cur.row + 1.0 - s.y) * delta_y :
    step_y < 0 ? (s.y - cur.row) * delta_y : inf;
  const int guard = std::abs(last.col - cur.col) + std::abs(last.row - cur.row);
  for (int i = 0; i < guard && !(cur == last); ++i) {
    if (t_max_x < t_max_y) {
      cur.col += step_x;
      t_max_x += delta_x;
    } else {
      cur.row += step_y;
      t_max_y += delta_y;
    }
    if (cur.col < 0 || cur.row < 0 || cur.col >= width || cur.row >= height) {break;}
    out.push_back(cur);
  }
  return out;
}

/// Whether any segment of the polyline passes through a cell with a blocked class.
inline bool intersects_blocked(const Trajectory & t, const SegmentationMap & map,
  std::span<const ClassId> blocked)
{
  const auto is_blocked = [&](Cell c) {
      const ClassId v = map.cells[c];
      return std::find(blocked.begin(), blocked.end(), v) != blocked.end();
    };
  if (t.size() == 1) {
    return is_blocked(map.cells.cell_of(t.points[0]));
  }
  for (std::size_t i = 1; i < t.size(); ++i) {
    for (Cell c : traversed_cells(t.points[i - 1], t.points[i], map.width(), map.height())) {
      if (is_blocked(c)) {return true;}
    }
  }
  return false;
}

/// Fraction of sampled trajectories that pass through a blocked cell.
inline double intersection_rate(const PredictionSet & preds, const SegmentationMap & map,
  std::span<const ClassId> blocked)
{
  if (preds.trajectories.empty() || blocked.empty()) {return 0.0;}
  std::size_t hits = 0;
  for (const auto & t : preds.trajectories) {
    hits += intersects_blocked(t, map, blocked) ? 1U : 0U;
  }
  return static_cast<double>(hits) / static_cast<double>(preds.trajectories.size());
}

/// Classes with zero walkability.
inline std::vector<ClassId> impassable_classes(const ClassLegend & legend)
{
  std::vector<ClassId> out;
  for (const auto & e : legend.entries()) {
    if (e.walkability == 0.0) {out.push_back(e.id);}
  }
  return out;
}

}  // namespace trajtest
