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
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "trajtest/core.hpp"
#include "trajtest/ot.hpp"

namespace trajtest
{

/// Euclidean norm of the pointwise difference, i.e. the distance between the two trajectories
/// seen as points of R^{2T}.
inline double trajectory_cost(const Trajectory & a, const Trajectory & b)
{
  if (a.size() != b.size()) {
    throw ContractError("trajectory_cost: length mismatch " + std::to_string(a.size()) + " vs " +
            std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const Point2 d = a.points[t] - b.points[t];
    sum += d.x * d.x + d.y * d.y;
  }
  return std::sqrt(sum);
}

/// Uniformly weighted empirical distribution over sampled trajectories.
struct TrajectoryDistribution
{
  std::vector<Trajectory> support;

  TrajectoryDistribution() = default;
  explicit TrajectoryDistribution(std::vector<Trajectory> s) : support(std::move(s))
  {
    if (support.empty()) {
      throw ContractError("trajectory distribution needs at least one sample");
    }
    for (const auto & t : support) {
      if (t.size() != support.front().size()) {
        throw ContractError("trajectory distribution samples differ in length");
      }
    }
  }
  explicit TrajectoryDistribution(const PredictionSet & p)
  : TrajectoryDistribution(p.trajectories) {}

  std::size_t size() const noexcept {return support.size();}
  std::size_t dimension() const noexcept {return support.empty() ? 0 : 2 * support[0].size();}
};

enum class OTSolver { automatic, exact, sinkhorn };

struct OTConfig
{
  /// Sinkhorn regularization relative to the median ground cost.
  double epsilon_relative{1e-2};
  int max_iterations{1000};
  double tolerance{1e-9};
  /// Supports up to this size (equal and uniform) are solved as an exact assignment.
  std::size_t exact_threshold{64};
  /// 1: expected Euclidean cost (W1). 2: square root of the expected squared cost (W2).
  int cost_exponent{1};
  OTSolver solver{OTSolver::automatic};
};

inline Eigen::MatrixXd ground_cost_matrix(const TrajectoryDistribution & p,
  const TrajectoryDistribution & q, int exponent)
{
  Eigen::MatrixXd c(static_cast<Eigen::Index>(p.size()), static_cast<Eigen::Index>(q.size()));
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < q.size(); ++j) {
      const double d = trajectory_cost(p.support[i], q.support[j]);
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = exponent == 2 ? d * d : d;
    }
  }
  return c;
}

inline double median_of(const Eigen::MatrixXd & m)
{
  std::vector<double> v(m.data(), m.data() + m.size());
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

/// Optimal-transport distance between two sampled trajectory distributions.
inline double wasserstein(const TrajectoryDistribution & p, const TrajectoryDistribution & q,
  const OTConfig & cfg = {})
{
  if (p.dimension() != q.dimension()) {
    throw ContractError("wasserstein: ambient dimensions differ");
  }
  if (cfg.cost_exponent != 1 && cfg.cost_exponent != 2) {
    throw ContractError("wasserstein: cost exponent must be 1 or 2");
  }
  const Eigen::MatrixXd cost = ground_cost_matrix(p, q, cfg.cost_exponent);
  const bool can_assign = p.size() == q.size();
  const bool use_exact = cfg.solver == OTSolver::exact ||
    (cfg.solver == OTSolver::automatic && can_assign && p.size() <= cfg.exact_threshold);
  double expected = 0.0;
  if (use_exact) {
    if (!can_assign) {
      throw ContractError("exact assignment needs equal support sizes");
    }
    expected = ot::solve_assignment(cost).total_cost / static_cast<double>(p.size());
  } else {
    const double med = median_of(cost);
    if (med == 0.0 && cost.maxCoeff() == 0.0) {
      return 0.0;
    }
    const double scale = med > 0.0 ? med : cost.mean();
    const Eigen::VectorXd a = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(p.size()),
        1.0 / static_cast<double>(p.size()));
    const Eigen::VectorXd b = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(q.size()),
        1.0 / static_cast<double>(q.size()));
    expected = ot::sinkhorn(cost, a, b,
        {cfg.epsilon_relative * scale, cfg.max_iterations, cfg.tolerance}).cost;
  }
  return cfg.cost_exponent == 2 ? std::sqrt(std::max(0.0, expected)) : expected;
}

inline double wasserstein(const PredictionSet & p, const PredictionSet & q,
  const OTConfig & cfg = {})
{
  return wasserstein(TrajectoryDistribution(p), TrajectoryDistribution(q), cfg);
}

/// (1/sqrt 2) * || sqrt(P) - sqrt(Q) ||_2, in [0, 1].
inline double hellinger(const ProbabilityMap & p, const ProbabilityMap & q)
{
  if (p.width() != q.width() || p.height() != q.height()) {
    throw ContractError("hellinger: map dimensions differ");
  }
  double sum = 0.0;
  const auto & a = p.values().data();
  const auto & b = q.values().data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::sqrt(a[i]) - std::sqrt(b[i]);
    sum += d * d;
  }
  return std::min(1.0, std::sqrt(sum) / std::numbers::sqrt2);
}

struct DisplacementErrors
{
  double bon_ade{0.0};
  double bon_fde{0.0};
  double mean_ade{0.0};
  double mean_fde{0.0};

  friend bool operator==(const DisplacementErrors &, const DisplacementErrors &) = default;
};

/// Best-of-K and mean-over-K average/final displacement errors against ground truth.
inline DisplacementErrors ade_fde(const PredictionSet & preds, const Trajectory & gt)
{
  if (preds.trajectories.empty()) {
    throw ContractError("ade_fde: empty prediction set");
  }
  if (gt.empty()) {
    throw ContractError("ade_fde: empty ground truth");
  }
  DisplacementErrors out;
  out.bon_ade = std::numeric_limits<double>::infinity();
  out.bon_fde = std::numeric_limits<double>::infinity();
  for (const auto & t : preds.trajectories) {
    if (t.size() != gt.size()) {
      throw ContractError("ade_fde: prediction length " + std::to_string(t.size()) +
              " ≠ ground truth length " + std::to_string(gt.size()));
    }
    double ade = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {ade += norm(t.points[i] - gt.points[i]);}
    ade /= static_cast<double>(gt.size());
    const double fde = norm(t.back() - gt.back());
    out.bon_ade = std::min(out.bon_ade, ade);
    out.bon_fde = std::min(out.bon_fde, fde);
    out.mean_ade += ade;
    out.mean_fde += fde;
  }
  out.mean_ade /= static_cast<double>(preds.trajectories.size());
  out.mean_fde /= static_cast<double>(preds.trajectories.size());
  return out;
}

/// `distance` applied to all N(N-1)/2 unordered pairs, (0,1), (0,2), ..., (N-2,N-1).
template<typename T, typename Distance>
std::vector<double> pairwise_distances(std::span<const T> items, Distance && distance)
{
  if (items.size() < 2) {
    throw ContractError("pairwise_distances needs at least two results");
  }
  std::vector<double> out;
  out.reserve(items.size() * (items.size() - 1) / 2);
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t j = i + 1; j < items.size(); ++j) {
      out.push_back(distance(items[i], items[j]));
    }
  }
  return out;
}

enum class DistanceKind { wasserstein, hellinger };

/// Pairwise distances over prediction sets, Wasserstein on trajectories or Hellinger on maps.
inline std::vector<double> pairwise_distances(std::span<const PredictionSet> results,
  DistanceKind kind, const OTConfig & cfg = {})
{
  if (kind == DistanceKind::wasserstein) {
    return pairwise_distances(results,
             [&](const PredictionSet & a, const PredictionSet & b) {return wasserstein(a, b, cfg);});
  }
  return pairwise_distances(results, [](const PredictionSet & a, const PredictionSet & b) {
             if (!a.prob_map || !b.prob_map) {
               throw ContractError("hellinger distance needs probability maps");
             }
             return hellinger(*a.prob_map, *b.prob_map);
           });
}

}  // namespace trajtest
