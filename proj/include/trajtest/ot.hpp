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
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "trajtest/error.hpp"

namespace trajtest::ot
{

/// Optimal permutation for a square cost matrix.
struct Assignment
{
  std::vector<int> column_of_row;
  double total_cost{0.0};
};

/// Shortest-augmenting-path Hungarian algorithm with row/column potentials, O(n^3).
inline Assignment solve_assignment(const Eigen::MatrixXd & cost)
{
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) {
    throw ContractError("assignment needs a square cost matrix");
  }
  Assignment out;
  if (n == 0) {return out;}
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is the virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) {continue;}
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  out.column_of_row.assign(n, -1);
  for (int j = 1; j <= n; ++j) {
    out.column_of_row[p[j] - 1] = j - 1;
  }
  for (int i = 0; i < n; ++i) {
    out.total_cost += cost(i, out.column_of_row[i]);
  }
  return out;
}

struct SinkhornOptions
{
  double epsilon{1e-2};
  int max_iterations{1000};
  /// Early stop once the L1 marginal violation drops below this.
  double tolerance{1e-9};
  /// When the budget runs out, residuals up to this are still rounded and returned.
  double accept_residual{1e-3};
};

struct SinkhornResult
{
  Eigen::MatrixXd plan;  ///< rounded onto the exact marginals
  double cost{0.0};      ///< <plan, C>
  int iterations{0};
  double residual{0.0};  ///< L1 marginal violation before rounding
};

namespace detail
{

inline double logsumexp(const Eigen::Ref<const Eigen::VectorXd> & x)
{
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) {return m;}
  return m + std::log((x.array() - m).exp().sum());
}

/// Projects a nearly feasible plan onto the transport polytope (Altschuler-Weed-Rigollet rounding).
inline Eigen::MatrixXd round_to_marginals(Eigen::MatrixXd plan, const Eigen::VectorXd & a,
  const Eigen::VectorXd & b)
{
  const Eigen::VectorXd r = plan.rowwise().sum();
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    if (r(i) > a(i)) {plan.row(i) *= a(i) / r(i);}
  }
  const Eigen::VectorXd c = plan.colwise().sum().transpose();
  for (Eigen::Index j = 0; j < plan.cols(); ++j) {
    if (c(j) > b(j)) {plan.col(j) *= b(j) / c(j);}
  }
  const Eigen::VectorXd err_r = (a - plan.rowwise().sum()).cwiseMax(0.0);
  const Eigen::VectorXd err_c = (b - plan.colwise().sum().transpose()).cwiseMax(0.0);
  const double mass = err_r.lpNorm<1>();
  if (mass > 0.0) {
    plan += err_r * err_c.transpose() / mass;
  }
  return plan;
}

}  // namespace detail

/// Entropic optimal transport in the log domain. The regularization is annealed geometrically
/// from max(C) down to `epsilon`, warm-starting the dual potentials at every stage; the
/// iteration budget applies to the final stage.
inline SinkhornResult sinkhorn(const Eigen::MatrixXd & cost, const Eigen::VectorXd & a,
  const Eigen::VectorXd & b, const SinkhornOptions & opt)
{
  const Eigen::Index m = cost.rows();
  const Eigen::Index n = cost.cols();
  if (a.size() != m || b.size() != n || m == 0 || n == 0) {
    throw ContractError("sinkhorn marginals do not match the cost matrix");
  }
  if (!(opt.epsilon > 0.0) || opt.max_iterations <= 0 || !(opt.tolerance > 0.0)) {
    throw ContractError("sinkhorn options must be positive");
  }
  const Eigen::VectorXd log_a = a.array().log();
  const Eigen::VectorXd log_b = b.array().log();
  Eigen::VectorXd f = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);

  const auto plan_for = [&](double eps) {
      Eigen::MatrixXd p(m, n);
      for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          p(i, j) = std::exp((f(i) + g(j) - cost(i, j)) / eps);
        }
      }
      return p;
    };

  const auto iterate = [&](double eps, int budget, double tol, int & used) {
      Eigen::VectorXd buf_n(n), buf_m(m);
      double residual = std::numeric_limits<double>::infinity();
      for (used = 0; used < budget; ) {
        for (Eigen::Index i = 0; i < m; ++i) {
          for (Eigen::Index j = 0; j < n; ++j) {buf_n(j) = (g(j) - cost(i, j)) / eps;}
          f(i) = eps * (log_a(i) - detail::logsumexp(buf_n));
        }
        for (Eigen::Index j = 0; j < n; ++j) {
          for (Eigen::Index i = 0; i < m; ++i) {buf_m(i) = (f(i) - cost(i, j)) / eps;}
          g(j) = eps * (log_b(j) - detail::logsumexp(buf_m));
        }
        ++used;
        // Columns are exact after the g-update; measure the row marginals.
        residual = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
          for (Eigen::Index j = 0; j < n; ++j) {buf_n(j) = (f(i) + g(j) - cost(i, j)) / eps;}
          residual += std::abs(std::exp(detail::logsumexp(buf_n)) - a(i));
        }
        if (residual <= tol) {break;}
      }
      return residual;
    };

  const double target = opt.epsilon;
  double eps = std::max(cost.maxCoeff(), target);
  int scratch = 0;
  while (eps > target) {
    iterate(eps, 200, std::max(opt.tolerance, 1e-6), scratch);
    eps = std::max(target, eps * 0.5);
    if (eps == target) {break;}
  }
  SinkhornResult out;
  out.residual = iterate(target, opt.max_iterations, opt.tolerance, out.iterations);
  if (!(out.residual <= std::max(opt.tolerance, opt.accept_residual))) {
    throw NumericalError("sinkhorn did not converge: marginal residual " +
            std::to_string(out.residual) + " after " + std::to_string(out.iterations) +
            " iterations", out.residual);
  }
  out.plan = detail::round_to_marginals(plan_for(target), a, b);
  out.cost = (out.plan.array() * cost.array()).sum();
  return out;
}

}  // namespace trajtest::ot
