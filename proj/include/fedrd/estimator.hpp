#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "fedrd/linalg.hpp"
#include "fedrd/survival_data.hpp"

namespace fedrd {

enum class Method { local, pooled, meta, fedrd_u, fedrd_s };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::local: return "local";
    case Method::pooled: return "pooled";
    case Method::meta: return "meta";
    case Method::fedrd_u: return "fedrd_u";
    case Method::fedrd_s: return "fedrd_s";
  }
  return "?";
}

inline Method method_from_name(const std::string& s) {
  if (s == "local") return Method::local;
  if (s == "pooled") return Method::pooled;
  if (s == "meta") return Method::meta;
  if (s == "fedrd_u") return Method::fedrd_u;
  if (s == "fedrd_s") return Method::fedrd_s;
  throw Error("unknown method: " + s);
}

// Raw (unnormalized) estimating-equation sums. Keeping them raw lets
// per-site sums add directly at the coordinator; the 1/n factors cancel in
// the coefficient solve and the raw sandwich equals the finite-sample
// covariance of the estimate.
struct Accumulators {
  Mat a_mat;      // sum_i sum_{l in R(y_(i))} {x_l - xbar(y_(i))}^{x2} dy_(i)
  Vec d_vec;      // sum_i delta_i {x_i - xbar(y_i)}
  Mat sigma_mat;  // sum_i delta_i {x_i - xbar(y_i)}^{x2}
  long n = 0;
};

struct FitResult {
  Vec beta;
  Mat cov;
  long n = 0;
  Method method = Method::local;
};

namespace detail {

// Canonical subject order: ascending by (time, status, covariates). Using a
// total order makes every accumulator bitwise independent of input order.
inline std::vector<int> canonical_order(const SurvivalDataset& data) {
  std::vector<int> idx(data.n());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const Subject& sa = data.subjects[a];
    const Subject& sb = data.subjects[b];
    if (sa.time != sb.time) return sa.time < sb.time;
    if (sa.status != sb.status) return sa.status < sb.status;
    return sa.covariates < sb.covariates;
  });
  return idx;
}

// Index of the first grid entry equal to t; throws if t is not on the grid.
inline size_t grid_index_of(const TimeGrid& grid, double t) {
  auto it = std::lower_bound(grid.times.begin(), grid.times.end(), t);
  if (it == grid.times.end() || *it != t)
    throw LocalTimeMissingFromGrid("observed time " + std::to_string(t) +
                                   " is not on the shared grid");
  return static_cast<size_t>(it - grid.times.begin());
}

inline void require_grid_covers(const SurvivalDataset& data, const TimeGrid& grid) {
  for (const Subject& s : data.subjects) grid_index_of(grid, s.time);
}

// Risk-set aggregation against a (possibly wider) grid: for every grid entry
// t_i, the count and covariate sum over local subjects with y >= t_i.
// Single descending sweep; tied grid entries get identical snapshots.
inline void risk_scan(const SurvivalDataset& data, const TimeGrid& grid,
                      std::vector<long>& counts, std::vector<Vec>& xsums) {
  const int p = data.p;
  const size_t m = grid.size();
  counts.assign(m, 0);
  xsums.assign(m, Vec(p, 0.0));
  std::vector<int> order = canonical_order(data);
  long cnt = 0;
  Vec sum(p, 0.0);
  auto next = order.rbegin();  // largest local time first
  for (size_t ii = m; ii-- > 0;) {
    const double t = grid.times[ii];
    while (next != order.rend() && data.subjects[*next].time >= t) {
      const Subject& s = data.subjects[*next];
      ++cnt;
      for (int j = 0; j < p; ++j) sum[j] += s.covariates[j];
      ++next;
    }
    counts[ii] = cnt;
    xsums[ii] = sum;
  }
}

// Centered sums against a given grid and per-entry risk-set means xbar:
//   a     = sum_i dy_(i) sum_{l: y_l >= t_i} {x_l - xbar_i}^{x2}
//   d     = sum_l delta_l {x_l - xbar(y_l)}
//   sigma = sum_l delta_l {x_l - xbar(y_l)}^{x2}
// The inner risk-set sum expands around the running local moments
// (count, m1, M2) so the sweep is O((|grid| + n) p^2).
inline Accumulators centered_accumulate(const SurvivalDataset& data, const TimeGrid& grid,
                                        const std::vector<Vec>& xbars) {
  const int p = data.p;
  Accumulators acc;
  acc.a_mat = Mat(p);
  acc.sigma_mat = Mat(p);
  acc.d_vec.assign(p, 0.0);
  acc.n = static_cast<long>(data.n());

  std::vector<int> order = canonical_order(data);
  long cnt = 0;
  Vec m1(p, 0.0);
  Mat m2(p);
  auto next = order.rbegin();
  for (size_t ii = grid.size(); ii-- > 0;) {
    const double t = grid.times[ii];
    while (next != order.rend() && data.subjects[*next].time >= t) {
      const Vec& x = data.subjects[*next].covariates;
      ++cnt;
      for (int j = 0; j < p; ++j) m1[j] += x[j];
      add_outer(m2, x);
      ++next;
    }
    const double dy = grid.deltas[ii];
    if (dy == 0.0 || cnt == 0) continue;
    const Vec& xb = xbars[ii];
    for (int r = 0; r < p; ++r)
      for (int c = 0; c < p; ++c)
        acc.a_mat(r, c) +=
            dy * (m2(r, c) - m1[r] * xb[c] - xb[r] * m1[c] + cnt * xb[r] * xb[c]);
  }

  Vec diff(p);
  for (int i : order) {
    const Subject& s = data.subjects[i];
    if (s.status == 0) continue;
    const Vec& xb = xbars[grid_index_of(grid, s.time)];
    for (int j = 0; j < p; ++j) diff[j] = s.covariates[j] - xb[j];
    for (int j = 0; j < p; ++j) acc.d_vec[j] += diff[j];
    add_outer(acc.sigma_mat, diff);
  }
  return acc;
}

inline FitResult fit_from_sums(const Mat& a, const Vec& d, const Mat& sigma, long n, Method m) {
  FitResult fit;
  fit.beta = solve_spd(a, d);
  fit.cov = symmetrized(solve_spd(a, solve_spd(a, sigma)));
  fit.n = n;
  fit.method = m;
  return fit;
}

}  // namespace detail

// Raw estimating-equation components over the dataset's own time grid, with
// risk-set means evaluated on that grid. D and sigma look xbar up by the
// subject's own observed time value, so tied times share one risk set.
inline Accumulators compute_components(const SurvivalDataset& data) {
  validate_dataset(data);
  TimeGrid grid;
  {
    std::vector<double> times;
    times.reserve(data.n());
    for (const Subject& s : data.subjects) times.push_back(s.time);
    grid = build_time_grid(std::move(times));
  }
  std::vector<long> counts;
  std::vector<Vec> xsums;
  detail::risk_scan(data, grid, counts, xsums);
  std::vector<Vec> xbars(grid.size(), Vec(data.p, 0.0));
  for (size_t i = 0; i < grid.size(); ++i)
    for (int j = 0; j < data.p; ++j) xbars[i][j] = xsums[i][j] / counts[i];
  return detail::centered_accumulate(data, grid, xbars);
}

// Closed-form additive-hazards fit on one dataset: beta = A^{-1} D with
// sandwich covariance A^{-1} Sigma A^{-1} over the raw sums.
inline FitResult fit_local(const SurvivalDataset& data) {
  Accumulators acc = compute_components(data);
  return detail::fit_from_sums(acc.a_mat, acc.d_vec, acc.sigma_mat, acc.n, Method::local);
}

}  // namespace fedrd
