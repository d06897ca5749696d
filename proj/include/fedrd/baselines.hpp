#pragma once

#include <vector>

#include "fedrd/estimator.hpp"

namespace fedrd {

// Oracle comparator: concatenate every site's rows and fit once.
inline FitResult fit_pooled(const std::vector<SurvivalDataset>& datasets) {
  if (datasets.empty()) throw Error("fit_pooled: no datasets");
  const int p = datasets.front().p;
  SurvivalDataset all;
  all.p = p;
  for (const SurvivalDataset& d : datasets) {
    if (d.p != p) throw Error("fit_pooled: covariate dimension mismatch across datasets");
    all.subjects.insert(all.subjects.end(), d.subjects.begin(), d.subjects.end());
  }
  FitResult fit = fit_local(all);
  fit.method = Method::pooled;
  return fit;
}

// Fixed-effect meta analysis: per-coefficient inverse-variance weighting of
// independently fitted local estimates. The combined covariance is diagonal.
inline FitResult fit_meta(const std::vector<FitResult>& fits) {
  if (fits.empty()) throw Error("fit_meta: no fits");
  const int p = static_cast<int>(fits.front().beta.size());
  FitResult out;
  out.beta.assign(p, 0.0);
  out.cov = Mat(p);
  out.method = Method::meta;
  for (int j = 0; j < p; ++j) {
    double wsum = 0.0, bsum = 0.0;
    for (const FitResult& f : fits) {
      if (static_cast<int>(f.beta.size()) != p) throw Error("fit_meta: dimension mismatch");
      const double v = f.cov(j, j);
      if (!(v > 0.0))
        throw NonPositiveVariance("fit_meta: non-positive variance for coefficient " +
                                  std::to_string(j + 1));
      wsum += 1.0 / v;
      bsum += f.beta[j] / v;
    }
    out.beta[j] = bsum / wsum;
    out.cov(j, j) = 1.0 / wsum;
  }
  for (const FitResult& f : fits) out.n += f.n;
  return out;
}

}  // namespace fedrd
