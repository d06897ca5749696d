#pragma once

#include <vector>

#include "fedrd/linalg.hpp"
#include "fedrd/survival_data.hpp"

namespace fedrd {

struct ConcordanceResult {
  double c_index = 0.0;
  long comparable_pairs = 0;
  double concordant = 0.0;  // tied scores count 0.5
};

// Linear risk score beta'x; a higher score means a higher hazard.
inline double risk_score(const Vec& beta, const Vec& x) {
  if (beta.size() != x.size()) throw Error("risk_score: dimension mismatch");
  double s = 0.0;
  for (size_t j = 0; j < beta.size(); ++j) s += beta[j] * x[j];
  return s;
}

// Harrell's concordance over ordered pairs (i, j) with y_i < y_j and
// delta_i = 1. Tied scores credit 0.5; tied times are not comparable.
inline ConcordanceResult c_index(const SurvivalDataset& data, const Vec& beta) {
  validate_dataset(data);
  if (static_cast<int>(beta.size()) != data.p) throw Error("c_index: dimension mismatch");
  std::vector<double> score(data.n());
  for (size_t i = 0; i < data.n(); ++i) score[i] = risk_score(beta, data.subjects[i].covariates);
  ConcordanceResult out;
  for (size_t i = 0; i < data.n(); ++i) {
    if (data.subjects[i].status != 1) continue;
    for (size_t j = 0; j < data.n(); ++j) {
      if (data.subjects[i].time >= data.subjects[j].time) continue;
      ++out.comparable_pairs;
      if (score[i] > score[j])
        out.concordant += 1.0;
      else if (score[i] == score[j])
        out.concordant += 0.5;
    }
  }
  if (out.comparable_pairs == 0)
    throw NoComparablePairs("c_index: no comparable pairs in dataset");
  out.c_index = out.concordant / out.comparable_pairs;
  return out;
}

}  // namespace fedrd
