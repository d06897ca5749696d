#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "fedrd/estimator.hpp"

namespace fedrd {

// Standard normal CDF via erfc (accurate over the full double range).
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Standard normal quantile: Acklam's rational approximation refined with one
// Halley step against normal_cdf. Absolute error well below 1e-8 on
// [1e-10, 1 - 1e-10].
inline double normal_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) throw Error("normal_quantile: argument must be in (0,1)");
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (q < plow) {
    double u = std::sqrt(-2.0 * std::log(q));
    x = (((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
        ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  } else if (q <= 1.0 - plow) {
    double u = q - 0.5;
    double r = u * u;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * u /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    double u = std::sqrt(-2.0 * std::log(1.0 - q));
    x = -(((((c[0] * u + c[1]) * u + c[2]) * u + c[3]) * u + c[4]) * u + c[5]) /
        ((((d[0] * u + d[1]) * u + d[2]) * u + d[3]) * u + 1.0);
  }
  // One Halley refinement.
  double e = normal_cdf(x) - q;
  double g = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);  // pdf
  if (g > 0.0) {
    double u = e / g;
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

struct WaldRow {
  double estimate = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double z = 0.0;
  double p_two_sided = 1.0;
};

struct WaldSummary {
  std::vector<WaldRow> rows;
  double level = 0.95;
};

// Normal-theory Wald intervals and two-sided p-values per coefficient.
// A zero standard error with a nonzero estimate reports infinite z.
inline WaldSummary wald(const FitResult& fit, double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error("wald: level must be in (0,1)");
  const double zcrit = normal_quantile(0.5 * (1.0 + level));
  WaldSummary out;
  out.level = level;
  out.rows.resize(fit.beta.size());
  for (size_t j = 0; j < fit.beta.size(); ++j) {
    WaldRow& r = out.rows[j];
    r.estimate = fit.beta[j];
    const double v = fit.cov(static_cast<int>(j), static_cast<int>(j));
    if (v < 0.0) throw Error("wald: negative variance");
    r.se = std::sqrt(v);
    r.ci_low = r.estimate - zcrit * r.se;
    r.ci_high = r.estimate + zcrit * r.se;
    if (r.se > 0.0) {
      r.z = r.estimate / r.se;
      r.p_two_sided = 2.0 * (1.0 - normal_cdf(std::fabs(r.z)));
    } else if (r.estimate == 0.0) {
      r.z = 0.0;
      r.p_two_sided = 1.0;
    } else {
      r.z = std::copysign(std::numeric_limits<double>::infinity(), r.estimate);
      r.p_two_sided = 0.0;
    }
  }
  return out;
}

}  // namespace fedrd
