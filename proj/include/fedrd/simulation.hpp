#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fedrd/baselines.hpp"
#include "fedrd/federation.hpp"
#include "fedrd/inference.hpp"
#include "fedrd/rng.hpp"

namespace fedrd {

struct ScenarioConfig {
  int scenario = 1;
  std::vector<long> site_sizes;
  Vec beta0 = {1.0, 0.5, 0.5};
  int reps = 500;
  uint64_t seed = 0;
  double level = 0.95;
};

// Closed-form cumulative baseline hazards. Scenario 1 is common across
// sites; scenario 2 cycles through five site-specific forms.
inline double cumulative_baseline(int scenario, int site_index, double t) {
  if (t < 0.0) throw Error("cumulative_baseline: negative time");
  if (scenario == 1) return t * t;
  if (scenario != 2) throw Error("cumulative_baseline: scenario must be 1 or 2");
  switch ((site_index - 1) % 5 + 1) {
    case 1: return t * t;
    case 2: return t * t * t;
    case 3: return t * t * t * t;
    case 4: return std::log1p(t) + t * t * t;
    default: return std::log1p(t) + t * t * t * t;
  }
}

// Solve Lam0(T) + b T = E for T: double the upper bracket from 1 until the
// cumulative hazard exceeds E, then bisect to 1e-12 absolute width.
inline double invert_event_time(const std::function<double(double)>& lam_cum, double linear_rate,
                                double target) {
  if (!(target > 0.0)) throw Error("invert_event_time: target must be positive");
  double hi = 1.0;
  int doublings = 0;
  auto total = [&](double t) {
    double h = lam_cum(t) + linear_rate * t;
    if (!std::isfinite(h)) throw NonFiniteHazard("cumulative hazard is not finite");
    return h;
  };
  while (total(hi) < target) {
    hi *= 2.0;
    if (++doublings > 200)
      throw NonFiniteHazard("no bracket for event time after 200 doublings");
  }
  double lo = 0.0;
  while (hi - lo > 1e-12) {
    double mid = 0.5 * (lo + hi);
    if (total(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Draw one site's data. Covariates are Uniform(0,1) except the third, which
// is Bernoulli(0.5); per-subject draw slots are (x_1..x_p, E, C) so the
// stream layout is fixed regardless of evaluation order.
inline SurvivalDataset gen_site(long n, int scenario, int site_index, const Vec& beta0,
                                uint64_t master_seed, uint64_t rep) {
  if (n < 1) throw Error("gen_site: n must be >= 1");
  const int p = static_cast<int>(beta0.size());
  if (p < 1) throw Error("gen_site: empty beta0");
  auto lam = [&](double t) { return cumulative_baseline(scenario, site_index, t); };
  SurvivalDataset data;
  data.p = p;
  data.site_id = std::to_string(site_index);
  data.subjects.reserve(n);
  const uint64_t site = static_cast<uint64_t>(site_index);
  for (long i = 0; i < n; ++i) {
    Subject s;
    s.covariates.resize(p);
    double b = 0.0;
    for (int j = 0; j < p; ++j) {
      double u = rng::uniform(master_seed, rep, site, i, j);
      s.covariates[j] = (j == 2) ? (u < 0.5 ? 1.0 : 0.0) : u;
      b += beta0[j] * s.covariates[j];
    }
    if (b < 0.0)
      throw NegativeHazard("gen_site: beta0'x < 0 would give a negative hazard");
    const double ue = rng::uniform(master_seed, rep, site, i, p);
    const double expdraw = -std::log1p(-ue);
    const double uc = rng::uniform(master_seed, rep, site, i, p + 1);
    const double censor = 0.02 + 1.26 * uc;
    const double event = invert_event_time(lam, b, expdraw);
    s.time = std::min(event, censor);
    s.status = event <= censor ? 1 : 0;
    data.subjects.push_back(std::move(s));
  }
  return data;
}

struct CoefStats {
  double bias = 0.0;
  double sd = std::numeric_limits<double>::quiet_NaN();
  double se = 0.0;
  double cp = 0.0;
  double mse = 0.0;
};

// Per-coefficient bias / SD / mean SE / coverage / MSE over replications.
// SD uses the n-1 denominator and is NaN for a single estimate.
inline std::vector<CoefStats> summarize(const std::vector<FitResult>& estimates, const Vec& truths,
                                        double level) {
  if (estimates.empty()) throw Error("summarize: no estimates");
  const int p = static_cast<int>(truths.size());
  const double m = static_cast<double>(estimates.size());
  std::vector<CoefStats> out(p);
  const double zcrit = normal_quantile(0.5 * (1.0 + level));
  for (int j = 0; j < p; ++j) {
    double mean = 0.0, sse = 0.0, mse = 0.0, cover = 0.0;
    for (const FitResult& f : estimates) mean += f.beta[j];
    mean /= m;
    for (const FitResult& f : estimates) {
      const double dev = f.beta[j] - mean;
      const double err = f.beta[j] - truths[j];
      sse += dev * dev;
      mse += err * err;
      const double se = std::sqrt(f.cov(j, j));
      out[j].se += se;
      if (std::fabs(err) <= zcrit * se) cover += 1.0;
    }
    out[j].bias = mean - truths[j];
    out[j].sd = estimates.size() > 1 ? std::sqrt(sse / (m - 1.0))
                                     : std::numeric_limits<double>::quiet_NaN();
    out[j].se /= m;
    out[j].cp = cover / m;
    out[j].mse = mse / m;
  }
  return out;
}

struct McRow {
  std::string method;
  int coef = 0;  // 1-based
  CoefStats stats;
  int failures = 0;
  double seconds = 0.0;  // mean wall-clock per replication for this method
};

struct EstimateRecord {
  std::string method;
  int rep = 0;
  Vec beta;
  Vec se;
};

struct MonteCarloReport {
  int reps = 0;
  double level = 0.95;
  Vec beta0;
  std::vector<McRow> rows;
  std::vector<EstimateRecord> estimates;  // per-replication log for plotting
};

// Run the full Monte Carlo study: one shared draw of K site datasets per
// replication, every requested method fit on the same data. Singular fits
// count as per-method failures and are excluded when rare (< 1% of reps);
// beyond that the study aborts.
inline MonteCarloReport run_monte_carlo(const ScenarioConfig& cfg,
                                        const std::set<std::string>& methods) {
  if (cfg.reps < 1) throw Error("run_monte_carlo: reps must be >= 1");
  if (cfg.site_sizes.empty()) throw Error("run_monte_carlo: no site sizes");
  const size_t num_sites = cfg.site_sizes.size();

  std::vector<std::string> labels;
  for (const char* m : {"pooled", "fedrd_u", "fedrd_s", "meta"})
    if (methods.count(m)) labels.push_back(m);
  const bool want_local = methods.count("local") > 0;
  const bool need_locals = want_local || methods.count("meta");
  if (want_local)
    for (size_t k = 1; k <= num_sites; ++k) labels.push_back("local" + std::to_string(k));
  for (const std::string& m : methods)
    if (m != "pooled" && m != "fedrd_u" && m != "fedrd_s" && m != "meta" && m != "local")
      throw Error("run_monte_carlo: unknown method " + m);
  if (labels.empty()) throw Error("run_monte_carlo: no methods requested");

  std::map<std::string, std::vector<FitResult>> fits;
  std::map<std::string, std::vector<int>> fit_reps;
  std::map<std::string, int> failures;
  std::map<std::string, double> seconds;
  for (const std::string& l : labels) {
    fits[l] = {};
    fit_reps[l] = {};
    failures[l] = 0;
    seconds[l] = 0.0;
  }

  MonteCarloReport report;
  report.reps = cfg.reps;
  report.level = cfg.level;
  report.beta0 = cfg.beta0;

  using clock = std::chrono::steady_clock;
  auto timed = [&](const std::string& label, int rep, auto&& fn) {
    auto t0 = clock::now();
    try {
      FitResult fit = fn();
      seconds[label] += std::chrono::duration<double>(clock::now() - t0).count();
      fits[label].push_back(fit);
      fit_reps[label].push_back(rep);
      return true;
    } catch (const SingularInformation&) {
      seconds[label] += std::chrono::duration<double>(clock::now() - t0).count();
      ++failures[label];
      return false;
    }
  };

  for (int r = 0; r < cfg.reps; ++r) {
    std::vector<SurvivalDataset> sites;
    sites.reserve(num_sites);
    for (size_t k = 0; k < num_sites; ++k)
      sites.push_back(gen_site(cfg.site_sizes[k], cfg.scenario, static_cast<int>(k + 1),
                               cfg.beta0, cfg.seed, static_cast<uint64_t>(r)));

    if (methods.count("pooled")) timed("pooled", r, [&] { return fit_pooled(sites); });
    if (methods.count("fedrd_u")) timed("fedrd_u", r, [&] { return fit_fedrd_u(sites); });
    if (methods.count("fedrd_s")) timed("fedrd_s", r, [&] { return fit_fedrd_s(sites); });

    if (need_locals) {
      std::vector<FitResult> locals;
      bool all_ok = true;
      for (size_t k = 0; k < num_sites; ++k) {
        const std::string label = "local" + std::to_string(k + 1);
        auto t0 = clock::now();
        try {
          FitResult f = fit_local(sites[k]);
          double dt = std::chrono::duration<double>(clock::now() - t0).count();
          if (want_local) {
            seconds[label] += dt;
            fits[label].push_back(f);
            fit_reps[label].push_back(r);
          }
          locals.push_back(f);
        } catch (const SingularInformation&) {
          if (want_local) {
            seconds[label] += std::chrono::duration<double>(clock::now() - t0).count();
            ++failures[label];
          }
          all_ok = false;
        }
      }
      if (methods.count("meta")) {
        if (all_ok)
          timed("meta", r, [&] { return fit_meta(locals); });
        else
          ++failures["meta"];
      }
    }
  }

  for (const std::string& label : labels) {
    if (failures[label] * 100 >= cfg.reps)
      throw Error("run_monte_carlo: method " + label + " failed in " +
                  std::to_string(failures[label]) + "/" + std::to_string(cfg.reps) +
                  " replications (>= 1%)");
    const std::vector<FitResult>& f = fits[label];
    if (f.empty()) throw Error("run_monte_carlo: no successful fits for " + label);
    std::vector<CoefStats> stats = summarize(f, cfg.beta0, cfg.level);
    const double mean_sec = seconds[label] / cfg.reps;
    for (size_t j = 0; j < stats.size(); ++j) {
      McRow row;
      row.method = label;
      row.coef = static_cast<int>(j + 1);
      row.stats = stats[j];
      row.failures = failures[label];
      row.seconds = mean_sec;
      report.rows.push_back(row);
    }
    for (size_t r = 0; r < f.size(); ++r) {
      EstimateRecord rec;
      rec.method = label;
      rec.rep = fit_reps[label][r];
      rec.beta = f[r].beta;
      rec.se.resize(f[r].beta.size());
      for (size_t j = 0; j < rec.se.size(); ++j)
        rec.se[j] = std::sqrt(f[r].cov(static_cast<int>(j), static_cast<int>(j)));
      report.estimates.push_back(std::move(rec));
    }
  }
  return report;
}

namespace detail {

inline std::string format_stat(double v) {
  if (std::isnan(v)) return "na";
  return format_double(v);
}

}  // namespace detail

inline std::string report_to_csv(const MonteCarloReport& report) {
  std::ostringstream out;
  out << "method,coef,bias,sd,se,cp,mse,failures,seconds\n";
  for (const McRow& r : report.rows) {
    out << r.method << ',' << r.coef << ',' << detail::format_stat(r.stats.bias) << ','
        << detail::format_stat(r.stats.sd) << ',' << detail::format_stat(r.stats.se) << ','
        << detail::format_stat(r.stats.cp) << ',' << detail::format_stat(r.stats.mse) << ','
        << r.failures << ',' << detail::format_double(r.seconds) << "\n";
  }
  return out.str();
}

inline std::string estimates_to_csv(const MonteCarloReport& report) {
  std::ostringstream out;
  out << "method,rep,coef,estimate,se\n";
  for (const EstimateRecord& rec : report.estimates)
    for (size_t j = 0; j < rec.beta.size(); ++j)
      out << rec.method << ',' << rec.rep << ',' << (j + 1) << ','
          << detail::format_double(rec.beta[j]) << ',' << detail::format_double(rec.se[j])
          << "\n";
  return out.str();
}

// Plain-text table grouped by method, one row per coefficient.
inline std::string report_to_table(const MonteCarloReport& report) {
  std::ostringstream out;
  char buf[192];
  std::snprintf(buf, sizeof(buf), "%-10s %-6s %9s %9s %9s %7s %9s %9s %9s\n", "method", "para",
                "bias", "sd", "se", "cp", "mse", "failures", "sec/rep");
  out << buf;
  std::string prev;
  for (const McRow& r : report.rows) {
    const bool first = r.method != prev;
    prev = r.method;
    char sd[32];
    if (std::isnan(r.stats.sd))
      std::snprintf(sd, sizeof(sd), "%9s", "na");
    else
      std::snprintf(sd, sizeof(sd), "%9.3f", r.stats.sd);
    char tail[64] = "";
    if (first)
      std::snprintf(tail, sizeof(tail), "%9d %9.5f", r.failures, r.seconds);
    std::snprintf(buf, sizeof(buf), "%-10s beta%-2d %9.3f %s %9.3f %7.3f %9.3f %s\n",
                  first ? r.method.c_str() : "", r.coef, r.stats.bias, sd, r.stats.se, r.stats.cp,
                  r.stats.mse, tail);
    out << buf;
  }
  return out.str();
}

}  // namespace fedrd
