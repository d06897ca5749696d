#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "fedrd/estimator.hpp"

namespace fedrd {

// Round-1 payload: ordered observed times with individual labels dropped.
struct SortedTimes {
  std::string site_id;
  std::vector<double> times;
};

// Round-2 payload: per global grid entry, the local at-risk count and the
// covariate sum over local subjects still at risk. Never carries rows.
struct RiskAggregate {
  std::string site_id;
  std::vector<long> counts;
  std::vector<Vec> xsums;
};

// Round-3 payload: this site's share of the raw A / D / Sigma sums, centered
// with the coordinator's global risk-set means.
struct SiteContributionU {
  std::string site_id;
  Mat a_part;
  Vec d_part;
  Mat sigma_part;
  long n_k = 0;
};

// One-round stratified payload: the site's raw local components (local grid,
// local risk-set means).
struct SiteSummaryS {
  std::string site_id;
  Mat a_k;
  Vec d_k;
  Mat sigma_k;
  long n_k = 0;
};

// Broadcast after round 2: the global grid together with the global risk-set
// mean at every grid entry.
struct XbarSeries {
  TimeGrid grid;
  std::vector<Vec> xbars;
};

inline SortedTimes site_round1_u(const SurvivalDataset& data) {
  validate_dataset(data);
  SortedTimes out;
  out.site_id = data.site_id;
  out.times.reserve(data.n());
  for (const Subject& s : data.subjects) out.times.push_back(s.time);
  std::sort(out.times.begin(), out.times.end());
  return out;
}

inline TimeGrid coordinator_merge_times(const std::vector<SortedTimes>& all) {
  std::vector<double> merged;
  for (const SortedTimes& st : all) merged.insert(merged.end(), st.times.begin(), st.times.end());
  if (merged.empty()) throw Error("coordinator_merge_times: no observed times");
  return build_time_grid(std::move(merged));
}

inline RiskAggregate site_round2_u(const SurvivalDataset& data, const TimeGrid& grid) {
  validate_dataset(data);
  detail::require_grid_covers(data, grid);
  RiskAggregate agg;
  agg.site_id = data.site_id;
  detail::risk_scan(data, grid, agg.counts, agg.xsums);
  return agg;
}

inline XbarSeries coordinator_xbar(std::vector<RiskAggregate> aggs, const TimeGrid& grid) {
  if (aggs.empty()) throw Error("coordinator_xbar: no aggregates");
  const size_t m = grid.size();
  for (const RiskAggregate& a : aggs)
    if (a.counts.size() != m || a.xsums.size() != m)
      throw Error("coordinator_xbar: aggregate length does not match grid");
  // Deterministic aggregation order regardless of arrival order.
  std::sort(aggs.begin(), aggs.end(),
            [](const RiskAggregate& a, const RiskAggregate& b) { return a.site_id < b.site_id; });
  const int p = static_cast<int>(aggs.front().xsums.empty() ? 0 : aggs.front().xsums[0].size());
  XbarSeries xb;
  xb.grid = grid;
  xb.xbars.assign(m, Vec(p, 0.0));
  for (size_t i = 0; i < m; ++i) {
    long total = 0;
    Vec sum(p, 0.0);
    for (const RiskAggregate& a : aggs) {
      total += a.counts[i];
      for (int j = 0; j < p; ++j) sum[j] += a.xsums[i][j];
    }
    if (total == 0)
      throw ZeroRiskSet("empty global risk set at grid time " + std::to_string(grid.times[i]));
    for (int j = 0; j < p; ++j) xb.xbars[i][j] = sum[j] / total;
  }
  return xb;
}

inline SiteContributionU site_round3_u(const SurvivalDataset& data, const XbarSeries& xbar) {
  validate_dataset(data);
  detail::require_grid_covers(data, xbar.grid);
  Accumulators acc = detail::centered_accumulate(data, xbar.grid, xbar.xbars);
  SiteContributionU out;
  out.site_id = data.site_id;
  out.a_part = std::move(acc.a_mat);
  out.d_part = std::move(acc.d_vec);
  out.sigma_part = std::move(acc.sigma_mat);
  out.n_k = acc.n;
  return out;
}

inline FitResult coordinator_assemble_u(std::vector<SiteContributionU> contribs) {
  if (contribs.empty()) throw Error("coordinator_assemble_u: no contributions");
  std::sort(contribs.begin(), contribs.end(),
            [](const SiteContributionU& a, const SiteContributionU& b) {
              return a.site_id < b.site_id;
            });
  const int p = contribs.front().a_part.dim();
  Mat a(p), sigma(p);
  Vec d(p, 0.0);
  long n = 0;
  for (const SiteContributionU& c : contribs) {
    if (c.a_part.dim() != p) throw Error("coordinator_assemble_u: dimension mismatch");
    a += c.a_part;
    sigma += c.sigma_part;
    for (int j = 0; j < p; ++j) d[j] += c.d_part[j];
    n += c.n_k;
  }
  return detail::fit_from_sums(a, d, sigma, n, Method::fedrd_u);
}

// The per-site stratified summary is exactly the local components: local
// grid, local risk-set means, raw sums. A singleton site contributes zeros.
inline SiteSummaryS site_summary_s(const SurvivalDataset& data) {
  Accumulators acc = compute_components(data);
  SiteSummaryS out;
  out.site_id = data.site_id;
  out.a_k = std::move(acc.a_mat);
  out.d_k = std::move(acc.d_vec);
  out.sigma_k = std::move(acc.sigma_mat);
  out.n_k = acc.n;
  return out;
}

inline FitResult coordinator_assemble_s(std::vector<SiteSummaryS> summaries) {
  if (summaries.empty()) throw Error("coordinator_assemble_s: no summaries");
  std::sort(summaries.begin(), summaries.end(),
            [](const SiteSummaryS& a, const SiteSummaryS& b) { return a.site_id < b.site_id; });
  const int p = summaries.front().a_k.dim();
  Mat a(p), sigma(p);
  Vec d(p, 0.0);
  long n = 0;
  for (const SiteSummaryS& s : summaries) {
    if (s.a_k.dim() != p) throw Error("coordinator_assemble_s: dimension mismatch");
    a += s.a_k;
    sigma += s.sigma_k;
    for (int j = 0; j < p; ++j) d[j] += s.d_k[j];
    n += s.n_k;
  }
  return detail::fit_from_sums(a, d, sigma, n, Method::fedrd_s);
}

namespace detail {

inline std::vector<SurvivalDataset> with_default_site_ids(std::vector<SurvivalDataset> sites) {
  for (size_t k = 0; k < sites.size(); ++k)
    if (sites[k].site_id.empty()) sites[k].site_id = std::to_string(k + 1);
  return sites;
}

}  // namespace detail

// In-process execution of the three-round protocol over a list of sites.
inline FitResult fit_fedrd_u(std::vector<SurvivalDataset> sites) {
  sites = detail::with_default_site_ids(std::move(sites));
  std::vector<SortedTimes> times;
  times.reserve(sites.size());
  for (const SurvivalDataset& s : sites) times.push_back(site_round1_u(s));
  TimeGrid grid = coordinator_merge_times(times);
  std::vector<RiskAggregate> aggs;
  aggs.reserve(sites.size());
  for (const SurvivalDataset& s : sites) aggs.push_back(site_round2_u(s, grid));
  XbarSeries xb = coordinator_xbar(std::move(aggs), grid);
  std::vector<SiteContributionU> contribs;
  contribs.reserve(sites.size());
  for (const SurvivalDataset& s : sites) contribs.push_back(site_round3_u(s, xb));
  return coordinator_assemble_u(std::move(contribs));
}

// In-process execution of the one-round stratified protocol.
inline FitResult fit_fedrd_s(std::vector<SurvivalDataset> sites) {
  sites = detail::with_default_site_ids(std::move(sites));
  std::vector<SiteSummaryS> summaries;
  summaries.reserve(sites.size());
  for (const SurvivalDataset& s : sites) summaries.push_back(site_summary_s(s));
  return coordinator_assemble_s(std::move(summaries));
}

}  // namespace fedrd
