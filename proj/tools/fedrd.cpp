// fedrd: additive-hazards risk-difference estimation, federated across
// sites via summary statistics. Subcommands: simulate, estimate,
// coordinate, serve-site.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedrd/baselines.hpp"
#include "fedrd/evaluation.hpp"
#include "fedrd/federation.hpp"
#include "fedrd/inference.hpp"
#include "fedrd/simulation.hpp"
#include "fedrd/transport.hpp"

namespace {

constexpr int kExitTimeout = 3;
constexpr int kExitProtocol = 4;
constexpr int kExitSingular = 5;

void print_wald_table(const fedrd::FitResult& fit, double level) {
  fedrd::WaldSummary w = fedrd::wald(fit, level);
  std::printf("method=%s n=%ld level=%g\n", fedrd::method_name(fit.method), fit.n, level);
  std::printf("%-6s %12s %12s %12s %12s %9s %10s\n", "coef", "estimate", "se", "ci_low",
              "ci_high", "z", "p");
  for (size_t j = 0; j < w.rows.size(); ++j) {
    const fedrd::WaldRow& r = w.rows[j];
    std::printf("beta%-2zu %12.6g %12.6g %12.6g %12.6g %9.4g %10.4g\n", j + 1, r.estimate, r.se,
                r.ci_low, r.ci_high, r.z, r.p_two_sided);
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw fedrd::Error("cannot write " + path);
  out << content;
  if (!out) throw fedrd::Error("write failed: " + path);
}

void write_fit_message(const std::string& path, const fedrd::FitResult& fit,
                       const std::string& study) {
  const int round = fit.method == fedrd::Method::fedrd_u ? 3 : 1;
  write_text_file(path, fedrd::encode_message({fedrd::MsgType::FIT, study, "coordinator", round},
                                              fit));
}

std::string default_site_id(const std::string& data_path) {
  std::string stem = std::filesystem::path(data_path).stem().string();
  std::string out;
  for (char c : stem)
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')
      out.push_back(c);
  return out.empty() ? "site" : out;
}

int cmd_simulate(int scenario, const std::vector<long>& sizes, const std::vector<double>& beta,
                 int reps, uint64_t seed, double level, const std::vector<std::string>& methods,
                 const std::string& out_dir, bool report_only) {
  fedrd::ScenarioConfig cfg;
  cfg.scenario = scenario;
  cfg.site_sizes = sizes;
  cfg.beta0 = beta;
  cfg.reps = reps;
  cfg.seed = seed;
  cfg.level = level;
  std::set<std::string> method_set(methods.begin(), methods.end());

  std::filesystem::create_directories(out_dir);
  if (!report_only) {
    for (int r = 0; r < reps; ++r) {
      std::filesystem::path rep_dir =
          std::filesystem::path(out_dir) / "data" / ("rep_" + std::to_string(r));
      std::filesystem::create_directories(rep_dir);
      for (size_t k = 0; k < sizes.size(); ++k) {
        fedrd::SurvivalDataset site = fedrd::gen_site(sizes[k], scenario, static_cast<int>(k + 1),
                                                      beta, seed, static_cast<uint64_t>(r));
        fedrd::save_dataset(site, (rep_dir / ("site_" + std::to_string(k + 1) + ".csv")).string());
      }
    }
  }

  fedrd::MonteCarloReport report = fedrd::run_monte_carlo(cfg, method_set);
  const std::string table = fedrd::report_to_table(report);
  write_text_file((std::filesystem::path(out_dir) / "report.csv").string(),
                  fedrd::report_to_csv(report));
  write_text_file((std::filesystem::path(out_dir) / "report.txt").string(), table);
  write_text_file((std::filesystem::path(out_dir) / "estimates.csv").string(),
                  fedrd::estimates_to_csv(report));
  std::fputs(table.c_str(), stdout);
  return 0;
}

int cmd_estimate(const std::string& method_name, const std::vector<std::string>& files,
                 double level, const std::string& fit_out, const std::string& study) {
  fedrd::Method method = fedrd::method_from_name(method_name);
  std::vector<fedrd::SurvivalDataset> datasets;
  for (size_t i = 0; i < files.size(); ++i) {
    fedrd::SurvivalDataset d = fedrd::load_dataset(files[i]);
    d.site_id = std::to_string(i + 1);
    datasets.push_back(std::move(d));
  }

  fedrd::FitResult fit;
  switch (method) {
    case fedrd::Method::local:
      if (datasets.size() != 1)
        throw fedrd::Error("method local takes exactly one --data file");
      fit = fedrd::fit_local(datasets.front());
      break;
    case fedrd::Method::pooled:
      fit = fedrd::fit_pooled(datasets);
      break;
    case fedrd::Method::meta: {
      std::vector<fedrd::FitResult> locals;
      for (const auto& d : datasets) locals.push_back(fedrd::fit_local(d));
      fit = fedrd::fit_meta(locals);
      break;
    }
    case fedrd::Method::fedrd_u:
      fit = fedrd::fit_fedrd_u(datasets);
      break;
    case fedrd::Method::fedrd_s:
      fit = fedrd::fit_fedrd_s(datasets);
      break;
  }
  print_wald_table(fit, level);
  if (!fit_out.empty()) write_fit_message(fit_out, fit, study);
  return 0;
}

int cmd_coordinate(const std::string& method_name, int expect, const std::string& carrier,
                   const std::string& dir, const std::string& listen, const std::string& study,
                   double level, double timeout_secs, const std::string& fit_out,
                   const std::string& stats_out) {
  fedrd::Method method = fedrd::method_from_name(method_name);
  auto timeout = std::chrono::milliseconds(static_cast<long>(timeout_secs * 1000));

  fedrd::CoordinatorResult result;
  if (carrier == "file") {
    if (dir.empty()) throw fedrd::Error("file carrier requires --dir");
    fedrd::FileCoordinatorChannel chan(dir, study, timeout);
    result = fedrd::run_coordinator(chan, method, expect, study);
  } else if (carrier == "tcp") {
    auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw fedrd::Error("--listen must be HOST:PORT");
    fedrd::TcpCoordinatorChannel chan(listen.substr(0, colon),
                                      static_cast<uint16_t>(std::stoi(listen.substr(colon + 1))),
                                      timeout);
    std::fprintf(stderr, "listening on port %u\n", chan.port());
    result = fedrd::run_coordinator(chan, method, expect, study);
  } else {
    throw fedrd::Error("unknown carrier: " + carrier);
  }

  print_wald_table(result.fit, level);
  if (!fit_out.empty()) write_text_file(fit_out, result.fit_message);
  if (!stats_out.empty())
    write_text_file(stats_out, "received=" + std::to_string(result.messages_received) +
                                   " broadcasts=" + std::to_string(result.broadcasts_sent) + "\n");
  return 0;
}

int cmd_serve_site(const std::string& method_name, const std::string& data_path,
                   const std::string& carrier, const std::string& dir, const std::string& connect,
                   const std::string& study, const std::string& site_id, double timeout_secs) {
  fedrd::Method method = fedrd::method_from_name(method_name);
  fedrd::SurvivalDataset data = fedrd::load_dataset(data_path);
  data.site_id = site_id.empty() ? default_site_id(data_path) : site_id;
  auto timeout = std::chrono::milliseconds(static_cast<long>(timeout_secs * 1000));

  if (carrier == "file") {
    if (dir.empty()) throw fedrd::Error("file carrier requires --dir");
    fedrd::FileSiteChannel chan(dir, study, timeout);
    fedrd::run_site(chan, data, method, study);
  } else if (carrier == "tcp") {
    auto colon = connect.rfind(':');
    if (colon == std::string::npos) throw fedrd::Error("--connect must be HOST:PORT");
    fedrd::TcpSiteChannel chan(connect.substr(0, colon),
                               static_cast<uint16_t>(std::stoi(connect.substr(colon + 1))),
                               timeout);
    fedrd::run_site(chan, data, method, study);
  } else {
    throw fedrd::Error("unknown carrier: " + carrier);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated risk-difference estimation for right-censored survival data"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a Monte Carlo study and write reports");
  int scenario = 1;
  std::vector<long> sizes{100, 100, 100, 100, 100};
  std::vector<double> beta{1.0, 0.5, 0.5};
  int reps = 500;
  uint64_t seed = 0;
  double sim_level = 0.95;
  std::vector<std::string> methods{"pooled", "fedrd_u", "fedrd_s", "meta", "local"};
  std::string out_dir;
  bool report_only = false;
  sim->add_option("--scenario", scenario, "1 = common baseline, 2 = site-specific baselines")
      ->check(CLI::Range(1, 2));
  sim->add_option("--sizes", sizes, "per-site sample sizes")->delimiter(',');
  sim->add_option("--beta", beta, "true coefficients")->delimiter(',');
  sim->add_option("--reps", reps, "replications")->check(CLI::PositiveNumber);
  sim->add_option("--seed", seed, "master seed");
  sim->add_option("--level", sim_level, "confidence level");
  sim->add_option("--methods", methods, "pooled,fedrd_u,fedrd_s,meta,local")->delimiter(',');
  sim->add_option("--out", out_dir, "output directory")->required();
  sim->add_flag("--report-only", report_only, "skip writing per-replication site CSVs");

  // estimate
  auto* est = app.add_subcommand("estimate", "fit one method on CSV data");
  std::string est_method = "local";
  std::vector<std::string> est_files;
  double est_level = 0.95;
  std::string est_fit_out, est_study = "cli";
  est->add_option("--method", est_method, "local|pooled|meta|fedrd_u|fedrd_s")->required();
  est->add_option("--data", est_files, "one CSV per site")->delimiter(',')->required();
  est->add_option("--level", est_level, "confidence level");
  est->add_option("--fit-out", est_fit_out, "write the FIT message here");
  est->add_option("--study", est_study, "study id stamped into the FIT message");

  // coordinate
  auto* coord = app.add_subcommand("coordinate", "run the coordinator role");
  std::string co_method = "fedrd_u", co_carrier = "file", co_dir, co_listen = "0.0.0.0:7400";
  std::string co_study = "study", co_fit_out, co_stats_out;
  int co_expect = 1;
  double co_level = 0.95;
  double co_timeout = std::chrono::duration<double>(fedrd::default_round_timeout()).count();
  coord->add_option("--method", co_method, "fedrd_u|fedrd_s")->required();
  coord->add_option("--expect", co_expect, "number of sites")->required()
      ->check(CLI::PositiveNumber);
  coord->add_option("--carrier", co_carrier, "file|tcp")->required();
  coord->add_option("--dir", co_dir, "shared directory (file carrier)");
  coord->add_option("--listen", co_listen, "HOST:PORT (tcp carrier)");
  coord->add_option("--study", co_study, "study id");
  coord->add_option("--level", co_level, "confidence level for the printed table");
  coord->add_option("--timeout", co_timeout, "per-round timeout in seconds");
  coord->add_option("--fit-out", co_fit_out, "write the FIT message here");
  coord->add_option("--stats-out", co_stats_out, "write message counters here");

  // serve-site
  auto* site = app.add_subcommand("serve-site", "run one site's role");
  std::string st_method = "fedrd_u", st_data, st_carrier = "file", st_dir;
  std::string st_connect = "127.0.0.1:7400", st_study = "study", st_site;
  double st_timeout = std::chrono::duration<double>(fedrd::default_round_timeout()).count();
  site->add_option("--method", st_method, "fedrd_u|fedrd_s")->required();
  site->add_option("--data", st_data, "site CSV")->required();
  site->add_option("--carrier", st_carrier, "file|tcp")->required();
  site->add_option("--dir", st_dir, "shared directory (file carrier)");
  site->add_option("--connect", st_connect, "HOST:PORT (tcp carrier)");
  site->add_option("--study", st_study, "study id");
  site->add_option("--site", st_site, "site id (default: data file stem)");
  site->add_option("--timeout", st_timeout, "per-round timeout in seconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (sim->parsed())
      return cmd_simulate(scenario, sizes, beta, reps, seed, sim_level, methods, out_dir,
                          report_only);
    if (est->parsed()) return cmd_estimate(est_method, est_files, est_level, est_fit_out, est_study);
    if (coord->parsed())
      return cmd_coordinate(co_method, co_expect, co_carrier, co_dir, co_listen, co_study,
                            co_level, co_timeout, co_fit_out, co_stats_out);
    if (site->parsed())
      return cmd_serve_site(st_method, st_data, st_carrier, st_dir, st_connect, st_study, st_site,
                            st_timeout);
  } catch (const fedrd::TimeoutError& e) {
    std::cerr << "timeout: " << e.what() << "\n";
    return kExitTimeout;
  } catch (const fedrd::SingularInformation& e) {
    std::cerr << "singular: " << e.what() << "\n";
    return kExitSingular;
  } catch (const fedrd::TransportError& e) {
    std::cerr << "protocol: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const fedrd::WireError& e) {
    std::cerr << "protocol: " << e.what() << "\n";
    return kExitProtocol;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
