#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>
#include <random>
#include <thread>

#include "fedrd/baselines.hpp"
#include "fedrd/transport.hpp"
#include "oracle.hpp"

using namespace fedrd;

namespace {

std::filesystem::path fresh_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("fedrd_transport_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

struct E2eResult {
  CoordinatorResult coord;
  int message_files = 0;
};

E2eResult run_file_carrier(const std::vector<SurvivalDataset>& sites, Method method,
                           const std::string& study, const std::filesystem::path& dir) {
  std::vector<std::thread> threads;
  for (const SurvivalDataset& site : sites)
    threads.emplace_back([&, site] {
      FileSiteChannel chan(dir, study, std::chrono::seconds(30));
      run_site(chan, site, method, study);
    });
  FileCoordinatorChannel chan(dir, study, std::chrono::seconds(30));
  CoordinatorResult result = run_coordinator(chan, method, static_cast<int>(sites.size()), study);
  for (auto& t : threads) t.join();
  int files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir / study))
    if (entry.path().extension() == ".msg") ++files;
  return {std::move(result), files};
}

CoordinatorResult run_tcp_carrier(const std::vector<SurvivalDataset>& sites, Method method,
                                  const std::string& study) {
  TcpCoordinatorChannel coord_chan("127.0.0.1", 0, std::chrono::seconds(30));
  const uint16_t port = coord_chan.port();
  std::vector<std::thread> threads;
  for (const SurvivalDataset& site : sites)
    threads.emplace_back([&, site] {
      TcpSiteChannel chan("127.0.0.1", port, std::chrono::seconds(30));
      run_site(chan, site, method, study);
    });
  CoordinatorResult result =
      run_coordinator(coord_chan, method, static_cast<int>(sites.size()), study);
  for (auto& t : threads) t.join();
  return result;
}

}  // namespace

TEST_CASE("file carrier runs both protocols end to end") {
  std::mt19937_64 gen(404);
  SurvivalDataset data = oracle::random_dataset(gen, 60, 2, 0.3);
  auto sites = oracle::random_partition(gen, data, 3);
  FitResult pooled = fit_pooled({data});
  FitResult in_process_u = fit_fedrd_u(sites);
  FitResult in_process_s = fit_fedrd_s(sites);

  SECTION("unstratified: equals the in-process protocol and the pooled fit") {
    auto dir = fresh_dir("u");
    E2eResult r = run_file_carrier(sites, Method::fedrd_u, "study-u", dir);
    CHECK(r.coord.fit.beta == in_process_u.beta);
    CHECK(r.coord.fit.cov.data() == in_process_u.cov.data());
    CHECK(oracle::vec_close(r.coord.fit.beta, pooled.beta, 1e-10));
    CHECK(oracle::mat_close(r.coord.fit.cov, pooled.cov, 1e-10));
    CHECK(r.coord.messages_received == 9);  // 3K
    CHECK(r.coord.broadcasts_sent == 2);
    CHECK(r.message_files == 11);  // 3K + 2
    std::filesystem::remove_all(dir);
  }

  SECTION("stratified: one message per site") {
    auto dir = fresh_dir("s");
    E2eResult r = run_file_carrier(sites, Method::fedrd_s, "study-s", dir);
    CHECK(r.coord.fit.beta == in_process_s.beta);
    CHECK(r.coord.fit.cov.data() == in_process_s.cov.data());
    CHECK(r.coord.messages_received == 3);  // K
    CHECK(r.coord.broadcasts_sent == 0);
    CHECK(r.message_files == 3);
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("tcp carrier matches the file carrier byte for byte") {
  std::mt19937_64 gen(405);
  SurvivalDataset data = oracle::random_dataset(gen, 50, 2, 0.25);
  auto sites = oracle::random_partition(gen, data, 4);

  auto dir = fresh_dir("cmp");
  E2eResult file_u = run_file_carrier(sites, Method::fedrd_u, "study-cmp", dir);
  CoordinatorResult tcp_u = run_tcp_carrier(sites, Method::fedrd_u, "study-cmp");
  CHECK(file_u.coord.fit_message == tcp_u.fit_message);
  CHECK(tcp_u.messages_received == 12);
  CHECK(tcp_u.broadcasts_sent == 2);

  CoordinatorResult tcp_s = run_tcp_carrier(sites, Method::fedrd_s, "study-cmp2");
  FitResult in_process_s = fit_fedrd_s(sites);
  CHECK(tcp_s.fit.beta == in_process_s.beta);
  std::filesystem::remove_all(dir);
}

TEST_CASE("coordinator times out when a site is missing") {
  std::mt19937_64 gen(406);
  SurvivalDataset data = oracle::random_dataset(gen, 30, 1, 0.2);
  auto sites = oracle::random_partition(gen, data, 2);

  auto dir = fresh_dir("timeout");
  // only one of two expected sites reports
  FileSiteChannel site_chan(dir, "study-t", std::chrono::seconds(5));
  run_site(site_chan, sites[0], Method::fedrd_s, "study-t");
  FileCoordinatorChannel chan(dir, "study-t", std::chrono::milliseconds(300));
  CHECK_THROWS_AS(run_coordinator(chan, Method::fedrd_s, 2, "study-t"), TimeoutError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("duplicate site ids are rejected over tcp") {
  std::mt19937_64 gen(407);
  SurvivalDataset data = oracle::random_dataset(gen, 30, 1, 0.2);
  auto sites = oracle::random_partition(gen, data, 2);
  sites[1].site_id = sites[0].site_id;

  TcpCoordinatorChannel coord_chan("127.0.0.1", 0, std::chrono::seconds(10));
  const uint16_t port = coord_chan.port();
  std::vector<std::thread> threads;
  for (const SurvivalDataset& site : sites)
    threads.emplace_back([&, site] {
      try {
        TcpSiteChannel chan("127.0.0.1", port, std::chrono::seconds(10));
        run_site(chan, site, Method::fedrd_s, "study-dup");
      } catch (const TransportError&) {
      }
    });
  CHECK_THROWS_AS(run_coordinator(coord_chan, Method::fedrd_s, 2, "study-dup"), DuplicateSite);
  for (auto& t : threads) t.join();
}

TEST_CASE("coordinator requires at least one site") {
  auto dir = fresh_dir("k0");
  FileCoordinatorChannel chan(dir, "study-k0", std::chrono::milliseconds(100));
  CHECK_THROWS(run_coordinator(chan, Method::fedrd_s, 0, "study-k0"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("study id mismatch is a protocol error") {
  std::mt19937_64 gen(408);
  SurvivalDataset data = oracle::random_dataset(gen, 20, 1, 0.2);
  data.site_id = "a";
  auto dir = fresh_dir("study");
  FileSiteChannel site_chan(dir, "study-x", std::chrono::seconds(5));
  run_site(site_chan, data, Method::fedrd_s, "study-y");  // stamps the wrong study id
  FileCoordinatorChannel chan(dir, "study-x", std::chrono::seconds(5));
  CHECK_THROWS_AS(run_coordinator(chan, Method::fedrd_s, 1, "study-x"), ProtocolError);
  std::filesystem::remove_all(dir);
}
