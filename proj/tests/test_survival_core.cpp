#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "fedrd/survival_data.hpp"
#include "oracle.hpp"

using namespace fedrd;

namespace {

std::filesystem::path write_temp(const std::string& content) {
  static int counter = 0;
  auto path = std::filesystem::temp_directory_path() /
              ("fedrd_core_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) +
               ".csv");
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("load_dataset parses rows in order") {
  auto path = write_temp("time,status,x1\n1.0,1,0.0\n2.0,1,1.0\n");
  SurvivalDataset d = load_dataset(path.string());
  REQUIRE(d.n() == 2);
  REQUIRE(d.p == 1);
  CHECK(d.subjects[0].time == 1.0);
  CHECK(d.subjects[0].status == 1);
  CHECK(d.subjects[1].covariates[0] == 1.0);
  std::filesystem::remove(path);
}

TEST_CASE("load_dataset rejects bad rows with row numbers") {
  auto neg = write_temp("time,status,x1\n-1.0,1,0.5\n");
  CHECK_THROWS_WITH(load_dataset(neg.string()), Catch::Matchers::ContainsSubstring("negative time at row 2"));
  std::filesystem::remove(neg);

  auto badstatus = write_temp("time,status,x1\n1.0,2,0.5\n");
  CHECK_THROWS_WITH(load_dataset(badstatus.string()),
                    Catch::Matchers::ContainsSubstring("status not in {0,1}"));
  std::filesystem::remove(badstatus);

  auto malformed = write_temp("time,status,x1\n1.0,1,0.5\nx,1,0.5\n");
  CHECK_THROWS_WITH(load_dataset(malformed.string()), Catch::Matchers::ContainsSubstring("row 3"));
  std::filesystem::remove(malformed);

  auto nop = write_temp("time,status\n1.0,1\n");
  CHECK_THROWS(load_dataset(nop.string()));
  std::filesystem::remove(nop);

  CHECK_THROWS(load_dataset("/nonexistent/path.csv"));
}

TEST_CASE("build_time_grid sorts, keeps ties, measures from zero") {
  TimeGrid g = build_time_grid({2.0, 1.0});
  CHECK(g.times == std::vector<double>{1.0, 2.0});
  CHECK(g.deltas == std::vector<double>{1.0, 1.0});

  TimeGrid tied = build_time_grid({1.0, 1.0, 2.0});
  CHECK(tied.times == std::vector<double>{1.0, 1.0, 2.0});
  CHECK(tied.deltas == std::vector<double>{1.0, 0.0, 1.0});

  TimeGrid zero = build_time_grid({0.0});
  CHECK(zero.times == std::vector<double>{0.0});
  CHECK(zero.deltas == std::vector<double>{0.0});

  CHECK_THROWS(build_time_grid({}));
  CHECK_THROWS(build_time_grid({-1.0}));
}

TEST_CASE("build_time_grid is idempotent on sorted input") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  std::vector<double> times;
  for (int i = 0; i < 500; ++i) times.push_back(u(gen));
  TimeGrid g1 = build_time_grid(times);
  TimeGrid g2 = build_time_grid(g1.times);
  CHECK(g1.times == g2.times);
  CHECK(g1.deltas == g2.deltas);
}

TEST_CASE("cumulative sums of deltas recover the sorted times") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::vector<double> times;
  for (int i = 0; i < 100000; ++i) times.push_back(u(gen));
  TimeGrid g = build_time_grid(times);
  double acc = 0.0;
  for (size_t i = 0; i < g.size(); ++i) {
    acc += g.deltas[i];
    REQUIRE(oracle::rel_close(acc, g.times[i], 1e-12));
  }
  CHECK(oracle::rel_close(acc, g.times.back(), 1e-12));
}

TEST_CASE("save then load round-trips exactly") {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 10; ++trial) {
    SurvivalDataset d = oracle::random_dataset(gen, 50, 3, 0.4);
    auto path = write_temp("");
    save_dataset(d, path.string());
    SurvivalDataset back = load_dataset(path.string());
    REQUIRE(back.n() == d.n());
    REQUIRE(back.p == d.p);
    for (size_t i = 0; i < d.n(); ++i) {
      CHECK(back.subjects[i].time == d.subjects[i].time);
      CHECK(back.subjects[i].status == d.subjects[i].status);
      CHECK(back.subjects[i].covariates == d.subjects[i].covariates);
    }
    std::filesystem::remove(path);
  }
}
