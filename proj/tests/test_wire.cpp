#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <random>

#include "fedrd/wire.hpp"
#include "oracle.hpp"

using namespace fedrd;

namespace {

std::mt19937_64 gen(2718);

double random_extreme_double() {
  static std::uniform_int_distribution<int> pick(0, 7);
  static std::uniform_real_distribution<double> u(-10.0, 10.0);
  switch (pick(gen)) {
    case 0: return 1e-300;
    case 1: return -1e300;
    case 2: return 1e300;
    case 3: return -0.0;
    case 4: return 0.0;
    default: return u(gen);
  }
}

Vec random_vec(int p) {
  Vec v(p);
  for (double& x : v) x = random_extreme_double();
  return v;
}

Mat random_mat(int p) {
  Mat m(p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) m(i, j) = random_extreme_double();
  return m;
}

bool same_bits(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

bool same_vec(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!same_bits(a[i], b[i])) return false;
  return true;
}

bool same_mat(const Mat& a, const Mat& b) {
  if (a.dim() != b.dim()) return false;
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j)
      if (!same_bits(a(i, j), b(i, j))) return false;
  return true;
}

}  // namespace

TEST_CASE("TIMES message layout") {
  SortedTimes t{"s1", {1.0, 2.0}};
  std::string msg = encode_message({MsgType::TIMES, "study1", "s1", 1}, t);
  CHECK(msg ==
        "FEDRD/1 TIMES study=study1 site=s1 round=1\n"
        "p=0 n=2\n"
        "times:\n"
        "1 2\n"
        "end\n");
  auto [env, payload] = decode_message(msg);
  CHECK(env.msg_type == MsgType::TIMES);
  CHECK(env.study_id == "study1");
  CHECK(env.site_id == "s1");
  CHECK(env.round == 1);
  CHECK(std::get<SortedTimes>(payload).times == t.times);
}

TEST_CASE("SUMMARY_S message layout") {
  SiteSummaryS s;
  s.site_id = "a";
  s.a_k = Mat(1);
  s.a_k(0, 0) = 0.5;
  s.d_k = {-0.5};
  s.sigma_k = Mat(1);
  s.sigma_k(0, 0) = 0.25;
  s.n_k = 2;
  std::string msg = encode_message({MsgType::SUMMARY_S, "st", "a", 1}, s);
  CHECK(msg ==
        "FEDRD/1 SUMMARY_S study=st site=a round=1\n"
        "p=1 n=2\n"
        "A:\n0.5\n"
        "D:\n-0.5\n"
        "SIGMA:\n0.25\n"
        "end\n");
}

TEST_CASE("round-trip identity across all message types") {
  for (int trial = 0; trial < 60; ++trial) {
    const int p = 1 + trial % 4;
    const int n = 1 + static_cast<int>(gen() % 12);

    SortedTimes t{"s", Vec(n)};
    for (double& v : t.times) v = std::abs(random_extreme_double());
    auto rt1 = decode_message(encode_message({MsgType::TIMES, "x", "s", 1}, t));
    CHECK(same_vec(std::get<SortedTimes>(rt1.second).times, t.times));

    TimeGrid g{random_vec(n), random_vec(n)};
    auto rt2 = decode_message(encode_message({MsgType::GRID, "x", "coordinator", 1}, g));
    CHECK(same_vec(std::get<TimeGrid>(rt2.second).times, g.times));
    CHECK(same_vec(std::get<TimeGrid>(rt2.second).deltas, g.deltas));

    RiskAggregate a;
    a.site_id = "s";
    a.counts.resize(n);
    for (long& c : a.counts) c = static_cast<long>(gen() % 1000);
    for (int i = 0; i < n; ++i) a.xsums.push_back(random_vec(p));
    auto rt3 = decode_message(encode_message({MsgType::RISK_AGG, "x", "s", 2}, a));
    const auto& a2 = std::get<RiskAggregate>(rt3.second);
    CHECK(a2.counts == a.counts);
    for (int i = 0; i < n; ++i) CHECK(same_vec(a2.xsums[i], a.xsums[i]));

    XbarSeries xb;
    xb.grid = g;
    for (int i = 0; i < n; ++i) xb.xbars.push_back(random_vec(p));
    auto rt4 = decode_message(encode_message({MsgType::XBAR, "x", "coordinator", 2}, xb));
    const auto& xb2 = std::get<XbarSeries>(rt4.second);
    for (int i = 0; i < n; ++i) CHECK(same_vec(xb2.xbars[i], xb.xbars[i]));

    SiteContributionU c;
    c.site_id = "s";
    c.a_part = random_mat(p);
    c.d_part = random_vec(p);
    c.sigma_part = random_mat(p);
    c.n_k = n;
    auto rt5 = decode_message(encode_message({MsgType::CONTRIB_U, "x", "s", 3}, c));
    const auto& c2 = std::get<SiteContributionU>(rt5.second);
    CHECK(same_mat(c2.a_part, c.a_part));
    CHECK(same_vec(c2.d_part, c.d_part));
    CHECK(same_mat(c2.sigma_part, c.sigma_part));
    CHECK(c2.n_k == c.n_k);

    SiteSummaryS s;
    s.site_id = "s";
    s.a_k = random_mat(p);
    s.d_k = random_vec(p);
    s.sigma_k = random_mat(p);
    s.n_k = n;
    auto rt6 = decode_message(encode_message({MsgType::SUMMARY_S, "x", "s", 1}, s));
    const auto& s2 = std::get<SiteSummaryS>(rt6.second);
    CHECK(same_mat(s2.a_k, s.a_k));
    CHECK(same_vec(s2.d_k, s.d_k));

    FitResult f;
    f.beta = random_vec(p);
    f.cov = random_mat(p);
    f.n = n;
    f.method = trial % 2 ? Method::fedrd_u : Method::fedrd_s;
    const int round = trial % 2 ? 3 : 1;
    auto rt7 = decode_message(encode_message({MsgType::FIT, "x", "coordinator", round}, f));
    const auto& f2 = std::get<FitResult>(rt7.second);
    CHECK(same_vec(f2.beta, f.beta));
    CHECK(same_mat(f2.cov, f.cov));
    CHECK(f2.method == f.method);
    CHECK(f2.n == f.n);

    // re-encoding reproduces identical bytes
    std::string bytes = encode_message({MsgType::FIT, "x", "coordinator", round}, f);
    auto again = decode_message(bytes);
    CHECK(encode_message(again.first, again.second) == bytes);
  }
}

TEST_CASE("wire errors") {
  SortedTimes t{"s", {1.0, 2.0}};
  std::string good = encode_message({MsgType::TIMES, "x", "s", 1}, t);

  SECTION("version mismatch") {
    std::string bad = good;
    bad.replace(0, 7, "FEDRD/2");
    CHECK_THROWS_AS(decode_message(bad), VersionMismatch);
  }

  SECTION("truncated payload") {
    std::string bad = good.substr(0, good.find("1 2"));
    CHECK_THROWS_AS(decode_message(bad), TruncatedPayload);
    std::string noend = good.substr(0, good.rfind("end\n"));
    CHECK_THROWS_AS(decode_message(noend), TruncatedPayload);
  }

  SECTION("declared dimensions disagree with payload") {
    std::string bad = good;
    bad.replace(bad.find("n=2"), 3, "n=3");
    CHECK_THROWS_AS(decode_message(bad), DimensionMismatch);
  }

  SECTION("payload type must match the message type") {
    CHECK_THROWS_AS(encode_message({MsgType::GRID, "x", "s", 1}, Payload(t)), WireError);
  }

  SECTION("round must be consistent with the type") {
    CHECK_THROWS_AS(encode_message({MsgType::TIMES, "x", "s", 2}, Payload(t)), WireError);
    std::string bad = good;
    bad.replace(bad.find("round=1"), 7, "round=2");
    CHECK_THROWS_AS(decode_message(bad), WireError);
  }

  SECTION("ids are validated") {
    CHECK_THROWS_AS(encode_message({MsgType::TIMES, "has space", "s", 1}, Payload(t)), WireError);
    CHECK_THROWS_AS(encode_message({MsgType::TIMES, "x", "", 1}, Payload(t)), WireError);
  }
}
