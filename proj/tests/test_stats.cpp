#include <doctest.h>

#include <cmath>

#include "riskcal/errors.hpp"
#include "riskcal/stats.hpp"

using namespace riskcal;

TEST_SUITE_BEGIN("stats");

TEST_CASE("tilted risk") {
  const std::vector<double> losses{0.0, 1.0};
  CHECK(tilted_risk(std::vector<double>{1.0, 1.0}, losses) == 0.5);
  CHECK(tilted_risk(std::vector<double>{0.0, 1.0}, losses) == 1.0);
  CHECK(tilted_risk(std::vector<double>{1.0, 3.0}, losses) == 0.75);
  CHECK_THROWS_AS(tilted_risk(std::vector<double>{0.0, 0.0}, losses),
                  DataError);
  CHECK_THROWS_AS(tilted_risk(std::vector<double>{-1.0, 2.0}, losses),
                  DataError);
}

TEST_CASE("group risks") {
  Matrix groups(4, 3);
  // group 0: everyone; group 1: rows 0-1; group 2: empty
  for (std::size_t i = 0; i < 4; ++i) groups.at(i, 0) = 1.0;
  groups.at(0, 1) = groups.at(1, 1) = 1.0;
  const std::vector<double> losses{1.0, 0.0, 1.0, 0.0};
  const GroupRiskReport rep = group_risks(groups, losses);
  CHECK(rep.groups.at(0).risk == 0.5);
  CHECK(rep.groups.at(0).count == 4);
  CHECK(rep.groups.at(1).risk == 0.5);
  CHECK(rep.groups.at(1).count == 2);
  CHECK(rep.groups.count(2) == 0);
  REQUIRE(rep.skipped.size() == 1);
  CHECK(rep.skipped[0] == 2);

  // disjoint groups recombine to the marginal mean
  Matrix parts(4, 2);
  parts.at(0, 0) = parts.at(1, 0) = 1.0;
  parts.at(2, 1) = parts.at(3, 1) = 1.0;
  const GroupRiskReport two = group_risks(parts, losses);
  const double recombined =
      (two.groups.at(0).risk * 2 + two.groups.at(1).risk * 2) / 4.0;
  CHECK(recombined == 0.5);

  // overlapping four-point toy, means by hand
  Matrix overlap(4, 2);
  overlap.at(0, 0) = overlap.at(1, 0) = overlap.at(2, 0) = 1.0;
  overlap.at(2, 1) = overlap.at(3, 1) = 1.0;
  const std::vector<double> l2{0.2, 0.4, 0.6, 0.8};
  const GroupRiskReport o = group_risks(overlap, l2);
  CHECK(o.groups.at(0).risk == doctest::Approx((0.2 + 0.4 + 0.6) / 3));
  CHECK(o.groups.at(1).risk == doctest::Approx((0.6 + 0.8) / 2));
}

TEST_CASE("spearman basics") {
  const std::vector<double> a{1, 2, 3, 4, 5};
  CHECK(spearman(a, a).rho == doctest::Approx(1.0));
  const std::vector<double> rev{5, 4, 3, 2, 1};
  CHECK(spearman(a, rev).rho == doctest::Approx(-1.0));
  const std::vector<double> b{1, 3, 2, 5, 4};
  CHECK(spearman(a, b).rho == doctest::Approx(0.8));
  CHECK_THROWS_AS(spearman(a, std::vector<double>{1, 1, 1, 1, 1}), DataError);
  CHECK_THROWS_AS(spearman(std::vector<double>{1, 2},
                           std::vector<double>{2, 1}),
                  DataError);
}

TEST_CASE("spearman p-values across regimes") {
  // small m: exact enumeration; identical order is the single most extreme
  // pairing among 5! = 120, counted two-sided
  const std::vector<double> a{1, 2, 3, 4, 5};
  const SpearmanResult ex = spearman(a, a);
  CHECK(ex.p_value == doctest::Approx(2.0 / 120.0));

  // medium m: Monte-Carlo permutations; a strong monotone signal is
  // overwhelmingly significant
  std::vector<double> x, y;
  for (int i = 0; i < 20; ++i) {
    x.push_back(i);
    y.push_back(2 * i + (i % 3));
  }
  const SpearmanResult mc = spearman(x, y);
  CHECK(mc.rho > 0.95);
  CHECK(mc.p_value < 1e-3);

  // large m: t approximation
  std::vector<double> u, v;
  for (int i = 0; i < 100; ++i) {
    u.push_back(i);
    v.push_back(i + 30.0 * std::sin(i * 0.9));
  }
  const SpearmanResult t = spearman(u, v);
  CHECK(t.rho > 0.3);
  CHECK(t.p_value < 0.01);
  CHECK(t.p_value > 0.0);

  // ties get average ranks
  const std::vector<double> ta{1, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13,
                               14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24, 25,
                               26, 27, 28, 29, 30, 31};
  std::vector<double> tb = ta;
  tb[0] = 2.0;
  const SpearmanResult tie = spearman(ta, tb);
  CHECK(tie.rho > 0.99);
}

TEST_SUITE_END();
