#include "riskcal/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "riskcal/errors.hpp"
#include "riskcal/rng.hpp"

namespace riskcal {

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t m = v.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(m);
  std::size_t i = 0;
  while (i < m) {
    std::size_t j = i;
    while (j < m && v[order[j]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j - 1) + 1.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t m = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(m);
  mb /= static_cast<double>(m);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0)
    throw DataError("spearman: constant input vector");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

double tilted_risk(std::span<const double> weights,
                   std::span<const double> losses) {
  if (weights.size() != losses.size())
    throw DataError("tilted_risk: length mismatch");
  if (weights.empty()) throw DataError("tilted_risk: empty input");
  double wsum = 0.0, wl = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0.0) throw DataError("tilted_risk: negative weight");
    wsum += weights[i];
    wl += weights[i] * losses[i];
  }
  if (wsum <= 0.0) throw DataError("tilted_risk: weights sum to zero");
  return wl / wsum;
}

GroupRiskReport group_risks(const Matrix& membership,
                            std::span<const double> losses) {
  if (membership.rows != losses.size())
    throw DataError("group_risks: row/loss count mismatch");
  GroupRiskReport report;
  for (std::size_t j = 0; j < membership.cols; ++j) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < membership.rows; ++i) {
      if (membership.at(i, j) != 0.0) {
        sum += losses[i];
        ++count;
      }
    }
    if (count == 0)
      report.skipped.push_back(j);
    else
      report.groups[j] = {sum / static_cast<double>(count), count};
  }
  return report;
}

SpearmanResult spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("spearman: length mismatch");
  const std::size_t m = a.size();
  if (m < 3) throw DataError("spearman: need at least 3 points");

  const std::vector<double> ra = average_ranks(a);
  std::vector<double> rb = average_ranks(b);
  SpearmanResult out;
  out.rho = pearson(ra, rb);

  const double abs_rho = std::abs(out.rho);
  if (m <= 8) {
    // Exact: enumerate all pairings of the observed rank multisets.
    std::vector<double> perm = rb;
    std::sort(perm.begin(), perm.end());
    std::size_t total = 0, at_least = 0;
    do {
      ++total;
      if (std::abs(pearson(ra, perm)) >= abs_rho - 1e-12) ++at_least;
    } while (std::next_permutation(perm.begin(), perm.end()));
    out.p_value = static_cast<double>(at_least) / static_cast<double>(total);
    return out;
  }
  if (m < 30) {
    // Seeded Monte-Carlo permutation p-value; full enumeration is
    // intractable at these sizes.
    constexpr std::size_t kDraws = 100000;
    Rng rng(0x5eedc0de);
    std::size_t at_least = 1;  // the observed pairing
    std::vector<double> perm = rb;
    for (std::size_t t = 0; t < kDraws; ++t) {
      rng.shuffle(perm.data(), perm.size());
      if (std::abs(pearson(ra, perm)) >= abs_rho - 1e-12) ++at_least;
    }
    out.p_value =
        static_cast<double>(at_least) / static_cast<double>(kDraws + 1);
    return out;
  }
  const double dof = static_cast<double>(m) - 2.0;
  const double denom = std::max(1.0 - out.rho * out.rho, 1e-300);
  const double t = out.rho * std::sqrt(dof / denom);
  boost::math::students_t dist(dof);
  out.p_value = 2.0 * boost::math::cdf(dist, -std::abs(t));
  return out;
}

}  // namespace riskcal
