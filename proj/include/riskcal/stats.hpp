#ifndef RISKCAL_STATS_HPP
#define RISKCAL_STATS_HPP

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "riskcal/matrix.hpp"

namespace riskcal {

// Weighted risk sum(w*l)/sum(w). Weights must be nonnegative with positive
// sum.
double tilted_risk(std::span<const double> weights,
                   std::span<const double> losses);

struct GroupRisk {
  double risk = 0.0;
  std::size_t count = 0;
};

struct GroupRiskReport {
  std::map<std::size_t, GroupRisk> groups;  // column -> (mean loss, members)
  std::vector<std::size_t> skipped;         // empty columns
};

// Mean loss per indicator column of `membership` (m x d, nonzero = member).
GroupRiskReport group_risks(const Matrix& membership,
                            std::span<const double> losses);

struct SpearmanResult {
  double rho = 0.0;
  double p_value = 1.0;
};

// Rank correlation with average ranks for ties. Two-sided p-value: exact
// permutation enumeration for m <= 8, seeded Monte-Carlo permutations for
// m < 30, t-approximation otherwise. Errors on constant inputs or m < 3.
SpearmanResult spearman(std::span<const double> a, std::span<const double> b);

}  // namespace riskcal

#endif
