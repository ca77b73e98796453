#pragma once

// Evaluation metrics: ANLP, C-index (AUC of win scores), Mann-Whitney U and
// Welch's t-test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "dlf/errors.hpp"
#include "dlf/neural.hpp"
#include "dlf/text.hpp"

namespace dlf {

/// -log max(p, eps), natural log.
inline double negative_log_probability(double p) { return -std::log(std::max(p, nn::kHazardEpsilon)); }

/// Mean negative log probability of the observed market prices.
inline double anlp(std::span<const double> observed_price_probabilities) {
  if (observed_price_probabilities.empty())
    throw ValidationError(ValidationCode::invalid_argument, "ANLP of an empty test set");
  double sum = 0.0;
  for (const double p : observed_price_probabilities) sum += negative_log_probability(p);
  return sum / static_cast<double>(observed_price_probabilities.size());
}

/// Fraction of (winner, loser) pairs where the winner scores higher; ties count 1/2.
inline double c_index(std::span<const double> winner_scores, std::span<const double> loser_scores) {
  if (winner_scores.empty() || loser_scores.empty())
    throw ValidationError(ValidationCode::invalid_argument, "C-index needs at least one winner and one loser");
  std::vector<double> losers(loser_scores.begin(), loser_scores.end());
  std::sort(losers.begin(), losers.end());
  double concordant = 0.0;
  for (const double s : winner_scores) {
    const auto below = std::lower_bound(losers.begin(), losers.end(), s) - losers.begin();
    const auto not_above = std::upper_bound(losers.begin(), losers.end(), s) - losers.begin();
    concordant += static_cast<double>(below) + 0.5 * static_cast<double>(not_above - below);
  }
  return concordant / (static_cast<double>(winner_scores.size()) * static_cast<double>(losers.size()));
}

/// Per-winner share of losers it outranks (ties 1/2); its mean is the C-index.
inline std::vector<double> per_winner_concordance(std::span<const double> winner_scores,
                                                  std::span<const double> loser_scores) {
  std::vector<double> losers(loser_scores.begin(), loser_scores.end());
  std::sort(losers.begin(), losers.end());
  std::vector<double> out;
  out.reserve(winner_scores.size());
  for (const double s : winner_scores) {
    const auto below = std::lower_bound(losers.begin(), losers.end(), s) - losers.begin();
    const auto not_above = std::upper_bound(losers.begin(), losers.end(), s) - losers.begin();
    out.push_back((static_cast<double>(below) + 0.5 * static_cast<double>(not_above - below)) /
                  static_cast<double>(losers.size()));
  }
  return out;
}

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

namespace detail {

/// Midranks (1-based) of the pooled sample.
inline std::vector<double> midranks(std::span<const double> pooled) {
  std::vector<std::size_t> order(pooled.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return pooled[a] < pooled[b]; });
  std::vector<double> ranks(pooled.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && pooled[order[j]] == pooled[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

}  // namespace detail

/// Two-sided Mann-Whitney U test; statistic is U of `a`. Exact permutation
/// p-value (midranks, so ties are handled) when n_a + n_b <= 20, otherwise
/// the tie-corrected normal approximation with continuity correction.
inline TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty())
    throw ValidationError(ValidationCode::invalid_argument, "Mann-Whitney U needs two nonempty samples");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = detail::midranks(pooled);
  const auto na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const auto n = pooled.size();
  double rank_sum_a = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) rank_sum_a += ranks[i];
  TestResult out;
  out.statistic = rank_sum_a - na * (na + 1.0) / 2.0;
  const double mean_u = na * nb / 2.0;
  const double observed = std::abs(out.statistic - mean_u);

  if (n <= 20) {
    // Enumerate every assignment of |a| pooled ranks to sample a (Gosper's hack).
    const std::uint32_t k = static_cast<std::uint32_t>(a.size());
    std::uint64_t extreme = 0, total = 0;
    std::uint32_t mask = (1u << k) - 1u;
    const std::uint32_t limit = 1u << n;
    while (mask < limit) {
      double rs = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (1u << i)) rs += ranks[i];
      const double u = rs - na * (na + 1.0) / 2.0;
      if (std::abs(u - mean_u) >= observed - 1e-9) ++extreme;
      ++total;
      const std::uint32_t c = mask & (~mask + 1u);
      const std::uint32_t r = mask + c;
      mask = (((r ^ mask) >> 2) / c) | r;
    }
    out.p_value = static_cast<double>(extreme) / static_cast<double>(total);
    return out;
  }

  std::map<double, std::size_t> ties;
  for (const double v : pooled) ++ties[v];
  double tie_term = 0.0;
  for (const auto& [value, t] : ties) {
    const auto tt = static_cast<double>(t);
    tie_term += tt * tt * tt - tt;
  }
  const auto nn = static_cast<double>(n);
  const double variance = na * nb / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (!(variance > 0)) {
    out.p_value = 1.0;
    return out;
  }
  const double z = std::max(observed - 0.5, 0.0) / std::sqrt(variance);
  out.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal(), z)));
  return out;
}

/// Welch's unequal-variance t-test, two-sided.
inline TestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw ValidationError(ValidationCode::invalid_argument, "t-test needs at least two values per sample");
  auto moments = [](std::span<const double> x) {
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double ss = 0.0;
    for (const double v : x) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss / static_cast<double>(x.size() - 1)};
  };
  const auto [mean_a, var_a] = moments(a);
  const auto [mean_b, var_b] = moments(b);
  const double se2_a = var_a / static_cast<double>(a.size());
  const double se2_b = var_b / static_cast<double>(b.size());
  const double se2 = se2_a + se2_b;
  TestResult out;
  if (!(se2 > 0)) {
    if (mean_a == mean_b) return {0.0, 1.0};
    return {mean_a > mean_b ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity(),
            0.0};
  }
  out.statistic = (mean_a - mean_b) / std::sqrt(se2);
  const double df = se2 * se2 /
                    (se2_a * se2_a / static_cast<double>(a.size() - 1) +
                     se2_b * se2_b / static_cast<double>(b.size() - 1));
  const boost::math::students_t dist(df);
  out.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.statistic))));
  return out;
}

// ---------------------------------------------------------------------------
// Metrics file: flat key=value lines
// ---------------------------------------------------------------------------

struct MetricsReport {
  double anlp = 0.0;
  std::optional<double> c_index;
  std::size_t n_win = 0;
  std::size_t n_lose = 0;
  double normalization_deficit_mean = 0.0;
  std::optional<double> p_mwu;
  std::optional<double> p_ttest;

  bool operator==(const MetricsReport&) const = default;
};

inline void write_metrics(std::ostream& out, const MetricsReport& m) {
  out << "anlp=" << text::format_double(m.anlp) << '\n';
  if (m.c_index) out << "c_index=" << text::format_double(*m.c_index) << '\n';
  out << "n_win=" << m.n_win << '\n'
      << "n_lose=" << m.n_lose << '\n'
      << "normalization_deficit_mean=" << text::format_double(m.normalization_deficit_mean) << '\n';
  if (m.p_mwu) out << "p_mwu=" << text::format_double(*m.p_mwu) << '\n';
  if (m.p_ttest) out << "p_ttest=" << text::format_double(*m.p_ttest) << '\n';
}

inline MetricsReport read_metrics(std::istream& in) {
  MetricsReport m;
  std::string line;
  std::size_t line_no = 0;
  bool seen_anlp = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty() || text::trim(line).front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key=value");
    const auto key = text::trim(std::string_view(line).substr(0, eq));
    const auto value = std::string_view(line).substr(eq + 1);
    const auto number = text::parse_double(value);
    if (!number) throw ParseError(line_no, "non-numeric value for " + std::string(key));
    if (key == "anlp") {
      m.anlp = *number;
      seen_anlp = true;
    } else if (key == "c_index") m.c_index = *number;
    else if (key == "n_win") m.n_win = static_cast<std::size_t>(*number);
    else if (key == "n_lose") m.n_lose = static_cast<std::size_t>(*number);
    else if (key == "normalization_deficit_mean") m.normalization_deficit_mean = *number;
    else if (key == "p_mwu") m.p_mwu = *number;
    else if (key == "p_ttest") m.p_ttest = *number;
    else throw ParseError(line_no, "unknown metrics key '" + std::string(key) + "'");
  }
  if (!seen_anlp) throw ParseError(0, "metrics file lacks anlp");
  return m;
}

}  // namespace dlf
