#pragma once

#include <cmath>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dlf/errors.hpp"
#include "dlf/ingest.hpp"
#include "dlf/metrics.hpp"
#include "dlf/model.hpp"
#include "dlf/parallel.hpp"
#include "dlf/records.hpp"

namespace dlf {

struct Evaluation {
  MetricsReport report;
  /// -log max(p_z, eps) per record that entered the ANLP.
  std::vector<double> nlp;
  /// W(b) at each test record's own bid.
  std::vector<double> win_scores;
  /// Per winner, share of losers it outranks.
  std::vector<double> concordance;
};

/// Scores `test` (censored layout). ANLP is taken over `full_test` when given,
/// otherwise over the winning test records.
inline Evaluation evaluate(const ModelState& model, std::span<const AuctionRecord> test,
                           std::span<const FullRecord> full_test = {}, std::size_t workers = 1) {
  const PriceGrid grid(model.dims().max_interval);
  const int L = grid.max_interval();
  Evaluation out;
  std::vector<double> deficit(test.size());
  std::vector<double> test_nlp(test.size(), std::numeric_limits<double>::quiet_NaN());
  out.win_scores.resize(test.size());
  parallel_chunks(test.size(), workers, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& r = test[i];
      const auto landscape = predict_landscape(model, r.features);
      out.win_scores[i] = landscape.W(grid.censor_depth(r.bid) + 1);
      deficit[i] = landscape.S(L + 1);
      if (r.won) test_nlp[i] = negative_log_probability(landscape.p(grid.price_to_interval(*r.market_price)));
    }
  });

  if (!full_test.empty()) {
    out.nlp.resize(full_test.size());
    parallel_chunks(full_test.size(), workers, [&](std::size_t begin, std::size_t end, std::size_t) {
      for (std::size_t i = begin; i < end; ++i) {
        const auto landscape = predict_landscape(model, full_test[i].features);
        out.nlp[i] = negative_log_probability(landscape.p(grid.price_to_interval(full_test[i].market_price)));
      }
    });
  } else {
    for (const double v : test_nlp)
      if (!std::isnan(v)) out.nlp.push_back(v);
  }

  std::vector<double> winners, losers;
  for (std::size_t i = 0; i < test.size(); ++i) (test[i].won ? winners : losers).push_back(out.win_scores[i]);
  auto& m = out.report;
  m.n_win = winners.size();
  m.n_lose = losers.size();
  if (!out.nlp.empty()) {
    double sum = 0.0;
    for (const double v : out.nlp) sum += v;
    m.anlp = sum / static_cast<double>(out.nlp.size());
  }
  if (!winners.empty() && !losers.empty()) {
    m.c_index = c_index(winners, losers);
    out.concordance = per_winner_concordance(winners, losers);
  }
  if (!deficit.empty()) {
    double sum = 0.0;
    for (const double v : deficit) sum += v;
    m.normalization_deficit_mean = sum / static_cast<double>(deficit.size());
  }
  return out;
}

/// Fills p_mwu (per-winner concordance) and p_ttest (per-sample -log p_z).
inline void compare_against(Evaluation& ours, std::span<const double> other_nlp,
                            std::span<const double> other_concordance) {
  if (!ours.concordance.empty() && !other_concordance.empty())
    ours.report.p_mwu = mann_whitney_u(ours.concordance, other_concordance).p_value;
  if (ours.nlp.size() >= 2 && other_nlp.size() >= 2)
    ours.report.p_ttest = welch_t_test(ours.nlp, other_nlp).p_value;
}

// Per-sample scores CSV: metric,value with metric in {nlp, concordance}.

inline void write_sample_scores(std::ostream& out, const Evaluation& e) {
  out << "metric,value\n";
  for (const double v : e.nlp) out << "nlp," << text::format_double(v) << '\n';
  for (const double v : e.concordance) out << "concordance," << text::format_double(v) << '\n';
}

struct SampleScores {
  std::vector<double> nlp;
  std::vector<double> concordance;
};

inline SampleScores read_sample_scores(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != "metric,value")
    throw ParseError(1, "expected header 'metric,value'");
  SampleScores s;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto cells = text::split(text::trim(line), ',');
    const auto v = cells.size() == 2 ? text::parse_double(cells[1]) : std::nullopt;
    if (!v) throw ParseError(line_no, "expected metric,value");
    if (cells[0] == "nlp") s.nlp.push_back(*v);
    else if (cells[0] == "concordance") s.concordance.push_back(*v);
    else throw ParseError(line_no, "unknown metric '" + std::string(cells[0]) + "'");
  }
  return s;
}

}  // namespace dlf
