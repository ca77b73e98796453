#pragma once

// Product-limit (Kaplan-Meier) estimate of the market-price distribution from
// censored logs. A won auction is an event at interval z. A lost auction with
// bid b only tells us z >= b, so it stays at risk through interval b - 1.
// Events at an interval are counted while censorings at that same interval
// are still in the risk set.

#include <algorithm>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dlf/errors.hpp"
#include "dlf/metrics.hpp"
#include "dlf/records.hpp"
#include "dlf/text.hpp"

namespace dlf {

struct KmCurve {
  std::vector<std::size_t> events;    // d_l, l = 1..L
  std::vector<std::size_t> at_risk;   // n_l, l = 1..L
  std::vector<double> survival;       // S at b = 1..L+1
  std::vector<double> pmf;            // p_l = S(l) - S(l + 1)

  int max_interval() const noexcept { return static_cast<int>(events.size()); }
  double S(int b) const { return survival.at(static_cast<std::size_t>(b - 1)); }
  double p(int l) const { return pmf.at(static_cast<std::size_t>(l - 1)); }

  bool operator==(const KmCurve&) const = default;
};

namespace detail {

inline KmCurve km_from_counts(std::vector<std::size_t> events, std::vector<std::size_t> censored_after) {
  // censored_after[l - 1]: losers whose last at-risk interval is l.
  const auto n = events.size();
  KmCurve curve;
  curve.at_risk.assign(n, 0);
  std::size_t remaining = 0;
  for (std::size_t l = n; l-- > 0;) {
    remaining += events[l] + censored_after[l];
    curve.at_risk[l] = remaining;
  }
  curve.survival.assign(n + 1, 1.0);
  curve.pmf.assign(n, 0.0);
  for (std::size_t l = 0; l < n; ++l) {
    const double factor = curve.at_risk[l] == 0
                              ? 1.0
                              : 1.0 - static_cast<double>(events[l]) / static_cast<double>(curve.at_risk[l]);
    curve.survival[l + 1] = curve.survival[l] * factor;
    curve.pmf[l] = curve.survival[l] - curve.survival[l + 1];
  }
  curve.events = std::move(events);
  return curve;
}

}  // namespace detail

inline KmCurve km_fit(std::span<const AuctionRecord> records, const PriceGrid& grid) {
  const auto n = static_cast<std::size_t>(grid.max_interval());
  std::vector<std::size_t> events(n, 0), censored_after(n, 0);
  for (const auto& r : records) {
    if (r.won) {
      ++events[static_cast<std::size_t>(grid.price_to_interval(*r.market_price)) - 1];
    } else {
      const auto depth = grid.censor_depth(r.bid);
      if (depth > 0) ++censored_after[static_cast<std::size_t>(depth) - 1];
    }
  }
  return detail::km_from_counts(std::move(events), std::move(censored_after));
}

/// One curve per value of feature field `group_field` (token `field:value`).
/// Records without that field fall under the empty key.
inline std::map<std::string, KmCurve> km_fit_grouped(std::span<const AuctionRecord> records,
                                                     const PriceGrid& grid, std::string_view group_field) {
  std::map<std::string, std::vector<AuctionRecord>> groups;
  const std::string prefix = std::string(group_field) + ":";
  for (const auto& r : records) {
    std::string key;
    for (const auto& token : r.features)
      if (text::starts_with(token, prefix)) {
        key = token.substr(prefix.size());
        break;
      }
    groups[key].push_back(r);
  }
  std::map<std::string, KmCurve> out;
  for (const auto& [key, group] : groups) out.emplace(key, km_fit(group, grid));
  return out;
}

/// ANLP of a population-level curve: mean -log max(p_z, eps) over winners.
inline double km_anlp_floor(const KmCurve& curve, std::span<const AuctionRecord> test_records) {
  std::vector<double> pz;
  for (const auto& r : test_records) {
    if (!r.won) continue;
    const auto z = *r.market_price;
    pz.push_back(z >= 1 && z <= curve.max_interval() ? curve.p(static_cast<int>(z)) : 0.0);
  }
  return anlp(pz);
}

// ---------------------------------------------------------------------------
// CSV: [group,]price,n_at_risk,events,S,p with S = S(price)
// ---------------------------------------------------------------------------

namespace detail {

inline void write_km_rows(std::ostream& out, const KmCurve& curve, const std::string* group) {
  for (int l = 1; l <= curve.max_interval(); ++l) {
    const auto i = static_cast<std::size_t>(l - 1);
    if (group) out << *group << ',';
    out << l << ',' << curve.at_risk[i] << ',' << curve.events[i] << ',' << text::format_double(curve.S(l)) << ','
        << text::format_double(curve.p(l)) << '\n';
  }
}

}  // namespace detail

inline void write_km_csv(std::ostream& out, const KmCurve& curve) {
  out << "price,n_at_risk,events,S,p\n";
  detail::write_km_rows(out, curve, nullptr);
}

inline void write_km_csv(std::ostream& out, const std::map<std::string, KmCurve>& curves) {
  out << "group,price,n_at_risk,events,S,p\n";
  for (const auto& [key, curve] : curves) detail::write_km_rows(out, curve, &key);
}

/// Parses either CSV flavour; returns curves keyed by group ("" when ungrouped).
/// Survival is recomputed from the counts, reproducing the written values.
inline std::map<std::string, KmCurve> read_km_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "empty KM file");
  const auto header = text::trim(line);
  const bool grouped = header == "group,price,n_at_risk,events,S,p";
  if (!grouped && header != "price,n_at_risk,events,S,p") throw ParseError(1, "unexpected KM header");
  struct Counts {
    std::vector<std::size_t> events, at_risk;
    std::vector<double> survival_column;
  };
  std::map<std::string, Counts> counts;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto cells = text::split(text::trim(line), ',');
    if (cells.size() != (grouped ? 6u : 5u)) throw ParseError(line_no, "wrong column count");
    const std::size_t o = grouped ? 1 : 0;
    auto& c = counts[grouped ? std::string(cells[0]) : std::string()];
    const auto price = text::parse_int(cells[o]);
    const auto n = text::parse_int(cells[o + 1]);
    const auto d = text::parse_int(cells[o + 2]);
    const auto s = text::parse_double(cells[o + 3]);
    if (!price || !n || !d || !s || *n < 0 || *d < 0 || *d > *n) throw ParseError(line_no, "bad KM row");
    if (*price != static_cast<std::int64_t>(c.events.size()) + 1) throw ParseError(line_no, "prices must run 1, 2, ...");
    c.events.push_back(static_cast<std::size_t>(*d));
    c.at_risk.push_back(static_cast<std::size_t>(*n));
    c.survival_column.push_back(*s);
  }
  std::map<std::string, KmCurve> out;
  for (auto& [key, c] : counts) {
    const auto n = c.events.size();
    // Recover per-interval censorings from consecutive risk sets.
    std::vector<std::size_t> censored_after(n, 0);
    for (std::size_t l = 0; l < n; ++l) {
      const auto next = l + 1 < n ? c.at_risk[l + 1] : 0;
      if (c.at_risk[l] < next + c.events[l]) throw ParseError(0, "inconsistent risk sets in KM file");
      censored_after[l] = c.at_risk[l] - next - c.events[l];
    }
    auto curve = detail::km_from_counts(std::move(c.events), std::move(censored_after));
    for (std::size_t l = 0; l < n; ++l)
      if (text::format_double(curve.survival[l]) != text::format_double(c.survival_column[l]))
        throw ParseError(0, "KM survival column disagrees with counts at price " + std::to_string(l + 1));
    out.emplace(key, std::move(curve));
  }
  return out;
}

}  // namespace dlf
