#pragma once

// Discrete price axis and the logged-auction data model.
//
// Prices are integers. Interval l covers integer price l, l = 1..L. A bid b
// wins iff the market price z satisfies z < b, so a bid b "sees" the b - 1
// intervals strictly below it.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "dlf/errors.hpp"
#include "dlf/text.hpp"
#include "dlf/vocabulary.hpp"

namespace dlf {

class PriceGrid {
 public:
  static constexpr int kDefaultMaxInterval = 300;

  explicit PriceGrid(int max_interval = kDefaultMaxInterval) : max_interval_(max_interval) {
    if (max_interval < 1)
      throw ValidationError(ValidationCode::out_of_range,
                            "price grid needs at least one interval, got " + std::to_string(max_interval));
  }

  int max_interval() const noexcept { return max_interval_; }

  /// Interval index of an integer price, clamped to [1, L].
  int price_to_interval(std::int64_t price) const {
    if (price < 0)
      throw ValidationError(ValidationCode::negative_price, std::to_string(price));
    return static_cast<int>(std::clamp<std::int64_t>(price, 1, max_interval_));
  }

  /// Number of intervals strictly below a bid: clamp(bid, 1, L + 1) - 1.
  int censor_depth(std::int64_t bid) const {
    if (bid < 0)
      throw ValidationError(ValidationCode::negative_price, std::to_string(bid));
    return static_cast<int>(std::clamp<std::int64_t>(bid, 1, max_interval_ + 1)) - 1;
  }

  bool operator==(const PriceGrid&) const = default;

 private:
  int max_interval_;
};

struct AuctionRecord {
  std::vector<std::string> features;
  std::int64_t bid = 1;
  std::optional<std::int64_t> market_price;
  bool won = false;

  bool operator==(const AuctionRecord&) const = default;
};

/// Clamps prices onto the grid and enforces won <=> z present <=> z < b.
inline AuctionRecord validate_record(AuctionRecord record, const PriceGrid& grid) {
  record.bid = grid.price_to_interval(record.bid);
  if (record.market_price) record.market_price = grid.price_to_interval(*record.market_price);

  if (record.won && !record.market_price)
    throw ValidationError(ValidationCode::missing_market_price, "bid " + std::to_string(record.bid));
  if (!record.won && record.market_price)
    throw ValidationError(ValidationCode::unexpected_market_price,
                          "z=" + std::to_string(*record.market_price));
  if (record.won && *record.market_price >= record.bid)
    throw ValidationError(ValidationCode::market_price_not_below_bid,
                          "z=" + std::to_string(*record.market_price) +
                              " b=" + std::to_string(record.bid));
  return record;
}

/// Logged auctions as faced by the bidder, split into won and lost.
struct CensoredDataset {
  std::vector<AuctionRecord> records;
  FeatureVocabulary vocabulary;

  std::vector<std::size_t> winning_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (records[i].won) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> losing_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (!records[i].won) out.push_back(i);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Canonical record line: won<TAB>bid<TAB>price<TAB>features
// ---------------------------------------------------------------------------

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

inline std::string format_record_line(const AuctionRecord& record) {
  std::string line;
  line += record.won ? '1' : '0';
  line += '\t';
  line += std::to_string(record.bid);
  line += '\t';
  line += record.market_price ? std::to_string(*record.market_price) : std::string("-1");
  line += '\t';
  line += join_tokens(record.features);
  return line;
}

/// Raw fields of a canonical line, before any domain validation.
struct CanonicalFields {
  bool won = false;
  std::int64_t bid = 0;
  std::int64_t price = -1;
  std::vector<std::string> features;
};

inline CanonicalFields split_canonical_line(std::string_view line, std::size_t line_no) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto fields = text::split(line, '\t');
  if (fields.size() != 3 && fields.size() != 4)
    throw ParseError(line_no, "expected 4 tab-separated fields, got " + std::to_string(fields.size()));
  CanonicalFields out;
  const auto won = text::parse_int(fields[0]);
  if (!won || (*won != 0 && *won != 1)) throw ParseError(line_no, "won must be 0 or 1");
  out.won = *won == 1;
  const auto bid = text::parse_int(fields[1]);
  if (!bid) throw ParseError(line_no, "non-numeric bid '" + std::string(fields[1]) + "'");
  out.bid = *bid;
  const auto price = text::parse_int(fields[2]);
  if (!price) throw ParseError(line_no, "non-numeric price '" + std::string(fields[2]) + "'");
  out.price = *price;
  if (fields.size() == 4)
    for (const auto token : text::split_ws(fields[3])) out.features.emplace_back(token);
  return out;
}

inline bool is_skippable_line(std::string_view line) {
  const auto t = text::trim(line);
  return t.empty() || t.front() == '#';
}

/// Parses and validates one canonical line. Price -1 means censored.
inline AuctionRecord parse_record_line(std::string_view line, const PriceGrid& grid,
                                       std::size_t line_no = 0) {
  auto fields = split_canonical_line(line, line_no);
  if (fields.price < -1) throw ValidationError(ValidationCode::negative_price, std::to_string(fields.price));
  AuctionRecord record;
  record.won = fields.won;
  record.bid = fields.bid;
  if (fields.price != -1) record.market_price = fields.price;
  record.features = std::move(fields.features);
  try {
    return validate_record(std::move(record), grid);
  } catch (const ValidationError& e) {
    if (line_no == 0) throw;
    throw ValidationError(e.code(), "line " + std::to_string(line_no) + ": " + e.detail());
  }
}

inline std::vector<AuctionRecord> read_records(std::istream& in, const PriceGrid& grid) {
  std::vector<AuctionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_skippable_line(line)) continue;
    out.push_back(parse_record_line(line, grid, line_no));
  }
  return out;
}

inline std::vector<AuctionRecord> read_records_file(const std::string& path, const PriceGrid& grid) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_records(in, grid);
}

inline void write_records(std::ostream& out, const std::vector<AuctionRecord>& records) {
  for (const auto& r : records) out << format_record_line(r) << '\n';
}

}  // namespace dlf
