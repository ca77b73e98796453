#pragma once

// Log ingestion and second-price censorship simulation.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dlf/errors.hpp"
#include "dlf/records.hpp"
#include "dlf/rng.hpp"
#include "dlf/text.hpp"
#include "dlf/vocabulary.hpp"

namespace dlf {

/// Column layout of a delimited log. Reserved names are `won`, `bid`,
/// `price`, `utility` and `tokens` (a column already holding space separated
/// field:value tokens). Any other name is a categorical attribute whose cell
/// becomes the token `name:value`.
struct LogSchema {
  char delimiter = '\t';
  std::optional<std::size_t> won, bid, price, utility, tokens;
  std::vector<std::pair<std::string, std::size_t>> categorical;

  static LogSchema canonical() {
    LogSchema s;
    s.won = 0;
    s.bid = 1;
    s.price = 2;
    s.tokens = 3;
    return s;
  }

  /// Parses `name=col,name=col,...` with 0-based column numbers.
  static LogSchema parse(std::string_view spec, char delimiter = '\t') {
    LogSchema s;
    s.delimiter = delimiter;
    for (const auto item : text::split(spec, ',')) {
      const auto entry = text::trim(item);
      if (entry.empty()) continue;
      const auto eq = entry.find('=');
      if (eq == std::string_view::npos)
        throw ValidationError(ValidationCode::invalid_argument, "schema entry '" + std::string(entry) + "' lacks '='");
      const auto name = text::trim(entry.substr(0, eq));
      const auto col = text::parse_int(entry.substr(eq + 1));
      if (name.empty() || !col || *col < 0)
        throw ValidationError(ValidationCode::invalid_argument, "bad schema entry '" + std::string(entry) + "'");
      const auto c = static_cast<std::size_t>(*col);
      if (name == "won") s.won = c;
      else if (name == "bid") s.bid = c;
      else if (name == "price") s.price = c;
      else if (name == "utility") s.utility = c;
      else if (name == "tokens") s.tokens = c;
      else s.categorical.emplace_back(std::string(name), c);
    }
    return s;
  }
};

/// A full-information auction: the market price is always known.
struct FullRecord {
  std::vector<std::string> features;
  std::int64_t market_price = 0;
  std::optional<std::int64_t> logged_bid;
  std::optional<double> utility;

  bool operator==(const FullRecord&) const = default;
};

namespace detail {

inline std::string_view column(const std::vector<std::string_view>& cells, std::size_t col,
                               std::size_t line_no) {
  if (col >= cells.size())
    throw ParseError(line_no, "missing column " + std::to_string(col));
  return cells[col];
}

inline std::int64_t int_column(const std::vector<std::string_view>& cells, std::size_t col,
                               std::size_t line_no, const char* what) {
  const auto cell = column(cells, col, line_no);
  const auto value = text::parse_int(cell);
  if (!value) throw ParseError(line_no, std::string("non-numeric ") + what + " '" + std::string(cell) + "'");
  return *value;
}

inline std::vector<std::string> tokens_from(const LogSchema& schema,
                                            const std::vector<std::string_view>& cells,
                                            std::size_t line_no) {
  std::vector<std::string> tokens;
  if (schema.tokens)
    for (const auto t : text::split_ws(column(cells, *schema.tokens, line_no))) tokens.emplace_back(t);
  for (const auto& [name, col] : schema.categorical) {
    const auto value = text::trim(column(cells, col, line_no));
    if (value.empty()) continue;
    tokens.push_back(name + ":" + std::string(value));
  }
  return tokens;
}

inline std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace detail

/// Parses a censored log line. Without a `won` column the outcome is
/// derived from price < bid and the price of a lost auction is discarded.
inline AuctionRecord parse_log_line(std::string_view line, const LogSchema& schema,
                                    const PriceGrid& grid, std::size_t line_no = 0) {
  if (!schema.bid || !schema.price)
    throw ValidationError(ValidationCode::invalid_argument, "schema needs bid and price columns");
  const auto cells = text::split(detail::strip_cr(line), schema.delimiter);
  AuctionRecord record;
  record.bid = detail::int_column(cells, *schema.bid, line_no, "bid");
  const auto price = detail::int_column(cells, *schema.price, line_no, "price");
  if (record.bid < 0) throw ValidationError(ValidationCode::negative_price, "bid " + std::to_string(record.bid));
  if (price < -1) throw ValidationError(ValidationCode::negative_price, "price " + std::to_string(price));
  if (schema.won) {
    const auto won = detail::int_column(cells, *schema.won, line_no, "won");
    if (won != 0 && won != 1) throw ParseError(line_no, "won must be 0 or 1");
    record.won = won == 1;
    if (price >= 0) record.market_price = price;
  } else {
    record.won = price >= 0 && price < record.bid;
    if (record.won) record.market_price = price;
  }
  record.features = detail::tokens_from(schema, cells, line_no);
  return validate_record(std::move(record), grid);
}

/// Parses a full-information line; the price column must hold z >= 0.
inline FullRecord parse_full_line(std::string_view line, const LogSchema& schema,
                                  std::size_t line_no = 0) {
  if (!schema.price) throw ValidationError(ValidationCode::invalid_argument, "schema needs a price column");
  const auto cells = text::split(detail::strip_cr(line), schema.delimiter);
  FullRecord record;
  record.market_price = detail::int_column(cells, *schema.price, line_no, "price");
  if (record.market_price < 0)
    throw ValidationError(ValidationCode::negative_price,
                          "full-information record needs a market price (line " + std::to_string(line_no) + ")");
  if (schema.bid) record.logged_bid = detail::int_column(cells, *schema.bid, line_no, "bid");
  if (schema.utility) {
    const auto cell = detail::column(cells, *schema.utility, line_no);
    const auto u = text::parse_double(cell);
    if (!u) throw ParseError(line_no, "non-numeric utility '" + std::string(cell) + "'");
    record.utility = *u;
  }
  record.features = detail::tokens_from(schema, cells, line_no);
  return record;
}

inline std::vector<FullRecord> read_full_records(std::istream& in,
                                                 const LogSchema& schema = LogSchema::canonical(),
                                                 bool skip_header = false) {
  std::vector<FullRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if ((skip_header && line_no == 1) || is_skippable_line(line)) continue;
    out.push_back(parse_full_line(line, schema, line_no));
  }
  return out;
}

inline std::vector<FullRecord> read_full_records_file(const std::string& path,
                                                      const LogSchema& schema = LogSchema::canonical(),
                                                      bool skip_header = false) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_full_records(in, schema, skip_header);
}

/// Full-information records in canonical layout: won=1, bid=L, price=z.
inline void write_full_records(std::ostream& out, const std::vector<FullRecord>& records,
                               const PriceGrid& grid) {
  for (const auto& r : records)
    out << "1\t" << grid.max_interval() << '\t' << r.market_price << '\t' << join_tokens(r.features) << '\n';
}

// ---------------------------------------------------------------------------
// Bid policies
// ---------------------------------------------------------------------------

struct ConstantBid {
  std::int64_t price;
};
struct UniformBid {
  std::int64_t lo, hi;
};
/// b = round(scale * utility), using the record's utility column.
struct TruthfulBid {
  double scale;
};
/// Replays the bid logged with the record.
struct LoggedBid {};

using BidPolicy = std::variant<ConstantBid, UniformBid, TruthfulBid, LoggedBid>;

/// `constant:C`, `uniform:LO:HI`, `truthful:SCALE` or `logged`.
inline BidPolicy parse_bid_policy(std::string_view spec) {
  const auto parts = text::split(spec, ':');
  auto bad = [&] {
    return ValidationError(ValidationCode::invalid_argument, "bad bid policy '" + std::string(spec) + "'");
  };
  if (parts[0] == "constant" && parts.size() == 2) {
    const auto c = text::parse_int(parts[1]);
    if (!c) throw bad();
    return ConstantBid{*c};
  }
  if (parts[0] == "uniform" && parts.size() == 3) {
    const auto lo = text::parse_int(parts[1]);
    const auto hi = text::parse_int(parts[2]);
    if (!lo || !hi || *lo > *hi) throw bad();
    return UniformBid{*lo, *hi};
  }
  if (parts[0] == "truthful" && parts.size() == 2) {
    const auto scale = text::parse_double(parts[1]);
    if (!scale || !std::isfinite(*scale)) throw bad();
    return TruthfulBid{*scale};
  }
  if (parts[0] == "logged" && parts.size() == 1) return LoggedBid{};
  throw bad();
}

inline std::int64_t draw_bid(const BidPolicy& policy, const FullRecord& record, Rng& rng,
                             const PriceGrid& grid) {
  const std::int64_t bid = std::visit(
      [&](const auto& p) -> std::int64_t {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ConstantBid>) {
          return p.price;
        } else if constexpr (std::is_same_v<P, UniformBid>) {
          return rng.uniform_int(p.lo, p.hi);
        } else if constexpr (std::is_same_v<P, TruthfulBid>) {
          if (!record.utility)
            throw ValidationError(ValidationCode::invalid_argument, "truthful policy needs a utility column");
          return static_cast<std::int64_t>(std::llround(p.scale * *record.utility));
        } else {
          if (!record.logged_bid)
            throw ValidationError(ValidationCode::invalid_argument, "logged policy needs a bid column");
          return *record.logged_bid;
        }
      },
      policy);
  if (bid < 1 || bid > grid.max_interval())
    throw ValidationError(ValidationCode::out_of_range,
                          "policy bid " + std::to_string(bid) + " outside [1, " +
                              std::to_string(grid.max_interval()) + "]");
  return bid;
}

/// Replays full-information auctions with a bid policy. A bid above z wins
/// and keeps z; otherwise z is erased.
inline CensoredDataset simulate_censorship(const std::vector<FullRecord>& full_records,
                                           const BidPolicy& policy, std::uint64_t seed,
                                           const PriceGrid& grid = PriceGrid{}) {
  Rng rng(seed);
  CensoredDataset out;
  out.records.reserve(full_records.size());
  for (const auto& full : full_records) {
    const auto z = grid.price_to_interval(full.market_price);
    AuctionRecord record;
    record.features = full.features;
    record.bid = draw_bid(policy, full, rng, grid);
    record.won = record.bid > z;
    if (record.won) record.market_price = z;
    out.records.push_back(validate_record(std::move(record), grid));
  }
  if (!out.records.empty()) {
    std::vector<std::vector<std::string>> tokens;
    tokens.reserve(out.records.size());
    for (const auto& r : out.records) tokens.push_back(r.features);
    out.vocabulary = build_vocabulary(tokens);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset statistics
// ---------------------------------------------------------------------------

struct DatasetStats {
  std::size_t total = 0;
  std::size_t winning = 0;
  std::size_t losing = 0;
  double win_rate = 0.0;
  double amp_win = 0.0;
  /// The market price of a lost auction is unknown; the mean losing bid is a lower bound on it.
  double avg_losing_bid = 0.0;
};

inline DatasetStats dataset_stats(const std::vector<AuctionRecord>& records) {
  DatasetStats s;
  double z_sum = 0.0, bid_sum = 0.0;
  for (const auto& r : records) {
    ++s.total;
    if (r.won) {
      ++s.winning;
      z_sum += static_cast<double>(*r.market_price);
    } else {
      ++s.losing;
      bid_sum += static_cast<double>(r.bid);
    }
  }
  if (s.total) s.win_rate = static_cast<double>(s.winning) / static_cast<double>(s.total);
  if (s.winning) s.amp_win = z_sum / static_cast<double>(s.winning);
  if (s.losing) s.avg_losing_bid = bid_sum / static_cast<double>(s.losing);
  return s;
}

inline void write_stats(std::ostream& out, const DatasetStats& s) {
  out << "total=" << s.total << '\n'
      << "winning=" << s.winning << '\n'
      << "losing=" << s.losing << '\n'
      << "win_rate=" << text::format_double(s.win_rate) << '\n'
      << "amp_win=" << text::format_double(s.amp_win) << '\n'
      << "avg_losing_bid_lower_bound=" << text::format_double(s.avg_losing_bid) << '\n';
}

}  // namespace dlf
