#include <sstream>

#include <gtest/gtest.h>

#include "dlf/ingest.hpp"

using namespace dlf;

namespace {

std::vector<FullRecord> full_records(std::initializer_list<std::int64_t> prices) {
  std::vector<FullRecord> out;
  int i = 0;
  for (const auto z : prices) {
    FullRecord r;
    r.market_price = z;
    r.features = {"id:" + std::to_string(i++ % 3)};
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST(Schema, CategoricalColumnsBecomeTokens) {
  const auto schema = LogSchema::parse("price=2,bid=1,slot=0,region=3", ',');
  const auto r = parse_log_line("top,80,35,east", schema, PriceGrid(300));
  EXPECT_TRUE(r.won);
  EXPECT_EQ(r.bid, 80);
  EXPECT_EQ(*r.market_price, 35);
  EXPECT_EQ(r.features, (std::vector<std::string>{"slot:top", "region:east"}));
}

TEST(Schema, WonIsDerivedFromPriceWhenAbsent) {
  const auto schema = LogSchema::parse("bid=0,price=1,slot=2", ',');
  const auto lost = parse_log_line("40,90,side", schema, PriceGrid(300));
  EXPECT_FALSE(lost.won);
  EXPECT_FALSE(lost.market_price);
}

TEST(Schema, MalformedSpecsAreRejected) {
  EXPECT_THROW(LogSchema::parse("price"), ValidationError);
  EXPECT_THROW(LogSchema::parse("price=x"), ValidationError);
  EXPECT_THROW(LogSchema::parse("price=-2"), ValidationError);
}

TEST(FullLog, CanonicalWriterParsesBack) {
  const PriceGrid grid(300);
  auto records = full_records({5, 17, 300});
  std::stringstream buf;
  write_full_records(buf, records, grid);
  const auto back = read_full_records(buf);
  ASSERT_EQ(back.size(), records.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].market_price, records[i].market_price);
    EXPECT_EQ(back[i].features, records[i].features);
  }
}

TEST(FullLog, LoggedBidAndUtilityColumnsAreKept) {
  const auto schema = LogSchema::parse("price=0,bid=1,utility=2,tokens=3");
  std::istringstream in("price\tbid\tutility\ttokens\n12\t30\t41.5\ta:1 b:2\n");
  const auto records = read_full_records(in, schema, true);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].market_price, 12);
  EXPECT_EQ(*records[0].logged_bid, 30);
  EXPECT_DOUBLE_EQ(*records[0].utility, 41.5);
}

TEST(BidPolicy, ParsesAllForms) {
  EXPECT_TRUE(std::holds_alternative<ConstantBid>(parse_bid_policy("constant:50")));
  const auto u = std::get<UniformBid>(parse_bid_policy("uniform:1:300"));
  EXPECT_EQ(u.lo, 1);
  EXPECT_EQ(u.hi, 300);
  EXPECT_DOUBLE_EQ(std::get<TruthfulBid>(parse_bid_policy("truthful:0.8")).scale, 0.8);
  EXPECT_TRUE(std::holds_alternative<LoggedBid>(parse_bid_policy("logged")));
  for (const auto* bad : {"constant", "uniform:5:1", "gaussian:1", "truthful:abc", ""})
    EXPECT_THROW(parse_bid_policy(bad), ValidationError) << bad;
}

TEST(Simulate, WinsExactlyWhenBidExceedsMarketPrice) {
  const auto full = full_records({10, 50, 49, 51, 300, 1});
  const auto data = simulate_censorship(full, ConstantBid{50}, 1);
  const std::vector<bool> expected{true, false, true, false, false, true};
  ASSERT_EQ(data.records.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(data.records[i].won, expected[i]) << i;
    EXPECT_EQ(data.records[i].bid, 50);
    EXPECT_EQ(data.records[i].market_price.has_value(), expected[i]);
  }
  EXPECT_EQ(*data.records[0].market_price, 10);
  EXPECT_EQ(data.winning_indices(), (std::vector<std::size_t>{0, 2, 5}));
  EXPECT_EQ(data.losing_indices(), (std::vector<std::size_t>{1, 3, 4}));
}

TEST(Simulate, SameSeedSameOutput) {
  std::vector<FullRecord> full;
  for (int i = 0; i < 500; ++i) full.push_back({{"k:" + std::to_string(i % 7)}, 1 + i % 300, {}, {}});
  const auto a = simulate_censorship(full, UniformBid{1, 300}, 42);
  const auto b = simulate_censorship(full, UniformBid{1, 300}, 42);
  const auto c = simulate_censorship(full, UniformBid{1, 300}, 43);
  EXPECT_EQ(a.records, b.records);
  EXPECT_NE(a.records, c.records);
}

TEST(Simulate, UniformBidsCoverTheRange) {
  std::vector<FullRecord> full(20000, FullRecord{{"x:1"}, 100, {}, {}});
  const auto data = simulate_censorship(full, UniformBid{1, 300}, 5);
  std::int64_t lo = 1000, hi = 0;
  std::size_t wins = 0;
  for (const auto& r : data.records) {
    lo = std::min(lo, r.bid);
    hi = std::max(hi, r.bid);
    wins += r.won;
  }
  EXPECT_EQ(lo, 1);
  EXPECT_EQ(hi, 300);
  // P(b > 100) = 200 / 300.
  EXPECT_NEAR(static_cast<double>(wins) / 20000.0, 2.0 / 3.0, 0.015);
}

TEST(Simulate, TruthfulAndLoggedPolicies) {
  std::vector<FullRecord> full{{{"a:1"}, 20, 35, 40.0}, {{"a:2"}, 60, 10, 50.0}};
  const auto truthful = simulate_censorship(full, TruthfulBid{0.5}, 1);
  EXPECT_EQ(truthful.records[0].bid, 20);
  EXPECT_FALSE(truthful.records[0].won);
  EXPECT_EQ(truthful.records[1].bid, 25);
  const auto logged = simulate_censorship(full, LoggedBid{}, 1);
  EXPECT_TRUE(logged.records[0].won);
  EXPECT_EQ(logged.records[1].bid, 10);
  EXPECT_FALSE(logged.records[1].won);
}

TEST(Simulate, PolicyBidOutsideGridIsRejected) {
  const auto full = full_records({10});
  try {
    simulate_censorship(full, ConstantBid{301}, 1);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.code(), ValidationCode::out_of_range);
  }
  EXPECT_THROW(simulate_censorship(full, TruthfulBid{1.0}, 1), ValidationError);
}

TEST(Stats, CountsAndAverages) {
  std::vector<AuctionRecord> records{{{}, 50, 10, true}, {{}, 50, 30, true}, {{}, 40, std::nullopt, false}};
  const auto s = dataset_stats(records);
  EXPECT_EQ(s.total, 3u);
  EXPECT_EQ(s.winning, 2u);
  EXPECT_EQ(s.losing, 1u);
  EXPECT_DOUBLE_EQ(s.win_rate, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.amp_win, 20.0);
  EXPECT_DOUBLE_EQ(s.avg_losing_bid, 40.0);
}
