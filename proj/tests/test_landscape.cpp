#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "dlf/landscape.hpp"
#include "dlf/rng.hpp"

using namespace dlf;

namespace {

std::vector<double> random_hazards(Rng& rng, int n) {
  std::vector<double> h(static_cast<std::size_t>(n));
  for (double& v : h) v = rng.uniform(1e-4, 0.2);
  return h;
}

}  // namespace

TEST(Landscape, WorkedExample) {
  const std::vector<double> h{0.5, 0.5, 1.0};
  const auto land = derive_curves(h);
  EXPECT_DOUBLE_EQ(land.p(1), 0.5);
  EXPECT_DOUBLE_EQ(land.p(2), 0.25);
  EXPECT_DOUBLE_EQ(land.p(3), 0.25);
  const std::vector<double> w{0.0, 0.5, 0.75, 1.0};
  EXPECT_EQ(land.win_curve(), w);
  EXPECT_DOUBLE_EQ(land.S(4), 0.0);
  EXPECT_EQ(land.argmax_price(), 1);
}

TEST(Landscape, CurvesAreConsistent) {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const auto h = random_hazards(rng, 300);
    const auto land = derive_curves(h);
    EXPECT_EQ(land.S(1), 1.0);
    EXPECT_EQ(land.W(1), 0.0);
    for (int b = 1; b <= 300; ++b) {
      EXPECT_LE(land.S(b + 1), land.S(b));
      EXPECT_NEAR(land.W(b) + land.S(b), 1.0, 1e-15);
      EXPECT_NEAR(land.p(b), land.S(b) - land.S(b + 1), 1e-15);
      EXPECT_NEAR(std::exp(land.log_S(b)), land.S(b), 1e-12);
    }
    const double total = std::accumulate(land.pmf().begin(), land.pmf().end(), 0.0) + land.S(301);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Landscape, RejectsHazardsOutsideTheUnitInterval) {
  EXPECT_THROW(derive_curves(std::vector<double>{0.2, 1.5}), ValidationError);
  EXPECT_THROW(derive_curves(std::vector<double>{-0.1}), ValidationError);
  EXPECT_THROW(derive_curves(std::vector<double>{std::nan("")}), ValidationError);
  EXPECT_THROW(derive_curves(std::vector<double>{}), ValidationError);
  EXPECT_NO_THROW(derive_curves(std::vector<double>{0.0, 1.0}));
}

TEST(Losses, WorkedValues) {
  const auto land = derive_curves(std::vector<double>{0.5, 0.5, 0.5});
  EXPECT_NEAR(loss_l1(land, 2), 2 * std::log(2.0), 1e-12);
  EXPECT_NEAR(loss_win(land, 3), -std::log(0.75), 1e-12);
  EXPECT_NEAR(loss_win(land, 3), 0.287682072451781, 1e-12);
  EXPECT_NEAR(loss_lose(land, 3), 2 * std::log(2.0), 1e-12);
  EXPECT_EQ(loss_lose(land, 1), 0.0);
  EXPECT_EQ(loss_l2(land, 3, true), loss_win(land, 3));
  EXPECT_EQ(loss_l2(land, 3, false), loss_lose(land, 3));
}

TEST(Losses, RangeChecks) {
  const auto land = derive_curves(std::vector<double>{0.5, 0.5, 0.5});
  EXPECT_THROW(loss_l1(land, 0), ValidationError);
  EXPECT_THROW(loss_l1(land, 4), ValidationError);
  EXPECT_THROW(loss_win(land, 1), ValidationError);
  EXPECT_NO_THROW(loss_win(land, 4));
  EXPECT_THROW(loss_lose(land, 5), ValidationError);
  const AuctionRecord lost{{}, 2, std::nullopt, false};
  EXPECT_THROW(loss_l1(land, lost), ValidationError);
  EXPECT_EQ(loss_l2(land, lost), loss_lose(land, 2));
}

TEST(Losses, StayFiniteNearDegenerateHazards) {
  std::vector<double> h(300, 1e-6);
  const auto land = derive_curves(h);
  // W(2) = 1e-6 exactly; naive log(1 - S) would lose most digits.
  EXPECT_NEAR(loss_win(land, 2), -std::log(1e-6), 1e-9);
  std::vector<double> high(300, 1.0 - 1e-6);
  const auto sharp = derive_curves(high);
  EXPECT_NEAR(loss_lose(sharp, 301), -300 * std::log(1e-6), 1e-6);
  EXPECT_TRUE(std::isfinite(loss_l1(sharp, 300)));
}

TEST(LossGradients, MatchFiniteDifferencesOfTheLandscapeLosses) {
  Rng rng(3);
  const auto h = random_hazards(rng, 12);
  const double eps = 1e-7;
  auto check = [&](auto grad_fn, auto loss_fn, int arg, int depth) {
    std::vector<double> dh(static_cast<std::size_t>(depth), 0.0);
    const std::span<const double> prefix(h.data(), static_cast<std::size_t>(depth));
    const double loss = grad_fn(prefix, arg, 1.0, std::span<double>(dh));
    EXPECT_NEAR(loss, loss_fn(derive_curves(h), arg), 1e-12);
    for (int l = 0; l < depth; ++l) {
      auto up = h, down = h;
      up[static_cast<std::size_t>(l)] += eps;
      down[static_cast<std::size_t>(l)] -= eps;
      const double numeric = (loss_fn(derive_curves(up), arg) - loss_fn(derive_curves(down), arg)) / (2 * eps);
      EXPECT_NEAR(dh[static_cast<std::size_t>(l)], numeric, 1e-5 * std::max(1.0, std::abs(numeric)));
    }
  };
  auto l1 = [](const Landscape& land, int z) { return loss_l1(land, z); };
  auto lose = [](const Landscape& land, int b) { return loss_lose(land, b); };
  auto win = [](const Landscape& land, int b) { return loss_win(land, b); };
  check(l1_loss_grad, l1, 7, 7);
  check(lose_loss_grad, lose, 9, 8);
  check(win_loss_grad, win, 5, 4);
  check(win_loss_grad, win, 13, 12);
}

TEST(LossGradients, ScaleAccumulates) {
  const std::vector<double> h{0.1, 0.2, 0.3};
  std::vector<double> once(3, 0.0), twice(3, 0.0);
  l1_loss_grad(h, 3, 2.0, once);
  l1_loss_grad(h, 3, 1.0, twice);
  l1_loss_grad(h, 3, 1.0, twice);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(once[i], twice[i], 1e-15);
}
