#pragma once

// Hazards -> market-price PMF, winning curve W(b) and losing curve S(b), and
// the likelihood losses defined on them.
//
//   S(b) = prod_{l < b} (1 - h_l)     W(b) = 1 - S(b)     p_l = h_l S(l)
//
// so sum_l p_l + S(L + 1) = 1.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dlf/errors.hpp"
#include "dlf/records.hpp"

namespace dlf {

class Landscape {
 public:
  Landscape() = default;

  int max_interval() const noexcept { return static_cast<int>(hazard_.size()); }

  /// Conditional winning probability of interval l in [1, L].
  double h(int l) const { return hazard_.at(static_cast<std::size_t>(l - 1)); }
  /// Probability that the market price equals l in [1, L].
  double p(int l) const { return pmf_.at(static_cast<std::size_t>(l - 1)); }
  /// Winning probability of bid b in [1, L + 1].
  double W(int b) const { return win_.at(static_cast<std::size_t>(b - 1)); }
  /// Losing probability of bid b in [1, L + 1].
  double S(int b) const { return lose_.at(static_cast<std::size_t>(b - 1)); }
  double log_S(int b) const { return log_lose_.at(static_cast<std::size_t>(b - 1)); }

  const std::vector<double>& hazards() const noexcept { return hazard_; }
  const std::vector<double>& pmf() const noexcept { return pmf_; }
  const std::vector<double>& win_curve() const noexcept { return win_; }
  const std::vector<double>& lose_curve() const noexcept { return lose_; }

  /// Price with the largest p_l (lowest price on ties).
  int argmax_price() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < pmf_.size(); ++i)
      if (pmf_[i] > pmf_[best]) best = i;
    return static_cast<int>(best) + 1;
  }

  /// Probability mass on prices strictly above `price`.
  double mass_above(int price) const { return S(price + 1); }

 private:
  friend Landscape derive_curves(std::span<const double> hazards);
  std::vector<double> hazard_, pmf_, win_, lose_, log_lose_;
};

/// Builds the landscape of a hazard vector h_1..h_L with every h_l in [0, 1].
inline Landscape derive_curves(std::span<const double> hazards) {
  if (hazards.empty()) throw ValidationError(ValidationCode::invalid_argument, "empty hazard vector");
  Landscape out;
  const auto n = hazards.size();
  out.hazard_.assign(hazards.begin(), hazards.end());
  out.pmf_.resize(n);
  out.win_.resize(n + 1);
  out.lose_.resize(n + 1);
  out.log_lose_.resize(n + 1);
  out.lose_[0] = 1.0;
  out.log_lose_[0] = 0.0;
  for (std::size_t l = 0; l < n; ++l) {
    const double h = hazards[l];
    if (!(h >= 0.0 && h <= 1.0))
      throw ValidationError(ValidationCode::out_of_range,
                            "hazard h_" + std::to_string(l + 1) + " = " + std::to_string(h) + " outside [0, 1]");
    out.pmf_[l] = h * out.lose_[l];
    out.lose_[l + 1] = out.lose_[l] * (1.0 - h);
    out.log_lose_[l + 1] = out.log_lose_[l] + std::log1p(-h);
  }
  for (std::size_t b = 0; b <= n; ++b) out.win_[b] = 1.0 - out.lose_[b];
  return out;
}

namespace detail {

inline void check_price(int value, int lo, int hi, const char* what) {
  if (value < lo || value > hi)
    throw ValidationError(ValidationCode::out_of_range, std::string(what) + " " + std::to_string(value) +
                                                            " outside [" + std::to_string(lo) + ", " +
                                                            std::to_string(hi) + "]");
}

/// -log W(b) computed from log S(b) without cancellation.
inline double neg_log_win(double log_s) { return -std::log(-std::expm1(log_s)); }

}  // namespace detail

/// Negative log-likelihood of an observed market price: -log p_z.
inline double loss_l1(const Landscape& landscape, int z) {
  detail::check_price(z, 1, landscape.max_interval(), "market price");
  return -(std::log(landscape.h(z)) + landscape.log_S(z));
}

/// -log W(b) for a won auction; a bid of 1 can never win.
inline double loss_win(const Landscape& landscape, int b) {
  detail::check_price(b, 2, landscape.max_interval() + 1, "winning bid");
  return detail::neg_log_win(landscape.log_S(b));
}

/// -log S(b) for a lost auction; zero at b = 1.
inline double loss_lose(const Landscape& landscape, int b) {
  detail::check_price(b, 1, landscape.max_interval() + 1, "losing bid");
  return -landscape.log_S(b);
}

/// Cross entropy of the win indicator against W(b).
inline double loss_l2(const Landscape& landscape, int b, bool won) {
  detail::check_price(b, 1, landscape.max_interval() + 1, "bid");
  // -[w log W + (1 - w) log(1 - W)]; a zero-weight term is dropped rather
  // than multiplied, since its log may be -inf. log(1 - W) is read as log S
  // to keep precision when S is tiny.
  const double log_s = landscape.log_S(b);
  return won ? detail::neg_log_win(log_s) : -log_s;
}

inline double loss_l1(const Landscape& landscape, const AuctionRecord& record) {
  if (!record.won || !record.market_price)
    throw ValidationError(ValidationCode::missing_market_price, "L1 needs a winning record");
  return loss_l1(landscape, static_cast<int>(*record.market_price));
}

inline double loss_l2(const Landscape& landscape, const AuctionRecord& record) {
  return loss_l2(landscape, static_cast<int>(record.bid), record.won);
}

// ---------------------------------------------------------------------------
// Losses with gradients on raw hazard prefixes (training path)
// ---------------------------------------------------------------------------

/// -log p_z over h_1..h_z; adds scale * dL/dh into dh[0..z).
inline double l1_loss_grad(std::span<const double> h, int z, double scale, std::span<double> dh) {
  double loss = -std::log(h[static_cast<std::size_t>(z - 1)]);
  for (int l = 0; l < z - 1; ++l) {
    const auto i = static_cast<std::size_t>(l);
    loss -= std::log1p(-h[i]);
    dh[i] += scale / (1.0 - h[i]);
  }
  dh[static_cast<std::size_t>(z - 1)] -= scale / h[static_cast<std::size_t>(z - 1)];
  return loss;
}

/// -log S(b) over h_1..h_{b-1}.
inline double lose_loss_grad(std::span<const double> h, int b, double scale, std::span<double> dh) {
  double loss = 0.0;
  for (int l = 0; l < b - 1; ++l) {
    const auto i = static_cast<std::size_t>(l);
    loss -= std::log1p(-h[i]);
    dh[i] += scale / (1.0 - h[i]);
  }
  return loss;
}

/// -log W(b) over h_1..h_{b-1}; requires b >= 2.
inline double win_loss_grad(std::span<const double> h, int b, double scale, std::span<double> dh) {
  double log_s = 0.0;
  for (int l = 0; l < b - 1; ++l) log_s += std::log1p(-h[static_cast<std::size_t>(l)]);
  // dL/dh_l = -(S / W) / (1 - h_l), with S / W = 1 / expm1(-log S).
  const double ratio = 1.0 / std::expm1(-log_s);
  for (int l = 0; l < b - 1; ++l) {
    const auto i = static_cast<std::size_t>(l);
    dh[i] -= scale * ratio / (1.0 - h[i]);
  }
  return detail::neg_log_win(log_s);
}

}  // namespace dlf
