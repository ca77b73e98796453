#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dlf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ValidationCode {
  negative_price,
  missing_market_price,
  market_price_not_below_bid,
  unexpected_market_price,
  out_of_range,
  invalid_argument,
};

inline const char* to_string(ValidationCode code) {
  switch (code) {
    case ValidationCode::negative_price: return "negative price";
    case ValidationCode::missing_market_price: return "winning record without market price";
    case ValidationCode::market_price_not_below_bid: return "market price not below bid";
    case ValidationCode::unexpected_market_price: return "losing record carries a market price";
    case ValidationCode::out_of_range: return "value out of range";
    case ValidationCode::invalid_argument: return "invalid argument";
  }
  return "validation error";
}

/// Identifier spelling of a code, e.g. "out_of_range".
inline const char* code_name(ValidationCode code) {
  switch (code) {
    case ValidationCode::negative_price: return "negative_price";
    case ValidationCode::missing_market_price: return "missing_market_price";
    case ValidationCode::market_price_not_below_bid: return "market_price_not_below_bid";
    case ValidationCode::unexpected_market_price: return "unexpected_market_price";
    case ValidationCode::out_of_range: return "out_of_range";
    case ValidationCode::invalid_argument: return "invalid_argument";
  }
  return "unknown";
}

/// Input that is well-formed but violates a domain rule.
class ValidationError : public Error {
 public:
  ValidationError(ValidationCode code, const std::string& detail)
      : Error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}
  ValidationCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ValidationCode code_;
  std::string detail_;
};

/// Malformed text input. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& detail)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + detail : detail),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(long batch, const std::string& detail)
      : Error("non-finite loss at batch " + std::to_string(batch) + ": " + detail),
        batch_(batch) {}
  long batch() const noexcept { return batch_; }

 private:
  long batch_;
};

}  // namespace dlf
