#pragma once

// Synthetic full-information auction streams with a known market-price
// distribution per feature segment.
//
// Spec file grammar (one `key = value` per line, `#` starts a comment):
//
//   max_price = 300          # optional, grid size L
//   samples   = 20000
//   seed      = 7            # optional, overridden by the CLI flag
//
//   [segment]                # repeated; each block describes one segment
//   tokens = seg:a hour:3    # feature tokens attached to every sample
//   weight = 1               # mixing weight (nonnegative)
//   pmf    = <component> | <component> | ...
//
// A component is an optional leading weight followed by a shape:
//   point P              all mass on price P
//   uniform LO HI        equal mass on LO..HI
//   normal MEAN SD       Gaussian weights on 1..L
//   weights w1 w2 ...    explicit weights on prices 1, 2, ...
// e.g. `pmf = 0.6 normal 40 10 | 0.4 uniform 120 200`.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "dlf/errors.hpp"
#include "dlf/ingest.hpp"
#include "dlf/records.hpp"
#include "dlf/rng.hpp"
#include "dlf/text.hpp"

namespace dlf {

struct MarketSegment {
  std::vector<std::string> tokens;
  /// Weights over prices 1..L (index l - 1); normalized by `validate`.
  std::vector<double> pmf;
  double weight = 1.0;
};

struct MarketSpec {
  int max_price = PriceGrid::kDefaultMaxInterval;
  std::size_t samples = 0;
  std::uint64_t seed = 1;
  std::vector<MarketSegment> segments;

  /// Checks and normalizes every PMF in place.
  void validate() {
    if (max_price < 1) throw ValidationError(ValidationCode::out_of_range, "max_price must be >= 1");
    if (segments.empty()) throw ValidationError(ValidationCode::invalid_argument, "market spec has no segments");
    double total_weight = 0.0;
    for (std::size_t s = 0; s < segments.size(); ++s) {
      auto& seg = segments[s];
      const auto where = "segment " + std::to_string(s + 1);
      if (!std::isfinite(seg.weight) || seg.weight < 0)
        throw ValidationError(ValidationCode::invalid_argument, where + ": negative mixing weight");
      total_weight += seg.weight;
      if (seg.pmf.size() != static_cast<std::size_t>(max_price))
        throw ValidationError(ValidationCode::invalid_argument, where + ": pmf must cover prices 1.." +
                                                                    std::to_string(max_price));
      double mass = 0.0;
      for (const double w : seg.pmf) {
        if (!std::isfinite(w) || w < 0)
          throw ValidationError(ValidationCode::invalid_argument, where + ": pmf weights must be finite and >= 0");
        mass += w;
      }
      if (!(mass > 0)) throw ValidationError(ValidationCode::invalid_argument, where + ": pmf has no mass");
      for (double& w : seg.pmf) w /= mass;
    }
    if (!(total_weight > 0))
      throw ValidationError(ValidationCode::invalid_argument, "mixing weights sum to zero");
  }
};

namespace detail {

inline std::vector<double> pmf_component(std::string_view text_in, int max_price) {
  auto words = text::split_ws(text_in);
  if (words.empty()) throw ValidationError(ValidationCode::invalid_argument, "empty pmf component");
  double scale = 1.0;
  if (const auto lead = text::parse_double(words[0])) {
    scale = *lead;
    words.erase(words.begin());
    if (words.empty()) throw ValidationError(ValidationCode::invalid_argument, "pmf component lacks a shape");
  }
  std::vector<double> out(static_cast<std::size_t>(max_price), 0.0);
  const auto shape = words[0];
  std::vector<double> args;
  for (std::size_t i = 1; i < words.size(); ++i) {
    const auto v = text::parse_double(words[i]);
    if (!v) throw ValidationError(ValidationCode::invalid_argument, "non-numeric pmf argument '" + std::string(words[i]) + "'");
    args.push_back(*v);
  }
  auto in_range = [&](double price) { return price >= 1 && price <= max_price && price == std::floor(price); };
  auto need = [&](std::size_t n) {
    if (args.size() != n)
      throw ValidationError(ValidationCode::invalid_argument, "pmf shape '" + std::string(shape) + "' takes " +
                                                                  std::to_string(n) + " arguments");
  };
  if (shape == "point") {
    need(1);
    if (!in_range(args[0])) throw ValidationError(ValidationCode::out_of_range, "point outside price grid");
    out[static_cast<std::size_t>(args[0]) - 1] = 1.0;
  } else if (shape == "uniform") {
    need(2);
    if (!in_range(args[0]) || !in_range(args[1]) || args[0] > args[1])
      throw ValidationError(ValidationCode::out_of_range, "uniform range outside price grid");
    for (auto p = static_cast<std::size_t>(args[0]); p <= static_cast<std::size_t>(args[1]); ++p) out[p - 1] = 1.0;
  } else if (shape == "normal") {
    need(2);
    if (!(args[1] > 0)) throw ValidationError(ValidationCode::invalid_argument, "normal needs sd > 0");
    for (int p = 1; p <= max_price; ++p) {
      const double d = (p - args[0]) / args[1];
      out[static_cast<std::size_t>(p - 1)] = std::exp(-0.5 * d * d);
    }
  } else if (shape == "weights") {
    if (args.empty() || args.size() > out.size())
      throw ValidationError(ValidationCode::out_of_range, "weights must list 1..L values");
    std::copy(args.begin(), args.end(), out.begin());
  } else {
    throw ValidationError(ValidationCode::invalid_argument, "unknown pmf shape '" + std::string(shape) + "'");
  }
  const double mass = std::accumulate(out.begin(), out.end(), 0.0);
  if (!(mass > 0)) throw ValidationError(ValidationCode::invalid_argument, "pmf component has no mass");
  for (double& w : out) w *= scale / mass;
  return out;
}

}  // namespace detail

inline MarketSpec parse_market_spec(std::istream& in) {
  MarketSpec spec;
  struct PendingSegment {
    std::vector<std::string> tokens;
    double weight = 1.0;
    std::string pmf;
    std::size_t line = 0;
  };
  std::vector<PendingSegment> pending;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    if (line == "[segment]") {
      pending.push_back({});
      pending.back().line = line_no;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
    const auto key = text::trim(line.substr(0, eq));
    const auto value = text::trim(line.substr(eq + 1));
    if (pending.empty()) {
      const auto number = text::parse_int(value);
      if (!number || *number < 0) throw ParseError(line_no, "'" + std::string(key) + "' needs a nonnegative integer");
      if (key == "max_price") spec.max_price = static_cast<int>(*number);
      else if (key == "samples") spec.samples = static_cast<std::size_t>(*number);
      else if (key == "seed") spec.seed = static_cast<std::uint64_t>(*number);
      else throw ParseError(line_no, "unknown key '" + std::string(key) + "'");
      continue;
    }
    auto& seg = pending.back();
    if (key == "tokens") {
      seg.tokens.clear();
      for (const auto t : text::split_ws(value)) seg.tokens.emplace_back(t);
    } else if (key == "weight") {
      const auto w = text::parse_double(value);
      if (!w) throw ParseError(line_no, "non-numeric weight");
      seg.weight = *w;
    } else if (key == "pmf") {
      seg.pmf = std::string(value);
    } else {
      throw ParseError(line_no, "unknown segment key '" + std::string(key) + "'");
    }
  }
  for (const auto& p : pending) {
    if (p.pmf.empty()) throw ParseError(p.line, "segment without pmf");
    MarketSegment seg;
    seg.tokens = p.tokens;
    seg.weight = p.weight;
    seg.pmf.assign(static_cast<std::size_t>(std::max(spec.max_price, 1)), 0.0);
    for (const auto part : text::split(p.pmf, '|')) {
      const auto component = detail::pmf_component(part, spec.max_price);
      for (std::size_t i = 0; i < seg.pmf.size(); ++i) seg.pmf[i] += component[i];
    }
    spec.segments.push_back(std::move(seg));
  }
  spec.validate();
  return spec;
}

inline MarketSpec read_market_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse_market_spec(in);
}

/// Draws `spec.samples` records: a segment by mixing weight, then z from its PMF.
inline std::vector<FullRecord> generate(MarketSpec spec) {
  spec.validate();
  std::vector<double> segment_cdf;
  double acc = 0.0;
  for (const auto& seg : spec.segments) segment_cdf.push_back(acc += seg.weight);
  std::vector<std::vector<double>> price_cdf;
  for (const auto& seg : spec.segments) {
    std::vector<double> cdf(seg.pmf.size());
    std::partial_sum(seg.pmf.begin(), seg.pmf.end(), cdf.begin());
    price_cdf.push_back(std::move(cdf));
  }
  auto pick = [](const std::vector<double>& cdf, double u) {
    const auto target = u * cdf.back();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
    auto idx = static_cast<std::size_t>(it - cdf.begin());
    if (idx == cdf.size()) {
      // u * total rounded up to total: take the last entry with mass.
      idx = cdf.size() - 1;
      while (idx > 0 && cdf[idx] == cdf[idx - 1]) --idx;
    }
    return idx;
  };

  Rng rng(spec.seed);
  std::vector<FullRecord> out;
  out.reserve(spec.samples);
  for (std::size_t n = 0; n < spec.samples; ++n) {
    const auto s = pick(segment_cdf, rng.uniform01());
    const auto l = pick(price_cdf[s], rng.uniform01());
    FullRecord record;
    record.features = spec.segments[s].tokens;
    record.market_price = static_cast<std::int64_t>(l) + 1;
    out.push_back(std::move(record));
  }
  return out;
}

}  // namespace dlf
