#pragma once

// Training: per-sample objectives on unrolled hazards, the alternating
// alpha * L1 / (1 - alpha) * L2 loop, and the learning-curve CSV.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dlf/errors.hpp"
#include "dlf/evaluation.hpp"
#include "dlf/landscape.hpp"
#include "dlf/model.hpp"
#include "dlf/neural.hpp"
#include "dlf/parallel.hpp"
#include "dlf/records.hpp"
#include "dlf/rng.hpp"

namespace dlf {

enum class CensorshipMode { full, win_only };

inline CensorshipMode parse_censorship_mode(std::string_view s) {
  if (s == "full") return CensorshipMode::full;
  if (s == "win-only") return CensorshipMode::win_only;
  throw ValidationError(ValidationCode::invalid_argument, "censorship mode must be 'full' or 'win-only'");
}

struct TrainConfig {
  double alpha = 0.25;
  double learning_rate = 1e-3;
  /// When set, the rate falls linearly from learning_rate to this value over
  /// the run's batches; unset keeps it constant.
  std::optional<double> final_learning_rate;
  std::size_t batch_size = 128;
  int epochs = 5;
  std::uint64_t seed = 1;
  CensorshipMode mode = CensorshipMode::full;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
  int max_interval = PriceGrid::kDefaultMaxInterval;
  std::size_t min_count = 1;
  double init_scale = 0.05;
  double validation_fraction = 0.1;
  /// Validation row every this many optimizer batches (0: end of epoch only).
  long eval_every = 0;
  std::size_t workers = 1;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0))
      throw ValidationError(ValidationCode::out_of_range, "alpha must lie in [0, 1]");
    if (batch_size < 1) throw ValidationError(ValidationCode::out_of_range, "batch size must be >= 1");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate))
      throw ValidationError(ValidationCode::out_of_range, "learning rate must be positive");
    if (final_learning_rate && !(*final_learning_rate > 0 && std::isfinite(*final_learning_rate)))
      throw ValidationError(ValidationCode::out_of_range, "final learning rate must be positive");
    if (epochs < 0) throw ValidationError(ValidationCode::out_of_range, "epochs must be >= 0");
    if (embed_dim < 1 || hidden_dim < 1) throw ValidationError(ValidationCode::out_of_range, "dimensions must be >= 1");
    if (!(validation_fraction >= 0 && validation_fraction < 1))
      throw ValidationError(ValidationCode::out_of_range, "validation fraction must lie in [0, 1)");
    if (eval_every < 0) throw ValidationError(ValidationCode::out_of_range, "eval_every must be >= 0");
  }
};

/// A record with its features resolved to vocabulary indices.
struct EncodedSample {
  std::vector<std::size_t> indices;
  int bid = 1;
  int market_price = 0;  // 0 when censored
  bool won = false;
};

inline EncodedSample encode_sample(const AuctionRecord& r, const FeatureVocabulary& vocab) {
  return {encode(r.features, vocab), static_cast<int>(r.bid),
          r.market_price ? static_cast<int>(*r.market_price) : 0, r.won};
}

enum class LossKind {
  l1,    // -log p_z on winners
  l2,    // -log W(b) on winners, -log S(b) on losers
  win,   // -log W(b) on winners only
};

inline const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::l1: return "L1";
    case LossKind::l2: return "L2";
    case LossKind::win: return "Lwin";
  }
  return "?";
}

/// Loss of one sample; when `grads` is given adds scale * dLoss/dtheta.
/// Only the intervals a loss touches are unrolled: z for L1, b - 1 for L2.
inline double sample_loss(const nn::ParameterSet& params, const EncodedSample& s, LossKind kind, double scale,
                          nn::ParameterSet* grads) {
  if (kind != LossKind::l2 && !s.won)
    throw ValidationError(ValidationCode::missing_market_price, std::string(to_string(kind)) + " needs a winning sample");
  const int depth = kind == LossKind::l1 ? s.market_price : s.bid - 1;
  if (depth == 0) return 0.0;  // losing at b = 1: S(1) = 1
  if (!grads) {
    const auto h = nn::forward_hazards(s.indices, depth, params);
    std::vector<double> scratch(h.size(), 0.0);
    if (kind == LossKind::l1) return l1_loss_grad(h, s.market_price, 0.0, scratch);
    return s.won ? win_loss_grad(h, s.bid, 0.0, scratch) : lose_loss_grad(h, s.bid, 0.0, scratch);
  }
  const auto unroll = nn::forward_unroll(s.indices, depth, params);
  std::vector<double> dh(unroll.hazards.size(), 0.0);
  double loss;
  if (kind == LossKind::l1) loss = l1_loss_grad(unroll.hazards, s.market_price, scale, dh);
  else if (s.won) loss = win_loss_grad(unroll.hazards, s.bid, scale, dh);
  else loss = lose_loss_grad(unroll.hazards, s.bid, scale, dh);
  nn::backward(unroll.tape, dh, params, *grads);
  return loss;
}

/// Sum of per-sample losses over a batch, with scale * gradient accumulated
/// into `grads`. Worker partial gradients are reduced in worker order.
inline double batch_loss(const nn::ParameterSet& params, std::span<const EncodedSample* const> batch, LossKind kind,
                         double scale, nn::ParameterSet* grads, std::size_t workers = 1) {
  workers = std::max<std::size_t>(1, std::min(workers, batch.size()));
  std::vector<double> partial_loss(workers, 0.0);
  std::vector<nn::ParameterSet> partial_grads;
  if (grads && workers > 1) partial_grads.assign(workers, nn::ParameterSet(params.dims()));
  parallel_chunks(batch.size(), workers, [&](std::size_t begin, std::size_t end, std::size_t w) {
    nn::ParameterSet* g = grads ? (workers > 1 ? &partial_grads[w] : grads) : nullptr;
    for (std::size_t i = begin; i < end; ++i) partial_loss[w] += sample_loss(params, *batch[i], kind, scale, g);
  });
  if (grads && workers > 1)
    for (const auto& g : partial_grads) *grads += g;
  double total = 0.0;
  for (const double l : partial_loss) total += l;
  return total;
}

/// alpha * sum L1 over winners + (1 - alpha) * sum L2 over all samples.
inline double total_objective(const nn::ParameterSet& params, std::span<const EncodedSample> samples, double alpha,
                              nn::ParameterSet* grads) {
  double loss = 0.0;
  for (const auto& s : samples) {
    if (s.won) loss += alpha * sample_loss(params, s, LossKind::l1, alpha, grads);
    loss += (1.0 - alpha) * sample_loss(params, s, LossKind::l2, 1.0 - alpha, grads);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check
// ---------------------------------------------------------------------------

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_coordinate = 0;
  std::size_t checked = 0;
};

/// Compares the analytic gradient of `objective` with central differences.
/// `objective(params, grads_or_null)` returns the loss and, given a gradient
/// buffer, accumulates the gradient into it. At most `max_coordinates`
/// coordinates are probed, chosen by `seed` when there are more.
template <typename Objective>
GradCheckResult gradient_check(const nn::ParameterSet& params, Objective&& objective, double eps = 1e-4,
                               std::size_t max_coordinates = 0, std::uint64_t seed = 1) {
  nn::ParameterSet analytic(params.dims());
  objective(params, &analytic);
  std::vector<std::size_t> coords(params.size());
  for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  if (max_coordinates > 0 && max_coordinates < coords.size()) {
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(coords));
    coords.resize(max_coordinates);
    std::sort(coords.begin(), coords.end());
  }
  GradCheckResult result;
  nn::ParameterSet probe = params;
  for (const auto i : coords) {
    const double original = probe.values()[i];
    probe.values()[i] = original + eps;
    const double plus = objective(probe, nullptr);
    probe.values()[i] = original - eps;
    const double minus = objective(probe, nullptr);
    probe.values()[i] = original;
    const double numeric = (plus - minus) / (2.0 * eps);
    const double a = analytic.values()[i];
    const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_coordinate = i;
    }
    ++result.checked;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct CurveRow {
  long step = 0;
  std::string kind;
  std::optional<double> loss;
  std::optional<double> val_anlp;
  std::optional<double> val_cindex;

  bool operator==(const CurveRow&) const = default;
};

struct TrainResult {
  ModelState model;
  std::vector<CurveRow> curve;
  /// Optimizer updates actually applied (zero-weight batches are skipped).
  long optimizer_steps = 0;
};

/// Winners and losers each keep their first (1 - fraction) in file order for
/// fitting; the tails form the validation set.
struct TrainSplit {
  std::vector<AuctionRecord> fit;
  std::vector<AuctionRecord> validation;
};

inline TrainSplit split_for_validation(std::span<const AuctionRecord> records, double fraction) {
  std::size_t n_win = 0, n_lose = 0;
  for (const auto& r : records) (r.won ? n_win : n_lose)++;
  const auto val_win = static_cast<std::size_t>(std::floor(static_cast<double>(n_win) * fraction));
  const auto val_lose = static_cast<std::size_t>(std::floor(static_cast<double>(n_lose) * fraction));
  TrainSplit split;
  std::size_t seen_win = 0, seen_lose = 0;
  for (const auto& r : records) {
    const bool to_val = r.won ? (seen_win++ >= n_win - val_win) : (seen_lose++ >= n_lose - val_lose);
    (to_val ? split.validation : split.fit).push_back(r);
  }
  return split;
}

inline TrainResult train(std::span<const AuctionRecord> records, const TrainConfig& config) {
  config.validate();
  if (records.empty()) throw ValidationError(ValidationCode::invalid_argument, "training set is empty");
  const auto split = split_for_validation(records, config.validation_fraction);
  if (split.fit.empty()) throw ValidationError(ValidationCode::invalid_argument, "no records left for fitting");

  std::vector<std::vector<std::string>> token_lists;
  for (const auto& r : split.fit) token_lists.push_back(r.features);
  auto vocab = build_vocabulary(token_lists, config.min_count);

  TrainResult result;
  result.model = ModelState::initialized(std::move(vocab), config.embed_dim, config.hidden_dim,
                                         config.max_interval, config.seed, config.init_scale);
  auto& model = result.model;
  const PriceGrid grid(config.max_interval);

  std::vector<EncodedSample> samples;
  samples.reserve(split.fit.size());
  for (const auto& r : split.fit) samples.push_back(encode_sample(validate_record(r, grid), model.vocabulary));

  std::vector<const EncodedSample*> l1_pool, l2_pool;
  for (const auto& s : samples) {
    if (s.won) l1_pool.push_back(&s);
    if (config.mode == CensorshipMode::full || s.won) l2_pool.push_back(&s);
  }
  if (config.mode == CensorshipMode::win_only && l1_pool.empty())
    throw ValidationError(ValidationCode::invalid_argument, "win-only training needs winning records");
  const LossKind l2_kind = config.mode == CensorshipMode::full ? LossKind::l2 : LossKind::win;

  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::size_t l1_cursor = l1_pool.size();
  nn::ParameterSet grads(model.params.dims());
  long step = 0;
  const auto l2_batches = (l2_pool.size() + config.batch_size - 1) / config.batch_size;
  const long total_steps =
      static_cast<long>(l2_batches * (l1_pool.empty() ? 1 : 2)) * static_cast<long>(config.epochs);
  auto learning_rate = [&] {
    if (!config.final_learning_rate || total_steps <= 1) return config.learning_rate;
    const double t = static_cast<double>(step - 1) / static_cast<double>(total_steps - 1);
    return config.learning_rate + t * (*config.final_learning_rate - config.learning_rate);
  };

  auto validation_row = [&] {
    CurveRow row{step, "val", std::nullopt, std::nullopt, std::nullopt};
    if (split.validation.empty()) return;
    const auto eval = evaluate(model, split.validation, {}, config.workers);
    if (!eval.nlp.empty()) row.val_anlp = eval.report.anlp;
    row.val_cindex = eval.report.c_index;
    result.curve.push_back(row);
  };

  auto run_batch = [&](std::span<const EncodedSample* const> batch, LossKind kind, double weight) {
    ++step;
    grads.set_zero();
    const double n = static_cast<double>(batch.size());
    const bool update = weight > 0.0;
    const double loss = batch_loss(model.params, batch, kind, weight / n, update ? &grads : nullptr, config.workers) / n;
    if (!std::isfinite(loss)) throw DivergenceError(step, to_string(kind));
    if (update) {
      nn::adam_step(model.params, grads, model.optimizer, learning_rate());
      ++result.optimizer_steps;
    }
    result.curve.push_back({step, to_string(kind), loss, std::nullopt, std::nullopt});
    if (config.eval_every > 0 && step % config.eval_every == 0) validation_row();
  };

  std::vector<const EncodedSample*> l1_batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<const EncodedSample*>(l2_pool));
    for (std::size_t start = 0; start < l2_pool.size(); start += config.batch_size) {
      if (!l1_pool.empty()) {
        l1_batch.clear();
        const auto want = std::min(config.batch_size, l1_pool.size());
        while (l1_batch.size() < want) {
          if (l1_cursor == l1_pool.size()) {
            rng.shuffle(std::span<const EncodedSample*>(l1_pool));
            l1_cursor = 0;
          }
          l1_batch.push_back(l1_pool[l1_cursor++]);
        }
        run_batch(l1_batch, LossKind::l1, config.alpha);
      }
      const auto end = std::min(start + config.batch_size, l2_pool.size());
      run_batch(std::span<const EncodedSample* const>(l2_pool.data() + start, end - start), l2_kind,
                1.0 - config.alpha);
    }
    if (config.eval_every == 0 || step % config.eval_every != 0) validation_row();
  }
  return result;
}

// ---------------------------------------------------------------------------
// Learning-curve CSV: step,loss_kind,loss_value,val_anlp,val_cindex
// ---------------------------------------------------------------------------

inline void write_curve_csv(std::ostream& out, const std::vector<CurveRow>& rows) {
  auto opt = [](const std::optional<double>& v) { return v ? text::format_double(*v) : std::string(); };
  out << "step,loss_kind,loss_value,val_anlp,val_cindex\n";
  for (const auto& r : rows)
    out << r.step << ',' << r.kind << ',' << opt(r.loss) << ',' << opt(r.val_anlp) << ',' << opt(r.val_cindex) << '\n';
}

inline std::vector<CurveRow> read_curve_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != "step,loss_kind,loss_value,val_anlp,val_cindex")
    throw ParseError(1, "unexpected learning-curve header");
  std::vector<CurveRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto cells = text::split(text::trim(line), ',');
    if (cells.size() != 5) throw ParseError(line_no, "expected 5 columns");
    CurveRow row;
    const auto step = text::parse_int(cells[0]);
    if (!step) throw ParseError(line_no, "bad step");
    row.step = *step;
    row.kind = std::string(cells[1]);
    auto opt = [&](std::string_view cell) -> std::optional<double> {
      if (cell.empty()) return std::nullopt;
      const auto v = text::parse_double(cell);
      if (!v) throw ParseError(line_no, "bad number '" + std::string(cell) + "'");
      return v;
    };
    row.loss = opt(cells[2]);
    row.val_anlp = opt(cells[3]);
    row.val_cindex = opt(cells[4]);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace dlf
