#pragma once

// Embedding + LSTM + sigmoid head, with exact reverse-mode gradients and Adam.
//
// Per step j the cell input is v_j = [e, j / L, l_{j-1}] where e is the summed
// embedding of the active feature tokens:
//
//   f_j = sigma(W_f v_j + b_f)      i_j = sigma(W_i v_j + b_i)
//   o_j = sigma(W_o v_j + b_o)      g_j = tanh(W_s v_j + b_s)
//   r_j = f_j * r_{j-1} + i_j * g_j
//   l_j = o_j * tanh(r_j)
//   h_j = clamp(sigma(W_h l_j + b_h), eps, 1 - eps)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dlf/errors.hpp"
#include "dlf/rng.hpp"

namespace dlf::nn {

inline constexpr double kHazardEpsilon = 1e-6;

struct ModelDims {
  std::size_t vocab_size = 1;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
  int max_interval = 300;

  std::size_t input_dim() const noexcept { return embed_dim + 1 + hidden_dim; }
  std::size_t gate_rows() const noexcept { return 4 * hidden_dim; }
  bool operator==(const ModelDims&) const = default;
};

enum class Gate : std::size_t { forget = 0, input = 1, output = 2, cell = 3 };

struct ParameterBlock {
  std::string name;
  std::size_t offset;
  std::size_t rows;
  std::size_t cols;
};

/// All learnable weights in one flat buffer. The four gate matrices are
/// stacked row-wise (f, i, o, s) into a 4 d_h x (d_e + 1 + d_h) matrix whose
/// columns are [embedding | bid input | previous output].
class ParameterSet {
 public:
  ParameterSet() = default;

  explicit ParameterSet(const ModelDims& dims) : dims_(dims) {
    if (dims.vocab_size < 1 || dims.embed_dim < 1 || dims.hidden_dim < 1 || dims.max_interval < 1)
      throw ValidationError(ValidationCode::invalid_argument, "model dimensions must be positive");
    gate_w_ = dims.vocab_size * dims.embed_dim;
    gate_b_ = gate_w_ + dims.gate_rows() * dims.input_dim();
    head_w_ = gate_b_ + dims.gate_rows();
    head_b_ = head_w_ + dims.hidden_dim;
    values_.assign(head_b_ + 1, 0.0);
  }

  const ModelDims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  std::span<double> embedding_row(std::size_t index) {
    return {values_.data() + index * dims_.embed_dim, dims_.embed_dim};
  }
  std::span<const double> embedding_row(std::size_t index) const {
    return {values_.data() + index * dims_.embed_dim, dims_.embed_dim};
  }

  std::span<double> gate_weights() { return {values_.data() + gate_w_, gate_b_ - gate_w_}; }
  std::span<const double> gate_weights() const { return {values_.data() + gate_w_, gate_b_ - gate_w_}; }
  std::span<double> gate_weights(Gate g) {
    const auto n = dims_.hidden_dim * dims_.input_dim();
    return gate_weights().subspan(static_cast<std::size_t>(g) * n, n);
  }

  std::span<double> gate_bias() { return {values_.data() + gate_b_, dims_.gate_rows()}; }
  std::span<const double> gate_bias() const { return {values_.data() + gate_b_, dims_.gate_rows()}; }
  std::span<double> gate_bias(Gate g) {
    return gate_bias().subspan(static_cast<std::size_t>(g) * dims_.hidden_dim, dims_.hidden_dim);
  }

  std::span<double> head_weights() { return {values_.data() + head_w_, dims_.hidden_dim}; }
  std::span<const double> head_weights() const { return {values_.data() + head_w_, dims_.hidden_dim}; }
  double& head_bias() { return values_[head_b_]; }
  double head_bias() const { return values_[head_b_]; }

  /// Named row-major blocks in serialization order.
  std::vector<ParameterBlock> blocks() const {
    const auto h = dims_.hidden_dim, in = dims_.input_dim();
    std::vector<ParameterBlock> out{{"embedding", 0, dims_.vocab_size, dims_.embed_dim}};
    const char* weight_names[] = {"W_f", "W_i", "W_o", "W_s"};
    const char* bias_names[] = {"b_f", "b_i", "b_o", "b_s"};
    for (std::size_t g = 0; g < 4; ++g) out.push_back({weight_names[g], gate_w_ + g * h * in, h, in});
    for (std::size_t g = 0; g < 4; ++g) out.push_back({bias_names[g], gate_b_ + g * h, 1, h});
    out.push_back({"W_h", head_w_, 1, h});
    out.push_back({"b_h", head_b_, 1, 1});
    return out;
  }

  void fill_uniform(Rng& rng, double scale) {
    for (double& v : values_) v = rng.uniform(-scale, scale);
  }

  void set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

  ParameterSet& operator+=(const ParameterSet& other) {
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
  }

  void scale(double factor) {
    for (double& v : values_) v *= factor;
  }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  bool operator==(const ParameterSet& other) const {
    return dims_ == other.dims_ && values_ == other.values_;
  }

 private:
  ModelDims dims_{};
  std::size_t gate_w_ = 0, gate_b_ = 0, head_w_ = 0, head_b_ = 0;
  std::vector<double> values_;
};

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct CellState {
  std::vector<double> hidden;  // l_j
  std::vector<double> memory;  // r_j

  static CellState zeros(std::size_t hidden_dim) {
    return {std::vector<double>(hidden_dim, 0.0), std::vector<double>(hidden_dim, 0.0)};
  }
};

/// Sum of the embedding rows of the active indices.
inline std::vector<double> embed(std::span<const std::size_t> indices, const ParameterSet& params) {
  const auto& dims = params.dims();
  std::vector<double> e(dims.embed_dim, 0.0);
  for (const auto index : indices) {
    if (index >= dims.vocab_size)
      throw ValidationError(ValidationCode::out_of_range,
                            "feature index " + std::to_string(index) + " >= K=" + std::to_string(dims.vocab_size));
    const auto row = params.embedding_row(index);
    for (std::size_t k = 0; k < e.size(); ++k) e[k] += row[k];
  }
  return e;
}

namespace detail {

/// Gate pre-activations -> new (r, l). `pre` holds 4 d_h values (f, i, o, s).
/// Optional outputs receive the activated gates for the tape.
inline void cell_update(std::span<const double> pre, std::span<const double> memory_prev,
                        std::span<double> memory, std::span<double> memory_tanh,
                        std::span<double> hidden, double* f_out, double* i_out, double* o_out,
                        double* g_out) {
  const auto h = memory.size();
  for (std::size_t k = 0; k < h; ++k) {
    const double f = sigmoid(pre[k]);
    const double i = sigmoid(pre[h + k]);
    const double o = sigmoid(pre[2 * h + k]);
    const double g = std::tanh(pre[3 * h + k]);
    const double r = f * memory_prev[k] + i * g;
    const double t = std::tanh(r);
    memory[k] = r;
    memory_tanh[k] = t;
    hidden[k] = o * t;
    if (f_out) {
      f_out[k] = f;
      i_out[k] = i;
      o_out[k] = o;
      g_out[k] = g;
    }
  }
}

inline double head_logit(std::span<const double> hidden, const ParameterSet& params) {
  const auto w = params.head_weights();
  double a = params.head_bias();
  for (std::size_t k = 0; k < hidden.size(); ++k) a += w[k] * hidden[k];
  return a;
}

}  // namespace detail

/// One LSTM step on v = [e, bid_input, state.hidden].
inline CellState lstm_step(std::span<const double> e, double bid_input, const CellState& state,
                           const ParameterSet& params) {
  const auto& dims = params.dims();
  if (e.size() != dims.embed_dim || state.hidden.size() != dims.hidden_dim ||
      state.memory.size() != dims.hidden_dim)
    throw ValidationError(ValidationCode::invalid_argument, "lstm_step: shape mismatch");
  auto finite = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!std::isfinite(bid_input) || !finite(e) || !finite(state.hidden) || !finite(state.memory))
    throw ValidationError(ValidationCode::invalid_argument, "lstm_step: non-finite input");

  const auto in = dims.input_dim();
  std::vector<double> v;
  v.reserve(in);
  v.insert(v.end(), e.begin(), e.end());
  v.push_back(bid_input);
  v.insert(v.end(), state.hidden.begin(), state.hidden.end());

  const auto w = params.gate_weights();
  const auto b = params.gate_bias();
  std::vector<double> pre(dims.gate_rows());
  for (std::size_t r = 0; r < pre.size(); ++r) {
    double acc = b[r];
    const double* row = w.data() + r * in;
    for (std::size_t c = 0; c < in; ++c) acc += row[c] * v[c];
    pre[r] = acc;
  }
  CellState next = CellState::zeros(dims.hidden_dim);
  std::vector<double> memory_tanh(dims.hidden_dim);
  detail::cell_update(pre, state.memory, next.memory, memory_tanh, next.hidden, nullptr, nullptr,
                      nullptr, nullptr);
  return next;
}

/// Hazard from a cell output, clamped to [eps, 1 - eps].
inline double head(std::span<const double> hidden, const ParameterSet& params) {
  return std::clamp(sigmoid(detail::head_logit(hidden, params)), kHazardEpsilon, 1.0 - kHazardEpsilon);
}

/// Forward intermediates of one unrolled sequence, step-major (depth x d_h).
struct GradientTape {
  ModelDims dims;
  std::vector<std::size_t> indices;
  std::vector<double> embedding;
  int depth = 0;
  std::vector<double> forget, input, output, candidate, memory, memory_tanh, hidden;
  std::vector<double> hazard_raw;
};

struct Unroll {
  std::vector<double> hazards;
  GradientTape tape;
};

namespace detail {

inline std::vector<double> unroll(std::span<const std::size_t> indices, int depth,
                                  const ParameterSet& params, GradientTape* tape) {
  const auto& dims = params.dims();
  if (depth < 0 || depth > dims.max_interval)
    throw ValidationError(ValidationCode::out_of_range,
                          "unroll depth " + std::to_string(depth) + " outside [0, " +
                              std::to_string(dims.max_interval) + "]");
  const auto e = embed(indices, params);
  const auto hd = dims.hidden_dim, ed = dims.embed_dim, in = dims.input_dim(), rows = dims.gate_rows();
  const auto w = params.gate_weights();
  const auto b = params.gate_bias();

  // Step-invariant part of the pre-activation: b + W[:, e] e.
  std::vector<double> base(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b[r];
    const double* row = w.data() + r * in;
    for (std::size_t c = 0; c < ed; ++c) acc += row[c] * e[c];
    base[r] = acc;
  }

  const auto n = static_cast<std::size_t>(depth);
  std::vector<double> hazards(n);
  std::vector<double> pre(rows), memory_prev(hd, 0.0), hidden_prev(hd, 0.0);
  std::vector<double> memory(hd), memory_tanh(hd), hidden(hd);
  if (tape) {
    tape->dims = dims;
    tape->indices.assign(indices.begin(), indices.end());
    tape->embedding = e;
    tape->depth = depth;
    for (auto* v : {&tape->forget, &tape->input, &tape->output, &tape->candidate, &tape->memory,
                    &tape->memory_tanh, &tape->hidden})
      v->assign(n * hd, 0.0);
    tape->hazard_raw.assign(n, 0.0);
  }
  const double inv_l = 1.0 / static_cast<double>(dims.max_interval);
  for (std::size_t j = 0; j < n; ++j) {
    const double bid_input = static_cast<double>(j + 1) * inv_l;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = w.data() + r * in + ed;
      double acc = base[r] + row[0] * bid_input;
      for (std::size_t c = 0; c < hd; ++c) acc += row[1 + c] * hidden_prev[c];
      pre[r] = acc;
    }
    if (tape) {
      const auto off = j * hd;
      detail::cell_update(pre, memory_prev, {tape->memory.data() + off, hd},
                          {tape->memory_tanh.data() + off, hd}, {tape->hidden.data() + off, hd},
                          tape->forget.data() + off, tape->input.data() + off,
                          tape->output.data() + off, tape->candidate.data() + off);
      std::copy_n(tape->memory.data() + off, hd, memory_prev.begin());
      std::copy_n(tape->hidden.data() + off, hd, hidden_prev.begin());
    } else {
      detail::cell_update(pre, memory_prev, memory, memory_tanh, hidden, nullptr, nullptr, nullptr,
                          nullptr);
      memory_prev.swap(memory);
      hidden_prev.swap(hidden);
    }
    const double raw = sigmoid(head_logit(hidden_prev, params));
    if (tape) tape->hazard_raw[j] = raw;
    hazards[j] = std::clamp(raw, kHazardEpsilon, 1.0 - kHazardEpsilon);
  }
  return hazards;
}

}  // namespace detail

/// Unrolls `depth` cells for one sample and records the tape.
inline Unroll forward_unroll(std::span<const std::size_t> indices, int depth, const ParameterSet& params) {
  Unroll out;
  out.hazards = detail::unroll(indices, depth, params, &out.tape);
  return out;
}

/// Inference-only unroll; no tape is kept.
inline std::vector<double> forward_hazards(std::span<const std::size_t> indices, int depth,
                                           const ParameterSet& params) {
  return detail::unroll(indices, depth, params, nullptr);
}

/// Accumulates dLoss/dtheta into `grads` given dLoss/dh_j for every unrolled step.
inline void backward(const GradientTape& tape, std::span<const double> dhazard,
                     const ParameterSet& params, ParameterSet& grads) {
  const auto& dims = tape.dims;
  if (dhazard.size() != static_cast<std::size_t>(tape.depth))
    throw ValidationError(ValidationCode::invalid_argument,
                          "backward: " + std::to_string(dhazard.size()) + " gradients for a tape of depth " +
                              std::to_string(tape.depth));
  if (!(params.dims() == dims) || !(grads.dims() == dims))
    throw ValidationError(ValidationCode::invalid_argument, "backward: parameter shape mismatch");

  const auto hd = dims.hidden_dim, ed = dims.embed_dim, in = dims.input_dim(), rows = dims.gate_rows();
  const auto w = params.gate_weights();
  const auto head_w = params.head_weights();
  auto gw = grads.gate_weights();
  auto gb = grads.gate_bias();
  auto ghw = grads.head_weights();

  std::vector<double> d_hidden_next(hd, 0.0), d_memory_next(hd, 0.0);
  std::vector<double> d_pre(rows), d_pre_sum(rows, 0.0), d_hidden(hd);
  const double inv_l = 1.0 / static_cast<double>(dims.max_interval);
  std::vector<double> zeros(hd, 0.0);

  for (std::size_t jj = static_cast<std::size_t>(tape.depth); jj-- > 0;) {
    const auto off = jj * hd;
    const double* hidden = tape.hidden.data() + off;
    const double* hidden_prev = jj ? tape.hidden.data() + off - hd : zeros.data();
    const double* memory_prev = jj ? tape.memory.data() + off - hd : zeros.data();

    // Head. The clamp has zero derivative where it is active.
    const double raw = tape.hazard_raw[jj];
    const bool clamped = raw < kHazardEpsilon || raw > 1.0 - kHazardEpsilon;
    const double d_logit = clamped ? 0.0 : dhazard[jj] * raw * (1.0 - raw);
    for (std::size_t k = 0; k < hd; ++k) {
      ghw[k] += d_logit * hidden[k];
      d_hidden[k] = d_logit * head_w[k] + d_hidden_next[k];
    }
    grads.head_bias() += d_logit;

    for (std::size_t k = 0; k < hd; ++k) {
      const double f = tape.forget[off + k], i = tape.input[off + k], o = tape.output[off + k];
      const double g = tape.candidate[off + k], t = tape.memory_tanh[off + k];
      const double d_o = d_hidden[k] * t;
      const double d_r = d_memory_next[k] + d_hidden[k] * o * (1.0 - t * t);
      d_pre[k] = d_r * memory_prev[k] * f * (1.0 - f);
      d_pre[hd + k] = d_r * g * i * (1.0 - i);
      d_pre[2 * hd + k] = d_o * o * (1.0 - o);
      d_pre[3 * hd + k] = d_r * i * (1.0 - g * g);
      d_memory_next[k] = d_r * f;
    }

    const double bid_input = static_cast<double>(jj + 1) * inv_l;
    std::fill(d_hidden_next.begin(), d_hidden_next.end(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double dp = d_pre[r];
      d_pre_sum[r] += dp;
      if (dp == 0.0) continue;
      gb[r] += dp;
      double* grow = gw.data() + r * in + ed;
      const double* wrow = w.data() + r * in + ed;
      grow[0] += dp * bid_input;
      for (std::size_t c = 0; c < hd; ++c) {
        grow[1 + c] += dp * hidden_prev[c];
        d_hidden_next[c] += wrow[1 + c] * dp;
      }
    }
  }

  // Embedding columns see the same input at every step.
  std::vector<double> d_embed(ed, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double dp = d_pre_sum[r];
    if (dp == 0.0) continue;
    double* grow = gw.data() + r * in;
    const double* wrow = w.data() + r * in;
    for (std::size_t c = 0; c < ed; ++c) {
      grow[c] += dp * tape.embedding[c];
      d_embed[c] += wrow[c] * dp;
    }
  }
  for (const auto index : tape.indices) {
    auto row = grads.embedding_row(index);
    for (std::size_t c = 0; c < ed; ++c) row[c] += d_embed[c];
  }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  std::vector<double> first;
  std::vector<double> second;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n) : first(n, 0.0), second(n, 0.0) {}
};

/// Bias-corrected Adam update. Fails before touching anything if a gradient is non-finite.
inline void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state, double lr) {
  const auto g = grads.values();
  auto theta = params.values();
  if (g.size() != theta.size() || state.first.size() != theta.size() || state.second.size() != theta.size())
    throw ValidationError(ValidationCode::invalid_argument, "adam_step: shape mismatch");
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!std::isfinite(g[i]))
      throw ValidationError(ValidationCode::invalid_argument, "adam_step: non-finite gradient at " + std::to_string(i));
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < g.size(); ++i) {
    state.first[i] = state.beta1 * state.first[i] + (1.0 - state.beta1) * g[i];
    state.second[i] = state.beta2 * state.second[i] + (1.0 - state.beta2) * g[i] * g[i];
    const double m_hat = state.first[i] / c1;
    const double v_hat = state.second[i] / c2;
    theta[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

}  // namespace dlf::nn
