#pragma once

// Trained model: vocabulary + parameters, the DLF-MODEL v1 text format, and
// full-depth landscape prediction.
//
// File layout:
//   DLF-MODEL v1
//   K d_e d_h L
//   K - 1 vocabulary lines, token<TAB>index, index 1..K-1
//   per parameter block: its name on one line, then one line per row of
//   space separated values with 17 significant digits.

#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dlf/errors.hpp"
#include "dlf/landscape.hpp"
#include "dlf/neural.hpp"
#include "dlf/text.hpp"
#include "dlf/vocabulary.hpp"

namespace dlf {

inline constexpr const char* kModelHeader = "DLF-MODEL v1";

struct ModelState {
  FeatureVocabulary vocabulary;
  nn::ParameterSet params;
  nn::AdamState optimizer;

  const nn::ModelDims& dims() const { return params.dims(); }

  /// Fresh model with parameters uniform in [-scale, scale].
  static ModelState initialized(FeatureVocabulary vocabulary, std::size_t embed_dim, std::size_t hidden_dim,
                                int max_interval, std::uint64_t seed, double scale = 0.05) {
    ModelState m;
    m.params = nn::ParameterSet({vocabulary.size(), embed_dim, hidden_dim, max_interval});
    m.vocabulary = std::move(vocabulary);
    Rng rng(seed);
    if (scale > 0) m.params.fill_uniform(rng, scale);
    m.optimizer = nn::AdamState(m.params.size());
    return m;
  }
};

inline void save_model(std::ostream& out, const ModelState& model) {
  const auto& d = model.dims();
  out << kModelHeader << '\n'
      << d.vocab_size << ' ' << d.embed_dim << ' ' << d.hidden_dim << ' ' << d.max_interval << '\n';
  model.vocabulary.write(out);
  const auto values = model.params.values();
  for (const auto& block : model.params.blocks()) {
    out << block.name << '\n';
    for (std::size_t r = 0; r < block.rows; ++r) {
      for (std::size_t c = 0; c < block.cols; ++c) {
        if (c) out << ' ';
        out << text::format_double(values[block.offset + r * block.cols + c]);
      }
      out << '\n';
    }
  }
}

inline void save_model_file(const std::string& path, const ModelState& model) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  save_model(out, model);
}

inline ModelState load_model(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> std::string& {
    if (!std::getline(in, line)) throw ParseError(line_no, "unexpected end of model file");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  if (next() != kModelHeader) throw ParseError(line_no, "missing '" + std::string(kModelHeader) + "' header");
  const auto dims_fields = text::split_ws(next());
  std::vector<std::int64_t> dims_values;
  for (const auto f : dims_fields) {
    const auto v = text::parse_int(f);
    if (!v || *v < 1) throw ParseError(line_no, "bad dimension '" + std::string(f) + "'");
    dims_values.push_back(*v);
  }
  if (dims_values.size() != 4) throw ParseError(line_no, "expected 'K d_e d_h L'");
  const nn::ModelDims dims{static_cast<std::size_t>(dims_values[0]), static_cast<std::size_t>(dims_values[1]),
                           static_cast<std::size_t>(dims_values[2]), static_cast<int>(dims_values[3])};

  ModelState model;
  model.vocabulary = FeatureVocabulary::read(in, static_cast<long>(dims.vocab_size) - 1, line_no + 1);
  line_no += dims.vocab_size - 1;
  model.params = nn::ParameterSet(dims);
  auto values = model.params.values();
  for (const auto& block : model.params.blocks()) {
    if (next() != block.name)
      throw ParseError(line_no, "expected parameter block '" + block.name + "', got '" + line + "'");
    for (std::size_t r = 0; r < block.rows; ++r) {
      const auto cells = text::split_ws(next());
      if (cells.size() != block.cols)
        throw ParseError(line_no, block.name + ": expected " + std::to_string(block.cols) + " values");
      for (std::size_t c = 0; c < block.cols; ++c) {
        const auto v = text::parse_double(cells[c]);
        if (!v || !std::isfinite(*v)) throw ParseError(line_no, block.name + ": bad value '" + std::string(cells[c]) + "'");
        values[block.offset + r * block.cols + c] = *v;
      }
    }
  }
  model.optimizer = nn::AdamState(model.params.size());
  return model;
}

inline ModelState load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return load_model(in);
}

/// Full landscape over prices 1..L for a token list; unseen tokens use index 0.
inline Landscape predict_landscape(const ModelState& model, std::span<const std::string> features) {
  const auto indices = encode(features, model.vocabulary);
  return derive_curves(nn::forward_hazards(indices, model.dims().max_interval, model.params));
}

// ---------------------------------------------------------------------------
// Landscape CSV: price,h,p,W,S; rows l = 1..L, then b = L + 1 with W,S only.
// ---------------------------------------------------------------------------

inline void write_landscape_csv(std::ostream& out, const Landscape& landscape) {
  const int n = landscape.max_interval();
  out << "price,h,p,W,S\n";
  for (int l = 1; l <= n; ++l)
    out << l << ',' << text::format_double(landscape.h(l)) << ',' << text::format_double(landscape.p(l)) << ','
        << text::format_double(landscape.W(l)) << ',' << text::format_double(landscape.S(l)) << '\n';
  out << n + 1 << ",,," << text::format_double(landscape.W(n + 1)) << ','
      << text::format_double(landscape.S(n + 1)) << '\n';
}

/// Reads a landscape CSV back; the curves are rebuilt from the h column.
inline Landscape read_landscape_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || text::trim(line) != "price,h,p,W,S")
    throw ParseError(1, "expected landscape header 'price,h,p,W,S'");
  std::vector<double> hazards;
  bool terminal = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto cells = text::split(text::trim(line), ',');
    if (cells.size() != 5) throw ParseError(line_no, "expected 5 columns");
    const auto price = text::parse_int(cells[0]);
    if (!price || *price != static_cast<std::int64_t>(hazards.size()) + 1)
      throw ParseError(line_no, "prices must run 1, 2, ...");
    if (cells[1].empty()) {
      terminal = true;
      break;
    }
    const auto h = text::parse_double(cells[1]);
    if (!h) throw ParseError(line_no, "bad hazard");
    hazards.push_back(*h);
  }
  if (!terminal) throw ParseError(line_no, "missing terminal W,S row");
  return derive_curves(hazards);
}

}  // namespace dlf
