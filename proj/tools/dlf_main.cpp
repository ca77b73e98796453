// dlf: command-line front end. Exit codes: 0 success, 1 internal or check
// failure, 2 usage or validation error.

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dlf/dlf.hpp"

namespace {

using namespace dlf;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return in;
}

template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path == "-") {
    fn(std::cout);
    return;
  }
  auto out = open_output(path);
  fn(out);
}

std::vector<AuctionRecord> read_optional_records(const std::string& path, const PriceGrid& grid) {
  if (path.empty()) return {};
  return read_records_file(path, grid);
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  std::string spec, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
};

int run_synth(const SynthArgs& a) {
  auto spec = read_market_spec_file(a.spec);
  if (a.seed) spec.seed = *a.seed;
  if (a.samples) spec.samples = *a.samples;
  const auto records = generate(spec);
  auto out = open_output(a.out);
  write_full_records(out, records, PriceGrid(spec.max_price));
  return kExitOk;
}

// --- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string in, policy = "uniform:1:300", out_win, out_lose, vocab, schema;
  std::string delimiter = "\t";
  bool skip_header = false;
  std::uint64_t seed = 1;
  int max_price = PriceGrid::kDefaultMaxInterval;
};

int run_simulate(const SimulateArgs& a) {
  const PriceGrid grid(a.max_price);
  if (a.delimiter.size() != 1) throw ValidationError(ValidationCode::invalid_argument, "delimiter must be one character");
  const auto schema = a.schema.empty() ? LogSchema::canonical() : LogSchema::parse(a.schema, a.delimiter[0]);
  const auto full = read_full_records_file(a.in, schema, a.skip_header);
  const auto dataset = simulate_censorship(full, parse_bid_policy(a.policy), a.seed, grid);
  auto win = open_output(a.out_win);
  auto lose = open_output(a.out_lose);
  for (const auto& r : dataset.records) (r.won ? win : lose) << format_record_line(r) << '\n';
  if (!a.vocab.empty()) {
    auto out = open_output(a.vocab);
    dataset.vocabulary.write(out);
  }
  return kExitOk;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string win, lose, out_model, out_curves, mode = "full";
  TrainConfig config;
};

int run_train(TrainArgs a) {
  a.config.mode = parse_censorship_mode(a.mode);
  if (a.config.mode == CensorshipMode::full && a.lose.empty())
    throw ValidationError(ValidationCode::invalid_argument, "full censorship mode needs --lose");
  const PriceGrid grid(a.config.max_interval);
  auto records = read_records_file(a.win, grid);
  for (auto& r : read_optional_records(a.lose, grid)) records.push_back(std::move(r));
  const auto result = train(records, a.config);
  save_model_file(a.out_model, result.model);
  auto curves = open_output(a.out_curves);
  write_curve_csv(curves, result.curve);
  return kExitOk;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string model, test, test_full, out = "-", out_samples, compare;
  std::size_t workers = 1;
};

int run_eval(const EvalArgs& a) {
  const auto model = load_model_file(a.model);
  const PriceGrid grid(model.dims().max_interval);
  const auto test = read_records_file(a.test, grid);
  std::vector<FullRecord> full;
  if (!a.test_full.empty()) full = read_full_records_file(a.test_full);
  auto evaluation = evaluate(model, test, full, a.workers);
  if (evaluation.nlp.empty())
    throw ValidationError(ValidationCode::invalid_argument, "test set has no observed market prices");
  if (!a.compare.empty()) {
    auto in = open_input(a.compare);
    const auto other = read_sample_scores(in);
    compare_against(evaluation, other.nlp, other.concordance);
  }
  with_output(a.out, [&](std::ostream& out) { write_metrics(out, evaluation.report); });
  if (!a.out_samples.empty()) {
    auto out = open_output(a.out_samples);
    write_sample_scores(out, evaluation);
  }
  return kExitOk;
}

// --- predict ---------------------------------------------------------------

struct PredictArgs {
  std::string model, features, record, out = "-";
  std::size_t bench = 0;
};

int run_predict(const PredictArgs& a) {
  const auto model = load_model_file(a.model);
  std::vector<std::string> tokens;
  if (!a.record.empty()) {
    const auto records = read_records_file(a.record, PriceGrid(model.dims().max_interval));
    if (records.empty()) throw ValidationError(ValidationCode::invalid_argument, a.record + " holds no record");
    tokens = records.front().features;
  } else {
    for (const auto t : text::split_ws(a.features)) tokens.emplace_back(t);
  }
  const auto landscape = predict_landscape(model, tokens);
  with_output(a.out, [&](std::ostream& out) { write_landscape_csv(out, landscape); });
  if (a.bench > 0) {
    const auto start = std::chrono::steady_clock::now();
    double sink = 0.0;
    for (std::size_t i = 0; i < a.bench; ++i) sink += predict_landscape(model, tokens).S(1);
    const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;
    std::cerr << "mean_latency_ms=" << elapsed.count() / static_cast<double>(a.bench) << " (checksum " << sink
              << ")\n";
  }
  return kExitOk;
}

// --- km --------------------------------------------------------------------

struct KmArgs {
  std::string win, lose, out = "-", group, test;
  int max_price = PriceGrid::kDefaultMaxInterval;
};

int run_km(const KmArgs& a) {
  const PriceGrid grid(a.max_price);
  auto records = read_optional_records(a.win, grid);
  for (auto& r : read_optional_records(a.lose, grid)) records.push_back(std::move(r));
  if (records.empty()) throw ValidationError(ValidationCode::invalid_argument, "km needs --win and/or --lose records");
  if (!a.group.empty()) {
    const auto curves = km_fit_grouped(records, grid, a.group);
    with_output(a.out, [&](std::ostream& out) { write_km_csv(out, curves); });
    return kExitOk;
  }
  const auto curve = km_fit(records, grid);
  with_output(a.out, [&](std::ostream& out) { write_km_csv(out, curve); });
  if (!a.test.empty()) {
    const auto test = read_records_file(a.test, grid);
    std::cerr << "km_anlp=" << text::format_double(km_anlp_floor(curve, test)) << '\n';
  }
  return kExitOk;
}

// --- gradcheck -------------------------------------------------------------

struct GradcheckArgs {
  std::uint64_t seed = 1;
  bool corrupt = false;
  double eps = 1e-4;
  double alpha = 0.25;
};

int run_gradcheck(const GradcheckArgs& a) {
  constexpr int kIntervals = 8;
  constexpr std::size_t kTokens = 5;
  Rng rng(a.seed);
  std::vector<EncodedSample> batch;
  for (int i = 0; i < 8; ++i) {
    EncodedSample s;
    for (std::size_t t = 0; t < 2; ++t) s.indices.push_back(static_cast<std::size_t>(rng.uniform_int(0, kTokens)));
    s.bid = static_cast<int>(rng.uniform_int(2, kIntervals + 1));
    s.won = i % 2 == 0;
    s.market_price = s.won ? static_cast<int>(rng.uniform_int(1, s.bid - 1)) : 0;
    batch.push_back(s);
  }
  nn::ParameterSet params({kTokens + 1, 4, 4, kIntervals});
  params.fill_uniform(rng, 0.5);
  // The corrupted run doubles the analytic gradient of the first head weight.
  const auto corrupt_at = params.blocks()[9].offset;
  auto objective = [&](const nn::ParameterSet& p, nn::ParameterSet* grads) {
    const double loss = total_objective(p, batch, a.alpha, grads);
    if (grads && a.corrupt) grads->values()[corrupt_at] *= 2.0;
    return loss;
  };
  const auto result = gradient_check(params, objective, a.eps);
  std::cout << "max_relative_error=" << text::format_double(result.max_relative_error) << '\n'
            << "coordinates_checked=" << result.checked << '\n';
  return result.max_relative_error < 1e-4 ? kExitOk : kExitFailure;
}

// --- stats -----------------------------------------------------------------

struct StatsArgs {
  std::string win, lose;
  int max_price = PriceGrid::kDefaultMaxInterval;
};

int run_stats(const StatsArgs& a) {
  const PriceGrid grid(a.max_price);
  auto records = read_optional_records(a.win, grid);
  for (auto& r : read_optional_records(a.lose, grid)) records.push_back(std::move(r));
  write_stats(std::cout, dataset_stats(records));
  return kExitOk;
}

// --- train --config ---------------------------------------------------------

std::vector<std::string> config_keys(const CLI::App& train_cmd) {
  std::vector<std::string> keys;
  for (const auto* opt : train_cmd.get_options()) {
    const auto& names = opt->get_lnames();
    if (!names.empty() && names.front() != "help" && names.front() != "config") keys.push_back(names.front());
  }
  return keys;
}

// Replaces `train --config FILE` with the file's `key = value` pairs as
// flags. Flags given on the command line win over the file.
void expand_train_config(std::vector<std::string>& args, const CLI::App& train_cmd) {
  if (args.empty() || args.front() != "train") return;
  std::string file;
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      file = args[++i];
    } else if (text::starts_with(args[i], "--config=")) {
      file = args[i].substr(9);
    } else {
      kept.push_back(args[i]);
    }
  }
  if (file.empty()) return;
  auto in = open_input(file);
  const auto keys = config_keys(train_cmd);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = text::trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, file + ": expected key = value");
    const std::string key(text::trim(view.substr(0, eq)));
    const std::string value(text::trim(view.substr(eq + 1)));
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ParseError(line_no, file + ": unknown key '" + key + "'");
    const auto flag = "--" + key;
    const bool on_command_line = std::any_of(kept.begin(), kept.end(), [&](const std::string& a) {
      return a == flag || text::starts_with(a, flag + "=");
    });
    if (!on_command_line) {
      kept.push_back(flag);
      kept.push_back(value);
    }
  }
  args = std::move(kept);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forecast market-price landscapes from censored bid logs"};
  app.require_subcommand(1);
  std::function<int()> command;

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate full-information auctions from a market spec");
  synth_cmd->add_option("--spec", synth.spec, "Market spec file")->required()->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", synth.out, "Output TSV (won=1, bid=L, price=z)")->required();
  synth_cmd->add_option("--seed", synth.seed, "Override the spec seed");
  synth_cmd->add_option("--samples", synth.samples, "Override the spec sample count");
  synth_cmd->callback([&] { command = [&] { return run_synth(synth); }; });

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Replay full-information auctions with a bid policy");
  sim_cmd->add_option("--in", sim.in, "Full-information log")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--policy", sim.policy, "constant:C | uniform:LO:HI | truthful:SCALE | logged")
      ->capture_default_str();
  sim_cmd->add_option("--seed", sim.seed, "Bid policy seed")->capture_default_str();
  sim_cmd->add_option("--out-win", sim.out_win, "Won auctions (canonical TSV)")->required();
  sim_cmd->add_option("--out-lose", sim.out_lose, "Lost auctions (canonical TSV)")->required();
  sim_cmd->add_option("--vocab", sim.vocab, "Write the feature vocabulary here");
  sim_cmd->add_option("--schema", sim.schema, "Column spec name=col,... (default: canonical layout)");
  sim_cmd->add_option("--delimiter", sim.delimiter, "Column delimiter for --schema logs");
  sim_cmd->add_flag("--skip-header", sim.skip_header, "Ignore the first line of the input");
  sim_cmd->add_option("--max-price", sim.max_price, "Price grid size L")->capture_default_str();
  sim_cmd->callback([&] { command = [&] { return run_simulate(sim); }; });

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a landscape model on won/lost logs");
  std::string config_file;
  train_cmd->add_option("--config", config_file, "Flat key=value file; keys are the long flag names");
  train_cmd->add_option("--win", tr.win, "Won auctions (canonical TSV)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--lose", tr.lose, "Lost auctions (canonical TSV)")->check(CLI::ExistingFile);
  train_cmd->add_option("--out-model", tr.out_model, "Model file")->required();
  train_cmd->add_option("--out-curves", tr.out_curves, "Learning-curve CSV")->required();
  train_cmd->add_option("--censorship-mode", tr.mode, "full | win-only")->capture_default_str();
  train_cmd->add_option("--alpha", tr.config.alpha, "Weight of L1 against L2")->capture_default_str();
  train_cmd->add_option("--lr", tr.config.learning_rate, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--final-lr", tr.config.final_learning_rate, "Decay the rate linearly to this value");
  train_cmd->add_option("--batch-size", tr.config.batch_size, "Samples per batch")->capture_default_str();
  train_cmd->add_option("--epochs", tr.config.epochs, "Passes over the training data")->capture_default_str();
  train_cmd->add_option("--seed", tr.config.seed, "Initialization and shuffling seed")->capture_default_str();
  train_cmd->add_option("--embed-dim", tr.config.embed_dim, "Embedding width")->capture_default_str();
  train_cmd->add_option("--hidden-dim", tr.config.hidden_dim, "LSTM width")->capture_default_str();
  train_cmd->add_option("--max-price", tr.config.max_interval, "Price grid size L")->capture_default_str();
  train_cmd->add_option("--min-count", tr.config.min_count, "Vocabulary frequency threshold")->capture_default_str();
  train_cmd->add_option("--init-scale", tr.config.init_scale, "Uniform init half-width")->capture_default_str();
  train_cmd->add_option("--validation-fraction", tr.config.validation_fraction, "Tail share held out")
      ->capture_default_str();
  train_cmd->add_option("--eval-every", tr.config.eval_every, "Validation every N batches (0: per epoch)")
      ->capture_default_str();
  train_cmd->add_option("--workers", tr.config.workers, "Threads per batch")->capture_default_str();
  train_cmd->callback([&] { command = [&] { return run_train(tr); }; });

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score a model on a test set");
  eval_cmd->add_option("--model", ev.model, "Model file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--test", ev.test, "Test auctions (canonical TSV)")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--test-full", ev.test_full, "Full-information test log used for ANLP")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", ev.out, "Metrics file ('-' for stdout)")->capture_default_str();
  eval_cmd->add_option("--out-samples", ev.out_samples, "Per-sample scores CSV");
  eval_cmd->add_option("--compare", ev.compare, "Per-sample scores of another model")->check(CLI::ExistingFile);
  eval_cmd->add_option("--workers", ev.workers, "Prediction threads")->capture_default_str();
  eval_cmd->callback([&] { command = [&] { return run_eval(ev); }; });

  PredictArgs pr;
  auto* predict_cmd = app.add_subcommand("predict", "Write the landscape of one auction");
  predict_cmd->add_option("--model", pr.model, "Model file")->required()->check(CLI::ExistingFile);
  auto* features_opt = predict_cmd->add_option("--features", pr.features, "Space separated field:value tokens");
  auto* record_opt =
      predict_cmd->add_option("--record", pr.record, "Canonical TSV; the first record is used")->check(CLI::ExistingFile);
  features_opt->excludes(record_opt);
  predict_cmd->add_option("--out", pr.out, "Landscape CSV ('-' for stdout)")->capture_default_str();
  predict_cmd->add_option("--bench", pr.bench, "Also time N predictions and report the mean");
  predict_cmd->callback([&] { command = [&] { return run_predict(pr); }; });

  KmArgs km;
  auto* km_cmd = app.add_subcommand("km", "Kaplan-Meier market-price baseline");
  km_cmd->add_option("--win", km.win, "Won auctions")->check(CLI::ExistingFile);
  km_cmd->add_option("--lose", km.lose, "Lost auctions")->check(CLI::ExistingFile);
  km_cmd->add_option("--out", km.out, "KM CSV ('-' for stdout)")->capture_default_str();
  km_cmd->add_option("--group", km.group, "Fit one curve per value of this feature field");
  km_cmd->add_option("--test", km.test, "Report the curve's ANLP on these records")->check(CLI::ExistingFile);
  km_cmd->add_option("--max-price", km.max_price, "Price grid size L")->capture_default_str();
  km_cmd->callback([&] { command = [&] { return run_km(km); }; });

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Check analytic gradients against finite differences");
  gc_cmd->add_option("--seed", gc.seed, "Seed for the random model and batch")->capture_default_str();
  gc_cmd->add_flag("--corrupt", gc.corrupt, "Deliberately break one gradient entry");
  gc_cmd->add_option("--eps", gc.eps, "Finite-difference step")->capture_default_str();
  gc_cmd->add_option("--alpha", gc.alpha, "Loss weight")->capture_default_str();
  gc_cmd->callback([&] { command = [&] { return run_gradcheck(gc); }; });

  StatsArgs st;
  auto* stats_cmd = app.add_subcommand("stats", "Dataset statistics (count, win rate, average market price)");
  stats_cmd->add_option("--win", st.win, "Won auctions")->check(CLI::ExistingFile);
  stats_cmd->add_option("--lose", st.lose, "Lost auctions")->check(CLI::ExistingFile);
  stats_cmd->add_option("--max-price", st.max_price, "Price grid size L")->capture_default_str();
  stats_cmd->callback([&] { command = [&] { return run_stats(st); }; });

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    expand_train_config(args, *train_cmd);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\nvalid keys:";
    for (const auto& key : config_keys(*train_cmd)) std::cerr << ' ' << key;
    std::cerr << '\n';
    return kExitUsage;
  }
  try {
    std::reverse(args.begin(), args.end());  // CLI11 consumes the vector from the back
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return command();
  } catch (const ValidationError& e) {
    std::cerr << "validation error [" << code_name(e.code()) << "]: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kExitFailure;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitFailure;
  }
}
