#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "spider/adf.hpp"
#include "spider/error.hpp"
#include "spider/network.hpp"
#include "spider/posterior.hpp"
#include "spider/predict.hpp"
#include "spider/random.hpp"
#include "spider/selfcheck.hpp"
#include "spider/synth.hpp"
#include "spider/tensor.hpp"

namespace spider::cli {
namespace {

using json = nlohmann::json;

struct SynthConfig {
  std::vector<std::size_t> shape;
  std::size_t rank = 3;
  std::string kind = "continuous";
  std::string generator = "multilinear-cp";
  std::vector<std::size_t> hidden{8};
  std::string activation = "tanh";
  double sparsity = 0.0;
  double noise_sd = 0.1;
  std::size_t entries = 0;
  std::uint64_t seed = 0;
  std::string train;
  std::string test;
  double test_fraction = 0.1;
  std::string truth;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SynthConfig, shape, rank, kind, generator, hidden,
                                                activation, sparsity, noise_sd, entries, seed, train,
                                                test, test_fraction, truth)

struct TrainConfig {
  std::string train;
  std::string test;
  double test_fraction = 0.1;
  std::vector<std::size_t> shape;
  std::string kind = "continuous";
  std::vector<std::size_t> ranks{8};
  std::vector<std::size_t> hidden{50, 50};
  std::string activation = "relu";
  std::size_t batch_size = 256;
  double rho0 = 0.5;
  double sigma0_sq = 1.0;
  double a0 = 1.0;
  double b0 = 1.0;
  double damping = ep::kDefaultDamping;
  std::size_t refine_every = 1;
  std::uint64_t seed = 0;
  std::string checkpoint;
  std::string metrics;
  std::string resume;
  bool wallclock = false;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, train, test, test_fraction, shape, kind,
                                                ranks, hidden, activation, batch_size, rho0,
                                                sigma0_sq, a0, b0, damping, refine_every, seed,
                                                checkpoint, metrics, resume, wallclock)

struct PredictConfig {
  std::string checkpoint;
  std::string input;
  std::string out;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PredictConfig, checkpoint, input, out)

struct EvalConfig {
  std::string checkpoint;
  std::string test;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalConfig, checkpoint, test)

struct VerifyConfig {
  std::uint64_t seed = 1;
  bool full = false;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(VerifyConfig, seed, full)

// "50,50" -> {50, 50}; "" and "none" -> {}.
std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  if (text.empty() || text == "none") return out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string_view field(text.data() + start, comma - start);
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
      throw ArgumentError("expected a comma-separated list of non-negative integers, got '" + text + "'");
    }
    out.push_back(v);
    start = comma + 1;
  }
  return out;
}

// CLI options that, when given, override the matching config key. Keys are
// the long flag names with dashes turned into underscores.
class Flags {
 public:
  explicit Flags(CLI::App* app) : app_(app) {}

  template <typename T>
  void value(const std::string& flag, const std::string& help) {
    auto holder = std::make_shared<T>();
    add(app_->add_option(flag, *holder, help), flag, [holder] { return json(*holder); });
  }

  void list(const std::string& flag, const std::string& help) {
    auto holder = std::make_shared<std::string>();
    add(app_->add_option(flag, *holder, help), flag,
        [holder] { return json(parse_size_list(*holder)); });
  }

  void flag(const std::string& flag, const std::string& help) {
    auto holder = std::make_shared<bool>(false);
    add(app_->add_flag(flag, *holder, help), flag, [holder] { return json(*holder); });
  }

  void apply(json& j) const {
    for (const auto& item : items_) {
      if (item.option->count() > 0) j[item.key] = item.to_json();
    }
  }

 private:
  struct Item {
    CLI::Option* option;
    std::string key;
    std::function<json()> to_json;
  };

  void add(CLI::Option* option, const std::string& flag, std::function<json()> to_json) {
    // The key comes from the last long name: "--rank,--ranks" -> "ranks".
    std::string name = flag.substr(flag.rfind("--") + 2);
    std::replace(name.begin(), name.end(), '-', '_');
    items_.push_back({option, name, std::move(to_json)});
  }

  CLI::App* app_;
  std::vector<Item> items_;
};

struct Command {
  CLI::App* app = nullptr;
  std::unique_ptr<Flags> flags;
  std::unique_ptr<std::string> config_path = std::make_unique<std::string>();
  std::unique_ptr<bool> dump = std::make_unique<bool>(false);
};

Command make_command(CLI::App& root, const std::string& name, const std::string& help) {
  Command c;
  c.app = root.add_subcommand(name, help);
  c.flags = std::make_unique<Flags>(c.app);
  c.app->add_option("--config", *c.config_path, "JSON file whose keys mirror the flags");
  c.app->add_flag("--dump-config", *c.dump, "Print the resolved configuration as JSON and exit");
  return c;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

void close_out(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw IoError("failed writing '" + path + "'");
}

// Defaults, then the config file, then any flags given on the command line.
template <typename Config>
json resolve(const Command& cmd) {
  json j = Config{};
  const std::string& path = *cmd.config_path;
  if (!path.empty()) {
    auto in = open_in(path);
    json file;
    try {
      file = json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParse, "config '" + path + "': " + e.what());
    }
    if (!file.is_object()) throw ArgumentError("config '" + path + "' must be a JSON object");
    for (const auto& [key, v] : file.items()) {
      if (!j.contains(key)) throw ArgumentError("unknown config key '" + key + "'");
      j[key] = v;
    }
  }
  cmd.flags->apply(j);
  return j;
}

template <typename Config>
Config as_config(const json& j) {
  try {
    return j.get<Config>();
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("bad config value: ") + e.what());
  }
}

std::vector<ObservedEntry> read_entries(const std::string& path, const TensorShape& shape, ValueKind kind) {
  auto in = open_in(path);
  try {
    return parse_coo(in, shape, kind);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

void write_entries(const std::string& path, std::span<const ObservedEntry> entries) {
  auto out = open_out(path);
  write_coo(out, entries);
  close_out(out, path);
}

std::string metric_name(ValueKind kind) { return kind == ValueKind::kBinary ? "auc" : "rmse"; }

int do_synth(const SynthConfig& c, std::ostream& out) {
  if (c.train.empty()) throw ArgumentError("synth needs --train (output path)");
  SynthOptions o;
  o.shape = TensorShape(c.shape);
  o.rank = c.rank;
  o.kind = parse_value_kind(c.kind);
  o.generator = parse_generator_kind(c.generator);
  o.mlp.hidden = c.hidden;
  o.mlp.activation = bnn::parse_activation(c.activation);
  o.mlp.sparsity = c.sparsity;
  o.noise_sd = c.noise_sd;
  o.n_entries = c.entries;
  o.seed = c.seed;
  const SynthResult data = synth_generate(o);

  std::size_t n_train = data.entries.size();
  std::size_t n_test = 0;
  if (c.test.empty()) {
    write_entries(c.train, data.entries);
  } else {
    const DatasetSplit split = split_train_test(data.entries, c.test_fraction, c.seed);
    write_entries(c.train, split.train);
    write_entries(c.test, split.test);
    n_train = split.train.size();
    n_test = split.test.size();
  }
  if (!c.truth.empty()) {
    auto f = open_out(c.truth);
    save_truth(data.truth, f);
    close_out(f, c.truth);
  }
  out << "synth train=" << n_train << " test=" << n_test << "\n";
  return 0;
}

int do_train(const TrainConfig& c, std::ostream& out) {
  if (c.train.empty()) throw ArgumentError("train needs --train (COO file)");
  if (c.batch_size == 0) throw ArgumentError("batch size must be positive");

  // Independent streams for the split, the batch order and the initial state.
  Rng seeds(c.seed);
  const std::uint64_t split_seed = seeds.next_u64();
  const std::uint64_t stream_seed = seeds.next_u64();
  const std::uint64_t init_seed = seeds.next_u64();

  std::optional<ModelState> state;
  if (!c.resume.empty()) {
    auto in = open_in(c.resume);
    state = load_checkpoint(in);
  } else {
    if (c.shape.empty()) throw ArgumentError("train needs --shape");
    TensorShape shape(c.shape);
    Hyperparams hyper;
    hyper.rho0 = c.rho0;
    hyper.sigma0_sq = c.sigma0_sq;
    hyper.a0 = c.a0;
    hyper.b0 = c.b0;
    if (c.ranks.size() == 1) {
      hyper.ranks.assign(shape.mode_count(), c.ranks[0]);
    } else {
      hyper.ranks = c.ranks;
    }
    hyper.validate(shape.mode_count());
    auto network = bnn::NetworkSpec::with_hidden(hyper.total_rank(), c.hidden,
                                                 bnn::parse_activation(c.activation));
    state = ModelState::init(shape, parse_value_kind(c.kind), std::move(network), hyper, init_seed);
  }
  const TensorShape shape = state->shape();
  const ValueKind kind = state->kind();

  std::vector<ObservedEntry> train = read_entries(c.train, shape, kind);
  std::vector<ObservedEntry> test;
  if (!c.test.empty()) {
    test = read_entries(c.test, shape, kind);
  } else if (c.test_fraction > 0.0) {
    DatasetSplit split = split_train_test(train, c.test_fraction, split_seed);
    train = std::move(split.train);
    test = std::move(split.test);
  }
  const auto batches = partition_stream(train, c.batch_size, stream_seed);

  RunningEvalOptions opts;
  opts.engine.damping = c.damping;
  opts.engine.refine_every = c.refine_every;
  opts.record_wallclock = c.wallclock;
  std::size_t clamped = 0;
  std::size_t skipped = 0;
  std::size_t inhibited = 0;
  opts.on_batch = [&](const adf::BatchReport& r) {
    clamped += r.clamped;
    skipped += r.skipped;
    if (r.refine) inhibited = r.refine->inhibited;
  };

  MetricSeries series;
  if (!test.empty()) {
    series = running_eval(*state, batches, test, opts);
  } else {
    for (const auto& b : batches) opts.on_batch(adf::process_batch(*state, b, opts.engine));
  }

  if (!c.checkpoint.empty()) {
    auto f = open_out(c.checkpoint);
    save_checkpoint(*state, f);
    close_out(f, c.checkpoint);
  }
  if (!c.metrics.empty()) {
    auto f = open_out(c.metrics);
    write_metric_csv(f, series);
    close_out(f, c.metrics);
  }

  out << "final batches=" << batches.size() << " seen=" << state->entries_seen();
  if (!series.empty()) out << ' ' << metric_name(kind) << '=' << format_double(series.back().metric);
  out << " clamped=" << clamped << " skipped=" << skipped << " inhibited=" << inhibited << "\n";
  return 0;
}

ModelState read_checkpoint(const std::string& path) {
  if (path.empty()) throw ArgumentError("--checkpoint is required");
  auto in = open_in(path);
  return load_checkpoint(in);
}

int do_predict(const PredictConfig& c, std::ostream& out) {
  const ModelState state = read_checkpoint(c.checkpoint);
  if (c.input.empty()) throw ArgumentError("predict needs --input (index or COO file)");
  auto in = open_in(c.input);
  const auto indices = parse_index_lines(in, state.shape());

  std::ofstream file;
  if (!c.out.empty()) file = open_out(c.out);
  std::ostream& dst = c.out.empty() ? out : file;
  const std::size_t k = state.shape().mode_count();
  for (std::size_t m = 0; m < k; ++m) dst << "i_" << (m + 1) << ',';
  dst << "prediction";
  if (state.kind() == ValueKind::kContinuous) dst << ",variance";
  dst << '\n';
  for (const auto& index : indices) {
    const Prediction p = predict_entry(state, index);
    for (auto i : index) dst << i << ',';
    dst << format_double(p.value);
    if (p.variance) dst << ',' << format_double(*p.variance);
    dst << '\n';
  }
  if (!c.out.empty()) close_out(file, c.out);
  return 0;
}

int do_eval(const EvalConfig& c, std::ostream& out) {
  const ModelState state = read_checkpoint(c.checkpoint);
  if (c.test.empty()) throw ArgumentError("eval needs --test (COO file)");
  const auto test = read_entries(c.test, state.shape(), state.kind());
  const double metric = evaluate(state, test);
  out << metric_name(state.kind()) << '=' << format_double(metric) << " n=" << test.size() << "\n";
  return 0;
}

int do_verify(const VerifyConfig& c, std::ostream& out) {
  selfcheck::SuiteOptions o;
  o.seed = c.seed;
  if (c.full) {
    o.mc_networks = 20;
    o.mc_samples = 1000000;
  }
  const auto results = selfcheck::run_suite(o);
  std::size_t failed = 0;
  for (const auto& r : results) {
    out << selfcheck::format_result(r) << "\n";
    if (!r.passed) ++failed;
  }
  if (failed > 0) {
    throw OracleError(std::to_string(failed) + " of " + std::to_string(results.size()) +
                      " checks failed");
  }
  return 0;
}

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  while (!text.empty() && text.back() == ' ') text.pop_back();
  return text;
}

template <typename Config, typename Exec>
int finish(const Command& cmd, std::ostream& out, Exec exec) {
  const json j = resolve<Config>(cmd);
  const Config config = as_config<Config>(j);
  if (*cmd.dump) {
    out << j.dump(2) << "\n";
    return 0;
  }
  return exec(config, out);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Streaming Bayesian deep tensor factorization", "spider"};
  app.require_subcommand(1);

  Command synth = make_command(app, "synth", "Generate a synthetic sparse tensor");
  {
    Flags& f = *synth.flags;
    f.list("--shape", "Mode sizes, e.g. 50,50,50");
    f.value<std::size_t>("--rank", "Rank of the true embeddings");
    f.value<std::string>("--kind", "continuous or binary");
    f.value<std::string>("--generator", "multilinear-cp or random-mlp");
    f.list("--hidden", "Generator hidden widths (random-mlp); 'none' for a linear map");
    f.value<std::string>("--activation", "Generator activation: relu or tanh");
    f.value<double>("--sparsity", "Probability of zeroing each generator weight");
    f.value<double>("--noise-sd", "Gaussian noise sd (continuous)");
    f.value<std::size_t>("--entries", "Number of distinct cells to sample");
    f.value<std::uint64_t>("--seed", "Random seed");
    f.value<std::string>("--train", "Output COO path (train part, or everything)");
    f.value<std::string>("--test", "Output COO path for a held-out split");
    f.value<double>("--test-fraction", "Fraction held out when --test is given");
    f.value<std::string>("--truth", "Output path for the ground-truth JSON");
  }

  Command train = make_command(app, "train", "Stream training entries through the model");
  {
    Flags& f = *train.flags;
    f.value<std::string>("--train", "Training COO file");
    f.value<std::string>("--test", "Test COO file (otherwise split off the training file)");
    f.value<double>("--test-fraction", "Held-out fraction when --test is absent; 0 disables evaluation");
    f.list("--shape", "Mode sizes, e.g. 50,50,50");
    f.value<std::string>("--kind", "continuous or binary");
    f.list("--rank,--ranks", "Embedding rank, one value for every mode or one per mode");
    f.list("--hidden", "Hidden layer widths; 'none' for a linear network");
    f.value<std::string>("--activation", "relu or tanh");
    f.value<std::size_t>("--batch-size", "Entries per streaming batch");
    f.value<double>("--rho0", "Prior inclusion probability of each weight");
    f.value<double>("--sigma0-sq", "Slab variance");
    f.value<double>("--a0", "Gamma shape of the noise precision");
    f.value<double>("--b0", "Gamma rate of the noise precision");
    f.value<double>("--damping", "EP damping in (0, 1]");
    f.value<std::size_t>("--refine-every", "Refine prior terms after every n-th batch; 0 never");
    f.value<std::uint64_t>("--seed", "Random seed");
    f.value<std::string>("--checkpoint", "Write the final state here");
    f.value<std::string>("--metrics", "Write the per-batch metric CSV here");
    f.value<std::string>("--resume", "Start from this checkpoint instead of a fresh state");
    f.flag("--wallclock", "Record per-batch wallclock in the metric CSV");
  }

  Command predict = make_command(app, "predict", "Predict entries from a checkpoint");
  {
    Flags& f = *predict.flags;
    f.value<std::string>("--checkpoint", "Checkpoint to load");
    f.value<std::string>("--input", "Index tuples, one per line (a value column is ignored)");
    f.value<std::string>("--out", "Predictions CSV (default stdout)");
  }

  Command eval = make_command(app, "eval", "Score a checkpoint on a test file");
  {
    Flags& f = *eval.flags;
    f.value<std::string>("--checkpoint", "Checkpoint to load");
    f.value<std::string>("--test", "Test COO file");
  }

  Command verify = make_command(app, "verify", "Run the oracle checks");
  {
    Flags& f = *verify.flags;
    f.value<std::uint64_t>("--seed", "Random seed for the checks");
    f.flag("--full", "Use the full Monte-Carlo budget (20 networks, 1e6 samples)");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << error_code_name(ErrorCode::kArgument) << ": " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    if (synth.app->parsed()) return finish<SynthConfig>(synth, out, do_synth);
    if (train.app->parsed()) return finish<TrainConfig>(train, out, do_train);
    if (predict.app->parsed()) return finish<PredictConfig>(predict, out, do_predict);
    if (eval.app->parsed()) return finish<EvalConfig>(eval, out, do_eval);
    return finish<VerifyConfig>(verify, out, do_verify);
  } catch (const Error& e) {
    err << "error: " << error_code_name(e.code()) << ": " << one_line(e.what()) << "\n";
    return e.code() == ErrorCode::kArgument ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: internal_error: " << one_line(e.what()) << "\n";
    return 1;
  }
}

}  // namespace spider::cli
