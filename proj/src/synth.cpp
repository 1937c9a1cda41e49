#include "spider/synth.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <unordered_set>

#include <json.hpp>

#include "spider/error.hpp"
#include "spider/gaussian.hpp"
#include "spider/random.hpp"

namespace spider {

using nlohmann::json;

std::string_view to_string(GeneratorKind kind) {
  return kind == GeneratorKind::kRandomMlp ? "random-mlp" : "multilinear-cp";
}

GeneratorKind parse_generator_kind(std::string_view text) {
  if (text == "multilinear-cp" || text == "cp") return GeneratorKind::kMultilinearCp;
  if (text == "random-mlp" || text == "mlp") return GeneratorKind::kRandomMlp;
  throw ArgumentError("unknown generator '" + std::string(text) + "'");
}

std::vector<double> GroundTruth::input(std::span<const std::size_t> index) const {
  std::vector<double> x;
  x.reserve(rank * embeddings.size());
  for (std::size_t k = 0; k < embeddings.size(); ++k) {
    const double* row = embeddings[k].data() + index[k] * rank;
    x.insert(x.end(), row, row + rank);
  }
  return x;
}

double GroundTruth::evaluate(std::span<const std::size_t> index) const {
  shape.check_index(index);
  if (generator == GeneratorKind::kRandomMlp) {
    return bnn::forward_mean(*network, weights, input(index));
  }
  double total = 0.0;
  for (std::size_t r = 0; r < rank; ++r) {
    double product = 1.0;
    for (std::size_t k = 0; k < embeddings.size(); ++k) product *= embeddings[k][index[k] * rank + r];
    total += product;
  }
  return total;
}

namespace {

std::vector<std::vector<std::size_t>> sample_cells(const TensorShape& shape, std::size_t n, Rng& rng) {
  const std::uint64_t cells = shape.cell_count();
  if (cells != 0 && n > cells) {
    throw ArgumentError("cannot sample " + std::to_string(n) + " distinct entries from " +
                        std::to_string(cells) + " cells");
  }
  std::vector<std::vector<std::size_t>> out;
  out.reserve(n);
  auto draw = [&] {
    std::vector<std::size_t> index(shape.mode_count());
    for (std::size_t k = 0; k < index.size(); ++k) index[k] = rng.uniform_index(shape.dim(k));
    return index;
  };
  if (cells != 0) {
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(n * 2);
    while (out.size() < n) {
      auto index = draw();
      std::uint64_t linear = 0;
      for (std::size_t k = 0; k < index.size(); ++k) linear = linear * shape.dim(k) + index[k];
      if (seen.insert(linear).second) out.push_back(std::move(index));
    }
  } else {
    std::set<std::vector<std::size_t>> seen;
    while (out.size() < n) {
      auto index = draw();
      if (seen.insert(index).second) out.push_back(std::move(index));
    }
  }
  return out;
}

}  // namespace

SynthResult synth_generate(const SynthOptions& options) {
  if (options.rank == 0) throw ArgumentError("synthetic rank must be positive");
  if (!(options.noise_sd >= 0.0)) throw ArgumentError("noise sd must be nonnegative");
  if (options.mlp.sparsity < 0.0 || options.mlp.sparsity >= 1.0) {
    throw ArgumentError("sparsity must lie in [0, 1)");
  }
  const auto& shape = options.shape;
  if (shape.mode_count() == 0) throw ArgumentError("synthetic shape is empty");

  Rng rng(options.seed);
  SynthResult result;
  GroundTruth& truth = result.truth;
  truth.generator = options.generator;
  truth.kind = options.kind;
  truth.shape = shape;
  truth.rank = options.rank;
  truth.seed = options.seed;
  truth.noise_sd = options.noise_sd;

  for (std::size_t k = 0; k < shape.mode_count(); ++k) {
    std::vector<double> table(shape.dim(k) * options.rank);
    for (auto& v : table) v = rng.normal();
    truth.embeddings.push_back(std::move(table));
  }
  if (options.generator == GeneratorKind::kRandomMlp) {
    truth.network = bnn::NetworkSpec::with_hidden(options.rank * shape.mode_count(),
                                                  options.mlp.hidden, options.mlp.activation);
    truth.sparsity = options.mlp.sparsity;
    truth.weights.resize(truth.network->weight_count());
    for (auto& w : truth.weights) w = rng.normal();
    for (auto& w : truth.weights) {
      if (rng.uniform() < options.mlp.sparsity) w = 0.0;
    }
  }

  truth.indices = sample_cells(shape, options.n_entries, rng);
  truth.noiseless.reserve(options.n_entries);
  result.entries.reserve(options.n_entries);
  for (const auto& index : truth.indices) {
    const double f = truth.evaluate(index);
    truth.noiseless.push_back(f);
    double value;
    if (options.kind == ValueKind::kBinary) {
      value = rng.uniform() < gauss::cdf(f) ? 1.0 : 0.0;
    } else {
      value = f + options.noise_sd * rng.normal();
    }
    result.entries.push_back({index, value});
  }
  return result;
}

namespace {

constexpr const char* kTruthFormat = "spider-synth-truth";

template <typename T>
T get_field(const json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) {
    throw LoadError(std::string("ground truth is missing field '") + key + "'");
  }
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw LoadError(std::string("ground truth field '") + key + "': " + e.what());
  }
}

}  // namespace

void save_truth(const GroundTruth& truth, std::ostream& out) {
  json doc;
  doc["format"] = kTruthFormat;
  doc["version"] = kTruthVersion;
  doc["generator"] = std::string(to_string(truth.generator));
  doc["kind"] = std::string(to_string(truth.kind));
  doc["shape"] = std::vector<std::size_t>(truth.shape.dims().begin(), truth.shape.dims().end());
  doc["rank"] = truth.rank;
  doc["seed"] = truth.seed;
  doc["noise_sd"] = truth.noise_sd;
  doc["embeddings"] = truth.embeddings;
  if (truth.network) {
    doc["network"] = {
        {"widths", std::vector<std::size_t>(truth.network->widths().begin(), truth.network->widths().end())},
        {"activation", std::string(bnn::to_string(truth.network->activation()))},
    };
    doc["weights"] = truth.weights;
    doc["sparsity"] = truth.sparsity;
  }
  doc["indices"] = truth.indices;
  doc["noiseless"] = truth.noiseless;
  out << doc.dump() << '\n';
  if (!out) throw IoError("failed to write ground truth");
}

GroundTruth load_truth(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError(std::string("ground truth is not valid JSON: ") + e.what());
  }
  if (get_field<std::string>(doc, "format") != kTruthFormat) throw LoadError("not a ground-truth file");
  if (get_field<int>(doc, "version") != kTruthVersion) throw LoadError("unsupported ground-truth version");

  GroundTruth truth;
  try {
    truth.generator = parse_generator_kind(get_field<std::string>(doc, "generator"));
    truth.kind = parse_value_kind(get_field<std::string>(doc, "kind"));
    truth.shape = TensorShape(get_field<std::vector<std::size_t>>(doc, "shape"));
    if (truth.generator == GeneratorKind::kRandomMlp) {
      const json net = get_field<json>(doc, "network");
      truth.network = bnn::NetworkSpec(get_field<std::vector<std::size_t>>(net, "widths"),
                                       bnn::parse_any_activation(get_field<std::string>(net, "activation")));
      truth.weights = get_field<std::vector<double>>(doc, "weights");
      truth.sparsity = get_field<double>(doc, "sparsity");
    }
  } catch (const ArgumentError& e) {
    throw LoadError(std::string("invalid ground truth: ") + e.what());
  }
  truth.rank = get_field<std::size_t>(doc, "rank");
  truth.seed = get_field<std::uint64_t>(doc, "seed");
  truth.noise_sd = get_field<double>(doc, "noise_sd");
  truth.embeddings = get_field<std::vector<std::vector<double>>>(doc, "embeddings");
  truth.indices = get_field<std::vector<std::vector<std::size_t>>>(doc, "indices");
  truth.noiseless = get_field<std::vector<double>>(doc, "noiseless");

  if (truth.embeddings.size() != truth.shape.mode_count()) throw LoadError("embedding count mismatch");
  for (std::size_t k = 0; k < truth.embeddings.size(); ++k) {
    if (truth.embeddings[k].size() != truth.shape.dim(k) * truth.rank) {
      throw LoadError("embedding table size mismatch");
    }
  }
  if (truth.network && truth.weights.size() != truth.network->weight_count()) {
    throw LoadError("weight count mismatch");
  }
  if (truth.indices.size() != truth.noiseless.size()) throw LoadError("indices and values differ in length");
  for (const auto& index : truth.indices) {
    if (!truth.shape.contains(index)) throw LoadError("stored index out of range");
  }
  return truth;
}

}  // namespace spider
