#include "spider/posterior.hpp"

#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include <json.hpp>

#include "spider/error.hpp"

namespace spider {

using nlohmann::json;

void Hyperparams::validate(std::size_t mode_count) const {
  if (!(rho0 > 0.0 && rho0 < 1.0)) throw ArgumentError("rho0 must lie strictly inside (0, 1)");
  if (!(sigma0_sq > 0.0) || !std::isfinite(sigma0_sq)) throw ArgumentError("sigma0_sq must be positive");
  if (!(a0 > 0.0) || !std::isfinite(a0)) throw ArgumentError("a0 must be positive");
  if (!(b0 > 0.0) || !std::isfinite(b0)) throw ArgumentError("b0 must be positive");
  if (ranks.size() != mode_count) {
    throw ArgumentError("expected " + std::to_string(mode_count) + " ranks, got " +
                        std::to_string(ranks.size()));
  }
  for (auto r : ranks) {
    if (r == 0) throw ArgumentError("ranks must be positive");
  }
}

std::size_t Hyperparams::total_rank() const {
  return std::accumulate(ranks.begin(), ranks.end(), std::size_t{0});
}

ModelState ModelState::init(TensorShape shape, ValueKind kind, bnn::NetworkSpec network,
                            Hyperparams hyper, std::uint64_t seed) {
  hyper.validate(shape.mode_count());
  if (network.input_dim() != hyper.total_rank()) {
    throw ArgumentError("network input width " + std::to_string(network.input_dim()) +
                        " does not equal the summed ranks " + std::to_string(hyper.total_rank()));
  }

  ModelState state;
  state.shape_ = std::move(shape);
  state.kind_ = kind;
  state.network_ = std::move(network);
  state.hyper_ = std::move(hyper);
  state.rng_ = Rng(seed);

  for (std::size_t k = 0; k < state.shape_.mode_count(); ++k) {
    EmbeddingTable table;
    table.rows = state.shape_.dim(k);
    table.rank = state.hyper_.ranks[k];
    table.mean.assign(table.rows * table.rank, 0.0);
    table.var.assign(table.rows * table.rank, 1.0);
    state.embeddings_.push_back(std::move(table));
  }

  const std::size_t n = state.network_.weight_count();
  const double sigma0 = std::sqrt(state.hyper_.sigma0_sq);
  auto& w = state.weights_;
  w.term_mean.resize(n);
  for (auto& m : w.term_mean) m = state.rng_.truncated_normal(sigma0);
  w.term_var.assign(n, state.hyper_.sigma0_sq);
  w.term_logit.assign(n, 0.0);
  w.mean = w.term_mean;
  w.var = w.term_var;
  // rho0 * c(0) / (rho0 * c(0) + (1 - rho0) * (1 - c(0))) = rho0.
  w.selector.assign(n, state.hyper_.rho0);

  if (kind == ValueKind::kContinuous) {
    state.gamma_ = GammaPosterior{state.hyper_.a0, state.hyper_.b0};
  }
  return state;
}

GatheredEntry ModelState::gather(std::span<const std::size_t> index) const {
  GatheredEntry out;
  gather(index, out);
  return out;
}

void ModelState::gather(std::span<const std::size_t> index, GatheredEntry& out) const {
  shape_.check_index(index);
  const std::size_t total = hyper_.total_rank();
  out.means.resize(total);
  out.vars.resize(total);
  std::size_t pos = 0;
  for (std::size_t k = 0; k < embeddings_.size(); ++k) {
    const auto& table = embeddings_[k];
    const std::size_t base = index[k] * table.rank;
    for (std::size_t t = 0; t < table.rank; ++t, ++pos) {
      out.means[pos] = table.mean[base + t];
      out.vars[pos] = table.var[base + t];
    }
  }
  out.locator.index.assign(index.begin(), index.end());
  out.locator.ranks = hyper_.ranks;
}

void ModelState::scatter(const EntryLocator& locator, std::span<const double> means,
                         std::span<const double> vars) {
  if (locator.ranks != hyper_.ranks || !shape_.contains(locator.index)) {
    throw ArgumentError("locator does not belong to this state");
  }
  const std::size_t total = hyper_.total_rank();
  if (means.size() != total || vars.size() != total) {
    throw ArgumentError("scatter expects " + std::to_string(total) + " means and variances");
  }
  for (std::size_t i = 0; i < total; ++i) {
    if (!std::isfinite(means[i])) throw ArgumentError("scatter of a non-finite mean");
    if (!(vars[i] > 0.0) || !std::isfinite(vars[i])) {
      throw ArgumentError("scatter of a nonpositive or non-finite variance");
    }
  }
  std::size_t pos = 0;
  for (std::size_t k = 0; k < embeddings_.size(); ++k) {
    auto& table = embeddings_[k];
    const std::size_t base = locator.index[k] * table.rank;
    for (std::size_t t = 0; t < table.rank; ++t, ++pos) {
      table.mean[base + t] = means[pos];
      table.var[base + t] = vars[pos];
    }
  }
}

std::size_t ModelState::stored_scalar_count() const {
  std::size_t count = 6 * weights_.size();
  for (const auto& table : embeddings_) count += table.mean.size() + table.var.size();
  if (gamma_) count += 2;
  return count;
}

// ---- checkpoints ----

namespace {

constexpr const char* kCheckpointFormat = "spider-checkpoint";

template <typename T>
T field(const json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) {
    throw LoadError(std::string("checkpoint is missing field '") + key + "'");
  }
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw LoadError(std::string("checkpoint field '") + key + "' has the wrong type: " + e.what());
  }
}

std::vector<double> sized_array(const json& doc, const char* key, std::size_t n) {
  auto values = field<std::vector<double>>(doc, key);
  if (values.size() != n) {
    throw LoadError(std::string("checkpoint array '") + key + "' has length " +
                    std::to_string(values.size()) + ", expected " + std::to_string(n));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw LoadError(std::string("non-finite value in '") + key + "'");
  }
  return values;
}

void require_positive(std::span<const double> values, const char* key) {
  for (double v : values) {
    if (!(v > 0.0)) throw LoadError(std::string("nonpositive variance in '") + key + "'");
  }
}

}  // namespace

void save_checkpoint(const ModelState& state, std::ostream& out) {
  json doc;
  doc["format"] = kCheckpointFormat;
  doc["version"] = kCheckpointVersion;
  doc["kind"] = std::string(to_string(state.kind()));
  doc["shape"] = std::vector<std::size_t>(state.shape().dims().begin(), state.shape().dims().end());

  const auto& net = state.network();
  doc["network"] = {
      {"widths", std::vector<std::size_t>(net.widths().begin(), net.widths().end())},
      {"activation", std::string(bnn::to_string(net.activation()))},
  };

  const auto& h = state.hyper();
  doc["hyper"] = {{"rho0", h.rho0}, {"sigma0_sq", h.sigma0_sq}, {"a0", h.a0},
                  {"b0", h.b0},     {"ranks", h.ranks}};

  json tables = json::array();
  for (const auto& t : state.embeddings()) {
    tables.push_back({{"rows", t.rows}, {"rank", t.rank}, {"mean", t.mean}, {"var", t.var}});
  }
  doc["embeddings"] = std::move(tables);

  const auto& w = state.weights();
  doc["weights"] = {{"mean", w.mean},           {"var", w.var},
                    {"selector", w.selector},   {"term_mean", w.term_mean},
                    {"term_var", w.term_var},   {"term_logit", w.term_logit}};

  if (state.gamma()) {
    doc["gamma"] = {{"a", state.gamma()->a}, {"b", state.gamma()->b}};
  } else {
    doc["gamma"] = nullptr;
  }
  doc["entries_seen"] = state.entries_seen();
  doc["rng_state"] = state.rng().serialize();

  out << doc.dump() << '\n';
  if (!out) throw IoError("failed to write checkpoint");
}

ModelState load_checkpoint(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (field<std::string>(doc, "format") != kCheckpointFormat) {
    throw LoadError("not a spider checkpoint");
  }
  const int version = field<int>(doc, "version");
  if (version != kCheckpointVersion) {
    throw LoadError("unsupported checkpoint version " + std::to_string(version));
  }

  ModelState state;
  try {
    state.kind_ = parse_value_kind(field<std::string>(doc, "kind"));
    state.shape_ = TensorShape(field<std::vector<std::size_t>>(doc, "shape"));
    const json net = field<json>(doc, "network");
    state.network_ = bnn::NetworkSpec(field<std::vector<std::size_t>>(net, "widths"),
                                      bnn::parse_any_activation(field<std::string>(net, "activation")));
    const json hyper = field<json>(doc, "hyper");
    state.hyper_.rho0 = field<double>(hyper, "rho0");
    state.hyper_.sigma0_sq = field<double>(hyper, "sigma0_sq");
    state.hyper_.a0 = field<double>(hyper, "a0");
    state.hyper_.b0 = field<double>(hyper, "b0");
    state.hyper_.ranks = field<std::vector<std::size_t>>(hyper, "ranks");
    state.hyper_.validate(state.shape_.mode_count());
  } catch (const ArgumentError& e) {
    throw LoadError(std::string("invalid checkpoint header: ") + e.what());
  }
  if (state.network_.input_dim() != state.hyper_.total_rank()) {
    throw LoadError("checkpoint network input width disagrees with the ranks");
  }

  const json tables = field<json>(doc, "embeddings");
  if (!tables.is_array() || tables.size() != state.shape_.mode_count()) {
    throw LoadError("checkpoint needs one embedding table per mode");
  }
  for (std::size_t k = 0; k < tables.size(); ++k) {
    EmbeddingTable t;
    t.rows = field<std::size_t>(tables[k], "rows");
    t.rank = field<std::size_t>(tables[k], "rank");
    if (t.rows != state.shape_.dim(k) || t.rank != state.hyper_.ranks[k]) {
      throw LoadError("embedding table " + std::to_string(k) + " has the wrong size");
    }
    t.mean = sized_array(tables[k], "mean", t.rows * t.rank);
    t.var = sized_array(tables[k], "var", t.rows * t.rank);
    require_positive(t.var, "var");
    state.embeddings_.push_back(std::move(t));
  }

  const json w = field<json>(doc, "weights");
  const std::size_t n = state.network_.weight_count();
  state.weights_.mean = sized_array(w, "mean", n);
  state.weights_.var = sized_array(w, "var", n);
  state.weights_.selector = sized_array(w, "selector", n);
  state.weights_.term_mean = sized_array(w, "term_mean", n);
  state.weights_.term_var = sized_array(w, "term_var", n);
  state.weights_.term_logit = sized_array(w, "term_logit", n);
  require_positive(state.weights_.var, "var");
  require_positive(state.weights_.term_var, "term_var");
  for (double p : state.weights_.selector) {
    if (!(p >= 0.0 && p <= 1.0)) throw LoadError("selector probability outside [0, 1]");
  }

  const json gamma = field<json>(doc, "gamma");
  if (state.kind_ == ValueKind::kContinuous) {
    GammaPosterior g{field<double>(gamma, "a"), field<double>(gamma, "b")};
    if (!(g.a > 0.0 && g.b > 0.0) || !std::isfinite(g.a) || !std::isfinite(g.b)) {
      throw LoadError("gamma posterior must have positive parameters");
    }
    state.gamma_ = g;
  } else if (!gamma.is_null()) {
    throw LoadError("binary checkpoint carries a gamma posterior");
  }

  state.entries_seen_ = field<std::uint64_t>(doc, "entries_seen");
  state.rng_ = Rng::deserialize(field<std::string>(doc, "rng_state"));
  return state;
}

}  // namespace spider
