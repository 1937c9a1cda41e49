#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "spider/adf.hpp"
#include "spider/posterior.hpp"
#include "spider/tensor.hpp"

namespace spider {

/// Continuous: predictive mean and variance beta + b/a.
/// Binary: probability Phi(alpha / sqrt(1 + beta)); no variance.
struct Prediction {
  double value = 0.0;
  std::optional<double> variance;
};

Prediction predict_entry(const ModelState& state, std::span<const std::size_t> index);

double rmse(std::span<const double> predictions, std::span<const double> truths);

/// Mann-Whitney AUC; tied scores contribute one half.
double auc(std::span<const double> scores, std::span<const double> labels);

/// RMSE (continuous) or AUC (binary) of the state's predictions on a test set.
double evaluate(const ModelState& state, std::span<const ObservedEntry> test);

struct MetricRow {
  std::size_t batch = 0;
  std::uint64_t seen = 0;
  double metric = 0.0;
  double ms = 0.0;

  bool operator==(const MetricRow&) const = default;
};

using MetricSeries = std::vector<MetricRow>;

struct RunningEvalOptions {
  adf::EngineOptions engine;
  /// When false the ms column is written as 0 so that repeated runs produce
  /// identical output.
  bool record_wallclock = false;
  /// Called with each batch's diagnostics.
  std::function<void(const adf::BatchReport&)> on_batch;
};

/// Processes the stream batch by batch, scoring the full test set after each.
MetricSeries running_eval(ModelState& state, std::span<const EntryBatch> stream,
                          std::span<const ObservedEntry> test, const RunningEvalOptions& options = {});

/// Header `batch,seen,metric,ms`.
void write_metric_csv(std::ostream& out, const MetricSeries& series);

}  // namespace spider
