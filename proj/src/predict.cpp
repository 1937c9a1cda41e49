#include "spider/predict.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "spider/error.hpp"
#include "spider/gaussian.hpp"

namespace spider {

Prediction predict_entry(const ModelState& state, std::span<const std::size_t> index) {
  const GatheredEntry g = state.gather(index);
  const auto& w = state.weights();
  const bnn::OutputMoments m = bnn::output_moments(state.network(), w.mean, w.var, g.means, g.vars);
  if (state.kind() == ValueKind::kBinary) {
    return {gauss::cdf(m.alpha / std::sqrt(1.0 + m.beta)), std::nullopt};
  }
  return {m.alpha, m.beta + state.gamma()->b / state.gamma()->a};
}

double rmse(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.size() != truths.size() || predictions.empty()) {
    throw ArgumentError("rmse needs two nonempty sequences of equal length");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double r = predictions[i] - truths[i];
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(predictions.size()));
}

double auc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw ArgumentError("auc needs two nonempty sequences of equal length");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of midranks of the positives.
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] > 0.5) {
        positive_rank_sum += midrank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) throw MetricError("auc is undefined with a single class");
  const double np = static_cast<double>(positives);
  const double nn = static_cast<double>(negatives);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double evaluate(const ModelState& state, std::span<const ObservedEntry> test) {
  if (test.empty()) throw ArgumentError("evaluation needs a nonempty test set");
  std::vector<double> predictions(test.size());
  std::vector<double> truths(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    predictions[i] = predict_entry(state, test[i].index).value;
    truths[i] = test[i].value;
  }
  return state.kind() == ValueKind::kBinary ? auc(predictions, truths) : rmse(predictions, truths);
}

MetricSeries running_eval(ModelState& state, std::span<const EntryBatch> stream,
                          std::span<const ObservedEntry> test, const RunningEvalOptions& options) {
  if (test.empty()) throw ArgumentError("running evaluation needs a nonempty test set");
  MetricSeries series;
  series.reserve(stream.size());
  for (const auto& batch : stream) {
    const auto start = std::chrono::steady_clock::now();
    const adf::BatchReport report = adf::process_batch(state, batch, options.engine);
    const auto stop = std::chrono::steady_clock::now();
    if (options.on_batch) options.on_batch(report);
    MetricRow row;
    row.batch = batch.ordinal;
    row.seen = state.entries_seen();
    row.metric = evaluate(state, test);
    if (options.record_wallclock) {
      row.ms = std::chrono::duration<double, std::milli>(stop - start).count();
    }
    series.push_back(row);
  }
  return series;
}

void write_metric_csv(std::ostream& out, const MetricSeries& series) {
  out << "batch,seen,metric,ms\n";
  char buf[64];
  for (const auto& row : series) {
    out << row.batch << ',' << row.seen << ',' << format_double(row.metric) << ',';
    auto [p2, e2] = std::to_chars(buf, buf + sizeof(buf), row.ms, std::chars_format::fixed, 3);
    out.write(buf, p2 - buf);
    out << '\n';
  }
}

}  // namespace spider
