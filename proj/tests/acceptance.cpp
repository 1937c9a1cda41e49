// Acceptance suite. `acceptance N` runs one criterion, no argument runs all.
// Prints one line per criterion and exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "spider/predict.hpp"
#include "spider/selfcheck.hpp"
#include "spider/synth.hpp"

using namespace spider;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Outcome from_checks(const std::vector<selfcheck::CheckResult>& checks, double seconds,
                    std::optional<double> budget = std::nullopt) {
  Outcome o{!budget || seconds <= *budget, ""};
  for (const auto& c : checks) {
    o.passed = o.passed && c.passed;
    o.detail += selfcheck::format_result(c) + "; ";
  }
  o.detail += budget ? fmt("%.2fs (limit %.0fs)", seconds, *budget) : fmt("%.2fs", seconds);
  return o;
}

Outcome gradient() {
  const auto t = Clock::now();
  const auto r = selfcheck::check_gradient(100, 11);
  return from_checks({r}, seconds_since(t), 10.0);
}

Outcome output_moments() {
  const auto t = Clock::now();
  const auto r = selfcheck::check_output_moments(20, 1000000, 12);
  return from_checks({r}, seconds_since(t), 60.0);
}

Outcome evidence() {
  const auto t = Clock::now();
  const auto a = selfcheck::check_binary_evidence(5000, 13);
  const auto b = selfcheck::check_continuous_partials(2000, 14);
  return from_checks({a, b}, seconds_since(t));
}

Outcome conjugate() {
  const auto t = Clock::now();
  return from_checks({selfcheck::check_conjugate(1000, 15)}, seconds_since(t));
}

Outcome tilted() {
  const auto t = Clock::now();
  return from_checks({selfcheck::check_tilted_moments(1000, 16)}, seconds_since(t));
}

Outcome tau() {
  const auto t = Clock::now();
  return from_checks({selfcheck::check_tau_recursion(1000, 17)}, seconds_since(t));
}

struct Experiment {
  SynthResult synth;
  DatasetSplit split;
};

Experiment make_data(SynthOptions o, std::size_t test_count) {
  Experiment e;
  e.synth = synth_generate(o);
  e.split = split_train_test(e.synth.entries, static_cast<double>(test_count) / o.n_entries, o.seed + 1);
  return e;
}

ModelState make_model(const Experiment& e, std::vector<std::size_t> ranks, std::vector<std::size_t> hidden,
                      bnn::Activation act, std::uint64_t seed) {
  Hyperparams h;
  h.ranks = std::move(ranks);
  const auto net = bnn::NetworkSpec::with_hidden(h.total_rank(), hidden, act);
  return ModelState::init(e.synth.truth.shape, e.synth.truth.kind, net, h, seed);
}

Outcome continuous_recovery() {
  SynthOptions o;
  o.shape = TensorShape(std::vector<std::size_t>{50, 50, 50});
  o.rank = 3;
  o.noise_sd = 0.1;
  o.n_entries = 22000;
  o.seed = 21;
  const auto e = make_data(o, 2000);

  // Noise floor: the true noiseless generator scored on the noisy test set.
  std::vector<double> truth, observed;
  for (const auto& x : e.split.test) {
    truth.push_back(e.synth.truth.evaluate(x.index));
    observed.push_back(x.value);
  }
  const double floor = rmse(truth, observed);

  const auto t = Clock::now();
  auto state = make_model(e, {3, 3, 3}, {50, 50}, bnn::Activation::kRelu, 22);
  const auto series = running_eval(state, partition_stream(e.split.train, 256, 23), e.split.test);
  const double secs = seconds_since(t);
  const double first = series.front().metric, last = series.back().metric;
  const bool ok = last <= 1.5 * floor && last < first && secs <= 300.0;
  return {ok, fmt("rmse first=%.4f final=%.4f floor=%.4f limit=%.4f; %.1fs (limit 300s)", first, last, floor,
                  1.5 * floor, secs)};
}

Outcome binary_recovery() {
  SynthOptions o;
  o.shape = TensorShape(std::vector<std::size_t>{50, 50, 50});
  o.rank = 3;
  o.kind = ValueKind::kBinary;
  o.generator = GeneratorKind::kRandomMlp;
  o.mlp.hidden = {10};
  o.mlp.activation = bnn::Activation::kTanh;
  o.n_entries = 22000;
  o.seed = 31;
  const auto e = make_data(o, 2000);

  std::vector<double> bayes, labels;
  for (const auto& x : e.split.test) {
    bayes.push_back(0.5 * std::erfc(-e.synth.truth.evaluate(x.index) / std::sqrt(2.0)));
    labels.push_back(x.value);
  }
  const double bayes_auc = auc(bayes, labels);

  auto state = make_model(e, {8, 8, 8}, {50, 50}, bnn::Activation::kRelu, 32);
  const auto series = running_eval(state, partition_stream(e.split.train, 256, 33), e.split.test);
  const double final_auc = series.back().metric;

  std::vector<double> scores;
  for (const auto& x : e.split.test) scores.push_back(predict_entry(state, x.index).value);
  Rng rng(34);
  std::vector<double> shuffled(labels), null_aucs;
  for (int i = 0; i < 1000; ++i) {
    rng.shuffle(std::span<double>(shuffled));
    null_aucs.push_back(auc(scores, shuffled));
  }
  const double mean = std::accumulate(null_aucs.begin(), null_aucs.end(), 0.0) / null_aucs.size();
  double ss = 0.0;
  for (double a : null_aucs) ss += (a - mean) * (a - mean);
  const double sd = std::sqrt(ss / (null_aucs.size() - 1));
  const double null_bar = 0.5 + 3.0 * sd;
  const bool ok = final_auc >= 0.8 * bayes_auc && final_auc > null_bar;
  return {ok, fmt("auc=%.4f bayes=%.4f limit=%.4f null 0.5+3sd=%.4f (null mean %.4f)", final_auc, bayes_auc,
                  0.8 * bayes_auc, null_bar, mean)};
}

Outcome sparsity() {
  // Linear generator over rank-1 embeddings: each weight scales one mode, so a
  // zero weight leaves that mode unidentifiable in the data.
  double zero_sum = 0.0, active_sum = 0.0;
  std::size_t zero_n = 0, active_n = 0;
  for (std::uint64_t seed : {41, 42, 43, 44, 45}) {
    SynthOptions o;
    o.shape = TensorShape(std::vector<std::size_t>(6, 12));
    o.rank = 1;
    o.generator = GeneratorKind::kRandomMlp;
    o.mlp.hidden = {};
    o.mlp.sparsity = 0.5;
    o.noise_sd = 0.1;
    o.n_entries = 20000;
    o.seed = seed;
    Experiment e;
    e.synth = synth_generate(o);
    auto state = make_model(e, std::vector<std::size_t>(6, 1), {}, bnn::Activation::kRelu, seed + 100);
    for (const auto& b : partition_stream(e.synth.entries, 256, seed + 200)) adf::process_batch(state, b);
    const auto& truth = e.synth.truth.weights;
    const auto& sel = state.weights().selector;
    for (std::size_t j = 0; j < truth.size(); ++j) {
      if (truth[j] == 0.0) {
        zero_sum += sel[j];
        ++zero_n;
      } else {
        active_sum += sel[j];
        ++active_n;
      }
    }
  }
  if (zero_n == 0 || active_n == 0) return {false, "degenerate truth"};
  const double zero_mean = zero_sum / zero_n, active_mean = active_sum / active_n;
  return {active_mean - zero_mean > 0.05,
          fmt("selector zero=%.4f (n=%zu) active=%.4f (n=%zu) gap=%.4f limit 0.05", zero_mean, zero_n, active_mean,
              active_n, active_mean - zero_mean)};
}

Outcome linear_cost() {
  SynthOptions o;
  o.shape = TensorShape(std::vector<std::size_t>{100, 100, 100});
  o.n_entries = 40 * 256;
  o.seed = 51;
  Experiment e;
  e.synth = synth_generate(o);
  const auto stream = partition_stream(e.synth.entries, 256, 52);
  const std::vector<double> counts{10, 20, 40};
  std::vector<double> times;
  for (double c : counts) {
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
      auto state = make_model(e, {8, 8, 8}, {50, 50}, bnn::Activation::kRelu, 53);
      const auto t = Clock::now();
      for (std::size_t b = 0; b < static_cast<std::size_t>(c); ++b) adf::process_batch(state, stream[b]);
      best = std::min(best, seconds_since(t));
    }
    times.push_back(best);
  }
  const double mx = std::accumulate(counts.begin(), counts.end(), 0.0) / 3.0;
  const double my = std::accumulate(times.begin(), times.end(), 0.0) / 3.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int i = 0; i < 3; ++i) {
    sxy += (counts[i] - mx) * (times[i] - my);
    sxx += (counts[i] - mx) * (counts[i] - mx);
    syy += (times[i] - my) * (times[i] - my);
  }
  const double r2 = sxy * sxy / (sxx * syy);
  return {r2 >= 0.95, fmt("seconds 10:%.3f 20:%.3f 40:%.3f R^2=%.5f limit 0.95", times[0], times[1], times[2], r2)};
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "spider_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto p = [&](const std::string& f) { return (dir / f).string(); };
  std::ostringstream out, err;
  const auto run = [&](std::vector<std::string> args) { return cli::run(args, out, err); };
  if (run({"synth", "--shape", "30,30,30", "--entries", "5000", "--seed", "61", "--train", p("data.coo")}) != 0)
    return {false, err.str()};
  const auto train = [&](const std::string& tag) {
    return run({"train", "--train", p("data.coo"), "--shape", "30,30,30", "--seed", "62", "--checkpoint",
                p("ck" + tag + ".json"), "--metrics", p("m" + tag + ".csv")});
  };
  if (train("1") != 0 || train("2") != 0) return {false, err.str()};
  const auto slurp = [](const std::string& f) {
    std::ifstream in(f, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const auto c1 = slurp(p("ck1.json")), c2 = slurp(p("ck2.json"));
  const auto m1 = slurp(p("m1.csv")), m2 = slurp(p("m2.csv"));
  fs::remove_all(dir);
  const bool ok = !c1.empty() && !m1.empty() && c1 == c2 && m1 == m2;
  return {ok, fmt("checkpoint %zu bytes %s, metrics %zu bytes %s", c1.size(), c1 == c2 ? "identical" : "differ",
                  m1.size(), m1 == m2 ? "identical" : "differ")};
}

const std::map<int, std::pair<const char*, std::function<Outcome()>>> kCriteria{
    {1, {"gradient oracle", gradient}},
    {2, {"output-moment oracle", output_moments}},
    {3, {"evidence correctness", evidence}},
    {4, {"ADF equals conjugate update", conjugate}},
    {5, {"EP tilted moments", tilted}},
    {6, {"tau recursion", tau}},
    {7, {"continuous recovery", continuous_recovery}},
    {8, {"binary recovery", binary_recovery}},
    {9, {"sparsity", sparsity}},
    {10, {"linear cost", linear_cost}},
    {11, {"determinism", determinism}},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty())
    for (const auto& [k, _] : kCriteria) which.push_back(k);
  bool all = true;
  for (int k : which) {
    const auto it = kCriteria.find(k);
    if (it == kCriteria.end()) {
      std::cerr << "unknown criterion " << k << "\n";
      return 2;
    }
    Outcome o;
    try {
      o = it->second.second();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    all = all && o.passed;
    std::cout << "criterion " << k << " (" << it->second.first << "): " << (o.passed ? "PASS" : "FAIL") << " - "
              << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
