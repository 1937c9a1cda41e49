#include "spider/tensor.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <limits>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "spider/error.hpp"
#include "spider/random.hpp"

namespace spider {

std::string_view to_string(ValueKind kind) {
  return kind == ValueKind::kBinary ? "binary" : "continuous";
}

ValueKind parse_value_kind(std::string_view text) {
  if (text == "continuous") return ValueKind::kContinuous;
  if (text == "binary") return ValueKind::kBinary;
  throw ArgumentError("unknown value kind '" + std::string(text) + "'");
}

TensorShape::TensorShape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw ArgumentError("tensor shape needs at least one mode");
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    if (dims_[k] == 0) throw ArgumentError("mode " + std::to_string(k) + " has zero dimension");
  }
}

std::uint64_t TensorShape::cell_count() const {
  std::uint64_t total = 1;
  for (auto d : dims_) {
    if (total > std::numeric_limits<std::uint64_t>::max() / d) return 0;
    total *= d;
  }
  return total;
}

bool TensorShape::contains(std::span<const std::size_t> index) const {
  if (index.size() != dims_.size()) return false;
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    if (index[k] >= dims_[k]) return false;
  }
  return true;
}

void TensorShape::check_index(std::span<const std::size_t> index) const {
  if (index.size() != dims_.size()) {
    throw BoundsError("index has " + std::to_string(index.size()) + " modes, tensor has " +
                      std::to_string(dims_.size()));
  }
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    if (index[k] >= dims_[k]) {
      throw BoundsError("index " + std::to_string(index[k]) + " out of range for mode " +
                        std::to_string(k) + " (size " + std::to_string(dims_[k]) + ")");
    }
  }
}

void validate_entry(const ObservedEntry& entry, const TensorShape& shape, ValueKind kind) {
  shape.check_index(entry.index);
  if (!std::isfinite(entry.value)) throw ValueError("entry value is not finite");
  if (kind == ValueKind::kBinary && entry.value != 0.0 && entry.value != 1.0) {
    throw ValueError("binary entry value must be 0 or 1");
  }
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

bool is_skippable(std::string_view line) {
  for (char c : line) {
    if (c == '#') return true;
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

std::size_t parse_node(std::string_view field, std::size_t line_no) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(line_no, "expected a non-negative integer index, got '" + std::string(field) + "'");
  }
  return value;
}

double parse_number(std::string_view field, std::size_t line_no) {
  // strtod also accepts a leading '+', which from_chars rejects.
  const std::string text(field);
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size()) {
    throw ParseError(line_no, "expected a numeric value, got '" + text + "'");
  }
  return value;
}

template <typename OnFields>
void for_each_data_line(std::istream& in, OnFields&& on_fields) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_skippable(line)) continue;
    on_fields(split_fields(line), line_no);
  }
}

}  // namespace

std::vector<ObservedEntry> parse_coo(std::istream& in, const TensorShape& shape, ValueKind kind) {
  const std::size_t modes = shape.mode_count();
  std::vector<ObservedEntry> entries;
  for_each_data_line(in, [&](const std::vector<std::string_view>& fields, std::size_t line_no) {
    if (fields.size() != modes + 1) {
      throw ParseError(line_no, "expected " + std::to_string(modes + 1) + " fields, got " +
                                    std::to_string(fields.size()));
    }
    ObservedEntry entry;
    entry.index.resize(modes);
    for (std::size_t k = 0; k < modes; ++k) entry.index[k] = parse_node(fields[k], line_no);
    entry.value = parse_number(fields[modes], line_no);
    try {
      validate_entry(entry, shape, kind);
    } catch (const BoundsError& e) {
      throw BoundsError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ValueError& e) {
      throw ValueError("line " + std::to_string(line_no) + ": " + e.what());
    }
    entries.push_back(std::move(entry));
  });
  return entries;
}

std::vector<std::vector<std::size_t>> parse_index_lines(std::istream& in, const TensorShape& shape) {
  const std::size_t modes = shape.mode_count();
  std::vector<std::vector<std::size_t>> indices;
  for_each_data_line(in, [&](const std::vector<std::string_view>& fields, std::size_t line_no) {
    if (fields.size() != modes && fields.size() != modes + 1) {
      throw ParseError(line_no, "expected " + std::to_string(modes) + " indices");
    }
    std::vector<std::size_t> index(modes);
    for (std::size_t k = 0; k < modes; ++k) index[k] = parse_node(fields[k], line_no);
    try {
      shape.check_index(index);
    } catch (const BoundsError& e) {
      throw BoundsError("line " + std::to_string(line_no) + ": " + e.what());
    }
    indices.push_back(std::move(index));
  });
  return indices;
}

std::string format_double(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void write_coo(std::ostream& out, std::span<const ObservedEntry> entries) {
  for (const auto& e : entries) {
    for (auto i : e.index) out << i << ' ';
    out << format_double(e.value) << '\n';
  }
}

DatasetSplit split_train_test(std::span<const ObservedEntry> entries, double test_fraction,
                              std::uint64_t seed) {
  const std::size_t n = entries.size();
  if (n < 2) throw ArgumentError("split needs at least two entries");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ArgumentError("test fraction must lie in (0, 1)");
  }
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<bool> in_test(n, false);
  for (std::size_t i = 0; i < n_test; ++i) in_test[order[i]] = true;

  DatasetSplit split;
  split.test.reserve(n_test);
  split.train.reserve(n - n_test);
  for (std::size_t i = 0; i < n; ++i) {
    (in_test[i] ? split.test : split.train).push_back(entries[i]);
  }
  return split;
}

std::vector<EntryBatch> partition_stream(std::span<const ObservedEntry> entries,
                                         std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw ArgumentError("batch size must be positive");
  std::vector<ObservedEntry> shuffled(entries.begin(), entries.end());
  Rng rng(seed);
  rng.shuffle(std::span<ObservedEntry>(shuffled));

  std::vector<EntryBatch> batches;
  batches.reserve((shuffled.size() + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < shuffled.size(); start += batch_size) {
    const std::size_t stop = std::min(shuffled.size(), start + batch_size);
    EntryBatch batch;
    batch.ordinal = batches.size();
    batch.entries.assign(std::make_move_iterator(shuffled.begin() + static_cast<std::ptrdiff_t>(start)),
                         std::make_move_iterator(shuffled.begin() + static_cast<std::ptrdiff_t>(stop)));
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace spider
