#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spider {

enum class ValueKind { kContinuous, kBinary };

std::string_view to_string(ValueKind kind);
ValueKind parse_value_kind(std::string_view text);

/// Dimensions of a K-mode sparse tensor.
class TensorShape {
 public:
  TensorShape() = default;
  explicit TensorShape(std::vector<std::size_t> dims);

  std::size_t mode_count() const { return dims_.size(); }
  std::size_t dim(std::size_t mode) const { return dims_[mode]; }
  std::span<const std::size_t> dims() const { return dims_; }

  /// Number of cells, or 0 if it does not fit in 64 bits.
  std::uint64_t cell_count() const;

  bool contains(std::span<const std::size_t> index) const;

  /// Throws BoundsError naming the first offending mode.
  void check_index(std::span<const std::size_t> index) const;

  bool operator==(const TensorShape&) const = default;

 private:
  std::vector<std::size_t> dims_;
};

/// One observed cell: 0-based node index per mode plus its value.
struct ObservedEntry {
  std::vector<std::size_t> index;
  double value = 0.0;

  bool operator==(const ObservedEntry&) const = default;
  auto operator<=>(const ObservedEntry&) const = default;
};

struct EntryBatch {
  std::vector<ObservedEntry> entries;
  std::size_t ordinal = 0;
};

struct DatasetSplit {
  std::vector<ObservedEntry> train;
  std::vector<ObservedEntry> test;
};

/// Checks bounds, finiteness, and (for binary data) that the value is 0 or 1.
void validate_entry(const ObservedEntry& entry, const TensorShape& shape, ValueKind kind);

/// Reads COO text: '#' comments and blank lines are skipped, every other line
/// holds K node indices followed by one value. LF and CRLF are both accepted.
std::vector<ObservedEntry> parse_coo(std::istream& in, const TensorShape& shape, ValueKind kind);

/// Reads index tuples for prediction. A trailing value column is tolerated and
/// ignored.
std::vector<std::vector<std::size_t>> parse_index_lines(std::istream& in, const TensorShape& shape);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

/// Writes COO text with values at round-trip precision.
void write_coo(std::ostream& out, std::span<const ObservedEntry> entries);

/// Uniform random split; |test| = round(fraction * n), kept within [1, n-1].
/// Both halves preserve the input order.
DatasetSplit split_train_test(std::span<const ObservedEntry> entries, double test_fraction,
                              std::uint64_t seed);

/// Shuffles a copy of the entries and cuts it into batches of batch_size
/// (the last one possibly shorter). Ordinals count from 0.
std::vector<EntryBatch> partition_stream(std::span<const ObservedEntry> entries,
                                         std::size_t batch_size, std::uint64_t seed);

}  // namespace spider
