#include "spider/random.hpp"

#include <cmath>
#include <sstream>

#include "spider/error.hpp"

namespace spider {

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw ArgumentError("uniform_index: n must be positive");
  // Reject the tail that would bias the modulo.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

double Rng::truncated_normal(double bound) {
  if (!(bound > 0.0)) throw ArgumentError("truncated_normal: bound must be positive");
  if (bound >= 1.0) {
    // Acceptance probability is at least 0.68.
    for (;;) {
      const double x = normal();
      if (std::abs(x) <= bound) return x;
    }
  }
  // Uniform proposal on [-bound, bound]; acceptance at least exp(-1/2).
  for (;;) {
    const double x = bound * (2.0 * uniform() - 1.0);
    if (uniform() < std::exp(-0.5 * x * x)) return x;
  }
}

std::string Rng::serialize() const {
  std::ostringstream os;
  os << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ';
  os.precision(17);
  os << std::hexfloat << spare_;
  return os.str();
}

Rng Rng::deserialize(const std::string& text) {
  std::istringstream is(text);
  Rng rng;
  int spare_flag = 0;
  std::string spare_text;
  is >> rng.engine_ >> spare_flag >> spare_text;
  if (is.fail() || (spare_flag != 0 && spare_flag != 1)) {
    throw LoadError("malformed random engine state");
  }
  rng.has_spare_ = spare_flag == 1;
  rng.spare_ = std::strtod(spare_text.c_str(), nullptr);
  return rng;
}

}  // namespace spider
