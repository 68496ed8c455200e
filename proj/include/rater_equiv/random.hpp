#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace rater_equiv {

// std::mt19937_64's output sequence is fixed by the standard, but the standard
// distributions and std::shuffle are not; these helpers keep seeded selection
// bitwise reproducible across standard libraries.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  // Uniform integer in [0, bound) by rejection sampling.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[below(i)]);
    }
  }

  // First `count` elements of a partial Fisher-Yates pass: a uniform sample
  // without replacement, in selection order.
  template <typename T>
  std::vector<T> sample(std::vector<T> values, std::size_t count) {
    for (std::size_t i = 0; i < count && i < values.size(); ++i) {
      std::swap(values[i], values[i + below(values.size() - i)]);
    }
    values.resize(std::min(count, values.size()));
    return values;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rater_equiv
