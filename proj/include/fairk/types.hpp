#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace fairk {

using GradientVector = std::vector<double>;

// Binary selection mask over gradient entries.
struct SelectionMask {
  std::vector<std::uint8_t> bits;

  SelectionMask() = default;
  explicit SelectionMask(std::size_t d) : bits(d, 0) {}

  std::size_t size() const { return bits.size(); }
  bool test(std::size_t i) const { return bits[i] != 0; }
  void set(std::size_t i) { bits[i] = 1; }

  std::size_t count() const {
    std::size_t c = 0;
    for (auto b : bits) c += b;
    return c;
  }

  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> idx;
    idx.reserve(count());
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i]) idx.push_back(i);
    }
    return idx;
  }

  bool operator==(const SelectionMask& other) const { return bits == other.bits; }
};

// Age of update per gradient entry: rounds elapsed since last selection.
struct AoUVector {
  std::vector<std::int64_t> ages;

  AoUVector() = default;
  explicit AoUVector(std::size_t d) : ages(d, 0) {}

  std::size_t size() const { return ages.size(); }
  std::int64_t max_age() const {
    std::int64_t m = 0;
    for (auto a : ages) {
      if (a > m) m = a;
    }
    return m;
  }
  double mean_age() const {
    if (ages.empty()) return 0.0;
    double s = 0.0;
    for (auto a : ages) s += static_cast<double>(a);
    return s / static_cast<double>(ages.size());
  }
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace fairk
