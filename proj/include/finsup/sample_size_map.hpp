#pragma once

#include <cstdint>
#include <vector>

#include "finsup/errors.hpp"

namespace finsup {

// Strictly increasing map from test rank to sample size. Either the
// identity or an explicit table phi(1..M). Beyond the table the map
// continues affinely with the last tabulated gap, so linear maps such as
// phi(n) = 2n stay exact at every rank once two values are tabulated.
class SampleSizeMap {
 public:
  static SampleSizeMap identity() { return SampleSizeMap{}; }

  static SampleSizeMap from_table(std::vector<std::int64_t> values) {
    if (values.empty()) throw InvalidWeights("sample-size table must be nonempty");
    std::int64_t prev = 0;
    for (std::int64_t v : values) {
      if (v <= prev) throw InvalidWeights("sample-size table must be strictly increasing and positive");
      prev = v;
    }
    SampleSizeMap map;
    map.table_ = std::move(values);
    return map;
  }

  std::int64_t operator()(std::int64_t n) const {
    if (n < 1) throw InvalidSample("sample-size map defined for n >= 1");
    if (table_.empty()) return n;
    const auto m = static_cast<std::int64_t>(table_.size());
    if (n <= m) return table_[static_cast<std::size_t>(n - 1)];
    const std::int64_t gap = m >= 2 ? table_[static_cast<std::size_t>(m - 1)] - table_[static_cast<std::size_t>(m - 2)] : 1;
    return table_[static_cast<std::size_t>(m - 1)] + gap * (n - m);
  }

  bool is_identity() const { return table_.empty(); }
  const std::vector<std::int64_t>& table() const { return table_; }

  bool operator==(const SampleSizeMap&) const = default;

 private:
  std::vector<std::int64_t> table_;  // empty means identity
};

}  // namespace finsup
