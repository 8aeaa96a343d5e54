#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <string>
#include <vector>

namespace sdqos {

// Shortest decimal representation that round-trips the double exactly.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

// Largest-remainder apportionment: split `total` integer units across
// slots proportionally to `weights`. Each result is capped by its weight
// when weights are integral quotas. Ties go to earlier slots.
inline std::vector<long long> apportion(long long total,
                                        const std::vector<double>& weights) {
  const std::size_t n = weights.size();
  std::vector<long long> out(n, 0);
  double wsum = 0.0;
  for (double w : weights) wsum += w;
  if (n == 0 || total <= 0 || wsum <= 0.0) return out;

  std::vector<double> remainder(n, 0.0);
  long long assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double quota = static_cast<double>(total) * weights[i] / wsum;
    out[i] = static_cast<long long>(quota);
    remainder[i] = quota - static_cast<double>(out[i]);
    assigned += out[i];
  }
  long long leftover = total - assigned;
  // Hand out the leftover units by descending remainder, earlier slot wins ties.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainder[a] > remainder[b];
  });
  for (std::size_t k = 0; k < order.size() && leftover > 0; ++k, --leftover)
    out[order[k]] += 1;
  return out;
}

}  // namespace sdqos
