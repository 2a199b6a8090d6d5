#include "convexreg/seeding.hpp"

#include <cmath>
#include <vector>

namespace convexreg {

MeanStderr mean_and_stderr(std::span<const double> values) {
  MeanStderr out;
  const std::size_t m = values.size();
  if (m == 0) return out;
  out.mean = pairwise_sum(values) / static_cast<double>(m);
  if (m < 2) return out;
  std::vector<double> sq(m);
  for (std::size_t i = 0; i < m; ++i) sq[i] = (values[i] - out.mean) * (values[i] - out.mean);
  const double var = pairwise_sum(sq) / static_cast<double>(m - 1);
  out.std_error = std::sqrt(var / static_cast<double>(m));
  return out;
}

}  // namespace convexreg
