#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "commrl/error.hpp"

namespace commrl {

inline constexpr double kAdvantageStdEpsilon = 1e-8;

/// Group-relative advantages: (r - mean) / (population std + 1e-8).
/// An all-equal group maps to exact zeros.
inline std::vector<double> normalize_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) {
    throw Error(ErrorCode::group_too_small, "need at least 2 rewards, got " + std::to_string(rewards.size()));
  }
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double stddev = std::sqrt(var / n);

  std::vector<double> adv(rewards.size(), 0.0);
  const bool degenerate = std::all_of(rewards.begin(), rewards.end(),
                                      [&](double r) { return r == rewards.front(); });
  if (degenerate) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    adv[i] = (rewards[i] - mean) / (stddev + kAdvantageStdEpsilon);
  }
  return adv;
}

}  // namespace commrl
