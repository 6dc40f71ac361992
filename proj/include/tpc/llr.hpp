#pragma once

#include <algorithm>
#include <vector>

namespace tpc {

/// Log-likelihood ratios, L > 0 means bit 0 is more likely.
using LlrFrame = std::vector<double>;

/// Magnitude cap applied to every LLR that leaves a soft block.
inline constexpr double kLlrClamp = 50.0;

inline double clamp_llr(double l) { return std::clamp(l, -kLlrClamp, kLlrClamp); }

}  // namespace tpc
