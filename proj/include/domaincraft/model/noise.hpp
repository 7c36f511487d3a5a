#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "domaincraft/model/config.hpp"

namespace domaincraft {

class Rng;

// Marks round(mask_ratio * length) positions, placed as spans whose lengths
// are drawn from Poisson(mean_span) (at least 1).
std::vector<bool> span_mask(std::size_t length, const NoiseConfig& cfg, Rng& rng);

// Replaces every masked span with a single mask token.
std::vector<int> noise(std::span<const int> tokens, const NoiseConfig& cfg,
                       std::uint64_t seed, int mask_id);

}  // namespace domaincraft
