#include "domaincraft/model/noise.hpp"

#include <algorithm>
#include <cmath>

#include "domaincraft/util/rng.hpp"

namespace domaincraft {

std::vector<bool> span_mask(std::size_t length, const NoiseConfig& cfg, Rng& rng) {
  std::vector<bool> mask(length, false);
  const auto target = static_cast<std::size_t>(
      std::llround(cfg.mask_ratio * static_cast<double>(length)));
  std::size_t masked = 0;
  // Random span placement; overlapping draws are allowed and simply mask
  // fewer new tokens. The attempt cap keeps pathological draws bounded.
  for (int attempt = 0; masked < target && attempt < 64 * static_cast<int>(length) + 64;
       ++attempt) {
    std::size_t span = static_cast<std::size_t>(std::max(1, rng.poisson(cfg.mean_span)));
    span = std::min(span, target - masked);
    const std::size_t start = rng.uniform_index(length - span + 1);
    for (std::size_t i = start; i < start + span && masked < target; ++i) {
      if (!mask[i]) {
        mask[i] = true;
        ++masked;
      }
    }
  }
  for (std::size_t i = 0; i < length && masked < target; ++i) {
    if (!mask[i]) {
      mask[i] = true;
      ++masked;
    }
  }
  return mask;
}

std::vector<int> noise(std::span<const int> tokens, const NoiseConfig& cfg,
                       std::uint64_t seed, int mask_id) {
  if (tokens.empty() || cfg.mask_ratio <= 0.0) {
    return {tokens.begin(), tokens.end()};
  }
  Rng rng(seed);
  const auto mask = span_mask(tokens.size(), cfg, rng);
  std::vector<int> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!mask[i]) {
      out.push_back(tokens[i]);
    } else if (i == 0 || !mask[i - 1]) {
      out.push_back(mask_id);
    }
  }
  return out;
}

}  // namespace domaincraft
