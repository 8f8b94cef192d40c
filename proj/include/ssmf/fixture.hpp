#pragma once

#include "ssmf/corpus.hpp"

#include <cstdint>
#include <vector>

namespace ssmf::simgen {

/// Synthetic app reviews in the input schema: two apps, four quarterly
/// buckets, five latent themes whose mix drives a 1..5 rating. Deterministic
/// under `seed`.
std::vector<corpus::ReviewRecord> synthetic_reviews(int n, std::uint64_t seed);

} // namespace ssmf::simgen
