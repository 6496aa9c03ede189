#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace metaland {

using Rng = std::mt19937_64;

/// Sub-seed for one named consumer of a global seed:
/// splitmix64(global_seed ^ fnv1a64(purpose)). Adding a consumer never shifts another's stream.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view purpose);

/// derive_seed() with an integer discriminator (task index, region index, ...).
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view purpose, std::uint64_t index);

}  // namespace metaland
