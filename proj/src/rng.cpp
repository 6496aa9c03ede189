#include "metaland/rng.hpp"

namespace metaland {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view purpose) {
  return splitmix64(global_seed ^ fnv1a64(purpose));
}

std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view purpose, std::uint64_t index) {
  return splitmix64(derive_seed(global_seed, purpose) + splitmix64(index));
}

}  // namespace metaland
