#pragma once

#include <cstdint>
#include <random>

namespace lattice_burgers {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Stream seed of replica r: splitmix64(splitmix64(master) + r). Each replica
/// depends only on (master, r), so ensembles do not depend on scheduling.
constexpr std::uint64_t replica_seed(std::uint64_t master, std::uint64_t replica) noexcept {
  return splitmix64(splitmix64(master) + replica);
}

inline Rng make_replica_rng(std::uint64_t master, std::uint64_t replica) { return Rng(replica_seed(master, replica)); }

}  // namespace lattice_burgers
