#ifndef YAKOVENKO_RANDOM_HPP
#define YAKOVENKO_RANDOM_HPP

#include <cstdint>
#include <random>

namespace yakovenko {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Independent stream for task `stream` under a user seed. Streams do not
// depend on how tasks are scheduled.
inline Engine make_engine(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed ^ (0x6a09e667f3bcc909ULL * (stream + 1));
  std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(s)), static_cast<std::uint32_t>(splitmix64(s)),
                    static_cast<std::uint32_t>(splitmix64(s)), static_cast<std::uint32_t>(splitmix64(s))};
  return Engine(seq);
}

// Uniform on the open interval (0, 1), identical on every platform.
inline double open_uniform(Engine& g) {
  return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

// Stream tags keep restarts, bootstrap and simulation draws disjoint.
namespace streams {
inline constexpr std::uint64_t sample = 0;
inline constexpr std::uint64_t restart = 1ULL << 20;
inline constexpr std::uint64_t bootstrap = 2ULL << 20;
inline constexpr std::uint64_t langevin = 3ULL << 20;
}  // namespace streams

}  // namespace yakovenko

#endif  // YAKOVENKO_RANDOM_HPP
