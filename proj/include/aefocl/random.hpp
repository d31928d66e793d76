#ifndef AEFOCL_RANDOM_HPP_
#define AEFOCL_RANDOM_HPP_

// Portable randomness. std:: distributions are implementation-defined, so all
// sampling goes through Boost.Random, whose algorithms are fixed in source:
// mt19937_64 for bits, ziggurat normal_distribution for Gaussians.

#include <cstdint>
#include <initializer_list>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace aefocl {

using Engine = boost::random::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent substream seed from a root seed and a path of ids,
// e.g. derive_seed(pfg_seed, {phase, class}).
constexpr std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t s = mix64(root);
  for (auto id : path) s = mix64(s ^ mix64(id + 0x632be59bd9b4e019ULL));
  return s;
}

inline double standard_normal(Engine& eng) {
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  return dist(eng);
}

}  // namespace aefocl

#endif  // AEFOCL_RANDOM_HPP_
