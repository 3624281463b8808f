#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace mgmc {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorRef = Eigen::Ref<const Vector<Scalar>>;

/// Every chain owns one of these; nothing in the library shares RNG state.
using Rng = std::mt19937_64;

/// Derives an independent per-chain seed from a master seed and a counter
/// (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (counter + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <typename Scalar>
Scalar uniform01(Rng& rng) {
  return std::uniform_real_distribution<Scalar>(Scalar(0), Scalar(1))(rng);
}

}  // namespace mgmc
