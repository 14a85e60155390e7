#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace mnfd {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Derives an independent stream seed for sub-task `index` (splitmix64 finalizer).
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = index + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return seed ^ z;
}

/// n x g matrix of i.i.d. standard normals.
Mat gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Uniformly distributed unit vector in R^n.
Vec random_unit_vector(Eigen::Index n, Rng& rng);

/// Haar-distributed rotation (determinant +1).
Mat random_rotation(Eigen::Index n, Rng& rng);

}  // namespace mnfd
