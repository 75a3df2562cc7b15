// SPDX-License-Identifier: Apache-2.0
// Shared helpers for the unit tests.
#pragma once

#include "herl/common.hpp"
#include "herl/rng.hpp"

#include <cmath>
#include <filesystem>
#include <string>

namespace herl::test {

inline Vector random_vector(Index n, Rng& rng, double scale = 1.0) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = scale * (2.0 * rng.uniform() - 1.0);
  return v;
}

inline Matrix random_matrix(Index r, Index c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * (2.0 * rng.uniform() - 1.0);
  return m;
}

/// Uniform direction, norm uniform in [0, fraction / sqrt(c)).
inline Vector random_in_ball(Index n, double c, Rng& rng, double fraction = 0.95) {
  Vector v = random_vector(n, rng);
  while (v.norm() == 0.0) v = random_vector(n, rng);
  return v.normalized() * (fraction / std::sqrt(c)) * rng.uniform();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("herl_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace herl::test
