#pragma once

#include <algorithm>
#include <cmath>

#include "ctista/numerics.hpp"

namespace ctista::test {

inline CMatrix random_cmatrix(Eigen::Index m, Eigen::Index n, std::uint64_t seed, double var = 1.0) {
  RngStream rng(seed, 99);
  CMatrix a(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = draw_cgaussian(rng, var);
  return a;
}

inline CVector random_cvector(Eigen::Index n, std::uint64_t seed, double var = 1.0) {
  RngStream rng(seed, 98);
  return sample_cgaussian(0.0, var, rng, n);
}

inline double rel_err(cplx got, cplx want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); }

template <class A, class B>
double rel_norm(const A& got, const B& want) {
  return (got - want).norm() / std::max(1e-300, want.norm());
}

}  // namespace ctista::test
