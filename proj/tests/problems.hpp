#pragma once

#include <random>

#include "sdrsim/golden.hpp"

namespace testing {

// Rayleigh-like channel, unit-power symbols, y = H x + n.
inline sdrsim::DetectionProblem random_problem(std::mt19937_64& rng, int n_tx, int n_rx, double sigma2) {
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  auto c = [&] { return std::complex<double>(g(rng), g(rng)); };
  sdrsim::DetectionProblem p;
  p.H.resize(n_rx, n_tx);
  p.y.resize(n_rx);
  sdrsim::CVector<double> x(n_tx);
  for (int i = 0; i < n_tx; ++i) x(i) = c();
  for (int k = 0; k < n_rx; ++k)
    for (int i = 0; i < n_tx; ++i) p.H(k, i) = c();
  p.y = p.H * x;
  for (int k = 0; k < n_rx; ++k) p.y(k) += std::sqrt(sigma2) * c();
  p.sigma2 = sigma2;
  return p;
}

}  // namespace testing
