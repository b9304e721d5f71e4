#include "sdrsim/golden.hpp"

namespace sdrsim {

void DetectionProblem::validate() const {
  if (n_tx() < 1 || n_rx() < n_tx())
    throw ConfigError("problem needs n_rx >= n_tx >= 1, got " + std::to_string(n_rx()) + "x" +
                      std::to_string(n_tx()));
  if (y.size() != H.rows()) throw ConfigError("y length does not match n_rx");
  if (!(sigma2 >= 0)) throw ConfigError("sigma2 must be non-negative");
}

CVector<double> golden_mmse(const DetectionProblem& p) {
  p.validate();
  return mmse_steps<double>(p.H, p.y, p.sigma2).x;
}

}  // namespace sdrsim
