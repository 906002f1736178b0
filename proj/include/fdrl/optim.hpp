#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fdrl/autodiff.hpp"

namespace fdrl {

struct AdamWConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with bias correction and decoupled weight decay. The decay
/// p <- p - lr * wd * p is applied before the moment-based update term.
class AdamW {
 public:
  AdamW(AdamWConfig cfg, const std::vector<Param*>& params);

  /// grads[i] pairs with params[i]; shapes must match the state.
  void step(const std::vector<Param*>& params, const std::vector<Eigen::MatrixXd>& grads);

  long steps_taken() const { return t_; }

 private:
  AdamWConfig cfg_;
  std::vector<Eigen::MatrixXd> m_;
  std::vector<Eigen::MatrixXd> v_;
  long t_ = 0;
};

/// Global-norm gradient clip; scales all gradients in place when the joint
/// norm exceeds max_norm. No-op for max_norm <= 0.
void clip_global_norm(std::vector<Eigen::MatrixXd>& grads, double max_norm);

}  // namespace fdrl
