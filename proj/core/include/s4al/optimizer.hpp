#pragma once

#include "s4al/segmodel.hpp"

namespace s4al {

struct OptimizerConfig {
  double learning_rate = 1e-2;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double poly_power = 0.9;

  void validate() const;
  bool operator==(const OptimizerConfig&) const = default;
};

// lr * (1 - iter / max_iter)^power
double poly_learning_rate(double base_lr, long iter, long max_iter, double power);

// SGD with heavy-ball momentum and L2 weight decay folded into the gradient:
// v <- mu v + (g + wd w); w <- w - lr v.
class SgdMomentum {
 public:
  SgdMomentum(const ModelParams& params, const OptimizerConfig& cfg);
  void step(ModelParams& params, const ModelParams& grads, double lr);

 private:
  OptimizerConfig cfg_;
  ModelParams velocity_;
};

}  // namespace s4al
