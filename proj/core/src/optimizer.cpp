#include "s4al/optimizer.hpp"

#include <cmath>

#include "s4al/errors.hpp"

namespace s4al {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(poly_power >= 0.0)) throw ConfigError("poly_power must be >= 0");
}

double poly_learning_rate(double base_lr, long iter, long max_iter, double power) {
  if (max_iter <= 0) return base_lr;
  const double progress = std::min(1.0, static_cast<double>(iter) / static_cast<double>(max_iter));
  return base_lr * std::pow(1.0 - progress, power);
}

SgdMomentum::SgdMomentum(const ModelParams& params, const OptimizerConfig& cfg)
    : cfg_(cfg), velocity_(params.zeros_like()) {}

void SgdMomentum::step(ModelParams& params, const ModelParams& grads, double lr) {
  for (std::size_t k = 0; k < params.tensors.size(); ++k) {
    auto& w = params.tensors[k].values;
    auto& v = velocity_.tensors[k].values;
    const auto& g = grads.tensors[k].values;
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = cfg_.momentum * v[i] + g[i] + cfg_.weight_decay * w[i];
      w[i] -= lr * v[i];
    }
  }
}

}  // namespace s4al
