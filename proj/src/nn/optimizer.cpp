#include <cmath>

#include "tidealloc/nn.hpp"

namespace tidealloc::nn {

void optimizer_step(ParameterSet& params, const AdamConfig& config) {
  const std::uint64_t t = params.optimizer_steps() + 1;
  params.set_optimizer_steps(t);
  const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (auto& p : params) {
    if (p.frozen) continue;
    auto m = p.moment1.mat().array();
    auto v = p.moment2.mat().array();
    const auto g = p.grad.mat().array();
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.square();
    p.value.mat().array() -=
        config.lr * (m / correction1) / ((v / correction2).sqrt() + config.eps);
    p.value.require_finite(p.name);
  }
}

}  // namespace tidealloc::nn
