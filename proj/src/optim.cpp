#include "duality/optim.hpp"

#include <cmath>

#include "duality/kernels.hpp"

namespace duality {

Parameter make_uniform_param(const std::string& name, std::vector<int> shape,
                             double lo, double hi, Rng& rng) {
  auto t = Tensor::zeros(std::move(shape), true);
  for (auto& v : t->values) v = rng.uniform(lo, hi);
  return Parameter(name, std::move(t));
}

double clip_global_norm(const std::vector<Parameter*>& params,
                        double max_norm) {
  double sq = 0.0;
  for (const auto* p : params)
    for (double g : p->tensor->grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto* p : params)
      for (double& g : p->tensor->grad) g *= s;
  }
  return norm;
}

void adam_update(const std::vector<Parameter*>& params,
                 const AdamConfig& cfg) {
  for (auto* p : params)
    if (p->tensor->grad.size() != p->tensor->values.size())
      throw ContractError("adam_update: missing gradient for parameter '" +
                          p->name + "'");
  if (cfg.clip_norm > 0.0) clip_global_norm(params, cfg.clip_norm);
  for (auto* p : params) {
    p->step += 1;
    const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(p->step));
    const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(p->step));
    kernels::adam_step(p->tensor->values.data(), p->tensor->grad.data(),
                       p->moment1.data(), p->moment2.data(),
                       p->tensor->values.size(), cfg.learning_rate, cfg.beta1,
                       cfg.beta2, cfg.epsilon, bias1, bias2);
    p->tensor->zero_grad();
  }
}

}  // namespace duality
