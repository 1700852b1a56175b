#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "duality/rng.hpp"
#include "duality/tensor.hpp"

namespace duality {

// Named persistent optimizable tensor with Adam state.
struct Parameter {
  std::string name;
  TensorPtr tensor;
  std::vector<double> moment1;
  std::vector<double> moment2;
  std::int64_t step = 0;

  Parameter() = default;
  Parameter(std::string n, TensorPtr t)
      : name(std::move(n)),
        tensor(std::move(t)),
        moment1(tensor->values.size(), 0.0),
        moment2(tensor->values.size(), 0.0) {
    tensor->requires_grad = true;
    tensor->ensure_grad();
  }

  std::size_t size() const { return tensor->values.size(); }
};

Parameter make_uniform_param(const std::string& name, std::vector<int> shape,
                             double lo, double hi, Rng& rng);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // <= 0 disables clipping
};

// Global gradient norm over the set; scales grads in place when above
// max_norm. Returns the pre-clip norm.
double clip_global_norm(const std::vector<Parameter*>& params,
                        double max_norm);

// Standard Adam with bias correction, applied in place. Increments each
// step counter and zeroes the grads afterwards. Throws ContractError naming
// the parameter if a gradient buffer is missing.
void adam_update(const std::vector<Parameter*>& params, const AdamConfig& cfg);

}  // namespace duality
