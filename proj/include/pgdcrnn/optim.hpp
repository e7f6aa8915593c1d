#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pgdcrnn/tensor.hpp"

namespace pgdcrnn {

/// Global L2 norm over every element of every tensor.
double global_norm(std::span<const Tensor> grads);

/// Scales all gradients by max_norm / norm when the global norm exceeds
/// max_norm. Returns the norm measured before clipping.
double clip_by_global_norm(std::span<Tensor> grads, double max_norm);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moment estimates, one tensor per parameter.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;

  static AdamState zeros_like(std::span<const Tensor> params);
};

/// One bias-corrected Adam update in place.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads,
               AdamState &state, double lr, const AdamOptions &opts = {});

}  // namespace pgdcrnn
