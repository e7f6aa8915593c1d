#include "pgdcrnn/optim.hpp"

#include <cmath>

#include "pgdcrnn/error.hpp"

namespace pgdcrnn {

double global_norm(std::span<const Tensor> grads) {
  double sq = 0.0;
  for (const Tensor &g : grads) {
    for (double v : g.values()) sq += v * v;
  }
  return std::sqrt(sq);
}

double clip_by_global_norm(std::span<Tensor> grads, double max_norm) {
  if (!(max_norm > 0.0)) throw_config("clip_by_global_norm: max_norm must be positive");
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double factor = max_norm / norm;
    for (Tensor &g : grads) {
      for (double &v : g.values()) v *= factor;
    }
  }
  return norm;
}

AdamState AdamState::zeros_like(std::span<const Tensor> params) {
  AdamState s;
  for (const Tensor &p : params) {
    s.m.emplace_back(p.shape());
    s.v.emplace_back(p.shape());
  }
  return s;
}

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads,
               AdamState &state, double lr, const AdamOptions &opts) {
  if (params.size() != grads.size() || state.m.size() != params.size()) {
    throw_config("adam_step: parameter/gradient/state count mismatch");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(opts.beta1, t);
  const double c2 = 1.0 - std::pow(opts.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor &p = params[k];
    const Tensor &g = grads[k];
    Tensor &m = state.m[k];
    Tensor &v = state.v[k];
    if (g.size() != p.size()) throw_config("adam_step: gradient shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = opts.beta1 * m[i] + (1.0 - opts.beta1) * g[i];
      v[i] = opts.beta2 * v[i] + (1.0 - opts.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + opts.epsilon);
    }
  }
}

}  // namespace pgdcrnn
