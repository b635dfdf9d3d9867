#include "rpg/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace rpg {

void OptimizerState::ensure_size(size_t n) {
  if (kind != OptimizerKind::adam) return;
  if (m.size() != n) m.assign(n, 0.0);
  if (v.size() != n) v.assign(n, 0.0);
}

TapeOptimizerState lift_state(Tape& tape, const OptimizerState& state, size_t n) {
  TapeOptimizerState out;
  out.kind = state.kind;
  out.step_count = state.step_count;
  out.adam = state.adam;
  if (state.kind == OptimizerKind::adam) {
    out.m.reserve(n);
    out.v.reserve(n);
    for (size_t k = 0; k < n; ++k) {
      out.m.push_back(tape.constant(k < state.m.size() ? state.m[k] : 0.0));
      out.v.push_back(tape.constant(k < state.v.size() ? state.v[k] : 0.0));
    }
  }
  return out;
}

std::vector<Value> optimizer_step(Tape&, std::span<const Value> params,
                                  std::span<const Value> grads, TapeOptimizerState& state,
                                  double lr) {
  if (params.size() != grads.size())
    throw std::invalid_argument("optimizer_step: params/grads shape mismatch");
  if (lr < 0.0) throw std::invalid_argument("optimizer_step: negative learning rate");

  std::vector<Value> out;
  out.reserve(params.size());
  if (state.kind == OptimizerKind::sgd) {
    for (size_t k = 0; k < params.size(); ++k) out.push_back(params[k] + lr * grads[k]);
    return out;
  }

  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw std::invalid_argument("optimizer_step: adam moments shape mismatch");
  const AdamParams& a = state.adam;
  const int64_t t = ++state.step_count;
  const double bias1 = 1.0 - std::pow(a.beta1, static_cast<double>(t));
  const double bias2 = 1.0 - std::pow(a.beta2, static_cast<double>(t));
  for (size_t k = 0; k < params.size(); ++k) {
    state.m[k] = a.beta1 * state.m[k] + (1.0 - a.beta1) * grads[k];
    state.v[k] = a.beta2 * state.v[k] + (1.0 - a.beta2) * (grads[k] * grads[k]);
    Value m_hat = state.m[k] / bias1;
    Value v_hat = state.v[k] / bias2;
    out.push_back(params[k] + lr * (m_hat / (sqrt(v_hat) + a.eps)));
  }
  return out;
}

void apply_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
                double lr) {
  if (params.size() != grads.size())
    throw std::invalid_argument("apply_step: params/grads shape mismatch");
  if (lr < 0.0) throw std::invalid_argument("apply_step: negative learning rate");

  if (state.kind == OptimizerKind::sgd) {
    for (size_t k = 0; k < params.size(); ++k) params[k] += lr * grads[k];
    return;
  }

  state.ensure_size(params.size());
  const AdamParams& a = state.adam;
  const int64_t t = ++state.step_count;
  const double bias1 = 1.0 - std::pow(a.beta1, static_cast<double>(t));
  const double bias2 = 1.0 - std::pow(a.beta2, static_cast<double>(t));
  for (size_t k = 0; k < params.size(); ++k) {
    state.m[k] = a.beta1 * state.m[k] + (1.0 - a.beta1) * grads[k];
    state.v[k] = a.beta2 * state.v[k] + (1.0 - a.beta2) * grads[k] * grads[k];
    const double m_hat = state.m[k] / bias1;
    const double v_hat = state.v[k] / bias2;
    params[k] += lr * m_hat / (std::sqrt(v_hat) + a.eps);
  }
}

}  // namespace rpg
