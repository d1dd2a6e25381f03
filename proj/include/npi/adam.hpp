#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "npi/tensor.hpp"

namespace npi {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double decay = 0.95;
  long decay_interval = 10000;
  double clip_norm = 10.0;  // <= 0 disables clipping
};

// Moment accumulators, one pair per parameter block, aligned with the
// ParamList the optimizer was built for.
struct AdamState {
  long step = 0;
  std::vector<Tensor2> first;
  std::vector<Tensor2> second;
};

inline double global_grad_norm(const ParamList& params) {
  double sq = 0.0;
  for (const auto* p : params)
    if (!p->frozen) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

// Rescales all unfrozen gradients so their joint L2 norm is at most max_norm.
inline double clip_global_norm(const ParamList& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto* p : params)
      if (!p->frozen) p->grad *= scale;
  }
  return norm;
}

class Adam {
 public:
  Adam() = default;
  Adam(const ParamList& params, AdamConfig config) : config_(config) { reset(params); }

  void reset(const ParamList& params) {
    state_ = AdamState{};
    for (const auto* p : params) {
      state_.first.push_back(Tensor2::Zero(p->rows(), p->cols()));
      state_.second.push_back(Tensor2::Zero(p->rows(), p->cols()));
    }
  }

  // base * decay^floor(step / interval)
  double effective_lr(long step) const {
    return config_.learning_rate *
           std::pow(config_.decay, static_cast<double>(step / config_.decay_interval));
  }
  double current_lr() const { return effective_lr(state_.step); }

  // Clips, then applies one bias-corrected update to every unfrozen block.
  // Throws NumericError naming the first block holding a NaN/Inf gradient.
  void step(const ParamList& params) {
    if (params.size() != state_.first.size())
      throw ConfigError("Adam: parameter list does not match optimizer state");
    for (const auto* p : params)
      if (!p->frozen && !all_finite(p->grad))
        throw NumericError("non-finite gradient in parameter block '" + p->name + "'");
    clip_global_norm(params, config_.clip_norm);

    const double lr = effective_lr(state_.step);
    ++state_.step;
    const double t = static_cast<double>(state_.step);
    const double c1 = 1.0 - std::pow(config_.beta1, t);
    const double c2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
      Parameter& p = *params[k];
      if (p.frozen) continue;
      Tensor2& m = state_.first[k];
      Tensor2& v = state_.second[k];
      m = config_.beta1 * m + (1.0 - config_.beta1) * p.grad;
      v = config_.beta2 * v + (1.0 - config_.beta2) * p.grad.cwiseProduct(p.grad);
      p.value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config_.epsilon);
    }
  }

  const AdamConfig& config() const { return config_; }
  AdamConfig& config() { return config_; }
  const AdamState& state() const { return state_; }
  AdamState& state() { return state_; }

 private:
  AdamConfig config_;
  AdamState state_;
};

}  // namespace npi
