#pragma once

#include <cmath>

#include "npi/layers.hpp"
#include "npi/tensor.hpp"

namespace npi {

struct XentResult {
  double loss = 0.0;
  Vec grad;
};

inline Vec softmax(const Vec& logits) {
  if (logits.size() == 0) throw ConfigError("softmax: empty logits");
  const double mx = logits.maxCoeff();
  Vec e = (logits.array() - mx).exp().matrix();
  return e / e.sum();
}

// -log softmax(logits)[target] and its gradient softmax - onehot(target).
inline XentResult softmax_xent(const Vec& logits, int target) {
  if (logits.size() == 0) throw ConfigError("softmax_xent: empty logits");
  if (target < 0 || target >= logits.size())
    throw ConfigError("softmax_xent: target " + std::to_string(target) + " out of range");
  const double mx = logits.maxCoeff();
  const Vec shifted = (logits.array() - mx).matrix();
  const double lse = std::log(shifted.array().exp().sum());
  XentResult r;
  r.loss = lse - shifted[target];
  r.grad = (shifted.array() - lse).exp().matrix();
  r.grad[target] -= 1.0;
  return r;
}

struct BceResult {
  double loss = 0.0;
  double grad = 0.0;
};

// Binary cross-entropy on a logit, written as max(z,0) - z t + log1p(exp(-|z|)).
inline BceResult sigmoid_bce(double logit, int target) {
  const double t = target ? 1.0 : 0.0;
  BceResult r;
  r.loss = std::max(logit, 0.0) - logit * t + std::log1p(std::exp(-std::abs(logit)));
  r.grad = sigmoid(logit) - t;
  return r;
}

}  // namespace npi
