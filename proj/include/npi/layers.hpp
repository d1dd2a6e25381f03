#pragma once

#include <cmath>
#include <string>

#include "npi/tensor.hpp"

namespace npi {

// Affine map y = W x + b.
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out)
      : weight_(name + ".W", out, in), bias_(name + ".b", out, 1) {}

  int in() const { return static_cast<int>(weight_.cols()); }
  int out() const { return static_cast<int>(weight_.rows()); }

  // Weights uniform in +-gain/sqrt(fan_in), bias zero.
  void init(Rng& rng, double gain = 1.0) {
    init_uniform(weight_.value, gain / std::sqrt(static_cast<double>(in())), rng);
    bias_.value.setZero();
  }

  Vec forward(const Vec& x) const {
    require_size(x, in(), weight_.name.c_str());
    return weight_.value * x + bias_.value.col(0);
  }

  // Accumulates dW, db and returns dL/dx.
  Vec backward(const Vec& x, const Vec& dy) {
    if (!weight_.frozen) weight_.grad.noalias() += dy * x.transpose();
    if (!bias_.frozen) bias_.grad.col(0) += dy;
    return weight_.value.transpose() * dy;
  }

  void collect(ParamList& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  const Parameter& weight() const { return weight_; }
  const Parameter& bias() const { return bias_; }

 private:
  Parameter weight_;
  Parameter bias_;
};

// Two affine layers with a ReLU between them and a linear output.
class Mlp2 {
 public:
  struct Cache {
    Vec input;
    Vec pre;
    Vec hidden;
  };

  Mlp2() = default;
  Mlp2(const std::string& name, int in, int hidden, int out)
      : first_(name + ".l1", in, hidden), second_(name + ".l2", hidden, out) {}

  int in() const { return first_.in(); }
  int hidden() const { return first_.out(); }
  int out() const { return second_.out(); }

  void init(Rng& rng, double gain = 1.0) {
    first_.init(rng, gain);
    second_.init(rng, gain);
  }

  Vec forward(const Vec& x, Cache* cache = nullptr) const {
    Vec pre = first_.forward(x);
    Vec hidden = pre.cwiseMax(0.0);
    Vec y = second_.forward(hidden);
    if (cache) {
      cache->input = x;
      cache->pre = std::move(pre);
      cache->hidden = std::move(hidden);
    }
    return y;
  }

  Vec backward(const Cache& cache, const Vec& dy) {
    Vec dhidden = second_.backward(cache.hidden, dy);
    Vec dpre = (cache.pre.array() > 0.0).select(dhidden.array(), 0.0).matrix();
    return first_.backward(cache.input, dpre);
  }

  void collect(ParamList& out) {
    first_.collect(out);
    second_.collect(out);
  }

  Linear& first() { return first_; }
  Linear& second() { return second_; }
  const Linear& first() const { return first_; }
  const Linear& second() const { return second_; }

 private:
  Linear first_;
  Linear second_;
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace npi
