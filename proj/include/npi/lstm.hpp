#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "npi/layers.hpp"
#include "npi/tensor.hpp"

namespace npi {

// Per-layer hidden and cell vectors of a stacked LSTM.
struct LstmState {
  std::vector<Vec> h;
  std::vector<Vec> c;

  static LstmState zeros(int layers, int hidden) {
    LstmState s;
    s.h.assign(layers, Vec::Zero(hidden));
    s.c.assign(layers, Vec::Zero(hidden));
    return s;
  }
  int layers() const { return static_cast<int>(h.size()); }
};

// Stacked LSTM. Each layer holds one fused weight matrix of shape
// (4M x (in + M)) acting on [x; h_prev]; gate rows are ordered
// input, forget, output, candidate.
class LstmStack {
 public:
  struct LayerCache {
    Vec joined;  // [x; h_prev]
    Vec i, f, o, g;
    Vec c_prev, c, tanh_c;
  };
  struct StepCache {
    std::vector<LayerCache> layers;
  };

  LstmStack() = default;
  LstmStack(const std::string& name, int input_size, int hidden, int layers)
      : input_size_(input_size), hidden_(hidden) {
    if (layers < 1 || hidden < 1 || input_size < 1)
      throw ConfigError("LstmStack: layers, hidden and input size must be positive");
    for (int l = 0; l < layers; ++l) {
      const int in = l == 0 ? input_size : hidden;
      const std::string prefix = name + ".l" + std::to_string(l);
      weights_.emplace_back(prefix + ".W", 4 * hidden, in + hidden);
      biases_.emplace_back(prefix + ".b", 4 * hidden, 1);
    }
  }

  int input_size() const { return input_size_; }
  int hidden() const { return hidden_; }
  int layers() const { return static_cast<int>(weights_.size()); }

  LstmState zero_state() const { return LstmState::zeros(layers(), hidden_); }

  // Uniform +-gain/sqrt(fan_in) weights, zero biases except forget gates at +1.
  void init(Rng& rng, double gain = 1.0) {
    for (int l = 0; l < layers(); ++l) {
      init_uniform(weights_[l].value, gain / std::sqrt(static_cast<double>(weights_[l].cols())), rng);
      biases_[l].value.setZero();
      biases_[l].value.block(hidden_, 0, hidden_, 1).setConstant(1.0);
    }
  }

  // One time step. Updates `state` in place and returns the top-layer h.
  Vec step(const Vec& x, LstmState& state, StepCache* cache = nullptr) const {
    require_size(x, input_size_, "LstmStack input");
    if (state.layers() != layers())
      throw ConfigError("LstmStack: state has " + std::to_string(state.layers()) +
                        " layers, expected " + std::to_string(layers()));
    if (cache) cache->layers.resize(layers());
    const int m = hidden_;
    Vec input = x;
    for (int l = 0; l < layers(); ++l) {
      require_size(state.h[l], m, "LstmStack hidden state");
      require_size(state.c[l], m, "LstmStack cell state");
      Vec joined(input.size() + m);
      joined << input, state.h[l];
      const Vec z = weights_[l].value * joined + biases_[l].value.col(0);
      Vec i = z.segment(0, m).unaryExpr([](double v) { return sigmoid(v); });
      Vec f = z.segment(m, m).unaryExpr([](double v) { return sigmoid(v); });
      Vec o = z.segment(2 * m, m).unaryExpr([](double v) { return sigmoid(v); });
      Vec g = z.segment(3 * m, m).array().tanh().matrix();
      Vec c = f.cwiseProduct(state.c[l]) + i.cwiseProduct(g);
      Vec tanh_c = c.array().tanh().matrix();
      Vec h = o.cwiseProduct(tanh_c);
      if (cache) {
        auto& lc = cache->layers[l];
        lc.joined = std::move(joined);
        lc.i = std::move(i);
        lc.f = std::move(f);
        lc.o = std::move(o);
        lc.g = std::move(g);
        lc.c_prev = state.c[l];
        lc.c = c;
        lc.tanh_c = std::move(tanh_c);
      }
      state.c[l] = std::move(c);
      state.h[l] = h;
      input = std::move(h);
    }
    return input;
  }

  // Backward through one step. `carry` holds dL/dh_t and dL/dc_t flowing in
  // from step t+1 and is overwritten with the gradients for step t-1.
  // Returns dL/dx_t.
  Vec backward_step(const StepCache& cache, const Vec& dh_top, LstmState& carry) {
    const int m = hidden_;
    Vec dh_from_above = dh_top;
    for (int l = layers() - 1; l >= 0; --l) {
      const auto& lc = cache.layers[l];
      const Vec dh = dh_from_above + carry.h[l];
      const Vec dc = carry.c[l] + dh.cwiseProduct(lc.o).cwiseProduct(
                                      (1.0 - lc.tanh_c.array().square()).matrix());
      Vec dz(4 * m);
      dz.segment(0, m) = dc.cwiseProduct(lc.g).cwiseProduct(lc.i.cwiseProduct((1.0 - lc.i.array()).matrix()));
      dz.segment(m, m) = dc.cwiseProduct(lc.c_prev).cwiseProduct(lc.f.cwiseProduct((1.0 - lc.f.array()).matrix()));
      dz.segment(2 * m, m) = dh.cwiseProduct(lc.tanh_c).cwiseProduct(lc.o.cwiseProduct((1.0 - lc.o.array()).matrix()));
      dz.segment(3 * m, m) = dc.cwiseProduct(lc.i).cwiseProduct((1.0 - lc.g.array().square()).matrix());
      if (!weights_[l].frozen) weights_[l].grad.noalias() += dz * lc.joined.transpose();
      if (!biases_[l].frozen) biases_[l].grad.col(0) += dz;
      const Vec djoined = weights_[l].value.transpose() * dz;
      const Eigen::Index in = djoined.size() - m;
      carry.h[l] = djoined.segment(in, m);
      carry.c[l] = dc.cwiseProduct(lc.f);
      dh_from_above = djoined.segment(0, in);
    }
    return dh_from_above;
  }

  void collect(ParamList& out) {
    for (int l = 0; l < layers(); ++l) {
      out.push_back(&weights_[l]);
      out.push_back(&biases_[l]);
    }
  }

  Parameter& weight(int layer) { return weights_.at(layer); }
  Parameter& bias(int layer) { return biases_.at(layer); }

 private:
  int input_size_ = 0;
  int hidden_ = 0;
  std::vector<Parameter> weights_;
  std::vector<Parameter> biases_;
};

}  // namespace npi
