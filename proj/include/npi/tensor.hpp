#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "npi/errors.hpp"

namespace npi {

using Tensor2 = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using Rng = std::mt19937_64;

// A named trainable block. Biases are stored as (n x 1) matrices so that every
// block serializes the same way.
struct Parameter {
  std::string name;
  Tensor2 value;
  Tensor2 grad;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Tensor2::Zero(rows, cols)), grad(Tensor2::Zero(rows, cols)) {}

  Eigen::Index rows() const { return value.rows(); }
  Eigen::Index cols() const { return value.cols(); }
  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }
};

using ParamList = std::vector<Parameter*>;

inline void zero_grads(const ParamList& params) {
  for (auto* p : params) p->zero_grad();
}

inline void init_uniform(Tensor2& t, double scale, Rng& rng) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
}

inline bool all_finite(const Tensor2& t) {
  for (Eigen::Index i = 0; i < t.size(); ++i)
    if (!std::isfinite(t.data()[i])) return false;
  return true;
}

inline bool all_finite(const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i])) return false;
  return true;
}

inline Vec one_hot(int index, int width) {
  Vec v = Vec::Zero(width);
  if (index >= 0 && index < width) v[index] = 1.0;
  return v;
}

// FNV-1a over the raw bytes of a block; used to show frozen blocks never move.
inline std::uint64_t checksum(const Tensor2& t) {
  std::uint64_t h = 1469598103934665603ull;
  auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
  for (std::size_t i = 0; i < static_cast<std::size_t>(t.size()) * sizeof(double); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline void require_size(const Vec& v, Eigen::Index expected, const char* what) {
  if (v.size() != expected)
    throw ConfigError(std::string(what) + ": expected length " + std::to_string(expected) +
                      ", got " + std::to_string(v.size()));
}

}  // namespace npi
