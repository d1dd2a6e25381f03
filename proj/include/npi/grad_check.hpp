#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "npi/tensor.hpp"

namespace npi {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_block;
  Eigen::Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  int coordinates_checked = 0;
  int refined = 0;  // coordinates that needed a smaller step
};

// Central-difference check of analytic gradients. `loss` must recompute the
// scalar loss and accumulate analytic gradients into the blocks' grad fields.
// Up to `per_block` random coordinates are checked in every block. A
// coordinate whose estimate disagrees by more than `refine_above` is retried
// with steps eps/10, eps/100 and eps/1000 and keeps its best agreement: a kink of a
// ReLU inside [w - eps, w + eps] spoils only the larger steps, while a
// wrong analytic gradient disagrees at every step.
inline GradCheckReport grad_check(const std::function<double()>& loss, const ParamList& params,
                                  double eps, Rng& rng, int per_block = 20, double refine_above = 1e-5) {
  zero_grads(params);
  loss();
  std::vector<Tensor2> analytic;
  analytic.reserve(params.size());
  for (const auto* p : params) analytic.push_back(p->grad);

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(p.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    if (idx.size() > static_cast<std::size_t>(per_block)) idx.resize(per_block);
    for (const auto i : idx) {
      double& w = p.value.data()[i];
      const double saved = w;
      const double ana = analytic[k].data()[i];
      auto estimate = [&](double h) {
        w = saved + h;
        const double up = loss();
        w = saved - h;
        const double down = loss();
        w = saved;
        return (up - down) / (2.0 * h);
      };
      auto relative = [&](double num) {
        return std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6});
      };
      double num = estimate(eps);
      double rel = relative(num);
      if (rel > refine_above) {
        ++report.refined;
        for (double h : {eps / 10, eps / 100, eps / 1000}) {
          const double n2 = estimate(h);
          if (relative(n2) < rel) num = n2, rel = relative(n2);
        }
      }
      ++report.coordinates_checked;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_block = p.name;
        report.worst_index = i;
        report.analytic = ana;
        report.numeric = num;
      }
    }
  }
  zero_grads(params);
  return report;
}

}  // namespace npi
