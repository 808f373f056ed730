#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace svgsmith {

/// Adaptive-moment optimizer over a flat parameter vector.
class Adam {
 public:
  explicit Adam(std::size_t size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(size, 0.0), v_(size, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// One descent step. `lr` may hold a single rate or one rate per entry.
  void step(std::span<double> params, std::span<const double> grad, std::span<const double> lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      const double rate = lr.size() == 1 ? lr[0] : lr[i];
      params[i] -= rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

  void step(std::span<double> params, std::span<const double> grad, double lr) {
    step(params, grad, std::span<const double>(&lr, 1));
  }

  int steps() const { return t_; }

 private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_;
  int t_ = 0;
};

}  // namespace svgsmith
