#include "jssm/optim.hpp"

#include <cmath>

namespace jssm {

Optimizer::Optimizer(std::vector<Tensor> params, double learning_rate, UpdateRule rule)
    : params_(std::move(params)), lr_(learning_rate), rule_(rule) {
  if (lr_ <= 0.0) throw ConfigError("Optimizer: learning rate must be positive");
  for (const Tensor& p : params_) {
    if (!p.defined() || !p.requires_grad()) {
      throw ContractError("Optimizer: every parameter must be a defined requires_grad tensor");
    }
  }
  if (rule_ == UpdateRule::adam) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor& p : params_) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }
}

void Optimizer::set_learning_rate(double lr) {
  if (lr <= 0.0) throw ConfigError("Optimizer: learning rate must be positive");
  lr_ = lr;
}

void Optimizer::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

void Optimizer::step() {
  for (const Tensor& p : params_) {
    if (!p.grad_allocated()) {
      throw ContractError("Optimizer::step: parameter has no gradient; run backward first");
    }
  }
  ++step_count_;
  if (rule_ == UpdateRule::sgd) {
    for (Tensor& p : params_) {
      auto data = p.mutable_data();
      const auto grad = p.grad();
      for (std::size_t i = 0; i < data.size(); ++i) data[i] -= lr_ * grad[i];
    }
    return;
  }
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_count_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    auto data = params_[pi].mutable_data();
    const auto grad = params_[pi].grad();
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      data[i] -= lr_ * mhat / (std::sqrt(vhat) + kEps);
    }
  }
}

}  // namespace jssm
