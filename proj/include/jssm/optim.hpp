// optim.hpp - parameter update rules (adaptive-moment default, plain SGD flag).
#pragma once

#include <vector>

#include "jssm/tensor.hpp"

namespace jssm {

enum class UpdateRule { adam, sgd };

/// Holds per-parameter moment buffers and applies one update per step().
/// Parameters are updated in place through their mutable data views.
class Optimizer {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  Optimizer(std::vector<Tensor> params, double learning_rate, UpdateRule rule = UpdateRule::adam);

  /// Applies one update from the gradients currently stored on the parameters.
  /// Throws ContractError if any parameter has no materialized gradient.
  void step();
  void zero_grad();

  long steps() const { return step_count_; }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr);

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long step_count_ = 0;
  double lr_;
  UpdateRule rule_;
};

}  // namespace jssm
