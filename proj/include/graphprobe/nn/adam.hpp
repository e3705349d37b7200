#pragma once

#include <vector>

#include "graphprobe/nn/tape.hpp"

namespace graphprobe::nn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  /// false: L2 term added to the gradient before the moments (classic Adam).
  /// true: decay applied directly to the weights (AdamW).
  bool decoupled = false;
};

struct AdamState {
  Matrix m;
  Matrix v;
  long long t = 0;
};

/// One Adam update of `param` in place.
void adam_step(Matrix& param, const Matrix& grad, AdamState& state, const AdamOptions& options);

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options);

  /// Parameters without a gradient are treated as having a zero gradient.
  void step();
  void zero_grad();
  const AdamOptions& options() const { return options_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamState> state_;
  AdamOptions options_;
};

}  // namespace graphprobe::nn
