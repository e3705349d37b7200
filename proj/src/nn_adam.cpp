#include "graphprobe/nn/adam.hpp"

#include <cmath>

namespace graphprobe::nn {

void adam_step(Matrix& param, const Matrix& grad, AdamState& state, const AdamOptions& o) {
  if (state.m.size() == 0) {
    state.m = Matrix::Zero(param.rows(), param.cols());
    state.v = Matrix::Zero(param.rows(), param.cols());
  }
  if (state.m.rows() != param.rows() || state.m.cols() != param.cols() || grad.rows() != param.rows() ||
      grad.cols() != param.cols()) {
    throw ContractError("adam_step: state/gradient shape differs from parameter");
  }
  ++state.t;
  Matrix g = grad;
  if (o.weight_decay != 0.0 && !o.decoupled) g += o.weight_decay * param;
  state.m = o.beta1 * state.m + (1.0 - o.beta1) * g;
  state.v = o.beta2 * state.v + (1.0 - o.beta2) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.t));
  if (o.weight_decay != 0.0 && o.decoupled) param *= (1.0 - o.lr * o.weight_decay);
  param.array() -= o.lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + o.eps);
}

Adam::Adam(std::vector<Tensor> params, AdamOptions options)
    : params_(std::move(params)), state_(params_.size()), options_(options) {}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    if (p.has_grad()) {
      adam_step(p.value, p.grad, state_[i], options_);
    } else {
      adam_step(p.value, Matrix::Zero(p.rows(), p.cols()), state_[i], options_);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

}  // namespace graphprobe::nn
