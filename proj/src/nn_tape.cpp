#include "graphprobe/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace graphprobe::nn {

Tensor constant(Matrix value) {
  auto t = std::make_shared<TensorData>();
  t->value = std::move(value);
  return t;
}

Tensor parameter(Matrix value) {
  auto t = constant(std::move(value));
  t->requires_grad = true;
  return t;
}

std::string shape_string(const Tensor& t) {
  return "(" + std::to_string(t->rows()) + "x" + std::to_string(t->cols()) + ")";
}

std::string_view to_string(PoolKind k) {
  switch (k) {
    case PoolKind::mean: return "mean";
    case PoolKind::sum: return "sum";
    case PoolKind::max: return "max";
  }
  return "";
}

PoolKind parse_pool_kind(std::string_view s) {
  if (s == "mean") return PoolKind::mean;
  if (s == "sum") return PoolKind::sum;
  if (s == "max") return PoolKind::max;
  throw ParameterError("unknown pooling '" + std::string(s) + "'");
}

void accumulate(TensorData& t, const Matrix& g) {
  if (t.grad.size() == 0) {
    t.grad = g;
  } else {
    t.grad += g;
  }
}

namespace {

void require(bool ok, const char* op, const Tensor& a, const Tensor& b) {
  if (!ok) {
    throw ContractError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
  }
}

}  // namespace

Tensor Tape::emit(Matrix value, std::initializer_list<const Tensor*> inputs, Pullback pullback) {
  auto out = constant(std::move(value));
  if (!record_) return out;
  bool needs = false;
  for (const Tensor* in : inputs) needs = needs || (*in)->requires_grad;
  if (!needs) return out;
  out->requires_grad = true;
  records_.push_back({out, std::move(pullback)});
  return out;
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  require(a->cols() == b->rows(), "matmul", a, b);
  Matrix v(a->rows(), b->cols());
  v.noalias() = a->value * b->value;
  return emit(std::move(v), {&a, &b}, [a, b](const Matrix& g) {
    if (a->requires_grad) {
      Matrix ga(a->rows(), a->cols());
      ga.noalias() = g * b->value.transpose();
      accumulate(*a, ga);
    }
    if (b->requires_grad) {
      Matrix gb(b->rows(), b->cols());
      gb.noalias() = a->value.transpose() * g;
      accumulate(*b, gb);
    }
  });
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  require(a->rows() == b->rows() && a->cols() == b->cols(), "add", a, b);
  return emit(a->value + b->value, {&a, &b}, [a, b](const Matrix& g) {
    if (a->requires_grad) accumulate(*a, g);
    if (b->requires_grad) accumulate(*b, g);
  });
}

Tensor Tape::add_bias_row(const Tensor& x, const Tensor& bias) {
  require(bias->rows() == 1 && bias->cols() == x->cols(), "add_bias_row", x, bias);
  Matrix v = x->value.rowwise() + bias->value.row(0);
  return emit(std::move(v), {&x, &bias}, [x, bias](const Matrix& g) {
    if (x->requires_grad) accumulate(*x, g);
    if (bias->requires_grad) accumulate(*bias, g.colwise().sum());
  });
}

Tensor Tape::relu(const Tensor& x) {
  Matrix v = x->value.cwiseMax(0.0);
  return emit(std::move(v), {&x}, [x](const Matrix& g) {
    accumulate(*x, (x->value.array() > 0.0).select(g, 0.0));
  });
}

Tensor Tape::leaky_relu(const Tensor& x, double slope) {
  Matrix v = (x->value.array() > 0.0).select(x->value, slope * x->value);
  return emit(std::move(v), {&x}, [x, slope](const Matrix& g) {
    accumulate(*x, (x->value.array() > 0.0).select(g, slope * g));
  });
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  require(a->rows() == b->rows() && a->cols() == b->cols(), "mul", a, b);
  return emit(a->value.cwiseProduct(b->value), {&a, &b}, [a, b](const Matrix& g) {
    if (a->requires_grad) accumulate(*a, g.cwiseProduct(b->value));
    if (b->requires_grad) accumulate(*b, g.cwiseProduct(a->value));
  });
}

Tensor Tape::scale(const Tensor& x, const Tensor& s) {
  require(s->rows() == 1 && s->cols() == 1, "scale", x, s);
  const double k = s->value(0, 0);
  return emit(x->value * k, {&x, &s}, [x, s, k](const Matrix& g) {
    if (x->requires_grad) accumulate(*x, g * k);
    if (s->requires_grad) accumulate(*s, Matrix::Constant(1, 1, g.cwiseProduct(x->value).sum()));
  });
}

Tensor Tape::concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    require(p->rows() == parts[0]->rows(), "concat_cols", parts[0], p);
    cols += p->cols();
  }
  Matrix v(parts[0]->rows(), cols);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p->cols()) = p->value;
    at += p->cols();
  }
  std::vector<Tensor> kept(parts.begin(), parts.end());
  auto out = constant(std::move(v));
  if (!record_) return out;
  bool needs = std::any_of(kept.begin(), kept.end(), [](const Tensor& t) { return t->requires_grad; });
  if (!needs) return out;
  out->requires_grad = true;
  records_.push_back({out, [kept](const Matrix& g) {
                        Eigen::Index at = 0;
                        for (const auto& p : kept) {
                          if (p->requires_grad) accumulate(*p, g.middleCols(at, p->cols()));
                          at += p->cols();
                        }
                      }});
  return out;
}

Tensor Tape::segment_pool(const Tensor& x, const Segments& segments, PoolKind kind) {
  if (segments.rows() != x->rows()) {
    throw ContractError("segment_pool: segments cover " + std::to_string(segments.rows()) +
                        " rows, input " + shape_string(x));
  }
  const int ns = segments.count();
  const auto cols = x->cols();
  Matrix v = Matrix::Zero(ns, cols);
  std::vector<int> argmax;
  if (kind == PoolKind::max) argmax.assign(static_cast<std::size_t>(ns) * cols, -1);
  for (int s = 0; s < ns; ++s) {
    const int lo = segments.offsets[s];
    const int hi = segments.offsets[s + 1];
    if (hi <= lo) continue;
    if (kind == PoolKind::max) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        int best = lo;
        for (int r = lo + 1; r < hi; ++r) {
          if (x->value(r, c) > x->value(best, c)) best = r;
        }
        v(s, c) = x->value(best, c);
        argmax[static_cast<std::size_t>(s) * cols + c] = best;
      }
    } else {
      v.row(s) = x->value.middleRows(lo, hi - lo).colwise().sum();
      if (kind == PoolKind::mean) v.row(s) /= (hi - lo);
    }
  }
  auto offsets = segments.offsets;
  return emit(std::move(v), {&x}, [x, offsets, kind, argmax = std::move(argmax)](const Matrix& g) {
    Matrix gx = Matrix::Zero(x->rows(), x->cols());
    const int ns = static_cast<int>(offsets.size()) - 1;
    for (int s = 0; s < ns; ++s) {
      const int lo = offsets[s];
      const int hi = offsets[s + 1];
      if (hi <= lo) continue;
      if (kind == PoolKind::max) {
        for (Eigen::Index c = 0; c < gx.cols(); ++c) {
          gx(argmax[static_cast<std::size_t>(s) * gx.cols() + c], c) += g(s, c);
        }
      } else {
        const double w = kind == PoolKind::mean ? 1.0 / (hi - lo) : 1.0;
        gx.middleRows(lo, hi - lo).rowwise() += w * g.row(s);
      }
    }
    accumulate(*x, gx);
  });
}

Tensor Tape::dropout(const Tensor& x, double p, bool train, Rng& rng) {
  if (!train || p <= 0.0) return x;
  if (p >= 1.0) throw ParameterError("dropout: rate must be < 1");
  const double keep_scale = 1.0 / (1.0 - p);
  Matrix mask(x->rows(), x->cols());
  // One draw from rng seeds a splitmix64 stream for the mask.
  const auto threshold = static_cast<std::uint64_t>(p * 0x1.0p64);
  std::uint64_t state = rng.next();
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    state += 0x9e3779b97f4a7c15ULL;
    mask.data()[i] = mix64(state) < threshold ? 0.0 : keep_scale;
  }
  Matrix v = x->value.cwiseProduct(mask);
  return emit(std::move(v), {&x}, [x, mask = std::move(mask)](const Matrix& g) {
    accumulate(*x, g.cwiseProduct(mask));
  });
}

Tensor Tape::softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const auto rows = logits->rows();
  if (static_cast<Eigen::Index>(labels.size()) != rows) {
    throw ContractError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                        shape_string(logits));
  }
  Matrix prob(rows, logits->cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mx = logits->value.row(r).maxCoeff();
    prob.row(r) = (logits->value.row(r).array() - mx).exp().matrix();
    const double z = prob.row(r).sum();
    prob.row(r) /= z;
    const int y = labels[r];
    if (y < 0 || y >= logits->cols()) throw ContractError("softmax_cross_entropy: label out of range");
    loss -= (logits->value(r, y) - mx) - std::log(z);
  }
  loss /= static_cast<double>(rows);
  std::vector<int> y(labels.begin(), labels.end());
  return emit(Matrix::Constant(1, 1, loss), {&logits},
              [logits, prob = std::move(prob), y = std::move(y)](const Matrix& g) {
                Matrix gl = prob;
                for (std::size_t r = 0; r < y.size(); ++r) gl(static_cast<Eigen::Index>(r), y[r]) -= 1.0;
                gl *= g(0, 0) / static_cast<double>(y.size());
                accumulate(*logits, gl);
              });
}

Tensor Tape::spmm(std::shared_ptr<const SparseMatrix> a, const Tensor& x) {
  if (a->cols() != x->rows()) {
    throw ContractError("spmm: shape mismatch (" + std::to_string(a->rows()) + "x" + std::to_string(a->cols()) +
                        ") vs " + shape_string(x));
  }
  Matrix v(a->rows(), x->cols());
  v.noalias() = (*a) * x->value;
  return emit(std::move(v), {&x}, [a, x](const Matrix& g) {
    Matrix gx(x->rows(), x->cols());
    gx.noalias() = a->transpose() * g;
    accumulate(*x, gx);
  });
}

Tensor Tape::gather_rows(const Tensor& x, std::span<const int> index) {
  Matrix v(static_cast<Eigen::Index>(index.size()), x->cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= x->rows()) throw ContractError("gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(i)) = x->value.row(index[i]);
  }
  std::vector<int> idx(index.begin(), index.end());
  return emit(std::move(v), {&x}, [x, idx = std::move(idx)](const Matrix& g) {
    Matrix gx = Matrix::Zero(x->rows(), x->cols());
    for (std::size_t i = 0; i < idx.size(); ++i) gx.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
    accumulate(*x, gx);
  });
}

Tensor Tape::head_dot(const Tensor& x, const Tensor& att) {
  const auto heads = att->rows();
  const auto d = att->cols();
  require(x->cols() == heads * d, "head_dot", x, att);
  Matrix v(x->rows(), heads);
  for (Eigen::Index h = 0; h < heads; ++h) {
    v.col(h).noalias() = x->value.middleCols(h * d, d) * att->value.row(h).transpose();
  }
  return emit(std::move(v), {&x, &att}, [x, att, heads, d](const Matrix& g) {
    if (x->requires_grad) {
      Matrix gx(x->rows(), x->cols());
      for (Eigen::Index h = 0; h < heads; ++h) {
        gx.middleCols(h * d, d).noalias() = g.col(h) * att->value.row(h);
      }
      accumulate(*x, gx);
    }
    if (att->requires_grad) {
      Matrix ga(heads, d);
      for (Eigen::Index h = 0; h < heads; ++h) {
        ga.row(h).noalias() = g.col(h).transpose() * x->value.middleCols(h * d, d);
      }
      accumulate(*att, ga);
    }
  });
}

Tensor Tape::segment_softmax(const Tensor& scores, std::span<const int> segment, int num_segments) {
  const auto rows = scores->rows();
  const auto cols = scores->cols();
  if (static_cast<Eigen::Index>(segment.size()) != rows) {
    throw ContractError("segment_softmax: " + std::to_string(segment.size()) + " segment ids for " +
                        shape_string(scores));
  }
  Matrix mx = Matrix::Constant(num_segments, cols, -std::numeric_limits<double>::infinity());
  for (Eigen::Index r = 0; r < rows; ++r) mx.row(segment[r]) = mx.row(segment[r]).cwiseMax(scores->value.row(r));
  Matrix v(rows, cols);
  Matrix z = Matrix::Zero(num_segments, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    v.row(r) = (scores->value.row(r) - mx.row(segment[r])).array().exp().matrix();
    z.row(segment[r]) += v.row(r);
  }
  for (Eigen::Index r = 0; r < rows; ++r) v.row(r).array() /= z.row(segment[r]).array();
  std::vector<int> seg(segment.begin(), segment.end());
  auto out = emit(v, {&scores}, {});
  if (out->requires_grad) {
    std::weak_ptr<TensorData> weak_out = out;
    records_.back().pullback = [scores, weak_out, seg = std::move(seg), num_segments](const Matrix& g) {
      const Matrix& y = weak_out.lock()->value;
      Matrix dot = Matrix::Zero(num_segments, y.cols());
      for (Eigen::Index r = 0; r < y.rows(); ++r) dot.row(seg[r]) += g.row(r).cwiseProduct(y.row(r));
      Matrix gs(y.rows(), y.cols());
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        gs.row(r) = y.row(r).cwiseProduct(g.row(r) - dot.row(seg[r]));
      }
      accumulate(*scores, gs);
    };
  }
  return out;
}

Tensor Tape::edge_aggregate(const Tensor& alpha, const Tensor& values, std::span<const int> src,
                            std::span<const int> dst, int num_out) {
  const auto heads = alpha->cols();
  const auto e_count = alpha->rows();
  if (values->cols() % heads != 0 || static_cast<Eigen::Index>(src.size()) != e_count ||
      static_cast<Eigen::Index>(dst.size()) != e_count) {
    throw ContractError("edge_aggregate: shape mismatch " + shape_string(alpha) + " vs " + shape_string(values));
  }
  const auto d = values->cols() / heads;
  Matrix v = Matrix::Zero(num_out, values->cols());
  for (Eigen::Index e = 0; e < e_count; ++e) {
    for (Eigen::Index h = 0; h < heads; ++h) {
      v.row(dst[e]).segment(h * d, d) += alpha->value(e, h) * values->value.row(src[e]).segment(h * d, d);
    }
  }
  std::vector<int> s(src.begin(), src.end()), t(dst.begin(), dst.end());
  return emit(std::move(v), {&alpha, &values},
              [alpha, values, s = std::move(s), t = std::move(t), heads, d](const Matrix& g) {
                const auto e_count = alpha->rows();
                if (alpha->requires_grad) {
                  Matrix ga(e_count, heads);
                  for (Eigen::Index e = 0; e < e_count; ++e) {
                    for (Eigen::Index h = 0; h < heads; ++h) {
                      ga(e, h) = g.row(t[e]).segment(h * d, d).dot(values->value.row(s[e]).segment(h * d, d));
                    }
                  }
                  accumulate(*alpha, ga);
                }
                if (values->requires_grad) {
                  Matrix gv = Matrix::Zero(values->rows(), values->cols());
                  for (Eigen::Index e = 0; e < e_count; ++e) {
                    for (Eigen::Index h = 0; h < heads; ++h) {
                      gv.row(s[e]).segment(h * d, d) += alpha->value(e, h) * g.row(t[e]).segment(h * d, d);
                    }
                  }
                  accumulate(*values, gv);
                }
              });
}

void Tape::backward(const Tensor& loss) {
  if (loss->rows() != 1 || loss->cols() != 1) {
    throw ContractError("backward: loss must be a scalar, got " + shape_string(loss));
  }
  for (auto& r : records_) r.output->zero_grad();
  if (!loss->requires_grad) return;
  accumulate(*loss, Matrix::Ones(1, 1));
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->output->has_grad()) it->pullback(it->output->grad);
  }
}

}  // namespace graphprobe::nn
