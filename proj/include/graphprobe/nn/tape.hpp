#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "graphprobe/rng.hpp"
#include "graphprobe/types.hpp"

namespace graphprobe::nn {

/// Dense fp64 matrix with an optional gradient buffer.
struct TensorData {
  Matrix value;
  Matrix grad;  // empty until something is accumulated into it
  bool requires_grad = false;

  Eigen::Index rows() const { return value.rows(); }
  Eigen::Index cols() const { return value.cols(); }
  bool has_grad() const { return grad.size() > 0; }
  void zero_grad() { grad.resize(0, 0); }
};

using Tensor = std::shared_ptr<TensorData>;

Tensor constant(Matrix value);
Tensor parameter(Matrix value);

std::string shape_string(const Tensor& t);

enum class PoolKind { mean, sum, max };

std::string_view to_string(PoolKind k);
PoolKind parse_pool_kind(std::string_view s);

/// Contiguous row ranges [offsets[k], offsets[k+1]); must cover all rows.
struct Segments {
  std::vector<int> offsets{0};
  int count() const { return static_cast<int>(offsets.size()) - 1; }
  int rows() const { return offsets.back(); }
};

/// Records primitive applications and replays their pullbacks in reverse.
///
/// One tape per thread. Outputs of recorded operations are owned jointly by
/// the tape and the caller. backward() clears intermediate gradients first and
/// then accumulates into leaf tensors, so calling it twice without zeroing the
/// parameters adds the gradient twice.
class Tape {
 public:
  /// With `record` false the tape computes values only (inference).
  explicit Tape(bool record = true) : record_(record) {}

  Tensor matmul(const Tensor& a, const Tensor& b);
  Tensor add(const Tensor& a, const Tensor& b);
  /// x (r x c) plus a 1 x c bias row broadcast over rows.
  Tensor add_bias_row(const Tensor& x, const Tensor& bias);
  Tensor relu(const Tensor& x);
  Tensor leaky_relu(const Tensor& x, double slope);
  Tensor mul(const Tensor& a, const Tensor& b);
  /// x times a 1 x 1 tensor.
  Tensor scale(const Tensor& x, const Tensor& s);
  Tensor concat_cols(std::span<const Tensor> parts);
  /// One output row per segment. Max ties go to the lowest row index.
  Tensor segment_pool(const Tensor& x, const Segments& segments, PoolKind kind);
  /// Inverted dropout: survivors are scaled by 1/(1-p). Identity when !train.
  Tensor dropout(const Tensor& x, double p, bool train, Rng& rng);
  /// Mean cross-entropy of row-wise softmax against integer labels; 1 x 1.
  Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

  /// Constant sparse matrix times x.
  Tensor spmm(std::shared_ptr<const SparseMatrix> a, const Tensor& x);
  Tensor gather_rows(const Tensor& x, std::span<const int> index);
  /// x is r x (heads*d), att is heads x d; out(r,h) = <x(r, block h), att(h)>.
  Tensor head_dot(const Tensor& x, const Tensor& att);
  /// Column-wise softmax over the rows sharing a segment id.
  Tensor segment_softmax(const Tensor& scores, std::span<const int> segment, int num_segments);
  /// out(dst[e], block h) += alpha(e, h) * values(src[e], block h).
  Tensor edge_aggregate(const Tensor& alpha, const Tensor& values, std::span<const int> src,
                        std::span<const int> dst, int num_out);

  void backward(const Tensor& loss);

  std::size_t size() const { return records_.size(); }
  bool recording() const { return record_; }

 private:
  using Pullback = std::function<void(const Matrix&)>;
  Tensor emit(Matrix value, std::initializer_list<const Tensor*> inputs, Pullback pullback);

  struct Record {
    Tensor output;
    Pullback pullback;
  };
  bool record_;
  std::vector<Record> records_;
};

/// Adds g into t.grad, allocating it on first use.
void accumulate(TensorData& t, const Matrix& g);

}  // namespace graphprobe::nn
