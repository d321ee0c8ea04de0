// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

//
// Minimal define-by-run reverse-mode differentiation over batched f64
// tensors. Tensors are shaped (batch, rows, cols); a 2D matrix is a tensor
// with batch 1. Operations executed while a Tape is active on the current
// thread are recorded when any input requires a gradient; Tape::backward
// replays them in reverse order.
//

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sponet/csr.hpp"

namespace sponet::diff
{

struct Shape
{
  std::size_t batch = 1;
  std::size_t rows = 1;
  std::size_t cols = 1;

  std::size_t size() const { return batch * rows * cols; }
  bool operator==(const Shape &) const = default;
  std::string str() const;
};

class Tape;

namespace detail
{
struct TensorData
{
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  const Tape *producer = nullptr;
};
}  // namespace detail

class Tensor
{
public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return data_ != nullptr; }
  const Shape &shape() const { return data_->shape; }
  std::size_t size() const { return data_->value.size(); }
  bool requires_grad() const { return data_->requires_grad; }
  void set_requires_grad(bool flag) { data_->requires_grad = flag; }

  std::span<const double> values() const { return data_->value; }
  std::span<double> mutable_values() { return data_->value; }
  double item() const;

  bool has_grad() const { return !data_->grad.empty(); }
  // Empty until a backward pass reaches this tensor.
  std::span<const double> grad() const { return data_->grad; }
  // Allocates a zero gradient on first use.
  std::span<double> grad_buffer();
  void zero_grad();

  // Same-shaped tensor sharing no storage and detached from any tape.
  Tensor clone() const;

  const std::shared_ptr<detail::TensorData> &data() const { return data_; }

private:
  explicit Tensor(std::shared_ptr<detail::TensorData> d) : data_(std::move(d)) {}
  std::shared_ptr<detail::TensorData> data_;

  friend Tensor make_output(Shape, std::initializer_list<Tensor>);
};

// Records operations executed on this thread between construction and
// destruction. Tapes nest; the innermost one is active.
class Tape
{
public:
  Tape();
  ~Tape();
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  // Seeds d(loss)/d(loss) = 1 and runs recorded backward rules in reverse.
  // Gradients accumulate into every tensor that requires one.
  void backward(const Tensor &loss);

  std::size_t size() const { return backward_.size(); }
  void record(std::function<void()> rule) { backward_.push_back(std::move(rule)); }

private:
  std::vector<std::function<void()>> backward_;
  Tape *previous_;
};

Tape *active_tape();

// Allocates an output tensor that requires a gradient iff a tape is active
// and any input requires one.
Tensor make_output(Shape shape, std::initializer_list<Tensor> inputs);
// Registers `rule` for `out` on the active tape if `out` requires a gradient.
void record(const Tensor &out, std::function<void()> rule);

// y[b] = x[b] * w, with x (B, R, K) and w (1, K, N).
Tensor matmul(const Tensor &x, const Tensor &w);
// y[b] = w * x[b], with w (1, M, N) and x (B, N, C).
Tensor left_matmul(const Tensor &w, const Tensor &x);
// y[b] = A * x[b], with x (B, A.cols, C).
Tensor sparse_matvec(std::shared_ptr<const CsrMatrix> a, const Tensor &x);

// Elementwise sum; y may also be a (1, 1, cols) row broadcast over x.
Tensor add(const Tensor &x, const Tensor &y);
Tensor sub(const Tensor &x, const Tensor &y);
Tensor mul(const Tensor &x, const Tensor &y);
Tensor scale(const Tensor &x, double s);
// p = (a, b, c) of shape (1, 1, 3): returns a*x + b*y + c.
Tensor affine_combine(const Tensor &x, const Tensor &y, const Tensor &p);

// y[b, e, :] = x[b, index[e], :].
Tensor gather(const Tensor &x, std::shared_ptr<const std::vector<std::size_t>> index);
// y[b, i, :] = mean of x[b, e, :] over edges e with receiver[e] == i; 0 for
// nodes without edges.
Tensor scatter_mean(const Tensor &x, std::shared_ptr<const std::vector<std::size_t>> receiver,
                    std::size_t num_nodes);
// Concatenates along the channel (cols) axis.
Tensor concat(const Tensor &x, const Tensor &y);
// x * sigmoid(x).
Tensor swish(const Tensor &x);
// Fused affine layer x * w + b with b a (1, 1, N) row, optionally followed
// by swish. Same result as the composed primitives with fewer passes.
Tensor dense(const Tensor &x, const Tensor &w, const Tensor &b, bool apply_swish);
Tensor sum(const Tensor &x);

// Copies x and overwrites rows listed in `rows` (node index within each
// batch entry, all channels) with `values` (one per listed row, shared
// across the batch). No gradient flows through overwritten entries.
Tensor overwrite_rows(const Tensor &x, std::shared_ptr<const std::vector<std::size_t>> rows,
                      std::shared_ptr<const std::vector<double>> values);

}  // namespace sponet::diff
