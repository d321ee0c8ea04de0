// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#include "sponet/diff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sponet::diff
{

namespace
{

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

thread_local Tape *current_tape = nullptr;

std::span<double> grad_of(const std::shared_ptr<detail::TensorData> &d)
{
  if (d->grad.empty())
  {
    d->grad.assign(d->value.size(), 0.0);
  }
  return d->grad;
}

void require(bool cond, const char *op, const char *what)
{
  if (!cond)
  {
    throw std::invalid_argument(std::string(op) + ": " + what);
  }
}

void require(bool cond, const char *op, const std::string &what)
{
  if (!cond)
  {
    throw std::invalid_argument(std::string(op) + ": " + what);
  }
}

ConstMatMap as_matrix(const std::vector<double> &v, std::size_t rows, std::size_t cols)
{
  return ConstMatMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MatMap as_matrix(std::span<double> v, std::size_t rows, std::size_t cols)
{
  return MatMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::string Shape::str() const
{
  return "(" + std::to_string(batch) + ", " + std::to_string(rows) + ", " + std::to_string(cols) +
         ")";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad)
{
  auto d = std::make_shared<detail::TensorData>();
  d->shape = shape;
  d->value.assign(shape.size(), 0.0);
  d->requires_grad = requires_grad;
  return Tensor(std::move(d));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad)
{
  if (values.size() != shape.size())
  {
    throw std::invalid_argument("tensor of shape " + shape.str() + " given " +
                                std::to_string(values.size()) + " values");
  }
  auto d = std::make_shared<detail::TensorData>();
  d->shape = shape;
  d->value = std::move(values);
  d->requires_grad = requires_grad;
  return Tensor(std::move(d));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({1, 1, 1}, {v}, requires_grad); }

double Tensor::item() const
{
  if (size() != 1)
  {
    throw std::invalid_argument("item() on tensor of shape " + shape().str());
  }
  return data_->value[0];
}

std::span<double> Tensor::grad_buffer() { return grad_of(data_); }

void Tensor::zero_grad() { std::fill(data_->grad.begin(), data_->grad.end(), 0.0); }

Tensor Tensor::clone() const { return from(shape(), data_->value, data_->requires_grad); }

Tape::Tape() : previous_(current_tape) { current_tape = this; }

Tape::~Tape() { current_tape = previous_; }

Tape *active_tape() { return current_tape; }

void Tape::backward(const Tensor &loss)
{
  if (!loss.defined() || loss.data()->producer != this)
  {
    throw std::logic_error("backward: loss was not produced under this tape");
  }
  if (loss.size() != 1)
  {
    throw std::invalid_argument("backward: loss must be scalar, got shape " + loss.shape().str());
  }
  grad_of(loss.data())[0] += 1.0;
  for (auto it = backward_.rbegin(); it != backward_.rend(); ++it)
  {
    (*it)();
  }
  backward_.clear();
}

Tensor make_output(Shape shape, std::initializer_list<Tensor> inputs)
{
  auto d = std::make_shared<detail::TensorData>();
  d->shape = shape;
  d->value.assign(shape.size(), 0.0);
  if (current_tape != nullptr)
  {
    for (const auto &in : inputs)
    {
      if (in.requires_grad())
      {
        d->requires_grad = true;
        d->producer = current_tape;
        break;
      }
    }
  }
  return Tensor(std::move(d));
}

void record(const Tensor &out, std::function<void()> rule)
{
  if (out.requires_grad() && out.data()->producer != nullptr && current_tape != nullptr)
  {
    // Outputs that never reach the loss keep an empty gradient; skip them.
    current_tape->record([od = out.data(), rule = std::move(rule)]()
                         {
                           if (!od->grad.empty())
                           {
                             rule();
                           }
                         });
  }
}

Tensor matmul(const Tensor &x, const Tensor &w)
{
  const auto &xs = x.shape(), &ws = w.shape();
  require(ws.batch == 1 && xs.cols == ws.rows, "matmul", xs.str() + " x " + ws.str());
  const std::size_t n = xs.batch * xs.rows;
  auto y = make_output({xs.batch, xs.rows, ws.cols}, {x, w});
  as_matrix(y.mutable_values(), n, ws.cols).noalias() =
      as_matrix(x.data()->value, n, xs.cols) * as_matrix(w.data()->value, ws.rows, ws.cols);
  record(y,
         [xd = x.data(), wd = w.data(), yd = y.data(), n]()
         {
           const auto k = wd->shape.rows, m = wd->shape.cols;
           const auto gy = as_matrix(yd->grad, n, m);
           if (xd->requires_grad)
           {
             as_matrix(grad_of(xd), n, k).noalias() += gy * as_matrix(wd->value, k, m).transpose();
           }
           if (wd->requires_grad)
           {
             as_matrix(grad_of(wd), k, m).noalias() += as_matrix(xd->value, n, k).transpose() * gy;
           }
         });
  return y;
}

Tensor left_matmul(const Tensor &w, const Tensor &x)
{
  const auto &xs = x.shape(), &ws = w.shape();
  require(ws.batch == 1 && ws.cols == xs.rows, "left_matmul", ws.str() + " x " + xs.str());
  auto y = make_output({xs.batch, ws.rows, xs.cols}, {w, x});
  const auto wm = as_matrix(w.data()->value, ws.rows, ws.cols);
  if (xs.cols == 1)
  {
    // Batch entries are rows of a (B, N) matrix: Y = X W^T.
    as_matrix(y.mutable_values(), xs.batch, ws.rows).noalias() =
        as_matrix(x.data()->value, xs.batch, xs.rows) * wm.transpose();
  }
  else
  {
    for (std::size_t b = 0; b < xs.batch; b++)
    {
      const ConstMatMap xb(x.data()->value.data() + b * xs.rows * xs.cols,
                           static_cast<Eigen::Index>(xs.rows), static_cast<Eigen::Index>(xs.cols));
      MatMap yb(y.mutable_values().data() + b * ws.rows * xs.cols,
                static_cast<Eigen::Index>(ws.rows), static_cast<Eigen::Index>(xs.cols));
      yb.noalias() = wm * xb;
    }
  }
  record(y,
         [wd = w.data(), xd = x.data(), yd = y.data()]()
         {
           const auto m = wd->shape.rows, n = wd->shape.cols;
           const auto bsz = xd->shape.batch, c = xd->shape.cols;
           const auto wm = as_matrix(wd->value, m, n);
           for (std::size_t b = 0; b < bsz; b++)
           {
             const ConstMatMap gy(yd->grad.data() + b * m * c, static_cast<Eigen::Index>(m),
                                  static_cast<Eigen::Index>(c));
             if (xd->requires_grad)
             {
               MatMap gx(grad_of(xd).data() + b * n * c, static_cast<Eigen::Index>(n),
                         static_cast<Eigen::Index>(c));
               gx.noalias() += wm.transpose() * gy;
             }
             if (wd->requires_grad)
             {
               const ConstMatMap xb(xd->value.data() + b * n * c, static_cast<Eigen::Index>(n),
                                    static_cast<Eigen::Index>(c));
               as_matrix(grad_of(wd), m, n).noalias() += gy * xb.transpose();
             }
           }
         });
  return y;
}

Tensor sparse_matvec(std::shared_ptr<const CsrMatrix> a, const Tensor &x)
{
  const auto &xs = x.shape();
  require(a->cols() == xs.rows, "sparse_matvec",
          std::to_string(a->rows()) + "x" + std::to_string(a->cols()) + " times " + xs.str());
  auto y = make_output({xs.batch, a->rows(), xs.cols}, {x});
  const auto &off = a->row_offsets();
  const auto &col = a->col_indices();
  const auto &val = a->values();
  const std::size_t c = xs.cols;
  auto yv = y.mutable_values();
  for (std::size_t b = 0; b < xs.batch; b++)
  {
    const double *xb = x.values().data() + b * xs.rows * c;
    double *yb = yv.data() + b * a->rows() * c;
    for (std::size_t r = 0; r < a->rows(); r++)
    {
      for (auto k = off[r]; k < off[r + 1]; k++)
      {
        const double v = val[k];
        const double *xr = xb + col[k] * c;
        for (std::size_t ch = 0; ch < c; ch++)
        {
          yb[r * c + ch] += v * xr[ch];
        }
      }
    }
  }
  record(y,
         [a, xd = x.data(), yd = y.data()]()
         {
           const auto &off = a->row_offsets();
           const auto &col = a->col_indices();
           const auto &val = a->values();
           const auto c = xd->shape.cols, n = xd->shape.rows, m = a->rows();
           auto gx = grad_of(xd);
           for (std::size_t b = 0; b < xd->shape.batch; b++)
           {
             const double *gy = yd->grad.data() + b * m * c;
             double *gxb = gx.data() + b * n * c;
             for (std::size_t r = 0; r < m; r++)
             {
               for (auto k = off[r]; k < off[r + 1]; k++)
               {
                 for (std::size_t ch = 0; ch < c; ch++)
                 {
                   gxb[col[k] * c + ch] += val[k] * gy[r * c + ch];
                 }
               }
             }
           }
         });
  return y;
}

Tensor add(const Tensor &x, const Tensor &y)
{
  const auto &xs = x.shape(), &ys = y.shape();
  const bool broadcast = ys != xs;
  require(!broadcast || (ys.batch == 1 && ys.rows == 1 && ys.cols == xs.cols), "add",
          xs.str() + " + " + ys.str());
  auto z = make_output(xs, {x, y});
  auto zv = z.mutable_values();
  const auto xv = x.values(), yv = y.values();
  const std::size_t c = xs.cols;
  for (std::size_t i = 0; i < zv.size(); i++)
  {
    zv[i] = xv[i] + yv[broadcast ? i % c : i];
  }
  record(z,
         [xd = x.data(), yd = y.data(), zd = z.data(), broadcast, c]()
         {
           const auto &gz = zd->grad;
           if (xd->requires_grad)
           {
             auto gx = grad_of(xd);
             for (std::size_t i = 0; i < gz.size(); i++)
             {
               gx[i] += gz[i];
             }
           }
           if (yd->requires_grad)
           {
             auto gy = grad_of(yd);
             for (std::size_t i = 0; i < gz.size(); i++)
             {
               gy[broadcast ? i % c : i] += gz[i];
             }
           }
         });
  return z;
}

Tensor sub(const Tensor &x, const Tensor &y)
{
  require(x.shape() == y.shape(), "sub", x.shape().str() + " - " + y.shape().str());
  auto z = make_output(x.shape(), {x, y});
  auto zv = z.mutable_values();
  for (std::size_t i = 0; i < zv.size(); i++)
  {
    zv[i] = x.values()[i] - y.values()[i];
  }
  record(z,
         [xd = x.data(), yd = y.data(), zd = z.data()]()
         {
           const auto &gz = zd->grad;
           if (xd->requires_grad)
           {
             auto gx = grad_of(xd);
             for (std::size_t i = 0; i < gz.size(); i++)
             {
               gx[i] += gz[i];
             }
           }
           if (yd->requires_grad)
           {
             auto gy = grad_of(yd);
             for (std::size_t i = 0; i < gz.size(); i++)
             {
               gy[i] -= gz[i];
             }
           }
         });
  return z;
}

Tensor mul(const Tensor &x, const Tensor &y)
{
  require(x.shape() == y.shape(), "mul", x.shape().str() + " * " + y.shape().str());
  auto z = make_output(x.shape(), {x, y});
  auto zv = z.mutable_values();
  for (std::size_t i = 0; i < zv.size(); i++)
  {
    zv[i] = x.values()[i] * y.values()[i];
  }
  record(z,
         [xd = x.data(), yd = y.data(), zd = z.data()]()
         {
           const auto &gz = zd->grad;
           if (xd->requires_grad)
           {
             auto gx = grad_of(xd);
             for (std::size_t i = 0; i < gz.size(); i++)
             {
               gx[i] += gz[i] * yd->value[i];
             }
           }
           if (yd->requires_grad)
           {
             auto gy = grad_of(yd);
             for (std::size_t i = 0; i < gz.size(); i++)
             {
               gy[i] += gz[i] * xd->value[i];
             }
           }
         });
  return z;
}

Tensor scale(const Tensor &x, double s)
{
  auto z = make_output(x.shape(), {x});
  auto zv = z.mutable_values();
  for (std::size_t i = 0; i < zv.size(); i++)
  {
    zv[i] = s * x.values()[i];
  }
  record(z,
         [xd = x.data(), zd = z.data(), s]()
         {
           auto gx = grad_of(xd);
           for (std::size_t i = 0; i < gx.size(); i++)
           {
             gx[i] += s * zd->grad[i];
           }
         });
  return z;
}

Tensor affine_combine(const Tensor &x, const Tensor &y, const Tensor &p)
{
  require(x.shape() == y.shape() && p.size() == 3, "affine_combine",
          x.shape().str() + ", " + y.shape().str() + ", " + p.shape().str());
  auto z = make_output(x.shape(), {x, y, p});
  const auto pv = p.values();
  auto zv = z.mutable_values();
  for (std::size_t i = 0; i < zv.size(); i++)
  {
    zv[i] = pv[0] * x.values()[i] + pv[1] * y.values()[i] + pv[2];
  }
  record(z,
         [xd = x.data(), yd = y.data(), pd = p.data(), zd = z.data()]()
         {
           const auto &gz = zd->grad;
           const auto &pv = pd->value;
           if (xd->requires_grad)
           {
             auto gx = grad_of(xd);
             for (std::size_t i = 0; i < gz.size(); i++)
             {
               gx[i] += pv[0] * gz[i];
             }
           }
           if (yd->requires_grad)
           {
             auto gy = grad_of(yd);
             for (std::size_t i = 0; i < gz.size(); i++)
             {
               gy[i] += pv[1] * gz[i];
             }
           }
           if (pd->requires_grad)
           {
             double ga = 0.0, gb = 0.0, gc = 0.0;
             for (std::size_t i = 0; i < gz.size(); i++)
             {
               ga += gz[i] * xd->value[i];
               gb += gz[i] * yd->value[i];
               gc += gz[i];
             }
             auto gp = grad_of(pd);
             gp[0] += ga;
             gp[1] += gb;
             gp[2] += gc;
           }
         });
  return z;
}

Tensor gather(const Tensor &x, std::shared_ptr<const std::vector<std::size_t>> index)
{
  const auto &xs = x.shape();
  const std::size_t e = index->size(), c = xs.cols;
  auto y = make_output({xs.batch, e, c}, {x});
  auto yv = y.mutable_values();
  for (std::size_t b = 0; b < xs.batch; b++)
  {
    const double *xb = x.values().data() + b * xs.rows * c;
    double *yb = yv.data() + b * e * c;
    for (std::size_t k = 0; k < e; k++)
    {
      const auto src = (*index)[k];
      require(src < xs.rows, "gather", "index out of range");
      std::copy_n(xb + src * c, c, yb + k * c);
    }
  }
  record(y,
         [index, xd = x.data(), yd = y.data()]()
         {
           const auto e = index->size(), c = xd->shape.cols, n = xd->shape.rows;
           auto gx = grad_of(xd);
           for (std::size_t b = 0; b < xd->shape.batch; b++)
           {
             const double *gy = yd->grad.data() + b * e * c;
             double *gxb = gx.data() + b * n * c;
             for (std::size_t k = 0; k < e; k++)
             {
               for (std::size_t ch = 0; ch < c; ch++)
               {
                 gxb[(*index)[k] * c + ch] += gy[k * c + ch];
               }
             }
           }
         });
  return y;
}

Tensor scatter_mean(const Tensor &x, std::shared_ptr<const std::vector<std::size_t>> receiver,
                    std::size_t num_nodes)
{
  const auto &xs = x.shape();
  require(receiver->size() == xs.rows, "scatter_mean",
          std::to_string(receiver->size()) + " receivers for " + xs.str());
  const std::size_t e = xs.rows, c = xs.cols;
  auto inv_count = std::make_shared<std::vector<double>>(num_nodes, 0.0);
  for (auto r : *receiver)
  {
    require(r < num_nodes, "scatter_mean", "receiver out of range");
    (*inv_count)[r] += 1.0;
  }
  for (auto &v : *inv_count)
  {
    v = v > 0.0 ? 1.0 / v : 0.0;
  }
  auto y = make_output({xs.batch, num_nodes, c}, {x});
  auto yv = y.mutable_values();
  for (std::size_t b = 0; b < xs.batch; b++)
  {
    const double *xb = x.values().data() + b * e * c;
    double *yb = yv.data() + b * num_nodes * c;
    for (std::size_t k = 0; k < e; k++)
    {
      const auto r = (*receiver)[k];
      for (std::size_t ch = 0; ch < c; ch++)
      {
        yb[r * c + ch] += xb[k * c + ch];
      }
    }
    for (std::size_t i = 0; i < num_nodes; i++)
    {
      for (std::size_t ch = 0; ch < c; ch++)
      {
        yb[i * c + ch] *= (*inv_count)[i];
      }
    }
  }
  record(y,
         [receiver, inv_count, xd = x.data(), yd = y.data(), num_nodes]()
         {
           const auto e = xd->shape.rows, c = xd->shape.cols;
           auto gx = grad_of(xd);
           for (std::size_t b = 0; b < xd->shape.batch; b++)
           {
             const double *gy = yd->grad.data() + b * num_nodes * c;
             double *gxb = gx.data() + b * e * c;
             for (std::size_t k = 0; k < e; k++)
             {
               const auto r = (*receiver)[k];
               for (std::size_t ch = 0; ch < c; ch++)
               {
                 gxb[k * c + ch] += (*inv_count)[r] * gy[r * c + ch];
               }
             }
           }
         });
  return y;
}

Tensor concat(const Tensor &x, const Tensor &y)
{
  const auto &xs = x.shape(), &ys = y.shape();
  require(xs.batch == ys.batch && xs.rows == ys.rows, "concat", xs.str() + " | " + ys.str());
  const std::size_t n = xs.batch * xs.rows, cx = xs.cols, cy = ys.cols;
  auto z = make_output({xs.batch, xs.rows, cx + cy}, {x, y});
  auto zv = z.mutable_values();
  for (std::size_t i = 0; i < n; i++)
  {
    std::copy_n(x.values().data() + i * cx, cx, zv.data() + i * (cx + cy));
    std::copy_n(y.values().data() + i * cy, cy, zv.data() + i * (cx + cy) + cx);
  }
  record(z,
         [xd = x.data(), yd = y.data(), zd = z.data(), n, cx, cy]()
         {
           const auto &gz = zd->grad;
           if (xd->requires_grad)
           {
             auto gx = grad_of(xd);
             for (std::size_t i = 0; i < n; i++)
             {
               for (std::size_t k = 0; k < cx; k++)
               {
                 gx[i * cx + k] += gz[i * (cx + cy) + k];
               }
             }
           }
           if (yd->requires_grad)
           {
             auto gy = grad_of(yd);
             for (std::size_t i = 0; i < n; i++)
             {
               for (std::size_t k = 0; k < cy; k++)
               {
                 gy[i * cy + k] += gz[i * (cx + cy) + cx + k];
               }
             }
           }
         });
  return z;
}

Tensor swish(const Tensor &x)
{
  auto y = make_output(x.shape(), {x});
  auto yv = y.mutable_values();
  const auto xv = x.values();
  for (std::size_t i = 0; i < yv.size(); i++)
  {
    yv[i] = xv[i] * sigmoid(xv[i]);
  }
  record(y,
         [xd = x.data(), yd = y.data()]()
         {
           auto gx = grad_of(xd);
           for (std::size_t i = 0; i < gx.size(); i++)
           {
             const double v = xd->value[i], s = sigmoid(v);
             gx[i] += yd->grad[i] * s * (1.0 + v * (1.0 - s));
           }
         });
  return y;
}

Tensor dense(const Tensor &x, const Tensor &w, const Tensor &b, bool apply_swish)
{
  const auto &xs = x.shape(), &ws = w.shape(), &bs = b.shape();
  require(ws.batch == 1 && xs.cols == ws.rows, "dense", xs.str() + " x " + ws.str());
  require(bs.batch == 1 && bs.rows == 1 && bs.cols == ws.cols, "dense", "bias " + bs.str());
  const std::size_t n = xs.batch * xs.rows, k = ws.rows, m = ws.cols;
  auto y = make_output({xs.batch, xs.rows, m}, {x, w, b});
  auto ym = as_matrix(y.mutable_values(), n, m);
  ym.noalias() = as_matrix(x.data()->value, n, k) * as_matrix(w.data()->value, k, m);
  ym.rowwise() += as_matrix(b.data()->value, 1, m).row(0);
  // Derivative of the activation at the pre-activation, kept for backward.
  std::shared_ptr<double[]> dact;
  if (apply_swish)
  {
    auto z = Eigen::Map<Eigen::ArrayXd>(y.mutable_values().data(), static_cast<Eigen::Index>(n * m));
    const Eigen::ArrayXd s = 1.0 / (1.0 + (-z).exp());
    if (y.requires_grad())
    {
      dact.reset(new double[n * m]);
      Eigen::Map<Eigen::ArrayXd>(dact.get(), z.size()) = s * (1.0 + z * (1.0 - s));
    }
    z *= s;
  }
  record(y,
         [xd = x.data(), wd = w.data(), bd = b.data(), yd = y.data(), dact, n, k, m]()
         {
           RowMatrix gz = as_matrix(yd->grad, n, m);
           if (dact)
           {
             gz.array() *= ConstMatMap(dact.get(), static_cast<Eigen::Index>(n),
                                       static_cast<Eigen::Index>(m))
                                .array();
           }
           if (xd->requires_grad)
           {
             as_matrix(grad_of(xd), n, k).noalias() += gz * as_matrix(wd->value, k, m).transpose();
           }
           if (wd->requires_grad)
           {
             as_matrix(grad_of(wd), k, m).noalias() += as_matrix(xd->value, n, k).transpose() * gz;
           }
           if (bd->requires_grad)
           {
             as_matrix(grad_of(bd), 1, m) += gz.colwise().sum();
           }
         });
  return y;
}

Tensor sum(const Tensor &x)
{
  auto y = make_output({1, 1, 1}, {x});
  double s = 0.0;
  for (double v : x.values())
  {
    s += v;
  }
  y.mutable_values()[0] = s;
  record(y,
         [xd = x.data(), yd = y.data()]()
         {
           auto gx = grad_of(xd);
           const double g = yd->grad[0];
           for (auto &v : gx)
           {
             v += g;
           }
         });
  return y;
}

Tensor overwrite_rows(const Tensor &x, std::shared_ptr<const std::vector<std::size_t>> rows,
                      std::shared_ptr<const std::vector<double>> values)
{
  const auto &xs = x.shape();
  require(rows->size() == values->size(), "overwrite_rows", "rows/values length mismatch");
  auto y = make_output(xs, {x});
  auto yv = y.mutable_values();
  std::copy(x.values().begin(), x.values().end(), yv.begin());
  const std::size_t c = xs.cols;
  for (std::size_t b = 0; b < xs.batch; b++)
  {
    for (std::size_t k = 0; k < rows->size(); k++)
    {
      require((*rows)[k] < xs.rows, "overwrite_rows", "row out of range");
      std::fill_n(yv.data() + (b * xs.rows + (*rows)[k]) * c, c, (*values)[k]);
    }
  }
  record(y,
         [rows, xd = x.data(), yd = y.data()]()
         {
           const auto &xs = xd->shape;
           const std::size_t c = xs.cols;
           std::vector<double> g = yd->grad;
           for (std::size_t b = 0; b < xs.batch; b++)
           {
             for (auto r : *rows)
             {
               std::fill_n(g.data() + (b * xs.rows + r) * c, c, 0.0);
             }
           }
           auto gx = grad_of(xd);
           for (std::size_t i = 0; i < gx.size(); i++)
           {
             gx[i] += g[i];
           }
         });
  return y;
}

}  // namespace sponet::diff
