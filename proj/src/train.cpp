// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#include "sponet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "sponet/checkpoint.hpp"

namespace sponet
{

diff::Tensor relative_l2_loss(const diff::Tensor &pred, const diff::Tensor &target,
                              std::shared_ptr<const CsrMatrix> mass)
{
  const auto &s = pred.shape();
  if (!(s == target.shape()) || s.cols != 1 || s.rows != mass->rows())
  {
    throw std::invalid_argument("relative_l2_loss: shapes " + s.str() + " and " +
                                target.shape().str() + " against mass of size " +
                                std::to_string(mass->rows()));
  }
  const std::size_t n = s.rows, nb = s.batch;
  auto p = pred.values(), t = target.values();
  // Per-sample M d, error norm and target norm kept for the backward rule.
  auto md = std::make_shared<std::vector<double>>(nb * n);
  auto dn = std::make_shared<std::vector<double>>(nb);
  auto tn = std::make_shared<std::vector<double>>(nb);
  std::vector<double> d(n), mt(n);
  double total = 0.0;
  for (std::size_t b = 0; b < nb; b++)
  {
    for (std::size_t i = 0; i < n; i++)
    {
      d[i] = p[b * n + i] - t[b * n + i];
    }
    std::span<double> mdb(md->data() + b * n, n);
    mass->multiply(d, mdb);
    mass->multiply(t.subspan(b * n, n), mt);
    double dd = 0.0, tt = 0.0;
    for (std::size_t i = 0; i < n; i++)
    {
      dd += d[i] * mdb[i];
      tt += t[b * n + i] * mt[i];
    }
    (*dn)[b] = std::sqrt(std::max(dd, 0.0));
    (*tn)[b] = std::sqrt(std::max(tt, kNormFloor * kNormFloor));
    total += (*dn)[b] / (*tn)[b];
  }
  auto out = diff::make_output({1, 1, 1}, {pred, target});
  out.mutable_values()[0] = total / static_cast<double>(nb);
  diff::Tensor x = pred;
  diff::record(out,
               [out, x, md, dn, tn, n, nb]() mutable
               {
                 if (!x.requires_grad())
                 {
                   return;
                 }
                 const double g = out.grad()[0] / static_cast<double>(nb);
                 auto gp = x.grad_buffer();
                 for (std::size_t b = 0; b < nb; b++)
                 {
                   // d/dd sqrt(d'Md)/|t| = Md / (|d| |t|); zero at d = 0.
                   if ((*dn)[b] == 0.0)
                   {
                     continue;
                   }
                   const double c = g / ((*dn)[b] * (*tn)[b]);
                   for (std::size_t i = 0; i < n; i++)
                   {
                     gp[b * n + i] += c * (*md)[b * n + i];
                   }
                 }
               });
  return out;
}

double relative_l2(const FeFunction &pred, const FeFunction &target)
{
  return l2_error(pred, target) / std::max(l2_norm(target), kNormFloor);
}

void adamw_step(std::span<double> param, std::span<const double> grad, AdamWState &state,
                double lr, const AdamWOptions &o)
{
  if (grad.size() != param.size())
  {
    throw std::invalid_argument("adamw_step: gradient size mismatch");
  }
  if (state.m.size() != param.size())
  {
    state.m.assign(param.size(), 0.0);
    state.v.assign(param.size(), 0.0);
    state.step = 0;
  }
  state.step++;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < param.size(); i++)
  {
    const double g = grad[i];
    state.m[i] = o.beta1 * state.m[i] + (1.0 - o.beta1) * g;
    state.v[i] = o.beta2 * state.v[i] + (1.0 - o.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    param[i] -= lr * (mhat / (std::sqrt(vhat) + o.eps) + o.weight_decay * param[i]);
  }
}

AdamW::AdamW(ParamList params, AdamWOptions options)
  : params_(std::move(params)), options_(options), state_(params_.size())
{
}

void AdamW::step(double lr)
{
  std::vector<double> zeros;
  for (std::size_t i = 0; i < params_.size(); i++)
  {
    auto &t = params_[i].tensor;
    std::span<const double> g;
    if (t.has_grad())
    {
      g = t.grad();
    }
    else
    {
      zeros.assign(t.size(), 0.0);
      g = zeros;
    }
    adamw_step(t.mutable_values(), g, state_[i], lr, options_);
  }
  steps_++;
}

void AdamW::zero_grad()
{
  for (auto &p : params_)
  {
    p.tensor.zero_grad();
  }
}

double lr_schedule(std::size_t epoch, std::size_t total, double lr_start, double lr_end)
{
  if (total == 0 || epoch >= total)
  {
    throw std::out_of_range("lr_schedule: epoch outside [0, total)");
  }
  if (total == 1)
  {
    return lr_start;
  }
  const double frac = static_cast<double>(epoch) / static_cast<double>(total - 1);
  return lr_start * std::pow(lr_end / lr_start, frac);
}

void TrainConfig::validate() const
{
  if (epochs < 1)
  {
    throw std::invalid_argument("epochs must be at least 1");
  }
  if (batch_size < 1)
  {
    throw std::invalid_argument("batch size must be at least 1");
  }
  if (!(lr_start > 0.0) || !(lr_end > 0.0) || lr_end > lr_start)
  {
    throw std::invalid_argument("need 0 < lr_end <= lr_start");
  }
}

void MetricsLog::append(const MetricsRow &row)
{
  if (!rows.empty() && row.epoch <= rows.back().epoch)
  {
    throw std::logic_error("metrics rows must have increasing epochs");
  }
  rows.push_back(row);
}

void MetricsLog::write_csv(std::ostream &out) const
{
  out << "epoch,lr,train_rel_l2,val_rel_l2,seconds\n";
  out << std::setprecision(17);
  for (const auto &r : rows)
  {
    out << r.epoch << ',' << r.lr << ',' << r.train_rel_l2 << ',' << r.val_rel_l2 << ','
        << std::setprecision(6) << r.seconds << std::setprecision(17) << '\n';
  }
}

void MetricsLog::write_csv(const std::filesystem::path &path) const
{
  std::ofstream out(path, std::ios::trunc);
  if (!out)
  {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  write_csv(out);
}

diff::Tensor stack_dofs(std::span<const PoissonSample> samples,
                        std::span<const std::size_t> order, bool use_u)
{
  if (order.empty())
  {
    throw std::invalid_argument("empty batch");
  }
  const std::size_t n = use_u ? samples[order[0]].u.size() : samples[order[0]].f.size();
  std::vector<double> v;
  v.reserve(order.size() * n);
  for (auto i : order)
  {
    const auto &src = use_u ? samples[i].u : samples[i].f;
    if (src.size() != n)
    {
      throw std::invalid_argument("samples of different sizes in one batch");
    }
    v.insert(v.end(), src.begin(), src.end());
  }
  return diff::Tensor::from({order.size(), n, 1}, std::move(v));
}

double evaluate(const SponModel &model, std::span<const PoissonSample> samples,
                std::size_t batch_size)
{
  if (samples.empty())
  {
    return 0.0;
  }
  auto mass = std::make_shared<const CsrMatrix>(model.out_space()->mass());
  double total = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < samples.size(); start += batch_size)
  {
    const std::size_t end = std::min(samples.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto pred = model.forward(stack_dofs(samples, idx, false));
    const auto loss = relative_l2_loss(pred, stack_dofs(samples, idx, true), mass);
    total += loss.item() * static_cast<double>(idx.size());
  }
  return total / static_cast<double>(samples.size());
}

namespace
{

void check_dims(const SponModel &model, const PoissonDataset &data)
{
  if (data.header.dim != model.in_space()->dim() || data.header.dim != model.out_space()->dim())
  {
    throw std::invalid_argument("dataset dim " + std::to_string(data.header.dim) +
                                " does not match the model spaces");
  }
}

std::vector<std::vector<double>> snapshot(const ParamList &params)
{
  std::vector<std::vector<double>> out;
  for (const auto &p : params)
  {
    out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  }
  return out;
}

void restore(ParamList &params, const std::vector<std::vector<double>> &values)
{
  for (std::size_t i = 0; i < params.size(); i++)
  {
    std::ranges::copy(values[i], params[i].tensor.mutable_values().begin());
  }
}

}  // namespace

TrainResult train(SponModel &model, const PoissonDataset &data, const TrainConfig &config,
                  const EpochCallback &on_epoch)
{
  config.validate();
  check_dims(model, data);
  const auto train_set = data.split(Split::Train);
  const auto val_set = data.split(Split::Val);
  if (train_set.empty())
  {
    throw std::invalid_argument("training split is empty");
  }

  auto mass = std::make_shared<const CsrMatrix>(model.out_space()->mass());
  auto params = model.params();
  AdamW opt(params, config.adamw);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  result.best_val = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best;
  for (std::size_t epoch = 0; epoch < config.epochs; epoch++)
  {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_schedule(epoch, config.epochs, config.lr_start, config.lr_end);
    std::shuffle(order.begin(), order.end(), rng);
    double train_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, batch_index++)
    {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      opt.zero_grad();
      diff::Tape tape;
      const auto pred = model.forward(stack_dofs(train_set, idx, false));
      const auto loss = relative_l2_loss(pred, stack_dofs(train_set, idx, true), mass);
      const double value = loss.item();
      if (!std::isfinite(value))
      {
        std::ostringstream msg;
        msg << "non-finite training loss at epoch " << epoch << ", batch " << batch_index
            << ", lr " << lr;
        throw NumericalError(msg.str());
      }
      tape.backward(loss);
      opt.step(lr);
      train_sum += value * static_cast<double>(idx.size());
    }
    MetricsRow row;
    row.epoch = epoch;
    row.lr = lr;
    row.train_rel_l2 = train_sum / static_cast<double>(order.size());
    row.val_rel_l2 = val_set.empty() ? row.train_rel_l2 : evaluate(model, val_set);
    if (!std::isfinite(row.val_rel_l2))
    {
      throw NumericalError("non-finite validation error at epoch " + std::to_string(epoch));
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.append(row);
    if (row.val_rel_l2 < result.best_val || val_set.empty())
    {
      result.best_val = row.val_rel_l2;
      result.best_epoch = epoch;
      best = snapshot(params);
    }
    if (!config.checkpoint.empty() && config.checkpoint_every > 0 &&
        (epoch + 1) % config.checkpoint_every == 0)
    {
      const auto current = snapshot(params);
      restore(params, best);
      save_checkpoint(model, config.checkpoint);
      restore(params, current);
    }
    if (on_epoch)
    {
      on_epoch(row);
    }
  }
  restore(params, best);
  if (!config.checkpoint.empty())
  {
    save_checkpoint(model, config.checkpoint);
  }
  result.optimizer_steps = opt.steps();
  return result;
}

}  // namespace sponet
