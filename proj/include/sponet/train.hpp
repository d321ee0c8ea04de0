// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sponet/dataset.hpp"
#include "sponet/spon.hpp"

namespace sponet
{

// Raised when a loss or parameter turns non-finite.
class NumericalError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kNormFloor = 1e-14;

// Mean over the batch of sqrt(d'Md / t'Mt) with d = pred - target. Both
// tensors are (batch, dim, 1); only `pred` receives a gradient.
diff::Tensor relative_l2_loss(const diff::Tensor &pred, const diff::Tensor &target,
                              std::shared_ptr<const CsrMatrix> mass);
double relative_l2(const FeFunction &pred, const FeFunction &target);

struct AdamWOptions
{
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

struct AdamWState
{
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

// One decoupled-decay AdamW update of a single parameter array.
void adamw_step(std::span<double> param, std::span<const double> grad, AdamWState &state,
                double lr, const AdamWOptions &options = {});

class AdamW
{
public:
  AdamW(ParamList params, AdamWOptions options = {});
  // Updates every parameter from its accumulated gradient; parameters
  // without a gradient see a zero one.
  void step(double lr);
  void zero_grad();
  std::uint64_t steps() const { return steps_; }

private:
  ParamList params_;
  AdamWOptions options_;
  std::vector<AdamWState> state_;
  std::uint64_t steps_ = 0;
};

// Geometric interpolation from lr_start at epoch 0 to lr_end at the last
// epoch.
double lr_schedule(std::size_t epoch, std::size_t total, double lr_start, double lr_end);

struct TrainConfig
{
  std::size_t epochs = 500;
  std::size_t batch_size = 4;
  double lr_start = 1e-4;
  double lr_end = 1e-6;
  AdamWOptions adamw;
  std::uint64_t seed = 0;
  // Save the best-validation parameters every `checkpoint_every` epochs
  // when a path is set; 0 saves only at the end.
  std::filesystem::path checkpoint;
  std::size_t checkpoint_every = 0;

  void validate() const;
};

struct MetricsRow
{
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_rel_l2 = 0.0;
  double val_rel_l2 = 0.0;
  double seconds = 0.0;
};

struct MetricsLog
{
  std::vector<MetricsRow> rows;

  void append(const MetricsRow &row);
  void write_csv(std::ostream &out) const;
  void write_csv(const std::filesystem::path &path) const;
};

struct TrainResult
{
  MetricsLog log;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
  std::uint64_t optimizer_steps = 0;
};

using EpochCallback = std::function<void(const MetricsRow &)>;

// Trains on the dataset's train split and leaves the model holding the
// parameters with the lowest validation error (the last epoch's when the
// validation split is empty).
TrainResult train(SponModel &model, const PoissonDataset &data, const TrainConfig &config,
                  const EpochCallback &on_epoch = {});

// Mean relative L2 error of the model over the samples, in batches.
double evaluate(const SponModel &model, std::span<const PoissonSample> samples,
                std::size_t batch_size = 16);

// Stacks sample DoF vectors into a (batch, dim, 1) tensor.
diff::Tensor stack_dofs(std::span<const PoissonSample> samples,
                        std::span<const std::size_t> order, bool use_u);

}  // namespace sponet
