// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sponet/boundary.hpp"
#include "sponet/processor.hpp"

namespace sponet
{

enum class Architecture
{
  Spon,    // single-level psi processor
  SponMg,  // multigrid processor with psi at the coarsest level
};

std::string to_string(Architecture arch);
Architecture parse_architecture(const std::string &name);

// Everything needed to rebuild a model bit-for-bit, up to its parameters.
struct ModelConfig
{
  Architecture arch = Architecture::Spon;
  std::size_t nx = 16;
  int degree_in = 1;
  int degree_out = 1;
  std::size_t levels = 3;      // multigrid depth N
  std::size_t mp_layers = 1;   // blocks per level stack (multigrid)
  std::size_t psi_layers = 4;  // blocks in psi, split between input and output stacks
  std::size_t hidden = 16;
  std::size_t compression = 20;
  std::uint64_t seed = 0;
  std::string bcs = "poisson";

  PsiOptions psi_options() const;
  MgOptions mg_options() const;

  std::map<std::string, std::string> to_map() const;
  static ModelConfig from_map(const std::map<std::string, std::string> &kv);
};

// S(f) = D(P(E(f))): nodal encoder, learnable processor, decoder that
// assigns Dirichlet DoFs after the processor.
class SponModel
{
public:
  SponModel(std::shared_ptr<const FeSpace> in_space, std::shared_ptr<const FeSpace> out_space,
            std::unique_ptr<Processor> processor, std::vector<DirichletBc> bcs,
            ModelConfig config = {});

  const std::shared_ptr<const FeSpace> &in_space() const { return in_space_; }
  const std::shared_ptr<const FeSpace> &out_space() const { return out_space_; }
  const Processor &processor() const { return *processor_; }
  const std::vector<DirichletBc> &bcs() const { return bcs_; }
  const ModelConfig &config() const { return config_; }

  // Processor followed by the boundary-condition junction on DoF tensors.
  diff::Tensor forward(const diff::Tensor &f_dofs) const;
  // Differentiable BC assignment; gradients through constrained DoFs are 0.
  diff::Tensor apply_bcs(const diff::Tensor &u_dofs) const;

  std::vector<FeFunction> operator()(std::span<const FeFunction> f) const;
  FeFunction operator()(const FeFunction &f) const;

  ParamList params() const { return processor_->params(); }
  std::size_t param_count() const { return count_params(params()); }

private:
  std::shared_ptr<const FeSpace> in_space_;
  std::shared_ptr<const FeSpace> out_space_;
  std::unique_ptr<Processor> processor_;
  std::vector<DirichletBc> bcs_;
  std::shared_ptr<const std::vector<std::size_t>> bc_dofs_;
  std::shared_ptr<const std::vector<double>> bc_values_;
  ModelConfig config_;
};

std::unique_ptr<SponModel> build_model(const ModelConfig &config);

// Closed-form parameter count of build_model(config).
std::size_t expected_param_count(const ModelConfig &config);

// Stacks DoF vectors into a (batch, dim, 1) tensor in input order.
diff::Tensor encode(std::span<const FeFunction> f);
diff::Tensor encode(const FeFunction &f);
// Applies `bcs` to each batch entry and wraps the rows as functions of
// `space`.
std::vector<FeFunction> decode(const diff::Tensor &u_dofs, std::shared_ptr<const FeSpace> space,
                               const std::vector<DirichletBc> &bcs);

// Evaluates the model on functions from another nested resolution:
// restrict (or prolong) the input onto the model's input space, run the
// model, and transfer the output to `target`.
std::vector<FeFunction> super_resolve(const SponModel &model, std::span<const FeFunction> f,
                                      std::shared_ptr<const FeSpace> target);

// Autoregressive trajectory [u0, S(u0), S(S(u0)), ...] of length steps + 1.
std::vector<FeFunction> rollout(const SponModel &model, const FeFunction &u0, std::size_t steps);

}  // namespace sponet
