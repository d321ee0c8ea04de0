// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "sponet/fespace.hpp"
#include "sponet/latent_graph.hpp"
#include "sponet/nn.hpp"
#include "sponet/transfer.hpp"

namespace sponet
{

// Learnable map from input DoF tensors (B, dim U, 1) to output DoF tensors
// (B, dim V, 1).
class Processor
{
public:
  virtual ~Processor() = default;
  virtual diff::Tensor forward(const diff::Tensor &f) const = 0;
  virtual void collect(ParamList &out) const = 0;
  virtual std::size_t in_dim() const = 0;
  virtual std::size_t out_dim() const = 0;

  ParamList params() const
  {
    ParamList p;
    collect(p);
    return p;
  }
};

struct PsiOptions
{
  std::size_t layers_in = 2;   // message-passing blocks on the input graph
  std::size_t layers_out = 2;  // message-passing blocks on the output graph
  std::size_t hidden = 16;
  std::size_t compression = 20;  // k; rank = ceil(dim / k)
};

// Single-level model W_V o phi o I o phi o W_U with low-rank linear maps
// acting on the DoF axis.
class PsiModel : public Processor
{
public:
  PsiModel(std::shared_ptr<const FeSpace> u_space, std::shared_ptr<const FeSpace> v_space,
           const PsiOptions &options, Rng &rng);

  diff::Tensor forward(const diff::Tensor &f) const override;
  void collect(ParamList &out) const override { collect("psi", out); }
  void collect(const std::string &prefix, ParamList &out) const;
  std::size_t in_dim() const override { return w_in_.dim(); }
  std::size_t out_dim() const override { return w_out_.dim(); }

  const LowRankLinear &w_in() const { return w_in_; }
  const LowRankLinear &w_out() const { return w_out_; }
  const CsrMatrix &interpolation() const { return *interp_; }

  static std::size_t param_count(std::size_t dim_u, std::size_t dim_v, const PsiOptions &options);

private:
  LowRankLinear w_in_;
  ResidualStack stack_in_;
  std::shared_ptr<const CsrMatrix> interp_;
  ResidualStack stack_out_;
  LowRankLinear w_out_;
  MessageGraph graph_u_;
  MessageGraph graph_v_;
};

struct MgOptions
{
  std::size_t level_layers = 1;  // blocks per level stack phi_i, i < N
  PsiOptions coarse;             // psi at the coarsest level
};

// Multigrid-shaped processor over a hierarchy (index 0 finest):
//   down:   z_0 = phi_0(f), z_i = phi_i(R z_{i-1}), z_{N-1} = R z_{N-2}
//   coarse: y_{N-1} = psi(z_{N-1})
//   up:     y_i = phi_i(a_i I z_i + b_i P y_{i+1} + c_i)
// and returns y_0. Each phi_i is shared between the level's input and
// output graphs when the two spaces coincide.
class MgProcessor : public Processor
{
public:
  MgProcessor(std::vector<std::shared_ptr<const FeSpace>> u_spaces,
              std::vector<std::shared_ptr<const FeSpace>> v_spaces, const MgOptions &options,
              Rng &rng);

  diff::Tensor forward(const diff::Tensor &f) const override;
  void collect(ParamList &out) const override;
  std::size_t in_dim() const override { return u_spaces_.front()->dim(); }
  std::size_t out_dim() const override { return v_spaces_.front()->dim(); }
  std::size_t levels() const { return u_spaces_.size(); }

  const TransferSet &transfers() const { return transfers_; }
  const PsiModel &coarse_model() const { return *psi_; }
  const diff::Tensor &aggregator(std::size_t level) const { return aggregators_[level]; }

  static std::size_t param_count(const std::vector<std::size_t> &dims_u,
                                 const std::vector<std::size_t> &dims_v, bool shared_stacks,
                                 const MgOptions &options);

private:
  std::vector<std::shared_ptr<const FeSpace>> u_spaces_;
  std::vector<std::shared_ptr<const FeSpace>> v_spaces_;
  TransferSet transfers_;
  std::vector<std::shared_ptr<const CsrMatrix>> restrict_;
  std::vector<std::shared_ptr<const CsrMatrix>> prolong_;
  std::vector<std::shared_ptr<const CsrMatrix>> interp_;
  std::vector<MessageGraph> graphs_u_;
  std::vector<MessageGraph> graphs_v_;
  std::vector<ResidualStack> stacks_u_;
  std::vector<ResidualStack> stacks_v_;  // empty when shared
  std::vector<diff::Tensor> aggregators_;
  std::unique_ptr<PsiModel> psi_;
};

}  // namespace sponet
