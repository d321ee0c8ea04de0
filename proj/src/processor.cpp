// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#include "sponet/processor.hpp"

#include <stdexcept>
#include <string>

namespace sponet
{

namespace
{

constexpr std::size_t kChannels = 1;

void require_width(const diff::Tensor &x, std::size_t dim, const char *who)
{
  if (x.shape().rows != dim || x.shape().cols != kChannels)
  {
    throw std::invalid_argument(std::string(who) + ": input " + x.shape().str() +
                                " does not match DoF count " + std::to_string(dim));
  }
}

bool same_space(const FeSpace &a, const FeSpace &b)
{
  return a.degree() == b.degree() && a.mesh().resolution() == b.mesh().resolution();
}

}  // namespace

PsiModel::PsiModel(std::shared_ptr<const FeSpace> u_space, std::shared_ptr<const FeSpace> v_space,
                   const PsiOptions &options, Rng &rng)
  : w_in_(u_space->dim(), compressed_rank(u_space->dim(), options.compression), rng),
    stack_in_(options.layers_in, kChannels, options.hidden, rng),
    interp_(std::make_shared<const CsrMatrix>(build_interpolation(*u_space, *v_space))),
    stack_out_(options.layers_out, kChannels, options.hidden, rng),
    w_out_(v_space->dim(), compressed_rank(v_space->dim(), options.compression), rng),
    graph_u_(MessageGraph::from(build_graph(*u_space))),
    graph_v_(MessageGraph::from(build_graph(*v_space)))
{
}

diff::Tensor PsiModel::forward(const diff::Tensor &f) const
{
  require_width(f, in_dim(), "psi");
  auto h = w_in_.forward(f);
  h = stack_in_.forward(h, graph_u_);
  h = diff::sparse_matvec(interp_, h);
  h = stack_out_.forward(h, graph_v_);
  return w_out_.forward(h);
}

void PsiModel::collect(const std::string &prefix, ParamList &out) const
{
  w_in_.collect(prefix + ".w_in", out);
  stack_in_.collect(prefix + ".stack_in", out);
  stack_out_.collect(prefix + ".stack_out", out);
  w_out_.collect(prefix + ".w_out", out);
}

std::size_t PsiModel::param_count(std::size_t dim_u, std::size_t dim_v, const PsiOptions &options)
{
  return 2 * dim_u * compressed_rank(dim_u, options.compression) +
         2 * dim_v * compressed_rank(dim_v, options.compression) +
         (options.layers_in + options.layers_out) * MpBlock::param_count(kChannels, options.hidden);
}

MgProcessor::MgProcessor(std::vector<std::shared_ptr<const FeSpace>> u_spaces,
                         std::vector<std::shared_ptr<const FeSpace>> v_spaces,
                         const MgOptions &options, Rng &rng)
  : u_spaces_(std::move(u_spaces)), v_spaces_(std::move(v_spaces))
{
  const std::size_t n = u_spaces_.size();
  if (n < 2)
  {
    throw std::invalid_argument("the multigrid processor needs at least 2 levels");
  }
  if (v_spaces_.size() != n)
  {
    throw std::invalid_argument("input and output hierarchies differ in depth");
  }
  for (std::size_t i = 0; i + 1 < n; i++)
  {
    if (u_spaces_[i]->mesh().resolution() != 2 * u_spaces_[i + 1]->mesh().resolution() ||
        v_spaces_[i]->mesh().resolution() != 2 * v_spaces_[i + 1]->mesh().resolution())
    {
      throw std::invalid_argument("hierarchy level " + std::to_string(i + 1) +
                                  " is not a uniform coarsening of level " + std::to_string(i));
    }
  }
  transfers_ = build_transfer_set(u_spaces_, v_spaces_);
  for (const auto &m : transfers_.restrictions)
  {
    restrict_.push_back(std::make_shared<const CsrMatrix>(m));
  }
  for (const auto &m : transfers_.prolongations)
  {
    prolong_.push_back(std::make_shared<const CsrMatrix>(m));
  }
  for (const auto &m : transfers_.interpolations)
  {
    interp_.push_back(std::make_shared<const CsrMatrix>(m));
  }
  const bool shared = same_space(*u_spaces_.front(), *v_spaces_.front());
  for (std::size_t i = 0; i + 1 < n; i++)
  {
    graphs_u_.push_back(MessageGraph::from(build_graph(*u_spaces_[i])));
    graphs_v_.push_back(MessageGraph::from(build_graph(*v_spaces_[i])));
    stacks_u_.emplace_back(options.level_layers, kChannels, options.coarse.hidden, rng);
    if (!shared)
    {
      stacks_v_.emplace_back(options.level_layers, kChannels, options.coarse.hidden, rng);
    }
    aggregators_.push_back(diff::Tensor::from({1, 1, 3}, {0.5, 0.5, 0.0}, true));
  }
  psi_ = std::make_unique<PsiModel>(u_spaces_.back(), v_spaces_.back(), options.coarse, rng);
}

diff::Tensor MgProcessor::forward(const diff::Tensor &f) const
{
  require_width(f, in_dim(), "multigrid processor");
  const std::size_t n = levels();
  std::vector<diff::Tensor> down(n);
  down[0] = stacks_u_[0].forward(f, graphs_u_[0]);
  for (std::size_t i = 1; i + 1 < n; i++)
  {
    down[i] = stacks_u_[i].forward(diff::sparse_matvec(restrict_[i - 1], down[i - 1]), graphs_u_[i]);
  }
  down[n - 1] = diff::sparse_matvec(restrict_[n - 2], down[n - 2]);

  auto up = psi_->forward(down[n - 1]);
  for (std::size_t i = n - 1; i-- > 0;)
  {
    const auto from_down = diff::sparse_matvec(interp_[i], down[i]);
    const auto from_coarse = diff::sparse_matvec(prolong_[i], up);
    const auto combined = diff::affine_combine(from_down, from_coarse, aggregators_[i]);
    const auto &stack = stacks_v_.empty() ? stacks_u_[i] : stacks_v_[i];
    up = stack.forward(combined, graphs_v_[i]);
  }
  return up;
}

void MgProcessor::collect(ParamList &out) const
{
  for (std::size_t i = 0; i < stacks_u_.size(); i++)
  {
    const auto level = "level" + std::to_string(i);
    stacks_u_[i].collect(level + (stacks_v_.empty() ? ".phi" : ".phi_u"), out);
    if (!stacks_v_.empty())
    {
      stacks_v_[i].collect(level + ".phi_v", out);
    }
    out.push_back({level + ".aggregator", aggregators_[i]});
  }
  psi_->collect("coarse.psi", out);
}

std::size_t MgProcessor::param_count(const std::vector<std::size_t> &dims_u,
                                     const std::vector<std::size_t> &dims_v, bool shared_stacks,
                                     const MgOptions &options)
{
  const std::size_t n = dims_u.size();
  const std::size_t stack =
      options.level_layers * MpBlock::param_count(kChannels, options.coarse.hidden);
  return (n - 1) * ((shared_stacks ? 1 : 2) * stack + 3) +
         PsiModel::param_count(dims_u.back(), dims_v.back(), options.coarse);
}

}  // namespace sponet
