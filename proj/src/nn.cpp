// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#include "sponet/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace sponet
{

namespace
{

diff::Tensor uniform_param(diff::Shape shape, std::size_t fan_in, Rng &rng)
{
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(shape.size());
  for (auto &x : v)
  {
    x = dist(rng);
  }
  return diff::Tensor::from(shape, std::move(v), true);
}

}  // namespace

std::size_t count_params(const ParamList &params)
{
  std::size_t n = 0;
  for (const auto &p : params)
  {
    n += p.tensor.size();
  }
  return n;
}

MessageGraph MessageGraph::from(const LatentGraph &g)
{
  return {g.num_nodes, std::make_shared<const std::vector<std::size_t>>(g.receivers),
          std::make_shared<const std::vector<std::size_t>>(g.senders)};
}

Mlp::Mlp(const std::vector<std::size_t> &widths, Rng &rng) : widths_(widths)
{
  if (widths.size() < 2)
  {
    throw std::invalid_argument("an MLP needs at least input and output widths");
  }
  for (std::size_t l = 0; l + 1 < widths.size(); l++)
  {
    weights_.push_back(uniform_param({1, widths[l], widths[l + 1]}, widths[l], rng));
    biases_.push_back(diff::Tensor::zeros({1, 1, widths[l + 1]}, true));
  }
}

diff::Tensor Mlp::forward(const diff::Tensor &x) const
{
  if (x.shape().cols != widths_.front())
  {
    throw std::invalid_argument("MLP input has " + std::to_string(x.shape().cols) +
                                " channels, expected " + std::to_string(widths_.front()));
  }
  auto h = x;
  for (std::size_t l = 0; l < weights_.size(); l++)
  {
    h = diff::dense(h, weights_[l], biases_[l], l + 1 < weights_.size());
  }
  return h;
}

void Mlp::collect(const std::string &prefix, ParamList &out) const
{
  for (std::size_t l = 0; l < weights_.size(); l++)
  {
    out.push_back({prefix + ".layer" + std::to_string(l) + ".weight", weights_[l]});
    out.push_back({prefix + ".layer" + std::to_string(l) + ".bias", biases_[l]});
  }
}

std::size_t Mlp::param_count(const std::vector<std::size_t> &widths)
{
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); l++)
  {
    n += widths[l] * widths[l + 1] + widths[l + 1];
  }
  return n;
}

std::vector<std::size_t> MpBlock::mlp_widths(std::size_t channels, std::size_t hidden)
{
  return {2 * channels, hidden, hidden, hidden, channels};
}

std::size_t MpBlock::param_count(std::size_t channels, std::size_t hidden)
{
  return 2 * Mlp::param_count(mlp_widths(channels, hidden));
}

MpBlock::MpBlock(std::size_t channels, std::size_t hidden, Rng &rng)
  : channels_(channels), edge_(mlp_widths(channels, hidden), rng),
    node_(mlp_widths(channels, hidden), rng)
{
}

diff::Tensor MpBlock::forward(const diff::Tensor &h, const MessageGraph &graph) const
{
  if (h.shape().rows != graph.num_nodes || h.shape().cols != channels_)
  {
    throw std::invalid_argument("message passing input " + h.shape().str() + " does not match " +
                                std::to_string(graph.num_nodes) + " nodes x " +
                                std::to_string(channels_) + " channels");
  }
  const auto h_i = diff::gather(h, graph.receivers);
  const auto h_j = diff::gather(h, graph.senders);
  const auto messages = edge_.forward(diff::concat(h_i, diff::sub(h_j, h_i)));
  const auto aggregated = diff::scatter_mean(messages, graph.receivers, graph.num_nodes);
  return node_.forward(diff::concat(h, aggregated));
}

void MpBlock::collect(const std::string &prefix, ParamList &out) const
{
  edge_.collect(prefix + ".edge", out);
  node_.collect(prefix + ".node", out);
}

ResidualStack::ResidualStack(std::size_t blocks, std::size_t channels, std::size_t hidden,
                             Rng &rng)
  : alpha_(blocks > 0 ? 1.0 / static_cast<double>(blocks) : 0.0)
{
  blocks_.reserve(blocks);
  for (std::size_t m = 0; m < blocks; m++)
  {
    blocks_.emplace_back(channels, hidden, rng);
  }
}

diff::Tensor ResidualStack::forward(const diff::Tensor &h, const MessageGraph &graph) const
{
  auto x = h;
  for (const auto &block : blocks_)
  {
    x = diff::add(x, diff::scale(block.forward(x, graph), alpha_));
  }
  return x;
}

void ResidualStack::collect(const std::string &prefix, ParamList &out) const
{
  for (std::size_t m = 0; m < blocks_.size(); m++)
  {
    blocks_[m].collect(prefix + ".block" + std::to_string(m), out);
  }
}

std::size_t compressed_rank(std::size_t n, std::size_t k)
{
  if (k == 0)
  {
    throw std::invalid_argument("compression factor must be positive");
  }
  return (n + k - 1) / k;
}

LowRankLinear::LowRankLinear(std::size_t n, std::size_t rank, Rng &rng)
  : n_(n), rank_(rank), up_(uniform_param({1, n, rank}, rank, rng)),
    down_(uniform_param({1, rank, n}, n, rng))
{
  if (rank == 0 || n == 0)
  {
    throw std::invalid_argument("low-rank linear layer needs positive size and rank");
  }
}

diff::Tensor LowRankLinear::forward(const diff::Tensor &x) const
{
  return diff::left_matmul(up_, diff::left_matmul(down_, x));
}

void LowRankLinear::collect(const std::string &prefix, ParamList &out) const
{
  out.push_back({prefix + ".up", up_});
  out.push_back({prefix + ".down", down_});
}

}  // namespace sponet
