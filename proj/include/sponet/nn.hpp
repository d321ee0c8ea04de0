// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "sponet/diff.hpp"
#include "sponet/latent_graph.hpp"

namespace sponet
{

using Rng = std::mt19937_64;

struct NamedTensor
{
  std::string name;
  diff::Tensor tensor;
};
using ParamList = std::vector<NamedTensor>;

std::size_t count_params(const ParamList &params);

// Edge lists of a LatentGraph in the form consumed by gather/scatter_mean.
struct MessageGraph
{
  std::size_t num_nodes = 0;
  std::shared_ptr<const std::vector<std::size_t>> receivers;
  std::shared_ptr<const std::vector<std::size_t>> senders;

  static MessageGraph from(const LatentGraph &g);
};

// Fully connected layers with swish between them and none after the last.
// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0.
class Mlp
{
public:
  Mlp(const std::vector<std::size_t> &widths, Rng &rng);

  diff::Tensor forward(const diff::Tensor &x) const;
  void collect(const std::string &prefix, ParamList &out) const;
  const std::vector<std::size_t> &widths() const { return widths_; }

  static std::size_t param_count(const std::vector<std::size_t> &widths);

private:
  std::vector<std::size_t> widths_;
  std::vector<diff::Tensor> weights_;
  std::vector<diff::Tensor> biases_;
};

// Message-passing block:
//   m_ij = phi_e(h_i, h_j - h_i)
//   h_i' = phi_v(h_i, mean_{j in N(i)} m_ij)
// with phi_e, phi_v four-layer MLPs mapping 2c channels to c.
class MpBlock
{
public:
  MpBlock(std::size_t channels, std::size_t hidden, Rng &rng);

  diff::Tensor forward(const diff::Tensor &h, const MessageGraph &graph) const;
  void collect(const std::string &prefix, ParamList &out) const;

  static std::vector<std::size_t> mlp_widths(std::size_t channels, std::size_t hidden);
  static std::size_t param_count(std::size_t channels, std::size_t hidden);

private:
  std::size_t channels_;
  Mlp edge_;
  Mlp node_;
};

// M blocks with distinct parameters applied as H <- H + (1/M) block_m(H).
class ResidualStack
{
public:
  ResidualStack(std::size_t blocks, std::size_t channels, std::size_t hidden, Rng &rng);

  diff::Tensor forward(const diff::Tensor &h, const MessageGraph &graph) const;
  void collect(const std::string &prefix, ParamList &out) const;
  std::size_t size() const { return blocks_.size(); }
  double alpha() const { return alpha_; }

private:
  std::vector<MpBlock> blocks_;
  double alpha_;
};

std::size_t compressed_rank(std::size_t n, std::size_t k);

// W = up * down acting on the node axis, with up (n x r) and down (r x n).
class LowRankLinear
{
public:
  LowRankLinear(std::size_t n, std::size_t rank, Rng &rng);

  diff::Tensor forward(const diff::Tensor &x) const;
  void collect(const std::string &prefix, ParamList &out) const;
  std::size_t dim() const { return n_; }
  std::size_t rank() const { return rank_; }

  const diff::Tensor &up() const { return up_; }
  const diff::Tensor &down() const { return down_; }

private:
  std::size_t n_;
  std::size_t rank_;
  diff::Tensor up_;
  diff::Tensor down_;
};

}  // namespace sponet
