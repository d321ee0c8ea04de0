// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#include "sponet/spon.hpp"

#include <stdexcept>

namespace sponet
{

std::string to_string(Architecture arch)
{
  return arch == Architecture::Spon ? "spon" : "spon-mg";
}

Architecture parse_architecture(const std::string &name)
{
  if (name == "spon")
  {
    return Architecture::Spon;
  }
  if (name == "spon-mg")
  {
    return Architecture::SponMg;
  }
  throw std::invalid_argument("unknown architecture '" + name + "' (expected spon or spon-mg)");
}

PsiOptions ModelConfig::psi_options() const
{
  if (psi_layers < 2)
  {
    throw std::invalid_argument("psi needs at least 2 message-passing blocks");
  }
  PsiOptions o;
  o.layers_in = (psi_layers + 1) / 2;
  o.layers_out = psi_layers / 2;
  o.hidden = hidden;
  o.compression = compression;
  return o;
}

MgOptions ModelConfig::mg_options() const
{
  MgOptions o;
  o.level_layers = mp_layers;
  o.coarse = psi_options();
  return o;
}

std::map<std::string, std::string> ModelConfig::to_map() const
{
  return {
      {"arch", to_string(arch)},
      {"nx", std::to_string(nx)},
      {"degree_in", std::to_string(degree_in)},
      {"degree_out", std::to_string(degree_out)},
      {"levels", std::to_string(levels)},
      {"mp_layers", std::to_string(mp_layers)},
      {"psi_layers", std::to_string(psi_layers)},
      {"hidden", std::to_string(hidden)},
      {"k", std::to_string(compression)},
      {"seed", std::to_string(seed)},
      {"bcs", bcs},
  };
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string> &kv)
{
  const auto get = [&](const std::string &key) -> const std::string &
  {
    const auto it = kv.find(key);
    if (it == kv.end())
    {
      throw std::invalid_argument("model configuration lacks key '" + key + "'");
    }
    return it->second;
  };
  ModelConfig c;
  c.arch = parse_architecture(get("arch"));
  c.nx = std::stoul(get("nx"));
  c.degree_in = std::stoi(get("degree_in"));
  c.degree_out = std::stoi(get("degree_out"));
  c.levels = std::stoul(get("levels"));
  c.mp_layers = std::stoul(get("mp_layers"));
  c.psi_layers = std::stoul(get("psi_layers"));
  c.hidden = std::stoul(get("hidden"));
  c.compression = std::stoul(get("k"));
  c.seed = std::stoull(get("seed"));
  c.bcs = get("bcs");
  return c;
}

SponModel::SponModel(std::shared_ptr<const FeSpace> in_space,
                     std::shared_ptr<const FeSpace> out_space, std::unique_ptr<Processor> processor,
                     std::vector<DirichletBc> bcs, ModelConfig config)
  : in_space_(std::move(in_space)), out_space_(std::move(out_space)),
    processor_(std::move(processor)), bcs_(std::move(bcs)), config_(std::move(config))
{
  if (processor_->in_dim() != in_space_->dim() || processor_->out_dim() != out_space_->dim())
  {
    throw std::invalid_argument("processor widths do not match the input/output spaces");
  }
  for (const auto &bc : bcs_)
  {
    if (bc.space->dim() != out_space_->dim())
    {
      throw std::invalid_argument("boundary condition defined on a different space");
    }
  }
  auto c = collect_constraints(bcs_);
  bc_dofs_ = std::make_shared<const std::vector<std::size_t>>(std::move(c.dofs));
  bc_values_ = std::make_shared<const std::vector<double>>(std::move(c.values));
}

diff::Tensor SponModel::apply_bcs(const diff::Tensor &u_dofs) const
{
  if (u_dofs.shape().rows != out_space_->dim())
  {
    throw std::invalid_argument("decoder input " + u_dofs.shape().str() +
                                " does not match output space dimension");
  }
  if (bc_dofs_->empty())
  {
    return u_dofs;
  }
  return diff::overwrite_rows(u_dofs, bc_dofs_, bc_values_);
}

diff::Tensor SponModel::forward(const diff::Tensor &f_dofs) const
{
  return apply_bcs(processor_->forward(f_dofs));
}

std::vector<FeFunction> SponModel::operator()(std::span<const FeFunction> f) const
{
  for (const auto &fi : f)
  {
    if (fi.space->dim() != in_space_->dim())
    {
      throw std::invalid_argument("input function does not live in the model's input space");
    }
  }
  return decode(forward(encode(f)), out_space_, {});
}

FeFunction SponModel::operator()(const FeFunction &f) const
{
  return (*this)(std::span<const FeFunction>(&f, 1)).front();
}

std::unique_ptr<SponModel> build_model(const ModelConfig &config)
{
  Rng rng(config.seed);
  std::unique_ptr<Processor> processor;
  std::shared_ptr<const FeSpace> u, v;
  if (config.arch == Architecture::Spon)
  {
    const auto mesh = unit_square_mesh(config.nx);
    u = build_space(mesh, config.degree_in);
    v = config.degree_in == config.degree_out ? u : build_space(mesh, config.degree_out);
    processor = std::make_unique<PsiModel>(u, v, config.psi_options(), rng);
  }
  else
  {
    if (config.levels < 2)
    {
      throw std::invalid_argument("spon-mg needs at least 2 levels");
    }
    const std::size_t factor = std::size_t{1} << (config.levels - 1);
    if (config.nx % factor != 0)
    {
      throw std::invalid_argument("resolution " + std::to_string(config.nx) +
                                  " cannot be coarsened " + std::to_string(config.levels - 1) +
                                  " times");
    }
    const auto hierarchy = mesh_hierarchy(config.nx / factor, config.levels - 1);
    std::vector<std::shared_ptr<const FeSpace>> us, vs;
    for (const auto &mesh : hierarchy.levels)
    {
      us.push_back(build_space(mesh, config.degree_in));
      vs.push_back(config.degree_in == config.degree_out ? us.back()
                                                         : build_space(mesh, config.degree_out));
    }
    u = us.front();
    v = vs.front();
    processor = std::make_unique<MgProcessor>(us, vs, config.mg_options(), rng);
  }
  auto bcs = make_bcs(config.bcs, v);
  return std::make_unique<SponModel>(u, v, std::move(processor), std::move(bcs), config);
}

std::size_t expected_param_count(const ModelConfig &config)
{
  const auto dim = [](std::size_t nx, int degree) { return (degree * nx + 1) * (degree * nx + 1); };
  if (config.arch == Architecture::Spon)
  {
    return PsiModel::param_count(dim(config.nx, config.degree_in),
                                 dim(config.nx, config.degree_out), config.psi_options());
  }
  std::vector<std::size_t> du, dv;
  for (std::size_t l = 0; l < config.levels; l++)
  {
    du.push_back(dim(config.nx >> l, config.degree_in));
    dv.push_back(dim(config.nx >> l, config.degree_out));
  }
  return MgProcessor::param_count(du, dv, config.degree_in == config.degree_out,
                                  config.mg_options());
}

diff::Tensor encode(std::span<const FeFunction> f)
{
  if (f.empty())
  {
    throw std::invalid_argument("encode: empty batch");
  }
  const std::size_t n = f.front().dofs.size();
  std::vector<double> v;
  v.reserve(f.size() * n);
  for (const auto &fi : f)
  {
    if (fi.dofs.size() != n)
    {
      throw std::invalid_argument("encode: batch mixes spaces of different dimension");
    }
    v.insert(v.end(), fi.dofs.begin(), fi.dofs.end());
  }
  return diff::Tensor::from({f.size(), n, 1}, std::move(v));
}

diff::Tensor encode(const FeFunction &f) { return encode(std::span<const FeFunction>(&f, 1)); }

std::vector<FeFunction> decode(const diff::Tensor &u_dofs, std::shared_ptr<const FeSpace> space,
                               const std::vector<DirichletBc> &bcs)
{
  const auto &s = u_dofs.shape();
  if (s.rows != space->dim() || s.cols != 1)
  {
    throw std::invalid_argument("decode: tensor " + s.str() + " does not match space dimension " +
                                std::to_string(space->dim()));
  }
  const auto constraints = collect_constraints(bcs);
  std::vector<FeFunction> out;
  out.reserve(s.batch);
  const auto v = u_dofs.values();
  for (std::size_t b = 0; b < s.batch; b++)
  {
    std::vector<double> dofs(v.begin() + static_cast<std::ptrdiff_t>(b * s.rows),
                             v.begin() + static_cast<std::ptrdiff_t>((b + 1) * s.rows));
    apply_constraints(constraints, dofs);
    out.emplace_back(space, std::move(dofs));
  }
  return out;
}

std::vector<FeFunction> super_resolve(const SponModel &model, std::span<const FeFunction> f,
                                      std::shared_ptr<const FeSpace> target)
{
  if (f.empty())
  {
    return {};
  }
  const auto &source = *f.front().space;
  const auto to_model = build_nested_transfer(source, *model.in_space());
  const auto from_model = build_nested_transfer(*model.out_space(), *target);
  std::vector<FeFunction> inputs;
  inputs.reserve(f.size());
  for (const auto &fi : f)
  {
    inputs.emplace_back(model.in_space(), to_model.multiply(fi.dofs));
  }
  auto outputs = model(inputs);
  std::vector<FeFunction> result;
  result.reserve(outputs.size());
  for (const auto &u : outputs)
  {
    result.emplace_back(target, from_model.multiply(u.dofs));
  }
  return result;
}

std::vector<FeFunction> rollout(const SponModel &model, const FeFunction &u0, std::size_t steps)
{
  if (model.in_space()->dim() != model.out_space()->dim() ||
      model.in_space()->degree() != model.out_space()->degree())
  {
    throw std::invalid_argument("rollout requires identical input and output spaces");
  }
  std::vector<FeFunction> trajectory{u0};
  trajectory.reserve(steps + 1);
  for (std::size_t s = 0; s < steps; s++)
  {
    auto next = model(trajectory.back());
    trajectory.push_back(FeFunction(model.in_space(), std::move(next.dofs)));
  }
  return trajectory;
}

}  // namespace sponet
