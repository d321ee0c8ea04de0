// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#include "sponet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "sponet/binary_io.hpp"

namespace sponet
{

void save_checkpoint(const SponModel &model, const std::filesystem::path &path)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
  {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  io::write_uint<std::uint32_t>(out, kCheckpointVersion);

  const auto kv = model.config().to_map();
  io::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(kv.size()));
  for (const auto &[k, v] : kv)
  {
    io::write_string(out, k);
    io::write_string(out, v);
  }

  const auto params = model.params();
  io::write_uint<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto &p : params)
  {
    const auto &s = p.tensor.shape();
    io::write_string(out, p.name);
    io::write_uint<std::uint64_t>(out, s.batch);
    io::write_uint<std::uint64_t>(out, s.rows);
    io::write_uint<std::uint64_t>(out, s.cols);
    io::write_f64s(out, p.tensor.values());
  }
  if (!out)
  {
    throw std::runtime_error("write failed: " + path.string());
  }
}

std::unique_ptr<SponModel> load_checkpoint(const std::filesystem::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw std::runtime_error("cannot open " + path.string());
  }
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
  {
    throw std::runtime_error(path.string() + " is not a sponet checkpoint");
  }
  const auto version = io::read_uint<std::uint32_t>(in);
  if (version != kCheckpointVersion)
  {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  std::map<std::string, std::string> kv;
  const auto n_kv = io::read_uint<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < n_kv; i++)
  {
    auto k = io::read_string(in);
    kv[k] = io::read_string(in);
  }
  auto model = build_model(ModelConfig::from_map(kv));

  std::map<std::string, diff::Tensor> by_name;
  for (const auto &p : model->params())
  {
    by_name.emplace(p.name, p.tensor);
  }
  const auto n_arrays = io::read_uint<std::uint32_t>(in);
  if (n_arrays != by_name.size())
  {
    throw std::runtime_error("checkpoint holds " + std::to_string(n_arrays) +
                             " arrays, model expects " + std::to_string(by_name.size()));
  }
  for (std::uint32_t i = 0; i < n_arrays; i++)
  {
    const auto name = io::read_string(in);
    diff::Shape s;
    s.batch = io::read_uint<std::uint64_t>(in);
    s.rows = io::read_uint<std::uint64_t>(in);
    s.cols = io::read_uint<std::uint64_t>(in);
    auto it = by_name.find(name);
    if (it == by_name.end())
    {
      throw std::runtime_error("unknown parameter '" + name + "' in checkpoint");
    }
    if (!(it->second.shape() == s))
    {
      throw std::runtime_error("parameter '" + name + "' has shape " + s.str() + ", expected " +
                               it->second.shape().str());
    }
    io::read_f64s(in, it->second.mutable_values());
    by_name.erase(it);
  }
  if (in.peek() != std::char_traits<char>::eof())
  {
    throw std::runtime_error("trailing bytes in " + path.string());
  }
  return model;
}

}  // namespace sponet
