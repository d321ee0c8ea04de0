// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#include "sponet/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>

#include <Eigen/Dense>

#include "sponet/binary_io.hpp"

namespace sponet
{

namespace
{

constexpr double kInitialJitter = 1e-10;
constexpr int kJitterAttempts = 4;  // 1e-10 escalated x10 at most three times

}  // namespace

GpSampler::GpSampler(std::shared_ptr<const FeSpace> space, double length_scale)
  : space_(std::move(space))
{
  if (!(length_scale > 0.0) || !std::isfinite(length_scale))
  {
    throw std::invalid_argument("GP length scale must be positive");
  }
  const auto &x = space_->dof_coords();
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd k(n, n);
  const double inv = 1.0 / (2.0 * length_scale * length_scale);
  for (Eigen::Index i = 0; i < n; i++)
  {
    for (Eigen::Index j = 0; j <= i; j++)
    {
      const double dx = x[i].x - x[j].x, dy = x[i].y - x[j].y;
      k(i, j) = k(j, i) = std::exp(-(dx * dx + dy * dy) * inv);
    }
  }

  double jitter = kInitialJitter;
  for (int attempt = 0; attempt < kJitterAttempts; attempt++, jitter *= 10.0)
  {
    Eigen::MatrixXd kj = k;
    kj.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(kj);
    if (llt.info() != Eigen::Success)
    {
      continue;
    }
    Eigen::MatrixXd l = llt.matrixL();
    if (!l.allFinite())
    {
      continue;
    }
    jitter_ = jitter;
    factor_.assign(static_cast<std::size_t>(n * n), 0.0);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        factor_.data(), n, n) = l;
    return;
  }
  throw std::domain_error("GP covariance is not positive definite after jitter escalation");
}

FeFunction GpSampler::sample(std::uint64_t seed) const
{
  const std::size_t n = space_->dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> z(n);
  for (auto &v : z)
  {
    v = normal(rng);
  }
  std::vector<double> f(n, 0.0);
  for (std::size_t i = 0; i < n; i++)
  {
    const double *row = factor_.data() + i * n;
    double acc = 0.0;
    for (std::size_t j = 0; j <= i; j++)
    {
      acc += row[j] * z[j];
    }
    f[i] = acc;
  }
  return FeFunction(space_, std::move(f));
}

FeFunction sample_gp_source(std::shared_ptr<const FeSpace> space, double length_scale,
                            std::uint64_t seed)
{
  return GpSampler(std::move(space), length_scale).sample(seed);
}

FeFunction solve_poisson(std::shared_ptr<const FeSpace> space, const FeFunction &f,
                         const std::vector<DirichletBc> &bcs, SolveReport *report,
                         double tolerance)
{
  const auto k = assemble_stiffness(*space);
  return solve_poisson(std::move(space), k, f, bcs, report, tolerance);
}

FeFunction solve_poisson(std::shared_ptr<const FeSpace> space, const CsrMatrix &stiffness,
                         const FeFunction &f, const std::vector<DirichletBc> &bcs,
                         SolveReport *report, double tolerance)
{
  if (f.space.get() != space.get() && f.space->dim() != space->dim())
  {
    throw std::invalid_argument("source does not live on the solution space");
  }
  const std::size_t n = space->dim();
  if (stiffness.rows() != n || stiffness.cols() != n)
  {
    throw std::invalid_argument("stiffness size does not match the space");
  }
  const auto c = collect_constraints(bcs);
  std::vector<char> fixed(n, 0);
  for (auto d : c.dofs)
  {
    fixed[d] = 1;
  }

  // b = M f on free rows, minus the lift K g.
  auto b = assemble_load(*space, f);
  std::vector<double> lift(n, 0.0);
  apply_constraints(c, lift);
  const auto kg = stiffness.multiply(lift);
  for (std::size_t i = 0; i < n; i++)
  {
    b[i] = fixed[i] ? 0.0 : b[i] - kg[i];
  }

  std::vector<double> diag(n, 1.0);
  for (std::size_t i = 0; i < n; i++)
  {
    if (!fixed[i])
    {
      const double d = stiffness.at(i, i);
      diag[i] = d > 0.0 ? d : 1.0;
    }
  }

  auto apply = [&](const std::vector<double> &x, std::vector<double> &y)
  {
    stiffness.multiply(x, y);
    for (std::size_t i = 0; i < n; i++)
    {
      if (fixed[i])
      {
        y[i] = 0.0;
      }
    }
  };
  auto dot = [](const std::vector<double> &a, const std::vector<double> &b)
  {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); i++)
    {
      s += a[i] * b[i];
    }
    return s;
  };

  std::vector<double> x(n, 0.0), r = b, z(n), p(n), q(n);
  const double bnorm = std::sqrt(dot(b, b));
  std::size_t it = 0;
  double rel = 0.0;
  if (bnorm > 0.0)
  {
    for (std::size_t i = 0; i < n; i++)
    {
      z[i] = r[i] / diag[i];
    }
    p = z;
    double rz = dot(r, z);
    const std::size_t max_it = 10 * n;
    rel = 1.0;
    while (it < max_it)
    {
      apply(p, q);
      const double alpha = rz / dot(p, q);
      for (std::size_t i = 0; i < n; i++)
      {
        x[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      it++;
      rel = std::sqrt(dot(r, r)) / bnorm;
      if (rel <= tolerance)
      {
        break;
      }
      for (std::size_t i = 0; i < n; i++)
      {
        z[i] = r[i] / diag[i];
      }
      const double rz_next = dot(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t i = 0; i < n; i++)
      {
        p[i] = z[i] + beta * p[i];
      }
    }
    // True residual, not the recursively updated one.
    apply(x, q);
    double rr = 0.0;
    for (std::size_t i = 0; i < n; i++)
    {
      rr += (b[i] - q[i]) * (b[i] - q[i]);
    }
    rel = std::sqrt(rr) / bnorm;
    if (!(rel <= tolerance))
    {
      throw std::domain_error("CG did not converge: relative residual " + std::to_string(rel));
    }
  }
  apply_constraints(c, x);
  if (report)
  {
    report->iterations = it;
    report->relative_residual = rel;
  }
  return FeFunction(std::move(space), std::move(x));
}

std::span<const PoissonSample> PoissonDataset::split(Split s) const
{
  const std::size_t a = header.n_train, b = a + header.n_val, c = b + header.n_test;
  if (samples.size() != c)
  {
    throw std::logic_error("dataset sample count does not match its header");
  }
  std::span<const PoissonSample> all(samples);
  switch (s)
  {
  case Split::Train:
    return all.subspan(0, a);
  case Split::Val:
    return all.subspan(a, b - a);
  case Split::Test:
    return all.subspan(b, c - b);
  }
  throw std::invalid_argument("unknown split");
}

std::uint64_t sample_seed(std::uint64_t seed, std::size_t index)
{
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(std::uint64_t{index} >> 32)};
  std::array<std::uint32_t, 2> out;
  seq.generate(out.begin(), out.end());
  return (std::uint64_t{out[0]} << 32) | out[1];
}

std::vector<PoissonSample> generate_samples(const GenerationOptions &options,
                                            std::span<const std::size_t> indices)
{
  if (options.nx == 0)
  {
    throw std::invalid_argument("nx must be positive");
  }
  auto space = build_space(unit_square_mesh(options.nx), options.degree);
  const GpSampler sampler(space, options.length_scale);
  const auto bcs = poisson_bcs(space);
  const auto k = assemble_stiffness(*space);

  std::vector<PoissonSample> out(indices.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&]
  {
    for (std::size_t i = next++; i < indices.size(); i = next++)
    {
      try
      {
        auto f = sampler.sample(sample_seed(options.seed, indices[i]));
        auto u = solve_poisson(space, k, f, bcs);
        out[i] = PoissonSample{std::move(f.dofs), std::move(u.dofs)};
      }
      catch (...)
      {
        std::lock_guard lock(failure_mutex);
        if (!failure)
        {
          failure = std::current_exception();
        }
        next = indices.size();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, 256);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; t++)
  {
    pool.emplace_back(work);
  }
  work();
  for (auto &t : pool)
  {
    t.join();
  }
  if (failure)
  {
    std::rethrow_exception(failure);
  }
  return out;
}

PoissonDataset generate_dataset(const GenerationOptions &options)
{
  PoissonDataset data;
  auto &h = data.header;
  h.nx = static_cast<std::uint32_t>(options.nx);
  h.degree = static_cast<std::uint32_t>(options.degree);
  h.n_train = static_cast<std::uint32_t>(options.n_train);
  h.n_val = static_cast<std::uint32_t>(options.n_val);
  h.n_test = static_cast<std::uint32_t>(options.n_test);
  h.length_scale = options.length_scale;
  h.seed = options.seed;
  std::vector<std::size_t> idx(h.count());
  for (std::size_t i = 0; i < idx.size(); i++)
  {
    idx[i] = i;
  }
  data.samples = generate_samples(options, idx);
  const std::size_t dim = build_space(unit_square_mesh(options.nx), options.degree)->dim();
  h.dim = static_cast<std::uint32_t>(dim);
  return data;
}

void write_dataset(const PoissonDataset &data, const std::filesystem::path &path)
{
  const auto &h = data.header;
  if (data.samples.size() != h.count())
  {
    throw std::invalid_argument("dataset sample count does not match its header");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
  {
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  }
  out.write(kDatasetMagic, sizeof(kDatasetMagic));
  io::write_uint<std::uint32_t>(out, h.version);
  io::write_uint<std::uint32_t>(out, h.nx);
  io::write_uint<std::uint32_t>(out, h.degree);
  io::write_uint<std::uint32_t>(out, h.n_train);
  io::write_uint<std::uint32_t>(out, h.n_val);
  io::write_uint<std::uint32_t>(out, h.n_test);
  io::write_uint<std::uint32_t>(out, h.dim);
  io::write_uint<std::uint32_t>(out, 0);
  io::write_f64(out, h.length_scale);
  io::write_uint<std::uint64_t>(out, h.seed);
  for (const auto &s : data.samples)
  {
    if (s.f.size() != h.dim || s.u.size() != h.dim)
    {
      throw std::invalid_argument("sample length does not match dataset dim");
    }
    io::write_f64s(out, s.f);
    io::write_f64s(out, s.u);
  }
  if (!out)
  {
    throw std::runtime_error("write failed: " + path.string());
  }
}

PoissonDataset read_dataset(const std::filesystem::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
  {
    throw std::runtime_error("cannot open " + path.string());
  }
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kDatasetMagic, sizeof(magic)) != 0)
  {
    throw std::runtime_error(path.string() + " is not a sponet dataset");
  }
  PoissonDataset data;
  auto &h = data.header;
  h.version = io::read_uint<std::uint32_t>(in);
  if (h.version != 1)
  {
    throw std::runtime_error("unsupported dataset version " + std::to_string(h.version));
  }
  h.nx = io::read_uint<std::uint32_t>(in);
  h.degree = io::read_uint<std::uint32_t>(in);
  h.n_train = io::read_uint<std::uint32_t>(in);
  h.n_val = io::read_uint<std::uint32_t>(in);
  h.n_test = io::read_uint<std::uint32_t>(in);
  h.dim = io::read_uint<std::uint32_t>(in);
  io::read_uint<std::uint32_t>(in);
  h.length_scale = io::read_f64(in);
  h.seed = io::read_uint<std::uint64_t>(in);
  const std::size_t expected = (std::size_t{h.degree} * h.nx + 1) * (std::size_t{h.degree} * h.nx + 1);
  if (h.nx == 0 || (h.degree != 1 && h.degree != 2) || h.dim != expected)
  {
    throw std::runtime_error("inconsistent dataset header in " + path.string());
  }
  data.samples.resize(h.count());
  for (auto &s : data.samples)
  {
    s.f.resize(h.dim);
    s.u.resize(h.dim);
    io::read_f64s(in, s.f);
    io::read_f64s(in, s.u);
  }
  if (in.peek() != std::char_traits<char>::eof())
  {
    throw std::runtime_error("trailing bytes in " + path.string());
  }
  return data;
}

}  // namespace sponet
