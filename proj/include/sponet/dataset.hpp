// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sponet/boundary.hpp"
#include "sponet/fespace.hpp"

namespace sponet
{

// Draws nodal values from N(0, K) with K_ij = exp(-|x_i - x_j|^2 / (2 l^2))
// at the DoF coordinates of a space, through a dense Cholesky factor of K.
class GpSampler
{
public:
  GpSampler(std::shared_ptr<const FeSpace> space, double length_scale);

  FeFunction sample(std::uint64_t seed) const;
  double jitter() const { return jitter_; }
  const std::shared_ptr<const FeSpace> &space() const { return space_; }

private:
  std::shared_ptr<const FeSpace> space_;
  double jitter_ = 0.0;
  std::vector<double> factor_;  // lower triangle, row-major
};

FeFunction sample_gp_source(std::shared_ptr<const FeSpace> space, double length_scale,
                            std::uint64_t seed);

struct SolveReport
{
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

// Solves the discrete Poisson problem K u = M f with constrained DoFs
// eliminated symmetrically, by Jacobi-preconditioned conjugate gradients.
FeFunction solve_poisson(std::shared_ptr<const FeSpace> space, const FeFunction &f,
                         const std::vector<DirichletBc> &bcs, SolveReport *report = nullptr,
                         double tolerance = 1e-10);
FeFunction solve_poisson(std::shared_ptr<const FeSpace> space, const CsrMatrix &stiffness,
                         const FeFunction &f, const std::vector<DirichletBc> &bcs,
                         SolveReport *report = nullptr, double tolerance = 1e-10);

struct PoissonSample
{
  std::vector<double> f;
  std::vector<double> u;
};

struct DatasetHeader
{
  std::uint32_t version = 1;
  std::uint32_t nx = 0;
  std::uint32_t degree = 1;
  std::uint32_t n_train = 0;
  std::uint32_t n_val = 0;
  std::uint32_t n_test = 0;
  std::uint32_t dim = 0;
  double length_scale = 0.4;
  std::uint64_t seed = 0;

  std::size_t count() const { return std::size_t{n_train} + n_val + n_test; }
};

enum class Split
{
  Train,
  Val,
  Test
};

// Samples are stored train, then validation, then test.
struct PoissonDataset
{
  DatasetHeader header;
  std::vector<PoissonSample> samples;

  std::span<const PoissonSample> split(Split s) const;
};

// Reproducible per-sample seed derived from the dataset seed and the
// global sample index.
std::uint64_t sample_seed(std::uint64_t seed, std::size_t index);

struct GenerationOptions
{
  std::size_t nx = 16;
  int degree = 1;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
  double length_scale = 0.4;
  std::size_t threads = 1;
};

PoissonDataset generate_dataset(const GenerationOptions &options);
// Only the listed global indices; the header still records full counts.
std::vector<PoissonSample> generate_samples(const GenerationOptions &options,
                                            std::span<const std::size_t> indices);

inline constexpr char kDatasetMagic[8] = {'S', 'P', 'O', 'N', 'D', 'S', '1', '\0'};
inline constexpr std::size_t kDatasetHeaderBytes = 56;

void write_dataset(const PoissonDataset &data, const std::filesystem::path &path);
PoissonDataset read_dataset(const std::filesystem::path &path);

}  // namespace sponet
