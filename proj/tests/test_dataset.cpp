// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>

#include "fe_oracle.hpp"
#include "sponet/dataset.hpp"
#include "test_util.hpp"

using namespace sponet;
using namespace sponet::testing;

namespace
{

constexpr double pi = std::numbers::pi;

std::filesystem::path temp_file(const std::string &name)
{
  return std::filesystem::temp_directory_path() / ("sponet_test_" + name);
}

std::string slurp(const std::filesystem::path &p)
{
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// L2 errors of the manufactured problem -lap u = 2 pi^2 sin(pi x) sin(pi y).
std::vector<double> manufactured_errors(int degree, const std::vector<std::size_t> &resolutions)
{
  const auto exact = [](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); };
  const auto source = [](double x, double y) { return 2.0 * pi * pi * std::sin(pi * x) * std::sin(pi * y); };
  std::vector<double> errors;
  for (auto nx : resolutions)
  {
    const auto v = build_space(unit_square_mesh(nx), degree);
    // A fine interpolant of the source keeps its error below the solve's.
    const auto f = interpolate(source, v);
    SolveReport report;
    const auto u = solve_poisson(v, f, make_bcs("zero", v), &report);
    CHECK(report.relative_residual <= 1e-10);
    errors.push_back(quadrature_l2_error(u, exact));
  }
  return errors;
}

}  // namespace

TEST_SUITE("dataset")
{
  TEST_CASE("very long length scales give near-constant sources")
  {
    const auto v = build_space(unit_square_mesh(6), 1);
    for (std::uint64_t seed : {1, 2, 3})
    {
      const auto f = sample_gp_source(v, 1e6, seed);
      double mean = 0.0;
      for (double x : f.dofs)
      {
        mean += x / f.dofs.size();
      }
      double var = 0.0;
      for (double x : f.dofs)
      {
        var += (x - mean) * (x - mean) / f.dofs.size();
      }
      if (std::abs(mean) > 1e-2)
      {
        CHECK(std::sqrt(var) <= 1e-3 * std::abs(mean));
      }
    }
    CHECK_THROWS_AS(GpSampler(v, 0.0), std::invalid_argument);
  }

  TEST_CASE("sampling is a pure function of the seed")
  {
    const auto v = build_space(unit_square_mesh(5), 2);
    const GpSampler gp(v, 0.4);
    CHECK(gp.sample(7).dofs == gp.sample(7).dofs);
    CHECK(gp.sample(7).dofs == sample_gp_source(v, 0.4, 7).dofs);
    CHECK(gp.sample(7).dofs != gp.sample(8).dofs);
    CHECK(sample_seed(1, 0) != sample_seed(1, 1));
    CHECK(sample_seed(1, 5) != sample_seed(2, 5));
  }

  TEST_CASE("empirical covariance matches the kernel")
  {
    const auto v = build_space(unit_square_mesh(4), 1);
    const GpSampler gp(v, 0.4);
    const std::size_t n = 2000;
    const std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 0}, {0, 6}, {3, 21}, {12, 13}};
    for (const auto &[i, j] : pairs)
    {
      const auto &a = v->dof_coords()[i], &b = v->dof_coords()[j];
      const double d2 = (a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y);
      const double k = std::exp(-d2 / (2.0 * 0.4 * 0.4));
      double sum = 0.0;
      for (std::size_t s = 0; s < n; s++)
      {
        const auto f = gp.sample(1000 + s);
        sum += f.dofs[i] * f.dofs[j];
      }
      // Var(f_i f_j) = K_ii K_jj + K_ij^2 for zero-mean Gaussians.
      const double se = std::sqrt((1.0 + k * k) / n);
      CHECK(std::abs(sum / n - k) <= 3.0 * se);
    }
  }

  TEST_CASE("manufactured solutions converge at the optimal rate")
  {
    const std::vector<std::size_t> nx{8, 16, 32, 64};
    for (int degree : {1, 2})
    {
      const auto e = manufactured_errors(degree, nx);
      for (std::size_t i = 0; i + 1 < e.size(); i++)
      {
        const double rate = std::log2(e[i] / e[i + 1]);
        CAPTURE(degree);
        CAPTURE(nx[i]);
        CHECK(std::abs(rate - (degree == 1 ? 2.0 : 3.0)) <= (degree == 1 ? 0.25 : 0.35));
      }
    }
  }

  TEST_CASE("zero data gives the zero solution and top data is exact")
  {
    const auto v = build_space(unit_square_mesh(8), 2);
    const auto u0 = solve_poisson(v, FeFunction(v), make_bcs("zero", v));
    CHECK(std::ranges::all_of(u0.dofs, [](double x) { return x == 0.0; }));

    const auto u = solve_poisson(v, sample_gp_source(v, 0.4, 3), poisson_bcs(v));
    for (auto d : v->boundary_dofs(BoundaryTag::Top))
    {
      CHECK(u.dofs[d] == poisson_top_data(v->dof_coords()[d].x, 1.0));
    }
    for (auto tag : {BoundaryTag::Bottom, BoundaryTag::Left, BoundaryTag::Right})
    {
      for (auto d : v->boundary_dofs(tag))
      {
        if (v->dof_coords()[d].y != 1.0)
        {
          CHECK(u.dofs[d] == 0.0);
        }
      }
    }
  }

  TEST_CASE("the residual report is honest")
  {
    const auto v = build_space(unit_square_mesh(8), 1);
    const auto f = sample_gp_source(v, 0.4, 4);
    const auto bcs = poisson_bcs(v);
    SolveReport report;
    const auto u = solve_poisson(v, f, bcs, &report);
    CHECK(report.iterations > 0);

    // Independent residual of the eliminated system: free rows of
    // K u = M f, with b = M f - K lift.
    const auto c = collect_constraints(bcs);
    std::vector<double> lift(v->dim(), 0.0);
    apply_constraints(c, lift);
    const auto k = assemble_stiffness(*v);
    const auto ku = k.multiply(u.dofs);
    const auto kl = k.multiply(lift);
    const auto mf = v->mass().multiply(f.dofs);
    std::vector<bool> fixed(v->dim(), false);
    for (auto d : c.dofs)
    {
      fixed[d] = true;
    }
    double r2 = 0.0, b2 = 0.0;
    for (std::size_t i = 0; i < v->dim(); i++)
    {
      if (!fixed[i])
      {
        r2 += (ku[i] - mf[i]) * (ku[i] - mf[i]);
        b2 += (mf[i] - kl[i]) * (mf[i] - kl[i]);
      }
    }
    CHECK(std::sqrt(r2 / b2) <= 1e-10);
    CHECK(std::sqrt(r2 / b2) == doctest::Approx(report.relative_residual).epsilon(1e-3));
  }

  TEST_CASE("file layout and round trip")
  {
    GenerationOptions opts;
    opts.nx = 8;
    opts.n_train = 8;
    opts.n_val = 2;
    opts.n_test = 2;
    opts.seed = 11;
    const auto data = generate_dataset(opts);
    REQUIRE(data.samples.size() == 12);
    CHECK(data.header.dim == 81);
    CHECK(data.split(Split::Train).size() == 8);
    CHECK(data.split(Split::Test).data() == data.samples.data() + 10);

    const auto a = temp_file("a.bin"), b = temp_file("b.bin");
    write_dataset(data, a);
    CHECK(std::filesystem::file_size(a) == kDatasetHeaderBytes + 2 * 12 * 81 * 8);
    write_dataset(generate_dataset(opts), b);
    CHECK(slurp(a) == slurp(b));

    const auto bytes = slurp(a);
    CHECK(bytes.compare(0, 8, std::string(kDatasetMagic, 8)) == 0);
    CHECK(static_cast<unsigned char>(bytes[12]) == 8);  // nx
    CHECK(static_cast<unsigned char>(bytes[20]) == 8);  // n_train

    const auto back = read_dataset(a);
    CHECK(back.header.seed == 11);
    CHECK(back.header.length_scale == 0.4);
    for (std::size_t s = 0; s < 12; s++)
    {
      CHECK(back.samples[s].f == data.samples[s].f);
      CHECK(back.samples[s].u == data.samples[s].u);
    }

    // Threaded generation gives the same samples.
    opts.threads = 3;
    write_dataset(generate_dataset(opts), b);
    CHECK(slurp(a) == slurp(b));

    // Non-degenerate data.
    double mean_norm = 0.0;
    const auto v = build_space(unit_square_mesh(8), 1);
    for (const auto &s : data.samples)
    {
      mean_norm += l2_norm(FeFunction(v, s.u)) / 12.0;
    }
    CHECK(mean_norm > 0.0);

    std::filesystem::resize_file(b, std::filesystem::file_size(b) - 8);
    CHECK_THROWS_AS(read_dataset(b), std::runtime_error);
    {
      std::ofstream out(b, std::ios::binary | std::ios::app);
      out.write("12345678abcdefgh", 16);
    }
    CHECK_THROWS_AS(read_dataset(b), std::runtime_error);
    {
      std::ofstream out(b, std::ios::binary);
      out << "not a dataset at all, just some text that is long enough";
    }
    CHECK_THROWS_AS(read_dataset(b), std::runtime_error);
    std::filesystem::remove(a);
    std::filesystem::remove(b);
  }

  TEST_CASE("per-index generation matches the full set")
  {
    GenerationOptions opts;
    opts.nx = 4;
    opts.degree = 2;
    opts.n_train = 3;
    opts.n_test = 2;
    opts.seed = 5;
    const auto all = generate_dataset(opts);
    const std::vector<std::size_t> idx{4, 1};
    const auto some = generate_samples(opts, idx);
    CHECK(some[0].u == all.samples[4].u);
    CHECK(some[1].f == all.samples[1].f);
    opts.nx = 0;
    CHECK_THROWS_AS(generate_dataset(opts), std::invalid_argument);
  }
}
