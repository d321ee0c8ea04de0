// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when
// every selected criterion passes. Training criteria drive the sponet CLI
// so that the shipped binary is what gets measured.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "fe_oracle.hpp"
#include "sponet/checkpoint.hpp"
#include "sponet/dataset.hpp"
#include "sponet/train.hpp"
#include "sponet/transfer.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace sponet;
using namespace sponet::testing;
using diff::Tensor;

namespace
{

constexpr double pi = std::numbers::pi;

struct Outcome
{
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string &what)
  {
    if (!ok)
    {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

struct Context
{
  fs::path work;
  std::string cli;
  // Settings of the desk-scale training runs.
  std::size_t epochs = 200;
  std::size_t n_train = 200;
  std::size_t n_val = 40;
  std::size_t n_test = 40;
  std::size_t hidden = 16;
  double lr_start = 1e-3;
  double lr_end = 1e-5;
};

std::string slurp(const fs::path &p)
{
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Runs the CLI in the work directory; returns stdout, throws on failure.
std::string sponet(const Context &ctx, const std::string &args, const std::string &tag)
{
  const auto out = ctx.work / (tag + ".out"), err = ctx.work / (tag + ".err");
  const std::string cmd = "cd '" + ctx.work.string() + "' && '" + ctx.cli + "' --threads 1 " + args +
                          " > '" + out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  if (status != 0)
  {
    throw std::runtime_error("sponet " + args + " failed:\n" + slurp(err));
  }
  return slurp(out);
}

// "key value" lines of CLI output.
std::map<std::string, std::string> key_values(const std::string &text)
{
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
  {
    const auto sp = line.find(' ');
    if (sp != std::string::npos)
    {
      kv[line.substr(0, sp)] = line.substr(sp + 1);
    }
  }
  return kv;
}

double number(const std::map<std::string, std::string> &kv, const std::string &key)
{
  const auto it = kv.find(key);
  if (it == kv.end())
  {
    throw std::runtime_error("missing '" + key + "' in CLI output");
  }
  return std::stod(it->second);
}

std::string data_args(std::size_t nx, const Context &ctx, const std::string &out)
{
  std::ostringstream s;
  s << "gen-data --nx " << nx << " --train " << ctx.n_train << " --val " << ctx.n_val << " --test "
    << ctx.n_test << " --seed 1 --out " << out;
  return s.str();
}

std::string train_args(const Context &ctx, const std::string &arch, const std::string &data,
                       const std::string &tag)
{
  std::ostringstream s;
  s << "train --data " << data << " --arch " << arch << " --levels 3 --hidden " << ctx.hidden
    << " --epochs " << ctx.epochs << " --batch 4 --lr-start " << ctx.lr_start << " --lr-end "
    << ctx.lr_end << " --seed 2 --model-seed 3 --out " << tag << ".ck --metrics " << tag << ".csv";
  return s.str();
}

// Shared state between the training criteria, filled lazily.
struct DeskRuns
{
  std::map<std::string, double> test_error;  // by run tag
  std::map<std::string, double> params;
};

double trained_error(const Context &ctx, DeskRuns &runs, const std::string &arch, std::size_t nx)
{
  const auto tag = arch + std::to_string(nx);
  if (!runs.test_error.contains(tag))
  {
    const auto data = "d" + std::to_string(nx) + ".bin";
    if (!fs::exists(ctx.work / data))
    {
      sponet(ctx, data_args(nx, ctx, data), "gen" + std::to_string(nx));
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto kv = key_values(sponet(ctx, train_args(ctx, arch, data, tag), "train_" + tag));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    runs.params[tag] = number(kv, "params");
    const auto ev = key_values(sponet(ctx, "eval --ckpt " + tag + ".ck --data " + data, "eval_" + tag));
    runs.test_error[tag] = number(ev, "rel_l2");
    std::cout << "  trained " << tag << ": params " << runs.params[tag] << ", best val "
              << kv.at("best_val_rel_l2") << " at epoch " << kv.at("best_epoch") << ", test "
              << runs.test_error[tag] << ", " << std::lround(secs) << " s\n"
              << std::flush;
  }
  return runs.test_error.at(tag);
}

// ---- criteria

void bc_exactness(const Context &ctx, DeskRuns &, Outcome &o)
{
  sponet(ctx, "gen-data --nx 16 --train 0 --val 0 --test 4 --seed 5 --out bc.bin", "bc_gen");
  std::size_t zero = 0;
  for (std::uint64_t seed = 0; seed < 10; seed++)
  {
    ModelConfig c;
    c.arch = seed % 2 == 0 ? Architecture::Spon : Architecture::SponMg;
    c.nx = 16;
    c.compression = c.arch == Architecture::Spon ? 20 : 1;
    c.seed = 100 + seed;
    const auto model = build_model(c);
    const auto ck = ctx.work / ("bc" + std::to_string(seed) + ".ck");
    save_checkpoint(*model, ck);
    const auto kv = key_values(sponet(ctx, "eval --ckpt " + ck.filename().string() + " --data bc.bin", "bc_eval"));
    zero += kv.at("boundary_rel_l2") == "0.000000e+00" ? 1 : 0;

    // Stored boundary DoFs against g evaluated here.
    const auto loaded = load_checkpoint(ck);
    const auto v = loaded->out_space();
    const auto u = (*loaded)(FeFunction(v, random_vector(v->dim(), seed)));
    for (auto tag : {BoundaryTag::Bottom, BoundaryTag::Right, BoundaryTag::Left, BoundaryTag::Top})
    {
      for (auto d : v->boundary_dofs(tag))
      {
        const auto &p = v->dof_coords()[d];
        const double g = p.y == 1.0 ? 1e-2 * std::sin(pi * p.x) : 0.0;
        o.require(u.dofs[d] == g, "boundary DoF " + std::to_string(d) + " differs from g");
      }
    }
  }
  o.require(zero == 10, "eval printed a nonzero boundary error");
  o.detail << zero << "/10 checkpoints report boundary_rel_l2 0";
}

void graph_degrees(const Context &, DeskRuns &, Outcome &o)
{
  const auto mesh = unit_square_mesh(8);
  for (int degree : {1, 2})
  {
    const auto v = build_space(mesh, degree);
    std::size_t max_row = 0;
    const auto &offs = v->mass().row_offsets();
    for (std::size_t i = 0; i < v->dim(); i++)
    {
      max_row = std::max(max_row, offs[i + 1] - offs[i]);
    }
    const std::size_t expect = degree == 1 ? 7 : 19;
    o.require(max_row == expect, "max mass-matrix row length");

    // Oracle: two DoFs are adjacent when some closed triangle contains both
    // nodes, found geometrically.
    std::vector<std::set<std::size_t>> support(v->dim());
    for (std::size_t t = 0; t < mesh->triangles().size(); t++)
    {
      const auto &tri = mesh->triangles()[t];
      const auto &a = mesh->vertices()[tri[0]], &b = mesh->vertices()[tri[1]], &c = mesh->vertices()[tri[2]];
      const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
      for (std::size_t i = 0; i < v->dim(); i++)
      {
        const auto &p = v->dof_coords()[i];
        const double l1 = ((b.x - p.x) * (c.y - p.y) - (c.x - p.x) * (b.y - p.y)) / det;
        const double l2 = ((c.x - p.x) * (a.y - p.y) - (a.x - p.x) * (c.y - p.y)) / det;
        const double l3 = 1.0 - l1 - l2;
        if (l1 >= -1e-12 && l2 >= -1e-12 && l3 >= -1e-12)
        {
          support[i].insert(t);
        }
      }
    }
    std::set<std::pair<std::size_t, std::size_t>> oracle;
    for (std::size_t i = 0; i < v->dim(); i++)
    {
      for (std::size_t j = 0; j < v->dim(); j++)
      {
        if (i == j)
        {
          continue;
        }
        for (auto t : support[i])
        {
          if (support[j].contains(t))
          {
            oracle.insert({i, j});
            break;
          }
        }
      }
    }
    const auto g = build_graph(*v);
    std::set<std::pair<std::size_t, std::size_t>> got;
    for (std::size_t e = 0; e < g.num_edges(); e++)
    {
      got.insert({g.receivers[e], g.senders[e]});
    }
    o.require(got == oracle && got.size() == g.num_edges(), "graph differs from the support-overlap oracle");
    o.detail << "CG" << degree << " max row " << max_row << ", " << g.num_edges() << " edges; ";
  }
}

void fe_convergence(const Context &, DeskRuns &, Outcome &o)
{
  const auto exact = [](double x, double y) { return std::sin(pi * x) * std::sin(pi * y); };
  const auto source = [](double x, double y) { return 2.0 * pi * pi * std::sin(pi * x) * std::sin(pi * y); };
  for (int degree : {1, 2})
  {
    std::vector<double> e;
    for (std::size_t nx : {8, 16, 32})
    {
      const auto v = build_space(unit_square_mesh(nx), degree);
      const auto u = solve_poisson(v, interpolate(source, v), make_bcs("zero", v));
      e.push_back(quadrature_l2_error(u, exact));
    }
    const double lo = degree == 1 ? 3.5 : 7.0, hi = degree == 1 ? 4.5 : 9.0;
    o.detail << "CG" << degree << " ratios";
    for (std::size_t i = 0; i + 1 < e.size(); i++)
    {
      const double r = e[i] / e[i + 1];
      o.require(r >= lo && r <= hi, "ratio outside band");
      o.detail << ' ' << r;
    }
    o.detail << "; ";
  }
}

void transfers(const Context &, DeskRuns &, Outcome &o)
{
  double rp = 0.0, prolong = 0.0, interp = 0.0;
  for (int degree : {1, 2})
  {
    const auto coarse = build_space(unit_square_mesh(8), degree);
    const auto fine = build_space(unit_square_mesh(16), degree);
    const auto p = build_prolongation(*coarse, *fine);
    const auto r = build_restriction(*fine, *coarse);
    const auto rp_m = multiply(r, p).to_dense();
    for (std::size_t i = 0; i < coarse->dim(); i++)
    {
      for (std::size_t j = 0; j < coarse->dim(); j++)
      {
        rp = std::max(rp, std::abs(rp_m[i * coarse->dim() + j] - (i == j ? 1.0 : 0.0)));
      }
    }
    const ScalarField poly = degree == 1 ? ScalarField([](double x, double y) { return 0.3 - 1.2 * x + 2.5 * y; })
                                         : ScalarField([](double x, double y)
                                                       { return 0.3 - x + 2.0 * y + 1.5 * x * x - 0.7 * x * y + 0.4 * y * y; });
    const auto pc = p.multiply(interpolate(poly, coarse).dofs);
    prolong = std::max(prolong, max_abs_diff(pc, interpolate(poly, fine).dofs));
  }
  const auto mesh = unit_square_mesh(8);
  const auto u = build_space(mesh, 1), v = build_space(mesh, 2);
  const ScalarField affine = [](double x, double y) { return -0.4 + 3.0 * x - 1.1 * y; };
  const auto iv = build_interpolation(*u, *v).multiply(interpolate(affine, u).dofs);
  interp = max_abs_diff(iv, interpolate(affine, v).dofs);
  o.require(rp <= 1e-13, "R P != I");
  o.require(prolong <= 1e-12, "prolongation not exact on polynomials");
  o.require(interp <= 1e-12, "CG1 -> CG2 interpolation not exact on affines");
  o.detail << "|RP - I| " << rp << ", prolongation " << prolong << ", interpolation " << interp;
}

void autodiff(const Context &, DeskRuns &, Outcome &o)
{
  std::size_t index_seed = 40;
  auto index_list = [&](std::size_t n, std::size_t range)
  {
    std::mt19937_64 rng(index_seed++);
    auto v = std::make_shared<std::vector<std::size_t>>(n);
    for (auto &i : *v)
    {
      i = rng() % range;
    }
    return std::shared_ptr<const std::vector<std::size_t>>(v);
  };
  const auto sparse = std::make_shared<const CsrMatrix>(build_space(unit_square_mesh(3), 1)->mass());
  const auto dense_w = random_tensor({1, 4, 5}, 3, true);
  const auto row = random_tensor({1, 1, 4}, 4, true);
  auto x = random_tensor({2, 16, 4}, 1, true), y = random_tensor({2, 16, 4}, 2, true);
  auto xs = random_tensor({2, 16, 1}, 5, true), ys = random_tensor({2, 16, 1}, 6, true);
  auto p3 = random_tensor({1, 1, 3}, 7, true);
  auto w = random_tensor({1, 4, 3}, 8, true), b = random_tensor({1, 1, 3}, 9, true);
  auto wl = random_tensor({1, 5, 16}, 10, true);
  const auto gidx = index_list(30, 16);
  const auto recv = index_list(30, 16);
  const auto rows = index_list(5, 16);
  const auto vals = std::make_shared<const std::vector<double>>(random_vector(5, 11));
  const auto mass = sparse;

  const std::vector<std::pair<std::string, std::pair<std::function<Tensor()>, std::vector<Tensor>>>> cases{
      {"matmul", {[&] { return probe(diff::matmul(x, dense_w), 1); }, {x, dense_w}}},
      {"left_matmul", {[&] { return probe(diff::left_matmul(wl, x), 2); }, {wl, x}}},
      {"sparse_matvec", {[&] { return probe(diff::sparse_matvec(sparse, x), 3); }, {x}}},
      {"add", {[&] { return probe(diff::add(x, y), 4); }, {x, y}}},
      {"add_row", {[&] { return probe(diff::add(x, row), 5); }, {x, row}}},
      {"sub", {[&] { return probe(diff::sub(x, y), 6); }, {x, y}}},
      {"mul", {[&] { return probe(diff::mul(x, y), 7); }, {x, y}}},
      {"scale", {[&] { return probe(diff::scale(x, -1.3), 8); }, {x}}},
      {"affine_combine", {[&] { return probe(diff::affine_combine(xs, ys, p3), 9); }, {xs, ys, p3}}},
      {"gather", {[&] { return probe(diff::gather(x, gidx), 10); }, {x}}},
      {"scatter_mean", {[&] { return probe(diff::scatter_mean(diff::gather(x, gidx), recv, 16), 11); }, {x}}},
      {"concat", {[&] { return probe(diff::concat(x, y), 12); }, {x, y}}},
      {"swish", {[&] { return probe(diff::swish(diff::scale(x, 2.0)), 13); }, {x}}},
      {"dense", {[&] { return probe(diff::dense(x, w, b, false), 14); }, {x, w, b}}},
      {"dense_swish", {[&] { return probe(diff::dense(x, w, b, true), 15); }, {x, w, b}}},
      {"sum", {[&] { return diff::sum(diff::mul(x, x)); }, {x}}},
      {"overwrite_rows", {[&] { return probe(diff::overwrite_rows(x, rows, vals), 16); }, {x}}},
      {"relative_l2_loss", {[&] { return relative_l2_loss(xs, ys, mass); }, {xs}}},
  };
  double worst = 0.0;
  for (const auto &[name, c] : cases)
  {
    const auto r = check_gradients(c.first, c.second, 24, 17);
    o.require(r.checked >= 20, name + " checked fewer than 20 coordinates");
    o.require(r.max_rel <= 1e-4, name);
    worst = std::max(worst, r.max_rel);
  }

  ModelConfig mc;
  mc.arch = Architecture::SponMg;
  mc.nx = 8;
  mc.levels = 3;
  mc.compression = 1;
  mc.seed = 21;
  const auto model = build_model(mc);
  std::vector<Tensor> params;
  std::uint64_t seed = 500;
  for (auto p : model->params())
  {
    // Move off the initialisation so no parameter group sits at zero.
    auto v = p.tensor.mutable_values();
    const auto r = random_vector(v.size(), seed++, -0.3, 0.3);
    for (std::size_t i = 0; i < v.size(); i++)
    {
      v[i] += r[i];
    }
    params.push_back(p.tensor);
  }
  const auto f = random_tensor({2, model->in_space()->dim(), 1}, 22);
  const auto target = random_tensor({2, model->out_space()->dim(), 1}, 23);
  const auto m = std::make_shared<const CsrMatrix>(model->out_space()->mass());
  const auto r = check_gradients([&] { return relative_l2_loss(model->forward(f), target, m); }, params, 60, 24);
  o.require(r.checked >= 20, "SPON-MG checked fewer than 20 coordinates");
  o.require(r.max_rel <= 1e-4, "SPON-MG gradient");
  o.detail << cases.size() << " primitives worst " << worst << "; SPON-MG (N=3, nx=8) " << r.checked
           << " coordinates over " << params.size() << " tensors, worst " << r.max_rel;
}

void desk_training(const Context &ctx, DeskRuns &runs, Outcome &o)
{
  const double e = trained_error(ctx, runs, "spon", 32);
  // Zero predictor baseline through the same loss.
  const auto data = read_dataset(ctx.work / "d32.bin");
  const auto v = build_space(unit_square_mesh(32), 1);
  double baseline = 0.0;
  for (const auto &s : data.split(Split::Test))
  {
    baseline += relative_l2(FeFunction(v), FeFunction(v, s.u)) / data.header.n_test;
  }
  o.require(e <= 5e-2, "test error above 5e-2");
  o.require(e * 10.0 <= baseline, "not 10x below the zero predictor");
  o.detail << "SPON nx=32 test rel L2 " << e << " (zero predictor " << baseline << ")";
}

void multigrid_quality(const Context &ctx, DeskRuns &runs, Outcome &o)
{
  const double spon = trained_error(ctx, runs, "spon", 32);
  const double mg = trained_error(ctx, runs, "spon-mg", 32);
  const double ps = runs.params.at("spon32"), pm = runs.params.at("spon-mg32");
  o.require(mg <= 1.25 * spon, "SPON-MG error above 1.25x SPON");
  o.require(pm < 0.5 * ps, "SPON-MG not below half the SPON parameter count");
  o.detail << "SPON-MG " << mg << " vs SPON " << spon << " (ratio " << mg / spon << "), params " << pm
           << " vs " << ps << " (ratio " << pm / ps << ")";
}

void super_resolution(const Context &ctx, DeskRuns &runs, Outcome &o)
{
  const double native = trained_error(ctx, runs, "spon", 32);
  // The stated bound covers the evaluation, not the shared training run.
  const auto t0 = std::chrono::steady_clock::now();
  const auto kv = key_values(sponet(ctx, "eval --ckpt spon32.ck --data d32.bin --nx-eval 64", "eval_sr"));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double fine = number(kv, "rel_l2");
  o.require(fine <= 1.5 * native, "error at nx=64 above 1.5x native");
  o.require(secs <= 300.0, "evaluation at nx=64 took over 5 min");
  o.detail << "nx=64 " << fine << " vs native nx=32 " << native << " (ratio " << fine / native << "), eval "
           << std::lround(secs) << " s";
}

void resolution_trend(const Context &ctx, DeskRuns &runs, Outcome &o)
{
  const double e8 = trained_error(ctx, runs, "spon", 8);
  const double e16 = trained_error(ctx, runs, "spon", 16);
  const double e32 = trained_error(ctx, runs, "spon", 32);
  o.require(e8 > e16 && e16 > e32, "not strictly decreasing");
  o.detail << "test rel L2 nx=8 " << e8 << ", nx=16 " << e16 << ", nx=32 " << e32;
}

// Closed forms written out independently of the library.
std::size_t block_params(std::size_t h) { return 2 * (2 * h * h + 6 * h + 1); }

std::size_t spon_params(std::size_t nx, std::size_t h, std::size_t k)
{
  const std::size_t n = (nx + 1) * (nx + 1);
  const std::size_t r = (n + k - 1) / k;
  return 4 * n * r + 4 * block_params(h);
}

std::size_t mg_params(std::size_t nx, std::size_t h)
{
  const std::size_t m = (nx / 4 + 1) * (nx / 4 + 1);
  return 2 * (block_params(h) + 3) + 4 * m * m + 4 * block_params(h);
}

void parameter_accounting(const Context &ctx, DeskRuns &, Outcome &o)
{
  sponet(ctx, "report --arch spon,spon-mg --nx 16,32,64 --samples 2 --batch 2 --out report.csv", "report");
  std::istringstream in(slurp(ctx.work / "report.csv"));
  std::string line;
  std::getline(in, line);
  std::map<std::pair<std::size_t, std::string>, std::size_t> got;
  while (std::getline(in, line))
  {
    std::istringstream row(line);
    std::string nx, arch, params;
    std::getline(row, nx, ',');
    std::getline(row, arch, ',');
    std::getline(row, params, ',');
    got[{std::stoul(nx), arch}] = std::stoul(params);
  }
  o.require(got.size() == 6, "report does not have 6 rows");
  for (std::size_t nx : {16, 32, 64})
  {
    const auto s = spon_params(nx, 16, 20), m = mg_params(nx, 16);
    o.require(got[{nx, "spon"}] == s, "SPON count at nx=" + std::to_string(nx));
    o.require(got[{nx, "spon-mg"}] == m, "SPON-MG count at nx=" + std::to_string(nx));
    o.require(m < s, "SPON-MG not below SPON at nx=" + std::to_string(nx));
    o.detail << "nx=" << nx << ' ' << got[{nx, "spon"}] << '/' << got[{nx, "spon-mg"}] << "; ";
  }
}

void determinism(const Context &ctx, DeskRuns &, Outcome &o)
{
  std::vector<std::string> artifacts[2];
  for (int run = 0; run < 2; run++)
  {
    const auto r = "det" + std::to_string(run);
    std::vector<std::string> &a = artifacts[run];
    a.push_back(sponet(ctx, "gen-data --nx 8 --train 12 --val 4 --test 4 --seed 9 --out " + r + ".bin", r + "_gen"));
    a.push_back(slurp(ctx.work / (r + ".bin")));
    for (const std::string arch : {"spon", "spon-mg"})
    {
      const auto tag = r + arch;
      a.push_back(sponet(ctx, "train --data " + r + ".bin --arch " + arch +
                                  " --hidden 8 --epochs 3 --seed 4 --model-seed 5 --no-timing --out " + tag +
                                  ".ck --metrics " + tag + ".csv",
                         tag + "_train"));
      a.push_back(slurp(ctx.work / (tag + ".ck")));
      a.push_back(slurp(ctx.work / (tag + ".csv")));
      a.push_back(sponet(ctx, "eval --ckpt " + tag + ".ck --data " + r + ".bin", tag + "_eval"));
      a.push_back(sponet(ctx, "eval --ckpt " + tag + ".ck --data " + r + ".bin --nx-eval 16", tag + "_sr"));
    }
  }
  std::size_t same = 0;
  for (std::size_t i = 0; i < artifacts[0].size(); i++)
  {
    same += artifacts[0][i] == artifacts[1][i] ? 1 : 0;
  }
  // Outputs naming the run's own files differ only by that name.
  for (std::size_t i = 0; i < artifacts[0].size(); i++)
  {
    if (artifacts[0][i] != artifacts[1][i])
    {
      auto a = artifacts[0][i], b = artifacts[1][i];
      for (auto *s : {&a, &b})
      {
        for (const std::string from : {"det0", "det1"})
        {
          for (auto pos = s->find(from); pos != std::string::npos; pos = s->find(from))
          {
            s->replace(pos, from.size(), "detN");
          }
        }
      }
      same += a == b ? 1 : 0;
      o.require(a == b, "artifact " + std::to_string(i) + " differs");
    }
  }
  o.detail << same << '/' << artifacts[0].size() << " artifacts identical (dataset, checkpoints, metrics, stdout)";
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"sponet acceptance criteria"};
  Context ctx;
  std::vector<int> only;
  std::string work = "acceptance_work";
  ctx.cli = SPONET_CLI_PATH;
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  app.add_option("--work", work, "scratch directory")->capture_default_str();
  app.add_option("--cli", ctx.cli, "sponet executable")->capture_default_str();
  app.add_option("--epochs", ctx.epochs, "epochs of the desk-scale runs")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  ctx.work = fs::absolute(work);
  fs::create_directories(ctx.work);

  using Fn = void (*)(const Context &, DeskRuns &, Outcome &);
  struct Criterion
  {
    int id;
    const char *name;
    double budget_s;  // stated runtime bound, 0 when none is stated
    Fn fn;
  };
  const std::vector<Criterion> criteria{
      {1, "BC exactness", 60, bc_exactness},
      {2, "latent graph degrees", 10, graph_degrees},
      {3, "FE convergence", 120, fe_convergence},
      {4, "transfer operators", 10, transfers},
      {5, "autodiff", 120, autodiff},
      {6, "desk-scale SPON training", 0, desk_training},
      {7, "SPON-MG vs SPON", 0, multigrid_quality},
      {8, "zero-shot super-resolution", 0, super_resolution},
      {9, "resolution trend", 0, resolution_trend},
      {10, "parameter accounting", 60, parameter_accounting},
      {11, "determinism", 0, determinism},
  };
  DeskRuns runs;
  bool all = true;
  for (const auto &c : criteria)
  {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end())
    {
      continue;
    }
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try
    {
      c.fn(ctx, runs, o);
    }
    catch (const std::exception &e)
    {
      o.pass = false;
      o.detail << "[error: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    // Criteria 6 to 9 share trained models, so they carry no bound here.
    if (c.budget_s > 0)
    {
      o.require(secs <= c.budget_s, "runtime above " + std::to_string(static_cast<int>(c.budget_s)) + " s");
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail.str()
              << " [" << std::fixed << std::setprecision(1) << secs << " s]" << std::defaultfloat
              << std::setprecision(6) << '\n'
              << std::flush;
  }
  return all ? 0 : 1;
}
