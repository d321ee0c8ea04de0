// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

// sponet command-line driver: gen-data, train, eval and report.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sponet/checkpoint.hpp"
#include "sponet/dataset.hpp"
#include "sponet/runtime.hpp"
#include "sponet/spon.hpp"
#include "sponet/train.hpp"
#include "sponet/transfer.hpp"

using namespace sponet;

namespace
{

enum ExitCode
{
  kOk = 0,
  kUsage = 2,
  kData = 3,
  kNumerical = 4,
};

// Raised for unreadable or inconsistent input files.
struct DataError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

constexpr const char *kConfigHeader = "sponet-config 1";

// key=value lines after a version line; '#' starts a comment.
std::map<std::string, std::string> read_config(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw DataError("cannot open config file " + path);
  }
  std::map<std::string, std::string> kv;
  std::string line;
  bool seen_header = false;
  std::size_t lineno = 0;
  auto trim = [](std::string s)
  {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line))
  {
    lineno++;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty())
    {
      continue;
    }
    if (!seen_header)
    {
      if (line != kConfigHeader)
      {
        throw CLI::ValidationError("config", path + " must start with '" + kConfigHeader + "'");
      }
      seen_header = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
    {
      throw CLI::ValidationError("config", path + ":" + std::to_string(lineno) +
                                               ": expected key=value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  if (!seen_header)
  {
    throw CLI::ValidationError("config", path + " is empty");
  }
  return kv;
}

// Appends config entries as flags unless the command line already sets them,
// so explicit flags always win.
std::vector<std::string> merge_config(std::vector<std::string> args)
{
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); i++)
  {
    if (args[i] == "--config" && i + 1 < args.size())
    {
      config_path = args[i + 1];
    }
    else if (args[i].rfind("--config=", 0) == 0)
    {
      config_path = args[i].substr(9);
    }
  }
  if (config_path.empty())
  {
    return args;
  }
  std::set<std::string> given;
  for (const auto &a : args)
  {
    if (a.rfind("--", 0) == 0)
    {
      given.insert(a.substr(2, a.find('=') - 2));
    }
  }
  for (const auto &[k, v] : read_config(config_path))
  {
    if (!given.count(k))
    {
      args.push_back("--" + k + "=" + v);
    }
  }
  return args;
}

void log_resolved(const CLI::App &sub)
{
  std::cerr << "# " << sub.get_name() << " configuration\n";
  for (const auto *opt : sub.get_options())
  {
    if (opt->get_name() == "--help" || opt->get_lnames().empty())
    {
      continue;
    }
    std::string value;
    if (opt->count() > 0)
    {
      value = CLI::detail::join(opt->results());
    }
    else
    {
      value = opt->get_default_str();
    }
    std::cerr << "#   " << opt->get_lnames().front() << " = " << value << '\n';
  }
}

std::size_t resolve_threads(std::size_t flag)
{
  if (flag > 0)
  {
    return flag;
  }
  if (const char *env = std::getenv("SPONET_THREADS"))
  {
    try
    {
      const long v = std::stol(env);
      if (v > 0)
      {
        return static_cast<std::size_t>(v);
      }
    }
    catch (const std::exception &)
    {
    }
    throw CLI::ValidationError("SPONET_THREADS", "must be a positive integer");
  }
  return 1;
}

PoissonDataset load_data(const std::string &path)
{
  try
  {
    return read_dataset(path);
  }
  catch (const std::runtime_error &e)
  {
    throw DataError(e.what());
  }
}

std::string sci(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6e", v);
  return buf;
}

// ---- gen-data

struct GenArgs
{
  GenerationOptions opts;
  std::string out;
};

int run_gen(const GenArgs &a, std::size_t threads)
{
  auto opts = a.opts;
  opts.threads = threads;
  const auto data = generate_dataset(opts);
  write_dataset(data, a.out);
  const auto bytes = std::filesystem::file_size(a.out);
  std::cout << "wrote " << a.out << ": nx " << data.header.nx << ", degree " << data.header.degree
            << ", dim " << data.header.dim << ", train " << data.header.n_train << ", val "
            << data.header.n_val << ", test " << data.header.n_test << ", bytes " << bytes << '\n';
  return kOk;
}

// ---- train

struct TrainArgs
{
  std::string data;
  std::string arch = "spon";
  std::size_t levels = 3;
  std::size_t mp_layers = 1;
  std::size_t psi_layers = 4;
  std::size_t hidden = 16;
  std::size_t k = 0;  // 0: 20 for spon, 1 for spon-mg
  std::uint64_t model_seed = 0;
  TrainConfig cfg;
  std::string out;
  std::string metrics;
  std::string gnuplot;
  bool no_timing = false;
};

void write_metrics_gnuplot(const std::string &script, const std::string &csv)
{
  std::ofstream g(script, std::ios::trunc);
  g << "# gnuplot script for " << csv << "\n"
    << "set datafile separator ','\n"
    << "set key autotitle columnhead\n"
    << "set logscale y\n"
    << "set xlabel 'epoch'\n"
    << "set ylabel 'relative L2 error'\n"
    << "plot '" << csv << "' using 1:3 with lines title 'train', \\\n"
    << "     '" << csv << "' using 1:4 with lines title 'validation'\n";
}

int run_train(const TrainArgs &a)
{
  const auto data = load_data(a.data);
  ModelConfig mc;
  mc.arch = parse_architecture(a.arch);
  mc.nx = data.header.nx;
  mc.degree_in = mc.degree_out = static_cast<int>(data.header.degree);
  mc.levels = a.levels;
  mc.mp_layers = a.mp_layers;
  mc.psi_layers = a.psi_layers;
  mc.hidden = a.hidden;
  mc.compression = a.k > 0 ? a.k : (mc.arch == Architecture::Spon ? 20 : 1);
  mc.seed = a.model_seed;
  auto model = build_model(mc);

  auto cfg = a.cfg;
  cfg.checkpoint = a.out;
  const auto result = train(*model, data, cfg,
                            [](const MetricsRow &r)
                            {
                              std::cerr << "epoch " << r.epoch << " lr " << sci(r.lr) << " train "
                                        << sci(r.train_rel_l2) << " val " << sci(r.val_rel_l2)
                                        << " (" << r.seconds << " s)\n";
                            });
  if (!a.metrics.empty())
  {
    auto log = result.log;
    if (a.no_timing)
    {
      for (auto &row : log.rows)
      {
        row.seconds = 0.0;
      }
    }
    log.write_csv(a.metrics);
    if (!a.gnuplot.empty())
    {
      write_metrics_gnuplot(a.gnuplot, a.metrics);
    }
  }
  const auto &last = result.log.rows.back();
  std::cout << "params " << model->param_count() << '\n'
            << "final_train_rel_l2 " << sci(last.train_rel_l2) << '\n'
            << "final_val_rel_l2 " << sci(last.val_rel_l2) << '\n'
            << "best_epoch " << result.best_epoch << '\n'
            << "best_val_rel_l2 " << sci(result.best_val) << '\n';
  return kOk;
}

// ---- eval

struct EvalArgs
{
  std::string ckpt;
  std::string data;
  std::size_t nx_eval = 0;
  std::string split = "test";
};

// Nodal interpolant of the boundary data with the same later-wins rule the
// decoder uses.
FeFunction boundary_data(std::shared_ptr<const FeSpace> space, const std::vector<DirichletBc> &bcs)
{
  std::vector<double> dofs(space->dim(), 0.0);
  apply_constraints(collect_constraints(bcs), dofs);
  return FeFunction(std::move(space), std::move(dofs));
}

// Relative L2 mismatch over the whole boundary; the norm floor keeps
// homogeneous data well defined.
double boundary_rel_error(const FeFunction &u, const FeFunction &g)
{
  double err = 0.0, ref = 0.0;
  for (auto tag : kAllBoundaryTags)
  {
    err += std::pow(boundary_l2_error(u, g, tag), 2);
    ref += std::pow(boundary_l2_norm(g, tag), 2);
  }
  return std::sqrt(err) / std::max(std::sqrt(ref), kNormFloor);
}

int run_eval(const EvalArgs &a, std::size_t threads)
{
  std::unique_ptr<SponModel> model;
  try
  {
    model = load_checkpoint(a.ckpt);
  }
  catch (const std::runtime_error &e)
  {
    throw DataError(e.what());
  }
  const auto data = load_data(a.data);
  const auto split = a.split == "train" ? Split::Train : a.split == "val" ? Split::Val : Split::Test;
  const std::size_t offset = split == Split::Train ? 0
                             : split == Split::Val ? data.header.n_train
                                                   : data.header.n_train + data.header.n_val;
  auto samples = data.split(split);
  if (samples.empty())
  {
    throw DataError("the " + a.split + " split is empty");
  }

  std::vector<PoissonSample> regenerated;
  std::shared_ptr<const FeSpace> space;
  const std::size_t nx = a.nx_eval > 0 ? a.nx_eval : data.header.nx;
  if (a.nx_eval > 0)
  {
    GenerationOptions opts;
    opts.nx = nx;
    opts.degree = static_cast<int>(data.header.degree);
    opts.seed = data.header.seed;
    opts.length_scale = data.header.length_scale;
    opts.threads = threads;
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), offset);
    regenerated = generate_samples(opts, idx);
    samples = regenerated;
    space = build_space(unit_square_mesh(nx), opts.degree);
  }
  else
  {
    if (data.header.dim != model->in_space()->dim())
    {
      throw DataError("dataset resolution does not match the checkpoint");
    }
    space = model->out_space();
  }

  const auto in_space =
      a.nx_eval > 0 ? build_space(space->mesh_ptr(), model->in_space()->degree()) : model->in_space();
  const auto g = boundary_data(space, make_bcs(model->config().bcs, space));
  double rel = 0.0, bnd = 0.0;
  constexpr std::size_t kBatch = 16;
  for (std::size_t start = 0; start < samples.size(); start += kBatch)
  {
    const std::size_t end = std::min(samples.size(), start + kBatch);
    std::vector<FeFunction> f;
    for (std::size_t i = start; i < end; i++)
    {
      f.emplace_back(in_space, samples[i].f);
    }
    const auto u = a.nx_eval > 0 ? super_resolve(*model, f, space) : (*model)(f);
    for (std::size_t i = start; i < end; i++)
    {
      const FeFunction target(space, samples[i].u);
      rel += relative_l2(u[i - start], target);
      bnd += boundary_rel_error(u[i - start], g);
    }
  }
  const double n = static_cast<double>(samples.size());
  if (!std::isfinite(rel))
  {
    throw NumericalError("non-finite evaluation error");
  }
  std::cout << "split " << a.split << '\n'
            << "nx " << nx << '\n'
            << "samples " << samples.size() << '\n'
            << "rel_l2 " << sci(rel / n) << '\n'
            << "boundary_rel_l2 " << sci(bnd / n) << '\n';
  return kOk;
}

// ---- report

struct ReportArgs
{
  std::vector<std::string> archs{"spon", "spon-mg"};
  std::vector<std::size_t> nxs{16, 32, 64};
  std::size_t levels = 3;
  std::size_t hidden = 16;
  std::size_t k_spon = 20;
  std::size_t k_mg = 1;
  std::size_t samples = 8;
  std::size_t batch = 4;
  std::uint64_t seed = 0;
  std::string out;
  std::string gnuplot;
};

// Wall time of one optimisation epoch over `samples` random inputs.
double time_epoch(SponModel &model, std::size_t samples, std::size_t batch, std::uint64_t seed)
{
  if (samples == 0)
  {
    return 0.0;
  }
  const std::size_t n = model.in_space()->dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto mass = std::make_shared<const CsrMatrix>(model.out_space()->mass());
  AdamW opt(model.params());
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t start = 0; start < samples; start += batch)
  {
    const std::size_t b = std::min(batch, samples - start);
    std::vector<double> f(b * n), u(b * n);
    for (auto &v : f)
    {
      v = normal(rng);
    }
    for (auto &v : u)
    {
      v = normal(rng);
    }
    opt.zero_grad();
    diff::Tape tape;
    const auto pred = model.forward(diff::Tensor::from({b, n, 1}, std::move(f)));
    const auto loss = relative_l2_loss(pred, diff::Tensor::from({b, n, 1}, std::move(u)), mass);
    tape.backward(loss);
    opt.step(1e-4);
  }
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int run_report(const ReportArgs &a)
{
  std::ostringstream csv;
  csv << "nx,arch,params,sec_per_epoch\n";
  for (auto nx : a.nxs)
  {
    for (const auto &name : a.archs)
    {
      ModelConfig mc;
      mc.arch = parse_architecture(name);
      mc.nx = nx;
      mc.levels = a.levels;
      mc.hidden = a.hidden;
      mc.compression = mc.arch == Architecture::Spon ? a.k_spon : a.k_mg;
      mc.seed = a.seed;
      auto model = build_model(mc);
      const double sec = time_epoch(*model, a.samples, a.batch, a.seed);
      csv << nx << ',' << to_string(mc.arch) << ',' << model->param_count() << ',' << sec << '\n';
    }
  }
  if (a.out.empty())
  {
    std::cout << csv.str();
  }
  else
  {
    std::ofstream(a.out, std::ios::trunc) << csv.str();
    std::cout << "wrote " << a.out << '\n';
    if (!a.gnuplot.empty())
    {
      std::ofstream g(a.gnuplot, std::ios::trunc);
      g << "# gnuplot script for " << a.out << "\n"
        << "set datafile separator ','\n"
        << "set logscale y\n"
        << "set xlabel 'n_x'\n"
        << "set multiplot layout 1,2\n"
        << "set ylabel 'seconds per epoch'\n"
        << "plot for [a in 'spon spon-mg'] '" << a.out
        << "' using 1:(strcol(2) eq a ? $4 : 1/0) with linespoints title a\n"
        << "set ylabel 'parameters'\n"
        << "plot for [a in 'spon spon-mg'] '" << a.out
        << "' using 1:(strcol(2) eq a ? $3 : 1/0) with linespoints title a\n"
        << "unset multiplot\n";
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char **argv)
{
  configure_allocator();
  CLI::App app{"sponet: structure-preserving operator networks on finite element spaces"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::size_t threads_flag = 0;
  app.add_option("--config", config_path, "key=value file whose first line is 'sponet-config 1'")
      ->check(CLI::ExistingFile);
  app.add_option("--threads", threads_flag, "worker threads (default: SPONET_THREADS or 1)");

  GenArgs gen;
  gen.opts.n_train = 64;
  gen.opts.n_val = 16;
  gen.opts.n_test = 16;
  auto *g = app.add_subcommand("gen-data", "generate a Poisson dataset");
  g->add_option("--nx", gen.opts.nx, "cells per side")->check(CLI::PositiveNumber)->capture_default_str();
  g->add_option("--degree", gen.opts.degree, "Lagrange degree (1 or 2)")
      ->check(CLI::IsMember({1, 2}))
      ->capture_default_str();
  g->add_option("--train", gen.opts.n_train, "training samples")->capture_default_str();
  g->add_option("--val", gen.opts.n_val, "validation samples")->capture_default_str();
  g->add_option("--test", gen.opts.n_test, "test samples")->capture_default_str();
  g->add_option("--seed", gen.opts.seed, "dataset seed")->capture_default_str();
  g->add_option("--length-scale", gen.opts.length_scale, "GP kernel length scale")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  g->add_option("--out", gen.out, "output dataset file")->required();
  gen.opts.n_train = 64;
  gen.opts.n_val = 16;
  gen.opts.n_test = 16;

  TrainArgs tr;
  auto *t = app.add_subcommand("train", "train a model on a dataset");
  t->add_option("--data", tr.data, "dataset file")->required();
  t->add_option("--arch", tr.arch, "spon or spon-mg")
      ->check(CLI::IsMember({"spon", "spon-mg"}))
      ->capture_default_str();
  t->add_option("--levels", tr.levels, "multigrid levels (spon-mg)")->capture_default_str();
  t->add_option("--mp-layers", tr.mp_layers, "message-passing blocks per multigrid level")
      ->capture_default_str();
  t->add_option("--psi-layers", tr.psi_layers, "message-passing blocks in psi")->capture_default_str();
  t->add_option("--hidden", tr.hidden, "MLP hidden width")->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--k", tr.k, "compression factor (default 20 for spon, 1 for spon-mg)");
  t->add_option("--epochs", tr.cfg.epochs, "epochs")->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--batch", tr.cfg.batch_size, "batch size")->check(CLI::PositiveNumber)->capture_default_str();
  t->add_option("--lr-start", tr.cfg.lr_start, "learning rate at the first epoch")->capture_default_str();
  t->add_option("--lr-end", tr.cfg.lr_end, "learning rate at the last epoch")->capture_default_str();
  t->add_option("--weight-decay", tr.cfg.adamw.weight_decay, "AdamW decoupled weight decay")
      ->capture_default_str();
  t->add_option("--beta1", tr.cfg.adamw.beta1, "AdamW first-moment decay")->capture_default_str();
  t->add_option("--beta2", tr.cfg.adamw.beta2, "AdamW second-moment decay")->capture_default_str();
  t->add_option("--seed", tr.cfg.seed, "shuffling seed")->capture_default_str();
  t->add_option("--model-seed", tr.model_seed, "parameter initialisation seed")->capture_default_str();
  t->add_option("--checkpoint-every", tr.cfg.checkpoint_every,
                "also save the best parameters every N epochs (0: only at the end)")
      ->capture_default_str();
  t->add_option("--out", tr.out, "checkpoint file")->required();
  t->add_option("--metrics", tr.metrics, "metrics CSV file");
  t->add_option("--gnuplot", tr.gnuplot, "companion gnuplot script for the metrics CSV");
  t->add_flag("--no-timing", tr.no_timing, "write 0 in the seconds column for reproducible CSVs");

  EvalArgs ev;
  auto *e = app.add_subcommand("eval", "evaluate a checkpoint");
  e->add_option("--ckpt", ev.ckpt, "checkpoint file")->required();
  e->add_option("--data", ev.data, "dataset file")->required();
  e->add_option("--nx-eval", ev.nx_eval, "evaluate at another nested resolution on regenerated data");
  e->add_option("--split", ev.split, "train, val or test")
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();

  ReportArgs rep;
  auto *r = app.add_subcommand("report", "parameter counts and epoch times");
  r->add_option("--arch", rep.archs, "architectures")
      ->check(CLI::IsMember({"spon", "spon-mg"}))
      ->delimiter(',')
      ->capture_default_str();
  r->add_option("--nx", rep.nxs, "resolutions")->delimiter(',')->capture_default_str();
  r->add_option("--levels", rep.levels, "multigrid levels")->capture_default_str();
  r->add_option("--hidden", rep.hidden, "MLP hidden width")->capture_default_str();
  r->add_option("--k-spon", rep.k_spon, "compression factor for spon")->capture_default_str();
  r->add_option("--k-mg", rep.k_mg, "compression factor for spon-mg")->capture_default_str();
  r->add_option("--samples", rep.samples, "synthetic samples per timed epoch (0 skips timing)")
      ->capture_default_str();
  r->add_option("--batch", rep.batch, "batch size for timing")->check(CLI::PositiveNumber)->capture_default_str();
  r->add_option("--seed", rep.seed, "seed")->capture_default_str();
  r->add_option("--out", rep.out, "CSV file (default: stdout)");
  r->add_option("--gnuplot", rep.gnuplot, "companion gnuplot script (needs --out)");

  try
  {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = merge_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  }
  catch (const CLI::ParseError &err)
  {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }
  catch (const DataError &err)
  {
    std::cerr << "error: " << err.what() << '\n';
    return kData;
  }

  try
  {
    const std::size_t threads = resolve_threads(threads_flag);
    for (auto *sub : {g, t, e, r})
    {
      if (sub->parsed())
      {
        log_resolved(*sub);
      }
    }
    if (g->parsed())
    {
      return run_gen(gen, threads);
    }
    if (t->parsed())
    {
      return run_train(tr);
    }
    if (e->parsed())
    {
      return run_eval(ev, threads);
    }
    return run_report(rep);
  }
  catch (const CLI::ValidationError &err)
  {
    std::cerr << "error: " << err.what() << '\n';
    return kUsage;
  }
  catch (const DataError &err)
  {
    std::cerr << "error: " << err.what() << '\n';
    return kData;
  }
  catch (const NumericalError &err)
  {
    std::cerr << "numerical failure: " << err.what() << '\n';
    return kNumerical;
  }
  catch (const std::domain_error &err)
  {
    std::cerr << "numerical failure: " << err.what() << '\n';
    return kNumerical;
  }
  catch (const std::invalid_argument &err)
  {
    std::cerr << "error: " << err.what() << '\n';
    return kUsage;
  }
  catch (const std::exception &err)
  {
    std::cerr << "error: " << err.what() << '\n';
    return kData;
  }
}
