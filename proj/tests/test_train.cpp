// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "fe_oracle.hpp"
#include "sponet/checkpoint.hpp"
#include "sponet/train.hpp"
#include "test_util.hpp"

using namespace sponet;
using namespace sponet::testing;
using diff::Tensor;

namespace
{

std::shared_ptr<const CsrMatrix> mass_of(const FeSpace &v)
{
  return std::make_shared<const CsrMatrix>(v.mass());
}

PoissonDataset small_data(std::size_t nx, std::size_t n_train, std::size_t n_val, std::uint64_t seed)
{
  GenerationOptions o;
  o.nx = nx;
  o.n_train = n_train;
  o.n_val = n_val;
  o.seed = seed;
  return generate_dataset(o);
}

ModelConfig small_model(std::size_t nx, std::uint64_t seed)
{
  ModelConfig c;
  c.nx = nx;
  c.hidden = 6;
  c.psi_layers = 2;
  c.seed = seed;
  return c;
}

std::string slurp(const std::filesystem::path &p)
{
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_SUITE("train")
{
  TEST_CASE("relative error loss")
  {
    const auto v = build_space(unit_square_mesh(5), 2);
    const auto m = mass_of(*v);
    const auto t = random_tensor({3, v->dim(), 1}, 1);
    CHECK(relative_l2_loss(t, t, m).item() == 0.0);
    CHECK(relative_l2_loss(Tensor::zeros(t.shape()), t, m).item() == doctest::Approx(1.0).epsilon(1e-14));

    // Against quadrature of the difference field.
    for (std::uint64_t s = 0; s < 4; s++)
    {
      const FeFunction a(v, random_vector(v->dim(), 10 + s)), b(v, random_vector(v->dim(), 20 + s));
      const double num = quadrature_l2_error(a, [&](double x, double y) { return evaluate(b, Point{x, y}); });
      const double den = quadrature_l2_error(b, [](double, double) { return 0.0; });
      const double loss = relative_l2_loss(Tensor::from({1, v->dim(), 1}, a.dofs),
                                           Tensor::from({1, v->dim(), 1}, b.dofs), m)
                              .item();
      CHECK(std::abs(loss - num / den) <= 1e-10);
      CHECK(relative_l2(a, b) == doctest::Approx(loss).epsilon(1e-13));
    }
    CHECK_THROWS_AS(relative_l2_loss(t, random_tensor({2, v->dim(), 1}, 2), m), std::invalid_argument);
  }

  TEST_CASE("loss ignores the order of samples within a batch")
  {
    const auto v = build_space(unit_square_mesh(4), 1);
    const auto m = mass_of(*v);
    const auto n = v->dim();
    const auto p = random_vector(2 * n, 3), t = random_vector(2 * n, 4);
    auto swap_halves = [n](std::vector<double> x)
    {
      std::rotate(x.begin(), x.begin() + n, x.end());
      return x;
    };
    const double a = relative_l2_loss(Tensor::from({2, n, 1}, p), Tensor::from({2, n, 1}, t), m).item();
    const double b = relative_l2_loss(Tensor::from({2, n, 1}, swap_halves(p)),
                                      Tensor::from({2, n, 1}, swap_halves(t)), m)
                         .item();
    CHECK(a == doctest::Approx(b).epsilon(1e-15));
  }

  TEST_CASE("loss gradient through a full model")
  {
    for (auto arch : {Architecture::Spon, Architecture::SponMg})
    {
      auto config = small_model(8, 5);
      config.arch = arch;
      config.compression = arch == Architecture::Spon ? 20 : 1;
      const auto model = build_model(config);
      const auto data = small_data(8, 2, 0, 6);
      const std::vector<std::size_t> order{0, 1};
      const auto f = stack_dofs(data.samples, order, false);
      const auto u = stack_dofs(data.samples, order, true);
      const auto m = mass_of(*model->out_space());
      std::vector<Tensor> ts;
      for (const auto &p : model->params())
      {
        ts.push_back(p.tensor);
      }
      const auto r = check_gradients([&] { return relative_l2_loss(model->forward(f), u, m); }, ts, 60, 7);
      CHECK(r.checked >= 20);
      CHECK(r.max_rel <= 1e-4);
    }
  }

  TEST_CASE("AdamW update rule")
  {
    std::vector<double> p{0.3, -0.2};
    AdamWState st;
    AdamWOptions no_decay;
    no_decay.weight_decay = 0.0;
    adamw_step(p, std::vector<double>{0.0, 0.0}, st, 1e-3, no_decay);
    CHECK(p == std::vector<double>{0.3, -0.2});

    // First step with g = 1: mhat = 1, vhat = 1, so the move is lr / (1 + eps).
    std::vector<double> q{1.0};
    AdamWState sq;
    adamw_step(q, std::vector<double>{1.0}, sq, 1e-3, no_decay);
    CHECK(std::abs((q[0] - 1.0) + 1e-3) <= 1e-6);
    CHECK(sq.step == 1);

    // Decay alone scales by 1 - lr * lambda.
    std::vector<double> d{2.0};
    AdamWState sd;
    AdamWOptions decay;
    decay.weight_decay = 0.1;
    adamw_step(d, std::vector<double>{0.0}, sd, 1e-2, decay);
    CHECK(d[0] == doctest::Approx(2.0 * (1.0 - 1e-2 * 0.1)).epsilon(1e-15));

    // Hand-rolled second step.
    std::vector<double> h{0.5};
    AdamWState sh;
    const AdamWOptions o;
    adamw_step(h, std::vector<double>{0.2}, sh, 0.01, o);
    adamw_step(h, std::vector<double>{-0.4}, sh, 0.01, o);
    double x = 0.5, m = 0.0, v = 0.0;
    for (int k = 1; k <= 2; k++)
    {
      const double g = k == 1 ? 0.2 : -0.4;
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      const double mh = m / (1.0 - std::pow(0.9, k)), vh = v / (1.0 - std::pow(0.999, k));
      x -= 0.01 * (mh / (std::sqrt(vh) + 1e-8) + 1e-4 * x);
    }
    CHECK(h[0] == doctest::Approx(x).epsilon(1e-14));
    CHECK_THROWS_AS(adamw_step(h, std::vector<double>{1.0, 2.0}, sh, 0.01, o), std::invalid_argument);
  }

  TEST_CASE("learning-rate schedule")
  {
    CHECK(lr_schedule(0, 500, 1e-4, 1e-6) == 1e-4);
    CHECK(lr_schedule(499, 500, 1e-4, 1e-6) == doctest::Approx(1e-6).epsilon(1e-14));
    CHECK(std::abs(lr_schedule(250, 501, 1e-4, 1e-6) - 1e-5) <= 1e-12);
    // Symmetric epochs around the middle multiply to the squared midpoint.
    CHECK(lr_schedule(249, 500, 1e-4, 1e-6) * lr_schedule(250, 500, 1e-4, 1e-6) ==
          doctest::Approx(1e-10).epsilon(1e-12));
    CHECK(lr_schedule(0, 1, 1e-4, 1e-6) == 1e-4);
    CHECK_THROWS_AS(lr_schedule(5, 5, 1e-4, 1e-6), std::out_of_range);
  }

  TEST_CASE("configuration checks")
  {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.epochs = 1;
    c.lr_end = 1e-3;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.lr_end = 1e-6;
    c.batch_size = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  }

  TEST_CASE("one epoch of one batch takes one step")
  {
    const auto model = build_model(small_model(4, 1));
    const auto data = small_data(4, 4, 0, 2);
    TrainConfig c;
    c.epochs = 1;
    c.batch_size = 4;
    const auto r = train(*model, data, c);
    CHECK(r.optimizer_steps == 1);
    CHECK(r.log.rows.size() == 1);
    c.batch_size = 3;
    CHECK(train(*build_model(small_model(4, 1)), data, c).optimizer_steps == 2);
  }

  TEST_CASE("training reduces the loss")
  {
    const auto model = build_model(small_model(16, 3));
    const auto data = small_data(16, 16, 4, 4);
    TrainConfig c;
    c.epochs = 50;
    c.lr_start = 1e-3;
    c.lr_end = 1e-4;
    const auto r = train(*model, data, c);
    REQUIRE(r.log.rows.size() == 50);
    CHECK(r.log.rows.back().train_rel_l2 < r.log.rows.front().train_rel_l2);
    CHECK(r.best_val <= r.log.rows.front().val_rel_l2);
    // The model keeps the best validation parameters.
    CHECK(evaluate(*model, data.split(Split::Val)) == doctest::Approx(r.best_val).epsilon(1e-12));
  }

  TEST_CASE("training is deterministic")
  {
    const auto data = small_data(4, 6, 2, 5);
    TrainConfig c;
    c.epochs = 3;
    c.batch_size = 2;
    c.seed = 9;
    std::string csv[2];
    std::vector<double> params[2];
    for (int run = 0; run < 2; run++)
    {
      const auto model = build_model(small_model(4, 8));
      auto r = train(*model, data, c);
      for (auto &row : r.log.rows)
      {
        row.seconds = 0.0;
      }
      std::ostringstream out;
      r.log.write_csv(out);
      csv[run] = out.str();
      for (const auto &p : model->params())
      {
        params[run].insert(params[run].end(), p.tensor.values().begin(), p.tensor.values().end());
      }
    }
    CHECK(csv[0] == csv[1]);
    CHECK(params[0] == params[1]);
    CHECK(csv[0].starts_with("epoch,lr,train_rel_l2,val_rel_l2,seconds\n0,"));
  }

  TEST_CASE("non-finite data aborts with a diagnostic")
  {
    auto data = small_data(4, 4, 0, 6);
    data.samples[1].f[3] = std::numeric_limits<double>::quiet_NaN();
    TrainConfig c;
    c.epochs = 2;
    CHECK_THROWS_AS(train(*build_model(small_model(4, 1)), data, c), NumericalError);
  }

  TEST_CASE("metrics log")
  {
    MetricsLog log;
    log.append({0, 1e-4, 0.5, 0.6, 1.0});
    log.append({1, 1e-5, 0.4, 0.5, 1.0});
    CHECK_THROWS_AS(log.append({1, 1e-5, 0.4, 0.5, 1.0}), std::logic_error);
    std::ostringstream out;
    log.write_csv(out);
    std::istringstream in(out.str());
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line))
    {
      lines++;
    }
    CHECK(lines == 3);
  }

  TEST_CASE("checkpoint round trip")
  {
    for (auto arch : {Architecture::Spon, Architecture::SponMg})
    {
      auto config = small_model(8, 11);
      config.arch = arch;
      config.degree_out = 2;
      const auto model = build_model(config);
      for (auto p : model->params())
      {
        auto v = p.tensor.mutable_values();
        const auto r = random_vector(v.size(), 12);
        std::copy(r.begin(), r.end(), v.begin());
      }
      const auto path = std::filesystem::temp_directory_path() / "sponet_test.ck";
      save_checkpoint(*model, path);
      const auto back = load_checkpoint(path);
      CHECK(back->config().to_map() == model->config().to_map());
      const auto f = random_tensor({2, model->in_space()->dim(), 1}, 13);
      CHECK(std::ranges::equal(back->forward(f).values(), model->forward(f).values()));

      const auto again = std::filesystem::temp_directory_path() / "sponet_test2.ck";
      save_checkpoint(*back, again);
      CHECK(slurp(path) == slurp(again));

      std::filesystem::resize_file(again, std::filesystem::file_size(again) - 3);
      CHECK_THROWS_AS(load_checkpoint(again), std::runtime_error);
      {
        std::ofstream out(again, std::ios::binary);
        out << "SPONDS1";
      }
      CHECK_THROWS_AS(load_checkpoint(again), std::runtime_error);
      std::filesystem::remove(path);
      std::filesystem::remove(again);
    }
  }
}
