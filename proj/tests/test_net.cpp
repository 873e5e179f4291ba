#include <doctest.h>

#include <cmath>
#include <sstream>

#include "declab/errors.hpp"
#include "declab/net.hpp"
#include "oracles.hpp"

using namespace declab;
using net::AdamConfig;
using net::AdamState;
using net::ForwardCache;
using net::Mlp;
using net::MlpSpec;

namespace {

// Independent straight-line evaluation of the same parameter layout
// (per layer: row-major W then b; SiLU on hidden layers).
std::vector<double> direct_eval(const MlpSpec& spec,
                                const std::vector<double>& params,
                                const std::vector<double>& x) {
  std::vector<double> a = x;
  size_t off = 0;
  for (int l = 0; l + 1 < static_cast<int>(spec.dims.size()); ++l) {
    const int in = spec.dims[static_cast<size_t>(l)];
    const int out = spec.dims[static_cast<size_t>(l) + 1];
    std::vector<double> z(static_cast<size_t>(out));
    for (int o = 0; o < out; ++o) {
      double acc = params[off + static_cast<size_t>(out) * in + o];  // bias
      for (int i = 0; i < in; ++i) {
        acc += params[off + static_cast<size_t>(o) * in + i] * a[static_cast<size_t>(i)];
      }
      z[static_cast<size_t>(o)] = acc;
    }
    off += static_cast<size_t>(out) * in + out;
    if (l + 2 < static_cast<int>(spec.dims.size())) {
      for (double& v : z) v = v / (1.0 + std::exp(-v));
    }
    a = std::move(z);
  }
  return a;
}

std::vector<double> random_vector(rng::Stream& stream, int n, double scale = 1.0) {
  std::vector<double> v(static_cast<size_t>(n));
  for (double& x : v) x = scale * stream.next_gaussian();
  return v;
}

}  // namespace

TEST_SUITE_BEGIN("net");

TEST_CASE("zero parameters give zero output") {
  MlpSpec spec;
  spec.dims = {3, 4, 2};
  Mlp mlp(spec, std::vector<double>(Mlp::param_count_for(spec), 0.0));
  auto y = mlp.forward(std::vector<double>{1.0, -2.0, 3.0});
  for (double v : y) CHECK(v == 0.0);
}

TEST_CASE("eval-mode forward is deterministic and matches a direct evaluation") {
  auto init = rng::Root(3).stream("init");
  MlpSpec spec;
  spec.dims = {4, 8, 8, 3};
  spec.dropout = 0.1;  // must not matter in eval mode
  Mlp mlp(spec, init);
  auto data = rng::Root(4).stream("data");
  for (int trial = 0; trial < 20; ++trial) {
    auto x = random_vector(data, 4);
    auto y1 = mlp.forward(x);
    auto y2 = mlp.forward(x);
    CHECK(y1 == y2);
    auto direct = direct_eval(spec, mlp.params(), x);
    REQUIRE(direct.size() == y1.size());
    for (size_t i = 0; i < y1.size(); ++i) {
      CHECK(std::abs(y1[i] - direct[i]) < 1e-12);
    }
  }
}

TEST_CASE("dimension mismatch is rejected") {
  auto init = rng::Root(5).stream("init");
  Mlp mlp(MlpSpec{{3, 2}, 0.0}, init);
  CHECK_THROWS_AS(mlp.forward(std::vector<double>{1.0, 2.0}),
                  std::invalid_argument);
}

TEST_CASE("backward: zero upstream gradient, one-layer closed form") {
  auto init = rng::Root(6).stream("init");
  MlpSpec spec;
  spec.dims = {3, 5, 2};
  Mlp mlp(spec, init);
  ForwardCache cache;
  auto x = std::vector<double>{0.5, -1.0, 2.0};
  mlp.forward(x, cache, false);
  std::vector<double> grads(mlp.param_count(), 0.0);
  mlp.backward(cache, std::vector<double>{0.0, 0.0}, grads);
  for (double g : grads) CHECK(g == 0.0);

  // single linear layer: dW = outer(gout, x), db = gout
  MlpSpec lin;
  lin.dims = {3, 2};
  Mlp linear(lin, init);
  ForwardCache lin_cache;
  linear.forward(x, lin_cache, false);
  std::vector<double> lin_grads(linear.param_count(), 0.0);
  std::vector<double> gout = {2.0, -1.5};
  linear.backward(lin_cache, gout, lin_grads);
  for (int o = 0; o < 2; ++o) {
    for (int i = 0; i < 3; ++i) {
      CHECK(lin_grads[static_cast<size_t>(o) * 3 + i] ==
            doctest::Approx(gout[static_cast<size_t>(o)] * x[static_cast<size_t>(i)])
                .epsilon(1e-14));
    }
    CHECK(lin_grads[6 + static_cast<size_t>(o)] ==
          doctest::Approx(gout[static_cast<size_t>(o)]).epsilon(1e-14));
  }
}

TEST_CASE("backward matches central finite differences on random nets") {
  auto init = rng::Root(7).stream("init");
  auto data = rng::Root(8).stream("data");
  for (int trial = 0; trial < 10; ++trial) {
    MlpSpec spec;
    const int depth = 2 + static_cast<int>(data.next_below(2));
    spec.dims.push_back(1 + static_cast<int>(data.next_below(5)));
    for (int l = 0; l < depth; ++l) {
      spec.dims.push_back(1 + static_cast<int>(data.next_below(6)));
    }
    Mlp mlp(spec, init);
    auto x = random_vector(data, spec.input_dim());
    auto upstream = random_vector(data, spec.output_dim());

    ForwardCache cache;
    mlp.forward(x, cache, false);
    std::vector<double> analytic(mlp.param_count(), 0.0);
    mlp.backward(cache, upstream, analytic);

    auto loss = [&](const std::vector<double>& params) {
      auto y = direct_eval(spec, params, x);
      double value = 0.0;
      for (size_t i = 0; i < y.size(); ++i) value += upstream[i] * y[i];
      return value;
    };
    auto numeric = oracles::finite_difference_gradient(mlp.params(), loss);
    for (size_t i = 0; i < analytic.size(); ++i) {
      const double scale = std::max(std::abs(numeric[i]), 1e-7);
      CHECK(std::abs(analytic[i] - numeric[i]) / scale < 1e-4);
    }
  }
}

TEST_CASE("input gradient flows through the whole stack") {
  auto init = rng::Root(9).stream("init");
  MlpSpec spec;
  spec.dims = {3, 6, 2};
  Mlp mlp(spec, init);
  auto x = std::vector<double>{0.4, -0.2, 1.1};
  std::vector<double> upstream = {1.0, -2.0};

  ForwardCache cache;
  mlp.forward(x, cache, false);
  std::vector<double> param_grads(mlp.param_count(), 0.0);
  std::vector<double> input_grad;
  mlp.backward(cache, upstream, param_grads, &input_grad);

  auto loss_of_input = [&](const std::vector<double>& xin) {
    auto y = direct_eval(spec, mlp.params(), xin);
    return upstream[0] * y[0] + upstream[1] * y[1];
  };
  auto numeric = oracles::finite_difference_gradient(x, loss_of_input);
  REQUIRE(input_grad.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(input_grad[i] - numeric[i]) < 1e-6);
  }
}

TEST_CASE("train-mode dropout preserves expectation and eval ignores rng") {
  auto init = rng::Root(10).stream("init");
  MlpSpec spec;
  spec.dims = {2, 1};  // identity-free single layer; dropout never applies to output
  Mlp output_only(spec, init);
  // hidden-layer case
  MlpSpec hidden_spec;
  hidden_spec.dims = {2, 4, 1};
  hidden_spec.dropout = 0.25;
  Mlp mlp(hidden_spec, init);
  std::vector<double> x = {1.0, -0.5};
  const double eval_value = mlp.forward(x)[0];

  auto mask_stream = rng::Root(11).stream("masks");
  const int n = 10000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    ForwardCache cache;
    const double y = mlp.forward(x, cache, true, &mask_stream)[0];
    sum += y;
    sum_sq += y * y;
  }
  const double mean = sum / n;
  const double sd_of_mean =
      std::sqrt((sum_sq / n - mean * mean) / static_cast<double>(n));
  CHECK(std::abs(mean - eval_value) < 3.0 * sd_of_mean + 1e-12);

  CHECK_THROWS_AS(
      [&] {
        ForwardCache cache;
        mlp.forward(x, cache, true, nullptr);
      }(),
      std::invalid_argument);
}

TEST_CASE("adam: zero gradients, first-step magnitude, epoch decay") {
  AdamConfig config;
  config.learning_rate = 0.05;
  AdamState opt(2, config);
  std::vector<double> params = {1.0, -2.0};
  opt.step(params, std::vector<double>{0.0, 0.0});
  CHECK(params == std::vector<double>{1.0, -2.0});
  CHECK(opt.step_count() == 1);

  // constant gradient g: first step is -lr * g / (|g| + eps)
  AdamState single(1, config);
  std::vector<double> p = {0.3};
  single.step(p, std::vector<double>{4.0});
  const double expected = 0.3 - 0.05 * 4.0 / (4.0 + config.epsilon);
  CHECK(p[0] == doctest::Approx(expected).epsilon(1e-12));

  AdamConfig decay_config;
  decay_config.learning_rate = 1.0;
  decay_config.lr_decay = 0.9;
  AdamState decayed(1, decay_config);
  decayed.advance_epoch();
  decayed.advance_epoch();
  decayed.advance_epoch();
  CHECK(decayed.current_lr() == doctest::Approx(0.9 * 0.9 * 0.9).epsilon(1e-12));
}

TEST_CASE("adam rejects non-finite gradients") {
  AdamState opt(1, AdamConfig{});
  std::vector<double> params = {0.0};
  CHECK_THROWS_AS(opt.step(params, std::vector<double>{std::nan("")}),
                  TrainingDivergedError);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  auto init = rng::Root(12).stream("init");
  MlpSpec spec;
  spec.dims = {3, 7, 4};
  spec.dropout = 0.1;
  Mlp mlp(spec, init);
  AdamConfig config;
  config.learning_rate = 0.123;
  AdamState opt(mlp.param_count(), config);
  // run a few updates so the moments are non-trivial
  auto gradient_stream = rng::Root(13).stream("grads");
  for (int i = 0; i < 5; ++i) {
    auto grads = random_vector(gradient_stream, static_cast<int>(mlp.param_count()));
    opt.step(mlp.params(), grads);
  }
  opt.advance_epoch();

  std::stringstream buffer;
  std::vector<net::CheckpointEntry> entries = {{"trunk", &mlp, &opt}};
  net::save_checkpoint(buffer, entries, R"({"note":"round-trip"})");

  auto loaded = net::load_checkpoint(buffer);
  REQUIRE(loaded.nets.size() == 1);
  const auto& n = loaded.nets[0];
  CHECK(n.name == "trunk");
  CHECK(n.spec == spec);
  CHECK(n.params == mlp.params());
  CHECK(n.first_moment == opt.first_moment());
  CHECK(n.second_moment == opt.second_moment());
  CHECK(n.steps == opt.step_count());
  CHECK(n.epochs == 1);
  CHECK(n.optimizer_config.learning_rate == config.learning_rate);
  CHECK(loaded.extra.find("round-trip") != std::string::npos);

  // byte-identical when saved twice
  std::stringstream again;
  net::save_checkpoint(again, entries, R"({"note":"round-trip"})");
  CHECK(buffer.str() == again.str());
}

TEST_SUITE_END();
