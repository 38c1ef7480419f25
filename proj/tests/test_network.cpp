#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gwa/error.hpp"
#include "gwa/network.hpp"
#include "gwa/numerics/ops.hpp"
#include "gwa/streaming.hpp"
#include "support.hpp"

using namespace gwa;

namespace {

GraphSequence prefix(const GraphSequence& s, std::size_t frames) {
  const std::size_t row = s.nodes() * kNodeFeatures;
  std::vector<double> data(s.features.data().begin(), s.features.data().begin() + frames * row);
  return GraphSequence{Tensor({frames, s.nodes(), kNodeFeatures}, std::move(data))};
}

Tensor first_rows(const Tensor& t, std::size_t frames) {
  Shape shape = t.shape();
  const std::size_t row = t.size() / shape[0];
  shape[0] = frames;
  return Tensor(shape, std::vector<double>(t.data().begin(), t.data().begin() + frames * row));
}

}  // namespace

TEST_SUITE("graph convolution") {
  TEST_CASE("identity adjacency and weight pass features through") {
    const NodeRoster roster = test::roster_of(3);
    GraphTopology g = build_topology(roster, TopologyMode::kFullyConnected, {});
    g.normalized = normalize_adjacency(Tensor({3, 3}));
    std::mt19937_64 rng(1);
    const Tensor f = test::random_tensor({2, 3, 4}, rng);
    Tape tape;
    Var out = gc_forward(tape.constant(f), g, tape.constant(Tensor::identity(4)), std::nullopt, false);
    CHECK(out.value() == f);
  }

  TEST_CASE("two node complete graph averages") {
    const GraphTopology g = build_topology(test::roster_of(2), TopologyMode::kFullyConnected, {});
    Tape tape;
    Var out = gc_forward(tape.constant(Tensor({1, 2, 1}, {2, 4})), g, tape.constant(Tensor::matrix({{1}})),
                         std::nullopt, false);
    CHECK(out.value() == Tensor({1, 2, 1}, {3, 3}));
  }

  TEST_CASE("identical frames give identical outputs") {
    const GraphTopology g = build_topology(NodeRoster::cholec80(), TopologyMode::kPriorKnowledge);
    std::mt19937_64 rng(2);
    Tensor f = test::random_tensor({2, 8, 4}, rng);
    for (std::size_t i = 0; i < 32; ++i) f[32 + i] = f[i];
    Tape tape;
    Var out = gc_forward(tape.constant(f), g, tape.constant(test::random_tensor({4, 6}, rng)),
                         tape.constant(test::random_tensor({6}, rng)), true);
    const Tensor& v = out.value();
    for (std::size_t i = 0; i < 48; ++i) CHECK(v[i] == v[48 + i]);
  }

  TEST_CASE("node count mismatch") {
    const GraphTopology g = build_topology(test::roster_of(3), TopologyMode::kFullyConnected, {});
    Tape tape;
    CHECK_THROWS_AS(gc_forward(tape.constant(Tensor({1, 2, 4})), g, tape.constant(Tensor({4, 4})), std::nullopt, false),
                    DimensionError);
  }

  TEST_CASE("flatten layout") {
    Tape tape;
    Var flat = flatten_nodes(tape.constant(Tensor({1, 2, 2}, {1, 2, 3, 4})));
    CHECK(flat.value() == Tensor::matrix({{1, 2, 3, 4}}));
    CHECK(unflatten_nodes(flat, 2).value() == Tensor({1, 2, 2}, {1, 2, 3, 4}));
    CHECK(flatten_nodes(tape.constant(Tensor({3, 2, 2}))).value() == Tensor({3, 4}));
  }
}

TEST_SUITE("temporal stage") {
  TEST_CASE("zero kernels leave the projected input") {
    ModelConfig c = test::small_config();
    ModelParams p = init_params(c, 3);
    for (auto& [name, t] : p.tensors) {
      if (name.rfind("tcn.0.layer.", 0) == 0) t.fill(0.0);
    }
    std::mt19937_64 rng(4);
    const Tensor x = test::random_tensor({7, c.flat_width()}, rng);
    Tape tape;
    const ParamVars vars = bind_parameters(tape, p.tensors, false);
    Var out = tcn_stage_forward(tape.constant(x), vars, 0, c);
    Var projected = ops::linear(tape.constant(x), vars.at("tcn.0.in.weight"), vars.at("tcn.0.in.bias"));
    CHECK(out.value() == projected.value());
  }

  TEST_CASE("receptive field spans the full dilation stack") {
    ModelConfig c = test::small_config();
    ModelParams p = init_params(c, 5);
    // Nonnegative weights keep every ReLU on the path open.
    for (auto& [name, t] : p.tensors)
      for (double& v : t.data()) v = std::abs(v);
    Tape tape;
    const ParamVars vars = bind_parameters(tape, p.tensors, false);
    // Layer l reaches back 2 * 2^l frames: 2 * (2^14 - 1) in total.
    const std::size_t reach = 2 * ((std::size_t{1} << c.tcn_layers) - 1);
    const std::size_t T = reach + 2;
    Tensor x({T, c.flat_width()});
    const Tensor base = tcn_stage_forward(tape.constant(x), vars, 0, c).value();
    x(0, 0) = 1.0;
    const Tensor moved = tcn_stage_forward(tape.constant(x), vars, 0, c).value();
    bool last_differs = false, beyond_same = true;
    for (std::size_t k = 0; k < c.tcn_channels; ++k) {
      last_differs |= moved(reach, k) != base(reach, k);
      beyond_same &= moved(reach + 1, k) == base(reach + 1, k);
    }
    CHECK(last_differs);
    CHECK(beyond_same);
  }

  TEST_CASE("empty input") {
    ModelConfig c = test::small_config();
    const ModelParams p = init_params(c, 5);
    Tape tape;
    const ParamVars vars = bind_parameters(tape, p.tensors, false);
    CHECK_THROWS_AS(tcn_stage_forward(tape.constant(Tensor({0, c.flat_width()})), vars, 0, c), DataError);
  }
}

TEST_SUITE("head") {
  TEST_CASE("three horizons by five classes") {
    Tape tape;
    std::mt19937_64 rng(6);
    Var y = head_forward(tape.constant(test::random_tensor({4, 8}, rng)), tape.constant(test::random_tensor({8, 15}, rng)),
                         tape.constant(Tensor({15})), {2, 3, 5}, 5);
    CHECK(y.shape() == Shape{4, 15});
    CHECK_THROWS_AS(head_forward(tape.constant(Tensor({4, 8})), tape.constant(Tensor({8, 14})),
                                 tape.constant(Tensor({14})), {2, 3, 5}, 5),
                    DimensionError);
  }

  TEST_CASE("zero weights predict half the horizon") {
    Tape tape;
    Var y = head_forward(tape.constant(Tensor({2, 3}, 1.0)), tape.constant(Tensor({3, 6})), tape.constant(Tensor({6})),
                         {2, 5}, 3);
    for (std::size_t t = 0; t < 2; ++t) {
      for (std::size_t c = 0; c < 3; ++c) {
        CHECK(y.value()(t, c) == 1.0);
        CHECK(y.value()(t, 3 + c) == 2.5);
      }
    }
  }
}

TEST_SUITE("model") {
  TEST_CASE("default configuration output contract") {
    const ModelConfig c;
    const ModelParams p = init_params(c, 1);
    const GraphTopology g = topology_for(c, NodeRoster::cholec80());
    std::mt19937_64 rng(7);
    const GraphSequence s = test::random_sequence(25, 8, rng);
    const auto preds = predict(s, p, g);
    REQUIRE(preds.size() == 2);
    for (const Tensor& y : preds) {
      REQUIRE(y.shape() == Shape{25, 3, 5});
      for (std::size_t t = 0; t < 25; ++t)
        for (std::size_t hi = 0; hi < 3; ++hi)
          for (std::size_t k = 0; k < 5; ++k) {
            CHECK(y(t, hi, k) > 0.0);
            CHECK(y(t, hi, k) < c.horizons[hi]);
          }
    }
  }

  TEST_CASE("prefix predictions equal the full-sequence prefix") {
    const ModelConfig c = test::small_config();
    const ModelParams p = init_params(c, 8);
    const GraphTopology g = topology_for(c, test::roster_of(4));
    std::mt19937_64 rng(9);
    const GraphSequence s = test::random_sequence(40, 4, rng);
    const auto full = predict(s, p, g);
    for (std::size_t t : {1, 2, 7, 23, 39}) {
      const auto part = predict(prefix(s, t), p, g);
      for (std::size_t st = 0; st < full.size(); ++st) CHECK(part[st] == first_rows(full[st], t));
    }
  }

  TEST_CASE("variants without graph or temporal stages") {
    const GraphTopology g = topology_for(test::small_config(), test::roster_of(4));
    std::mt19937_64 rng(10);
    const GraphSequence s = test::random_sequence(12, 4, rng);
    for (int variant = 0; variant < 3; ++variant) {
      ModelConfig c = test::small_config();
      c.use_gc = variant != 0;
      c.use_tcn = variant != 1;
      c.feed_predictions = variant == 2;
      const auto preds = predict(s, init_params(c, 2), g);
      CHECK(preds.size() == c.stage_count());
      CHECK(preds.back().shape() == Shape{12, 3, 2});
    }
  }

  TEST_CASE("parameter count formula matches construction") {
    std::vector<ModelConfig> configs{ModelConfig{}, test::small_config(), test::small_config(5, 6, 3)};
    for (ModelConfig c : std::vector<ModelConfig>(configs)) {
      c.use_gc = false;
      configs.push_back(c);
      c.use_tcn = false;
      configs.push_back(c);
      c.use_tcn = true;
      c.feed_predictions = true;
      c.tcn_stages = 3;
      configs.push_back(c);
    }
    for (const ModelConfig& c : configs) CHECK(parameter_count(c) == init_params(c, 0).scalar_count());
  }

  TEST_CASE("seeded initialisation and prediction are deterministic") {
    const ModelConfig c = test::small_config();
    CHECK(init_params(c, 4) == init_params(c, 4));
    CHECK_FALSE(init_params(c, 4) == init_params(c, 5));
    const GraphTopology g = topology_for(c, test::roster_of(4));
    std::mt19937_64 rng(11);
    const GraphSequence s = test::random_sequence(15, 4, rng);
    CHECK(predict(s, init_params(c, 4), g) == predict(s, init_params(c, 4), g));
  }

  TEST_CASE("fallback horizons copy a clipped enabled horizon") {
    std::mt19937_64 rng(12);
    const Tensor before = test::random_tensor({3, 6}, rng, 0.0, 5.0);
    ModelConfig c = test::small_config();

    // Only the largest horizon: the others clip it.
    c.enabled_horizons = {5.0};
    Tensor y = before;
    apply_horizon_fallback(y, c);
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t k = 0; k < 2; ++k) {
        CHECK(y(t, k) == std::min(before(t, 4 + k), 2.0));
        CHECK(y(t, 2 + k) == std::min(before(t, 4 + k), 3.0));
        CHECK(y(t, 4 + k) == before(t, 4 + k));
      }

    // Only the smallest: nothing above it, so it is the source for all.
    c.enabled_horizons = {2.0};
    y = before;
    apply_horizon_fallback(y, c);
    CHECK(fallback_source(c, 1) == 0);
    CHECK(fallback_source(c, 2) == 0);
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t k = 0; k < 2; ++k) {
        CHECK(y(t, k) == before(t, k));
        CHECK(y(t, 2 + k) == std::min(before(t, k), 3.0));
        CHECK(y(t, 4 + k) == std::min(before(t, k), 5.0));
      }

    c.enabled_horizons = {3.0};
    CHECK(fallback_source(c, 0) == 1);
    CHECK(fallback_source(c, 2) == 1);
    c.enabled_horizons = {};
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("config validation") {
    ModelConfig c;
    c.horizons = {3, 2};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ModelConfig{};
    c.enabled_horizons = {4};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = ModelConfig{};
    c.kernel_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }
}

TEST_SUITE("streaming") {
  TEST_CASE("frame by frame equals the batch pass") {
    for (int variant = 0; variant < 4; ++variant) {
      ModelConfig c = test::small_config();
      c.use_gc = variant != 1;
      c.use_tcn = variant != 2;
      c.feed_predictions = variant == 3;
      if (variant == 3) c.enabled_horizons = {2.0, 3.0};
      const ModelParams p = init_params(c, 13);
      const GraphTopology g = topology_for(c, test::roster_of(4));
      std::mt19937_64 rng(14 + variant);
      const GraphSequence s = test::random_sequence(60, 4, rng);
      const Tensor batch = predict(s, p, g).back();
      StreamingModel model(p, g);
      const std::size_t row = 4 * kNodeFeatures;
      for (std::size_t t = 0; t < 60; ++t) {
        auto out = model.step(s.features.data().subspan(t * row, row));
        REQUIRE(out.size() == 6);
        for (std::size_t i = 0; i < 6; ++i) CHECK(out[i] == batch[t * 6 + i]);
      }
      CHECK(model.frames_seen() == 60);
      model.reset();
      auto again = model.step(s.features.data().subspan(0, row));
      CHECK(again[0] == batch[0]);
    }
  }

  TEST_CASE("default widths on the cholec80 roster") {
    const ModelConfig c;
    const ModelParams p = init_params(c, 15);
    const GraphTopology g = topology_for(c, NodeRoster::cholec80());
    std::mt19937_64 rng(16);
    const GraphSequence s = test::random_sequence(30, 8, rng);
    const Tensor batch = predict(s, p, g).back();
    StreamingModel model(p, g);
    for (std::size_t t = 0; t < 30; ++t) {
      auto out = model.step(s.features.data().subspan(t * 32, 32));
      CHECK(std::equal(out.begin(), out.end(), batch.data().begin() + t * 15));
    }
  }

  TEST_CASE("wrong frame size") {
    const ModelConfig c = test::small_config();
    const ModelParams p = init_params(c, 1);
    StreamingModel model(p, topology_for(c, test::roster_of(4)));
    std::vector<double> frame(5);
    CHECK_THROWS_AS(model.step(frame), DimensionError);
  }
}
