#include <doctest.h>

#include <algorithm>
#include <random>

#include "gwa/anticipation.hpp"
#include "gwa/error.hpp"
#include "gwa/numerics/ops.hpp"
#include "support.hpp"

using namespace gwa;

namespace {

const std::vector<double> kGt{2, 1, 0.15, 0};
const std::vector<double> kPred{1.8, 1.2, 0.35, 0.2};

// Values drawn so that every filter boundary shows up regularly.
double boundary_gt(std::mt19937_64& rng, double h) {
  std::uniform_real_distribution<double> u(0.0, h);
  switch (rng() % 5) {
    case 0: return 0.0;
    case 1: return 0.1 * h;
    case 2: return h;
    default: return u(rng);
  }
}

double boundary_pred(std::mt19937_64& rng, double h) {
  std::uniform_real_distribution<double> u(0.0, h);
  switch (rng() % 4) {
    case 0: return 0.1 * h;
    case 1: return 0.9 * h;
    default: return u(rng);
  }
}

void same(const std::optional<double>& a, const std::optional<double>& b) {
  REQUIRE(a.has_value() == b.has_value());
  if (a) CHECK(std::abs(*a - *b) <= 1e-12);
}

std::vector<bool> random_mask(std::mt19937_64& rng, std::size_t frames) {
  std::vector<bool> mask(frames, false);
  const std::size_t segments = rng() % 4;
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t a = rng() % frames, len = 1 + rng() % 40;
    for (std::size_t t = a; t < std::min(frames, a + len); ++t) mask[t] = true;
  }
  return mask;
}

Occurrences mask_intervals(const std::vector<bool>& mask) {
  Occurrences out;
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (!mask[t]) continue;
    if (!out.empty() && out.back().end == static_cast<int>(t)) {
      out.back().end = static_cast<int>(t + 1);
    } else {
      out.push_back({static_cast<int>(t + 1), static_cast<int>(t + 1)});
    }
  }
  return out;
}

// Random T x (H*C) predictions and matching targets, one stage.
struct LossCase {
  Tensor pred;
  AnticipationTarget targets;
};

LossCase random_loss_case(std::mt19937_64& rng, std::size_t frames, std::size_t classes) {
  const std::vector<double> horizons{2, 3, 5};
  LossCase lc{Tensor({frames, horizons.size() * classes}), {horizons, {}}};
  for (std::size_t hi = 0; hi < horizons.size(); ++hi) {
    Tensor gt({frames, classes});
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t c = 0; c < classes; ++c) {
        gt(t, c) = boundary_gt(rng, horizons[hi]);
        lc.pred(t, hi * classes + c) = boundary_pred(rng, horizons[hi]);
      }
    }
    lc.targets.per_horizon.push_back(gt);
  }
  return lc;
}

std::vector<double> column(const Tensor& m, std::size_t col) {
  std::vector<double> out(m.rows());
  for (std::size_t t = 0; t < m.rows(); ++t) out[t] = m(t, col);
  return out;
}

}  // namespace

TEST_SUITE("targets") {
  TEST_CASE("clipping examples") {
    const Occurrences occ{{300, 360}};
    const auto r = remaining_time(occ, 420, 2.0);
    CHECK(r[180 - 1] == 2.0);
    CHECK(r[240 - 1] == 1.0);
    CHECK(r[330 - 1] == 0.0);
    CHECK(r[400 - 1] == 2.0);
    CHECK(r[299 - 1] == 1.0 / 60.0);
  }

  TEST_CASE("empty and full tracks") {
    for (double v : remaining_time({}, 30, 3.0)) CHECK(v == 3.0);
    for (double v : remaining_time({{1, 30}}, 30, 3.0)) CHECK(v == 0.0);
  }

  TEST_CASE("random tracks follow the scan oracle and the slope") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t T = 20 + rng() % 400;
      const double h = trial % 2 ? 2.0 : 0.5;
      const std::vector<bool> mask = random_mask(rng, T);
      const auto r = remaining_time(mask_intervals(mask), T, h);
      const auto oracle = test::naive_remaining(mask, h);
      REQUIRE(r.size() == T);
      for (std::size_t t = 0; t < T; ++t) {
        CHECK(std::abs(r[t] - oracle[t]) <= 1e-12);
        CHECK(r[t] >= 0.0);
        CHECK(r[t] <= h);
        if (t + 1 < T && r[t] > 0.0 && r[t] < h && r[t + 1] < h) {
          CHECK(std::abs((r[t] - r[t + 1]) - 1.0 / 60.0) <= 1e-12);
        }
      }
    }
  }

  TEST_CASE("make_targets lays out classes per horizon") {
    const OccurrenceTrack track{{{{10, 12}}, {}}};
    const AnticipationTarget t = make_targets(track, 20, {2, 5});
    REQUIRE(t.per_horizon.size() == 2);
    CHECK(t.per_horizon[0].shape() == Shape{20, 2});
    CHECK(t.per_horizon[1](0, 0) == 9.0 / 60.0);
    CHECK(t.per_horizon[1](0, 1) == 5.0);
    CHECK(t.per_horizon[0](10, 0) == 0.0);
  }

  TEST_CASE("invalid occurrences") {
    CHECK_THROWS_AS(remaining_time({{5, 10}, {8, 12}}, 20, 2), DataError);
    CHECK_THROWS_AS(remaining_time({{8, 12}, {1, 3}}, 20, 2), DataError);
    CHECK_THROWS_AS(remaining_time({{18, 21}}, 20, 2), DataError);
    CHECK_THROWS_AS(remaining_time({{0, 2}}, 20, 2), DataError);
  }
}

TEST_SUITE("metrics") {
  TEST_CASE("worked example") {
    CHECK(*in_mae(kPred, kGt, 2) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(*w_mae(kPred, kGt, 2) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(*p_mae(kPred, kGt, 2) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(*e_mae(kPred, kGt, 2) == doctest::Approx(0.2).epsilon(1e-12));
  }

  TEST_CASE("perfect predictions") {
    CHECK(*in_mae(kGt, kGt, 2) == 0.0);
    CHECK(*w_mae(kGt, kGt, 2) == 0.0);
    CHECK(*e_mae(kGt, kGt, 2) == 0.0);
    const std::vector<double> interior{1.0, 0.5};
    CHECK(*p_mae(interior, interior, 2) == 0.0);
  }

  TEST_CASE("empty filters are undefined") {
    const std::vector<double> all_h{2, 2, 2};
    CHECK_FALSE(in_mae(kPred, std::vector<double>{2, 2, 2, 2}, 2));
    CHECK_FALSE(w_mae(kPred, std::vector<double>{1, 1, 0.15, 0}, 2));
    CHECK_FALSE(p_mae(all_h, std::vector<double>{1, 1, 1}, 2));
    CHECK_FALSE(e_mae(kPred, std::vector<double>{2, 1, 0.5, 0}, 2));
  }

  TEST_CASE("boundary conventions") {
    const double h = 2.0;
    CHECK_FALSE(in_filter(0.0, h));
    CHECK_FALSE(in_filter(h, h));
    CHECK(in_filter(0.1 * h, h));
    CHECK(out_filter(h, h));
    CHECK_FALSE(out_filter(0.999 * h, h));
    CHECK_FALSE(p_filter(0.1 * h, h));
    CHECK_FALSE(p_filter(0.9 * h, h));
    CHECK(p_filter(0.5 * h, h));
    CHECK_FALSE(e_filter(0.0, h));
    CHECK(e_filter(0.1 * h, h));
    CHECK_FALSE(e_filter(0.11 * h, h));
  }

  TEST_CASE("naive loop oracle on random triples") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
      const double h = std::vector<double>{2, 3, 5}[rng() % 3];
      const std::size_t T = 1 + rng() % 50;
      std::vector<double> pred(T), gt(T);
      for (std::size_t t = 0; t < T; ++t) {
        gt[t] = boundary_gt(rng, h);
        pred[t] = boundary_pred(rng, h);
      }
      const test::NaiveMetrics m = test::naive_metrics(pred, gt, h);
      same(in_mae(pred, gt, h), m.in);
      same(w_mae(pred, gt, h), m.w);
      same(p_mae(pred, gt, h), m.p);
      same(e_mae(pred, gt, h), m.e);
    }
  }

  TEST_CASE("joint permutation leaves metrics unchanged") {
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 20; ++trial) {
      const double h = 3.0;
      const std::size_t T = 30;
      std::vector<std::size_t> order(T);
      std::vector<double> pred(T), gt(T), pp(T), pg(T);
      for (std::size_t t = 0; t < T; ++t) {
        gt[t] = boundary_gt(rng, h);
        pred[t] = boundary_pred(rng, h);
        order[t] = t;
      }
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t t = 0; t < T; ++t) {
        pp[t] = pred[order[t]];
        pg[t] = gt[order[t]];
      }
      same(in_mae(pp, pg, h), in_mae(pred, gt, h));
      same(w_mae(pp, pg, h), w_mae(pred, gt, h));
      same(p_mae(pp, pg, h), p_mae(pred, gt, h));
      same(e_mae(pp, pg, h), e_mae(pred, gt, h));
    }
  }
}

TEST_SUITE("loss") {
  TEST_CASE("weighted example") {
    const LossWeights w;
    CHECK(metric_loss(kPred, kGt, 2, w) == doctest::Approx(0.42).epsilon(1e-12));
    Tape tape;
    Var pred = tape.variable(Tensor({4, 1}, kPred));
    const AnticipationTarget t{{2.0}, {Tensor({4, 1}, kGt)}};
    CHECK(training_loss({pred}, t, w, {2.0}).value().item() == doctest::Approx(0.42).epsilon(1e-12));
  }

  TEST_CASE("perfect predictions give zero loss") {
    const AnticipationTarget t{{2.0}, {Tensor({4, 1}, kGt)}};
    CHECK(training_loss_value({Tensor({4, 1}, kGt)}, t, LossWeights{}, {2.0}) == 0.0);
  }

  TEST_CASE("frame weights reproduce the metric loss") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 100; ++trial) {
      const double h = 2.0 + static_cast<double>(rng() % 4);
      const std::size_t T = 1 + rng() % 40;
      std::vector<double> pred(T), gt(T);
      for (std::size_t t = 0; t < T; ++t) {
        gt[t] = boundary_gt(rng, h);
        pred[t] = boundary_pred(rng, h);
      }
      LossCounters counters;
      const auto w = frame_weights(pred, gt, h, LossWeights{}, &counters);
      double total = 0.0;
      for (std::size_t t = 0; t < T; ++t) total += w[t] * std::abs(pred[t] - gt[t]);
      CHECK(std::abs(total - metric_loss(pred, gt, h, LossWeights{})) <= 1e-12);
      CHECK(total >= 0.0);
      CHECK(counters.stray_frames == 0);
    }
  }

  TEST_CASE("loss is additive over enabled horizons") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t classes = 1 + rng() % 4;
      const LossCase lc = random_loss_case(rng, 40, classes);
      const LossWeights w;
      const double all = training_loss_value({lc.pred}, lc.targets, w, {2, 3, 5});
      const double without5 = training_loss_value({lc.pred}, lc.targets, w, {2, 3});
      double partial5 = 0.0;
      for (std::size_t c = 0; c < classes; ++c) {
        partial5 += metric_loss(column(lc.pred, 2 * classes + c), column(lc.targets.per_horizon[2], c), 5, w);
      }
      CHECK(std::abs((all - without5) - partial5) <= 1e-9);
      const double only2 = training_loss_value({lc.pred}, lc.targets, w, {2});
      double partial2 = 0.0;
      for (std::size_t c = 0; c < classes; ++c) {
        partial2 += metric_loss(column(lc.pred, c), column(lc.targets.per_horizon[0], c), 2, w);
      }
      CHECK(std::abs(only2 - partial2) <= 1e-9);
    }
  }

  TEST_CASE("stages add up") {
    std::mt19937_64 rng(43);
    const LossCase a = random_loss_case(rng, 25, 2);
    LossCase b = random_loss_case(rng, 25, 2);
    b.targets = a.targets;
    const LossWeights w;
    const double joint = training_loss_value({a.pred, b.pred}, a.targets, w, {2, 3, 5});
    const double split = training_loss_value({a.pred}, a.targets, w, {2, 3, 5}) +
                         training_loss_value({b.pred}, a.targets, w, {2, 3, 5});
    CHECK(joint == doctest::Approx(split).epsilon(1e-12));
  }

  TEST_CASE("gradient flows only into enabled slices") {
    std::mt19937_64 rng(44);
    const LossCase lc = random_loss_case(rng, 30, 2);
    Tape tape;
    Var pred = tape.variable(lc.pred);
    tape.backward(training_loss({pred}, lc.targets, LossWeights{}, {3}));
    const Tensor g = tape.grad(pred);
    for (std::size_t t = 0; t < 30; ++t) {
      for (std::size_t c = 0; c < 2; ++c) {
        CHECK(g(t, c) == 0.0);
        CHECK(g(t, 4 + c) == 0.0);
      }
    }
  }

  TEST_CASE("no stray frames with undefined terms") {
    const AnticipationTarget t{{2.0}, {Tensor({3, 1}, {2, 2, 2})}};
    LossCounters counters;
    Tape tape;
    Var pred = tape.variable(Tensor({3, 1}, {1.0, 1.5, 2.0 * 0.95}));
    Var loss = training_loss({pred}, t, LossWeights{}, {2.0}, &counters);
    // in, w and e are undefined; only pMAE remains.
    CHECK(counters.undefined_terms == 3);
    CHECK(counters.stray_frames == 0);
    CHECK(loss.value().item() == doctest::Approx(0.8 * (1.0 + 0.5) / 2.0));
  }

  TEST_CASE("non-finite predictions") {
    const AnticipationTarget t{{2.0}, {Tensor({2, 1}, {1, 2})}};
    Tape tape;
    Tensor p({2, 1}, {1.0, 0.0});
    p[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(training_loss({tape.constant(p)}, t, LossWeights{}, {2.0}), NumericError);
  }
}

TEST_SUITE("report") {
  TEST_CASE("pools frames across videos") {
    std::mt19937_64 rng(51);
    const std::vector<double> horizons{2, 5};
    std::vector<std::vector<Tensor>> preds(2);
    std::vector<AnticipationTarget> targets(2);
    std::vector<double> pooled_pred, pooled_gt;
    for (std::size_t v = 0; v < 2; ++v) {
      targets[v].horizons = horizons;
      for (double h : horizons) {
        Tensor p({10 + 5 * v, 1}), g({10 + 5 * v, 1});
        for (std::size_t t = 0; t < p.rows(); ++t) {
          g[t] = boundary_gt(rng, h);
          p[t] = boundary_pred(rng, h);
          if (h == 2) {
            pooled_pred.push_back(p[t]);
            pooled_gt.push_back(g[t]);
          }
        }
        preds[v].push_back(p);
        targets[v].per_horizon.push_back(g);
      }
    }
    const MetricReport r = compute_report("instrument", {"Bipolar"}, horizons, preds, targets);
    const auto m = test::naive_metrics(pooled_pred, pooled_gt, 2);
    same(r.value("Bipolar", 2, Metric::kIn), m.in);
    same(r.value("Bipolar", 2, Metric::kE), m.e);
    same(r.mean(2, Metric::kIn), m.in);
    const std::string csv = r.to_csv();
    CHECK(csv.rfind("task,class,horizon,metric,value,n_frames\n", 0) == 0);
  }

  TEST_CASE("class mean skips undefined entries") {
    const std::vector<double> horizons{2};
    // Class 0 never reaches its horizon, class 1 is always out of it.
    Tensor gt = Tensor::matrix({{1, 2}, {0.5, 2}});
    Tensor pred = Tensor::matrix({{1.5, 1}, {0.5, 1}});
    const MetricReport r = compute_report("instrument", {"A", "B"}, horizons, {{pred}}, {{horizons, {gt}}});
    CHECK_FALSE(r.value("B", 2, Metric::kIn));
    CHECK(*r.mean(2, Metric::kIn) == doctest::Approx(0.25));
    CHECK(r.to_csv().find("instrument,B,2,inMAE,NA,0") != std::string::npos);
  }
}
