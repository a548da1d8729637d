#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "andikit/autodiff.hpp"
#include "oracles.hpp"

using namespace andikit::ad;

namespace {

TensorPtr<double> param(Shape s, std::uint64_t seed, double scale = 1.0) {
  auto t = make_tensor<double>(std::move(s));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  for (auto& v : t->value) v = n(rng);
  t->requires_grad = true;
  t->grad.assign(t->size(), 0.0);
  return t;
}

TensorPtr<double> constant(Shape s, std::vector<double> v) { return make_tensor<double>(std::move(s), std::move(v)); }

// Weighted sum with fixed random weights so every output element matters.
TensorPtr<double> probe_loss(Tape<double>& tape, const TensorPtr<double>& y, std::uint64_t seed) {
  auto w = make_tensor<double>(Shape{y->size()});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  for (auto& v : w->value) v = n(rng);
  auto flat = tape.output(Shape{1}, {y.get()});
  double s = 0.0;
  for (std::size_t i = 0; i < y->size(); ++i) s += y->value[i] * w->value[i];
  flat->value[0] = s;
  if (tape.recording() && flat->requires_grad) {
    auto wv = w->value;
    tape.record([y, flat, wv] {
      for (std::size_t i = 0; i < wv.size(); ++i) y->grad[i] += flat->grad[0] * wv[i];
    });
  }
  return flat;
}

void expect_pass(const GradCheckResult& r) {
  EXPECT_TRUE(r.passed) << "worst " << r.worst_rel_error << " at " << r.worst_param << "[" << r.worst_index
                        << "] analytic " << r.worst_analytic << " numeric " << r.worst_numeric;
  EXPECT_GT(r.checked, 0u);
}

}  // namespace

TEST(Conv1d, HandArithmetic) {
  Tape<double> tape(false);
  auto x = constant({1, 1, 3}, {1, 2, 3});
  auto w = constant({1, 1, 3}, {1, 0, -1});
  auto y = conv1d(tape, x, w, 1, 0);
  ASSERT_EQ(y->shape, (Shape{1, 1, 1}));
  EXPECT_DOUBLE_EQ(y->value[0], -2.0);
}

TEST(Conv1d, IdentityKernel) {
  Tape<double> tape(false);
  auto x = constant({1, 1, 5}, {3, 1, 4, 1, 5});
  auto w = constant({1, 1, 3}, {0, 1, 0});
  auto y = conv1d(tape, x, w, 1, 1);
  EXPECT_EQ(y->value, x->value);
}

TEST(Conv1d, OutputLength) {
  EXPECT_EQ(conv_output_length(1000, 35, 2, 17), 500u);
  Tape<double> tape(false);
  auto x = constant({1, 1, 4}, {1, 2, 3, 4});
  auto w = constant({1, 2, 3}, std::vector<double>(6, 1.0));
  EXPECT_THROW(conv1d(tape, x, w, 1, 0), std::invalid_argument);
}

TEST(Conv1d, MatchesDirectLoop) {
  Tape<double> tape(false);
  const std::size_t n = 3, ci = 4, len = 23, co = 5, k = 7;
  for (std::size_t stride : {1u, 2u, 3u}) {
    for (std::size_t pad : {0u, 3u}) {
      auto x = param({n, ci, len}, 1);
      auto w = param({co, ci, k}, 2);
      auto y = conv1d(tape, x, w, stride, pad);
      const auto ref = oracle::conv1d(x->value, n, ci, len, w->value, co, k, stride, pad);
      ASSERT_EQ(y->value.size(), ref.size());
      for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y->value[i], ref[i], 1e-12);
    }
  }
}

TEST(BatchNorm, ConstantInputGivesZeros) {
  Tape<double> tape(false);
  BatchNorm<double> bn(2);
  auto x = constant({2, 2, 3}, std::vector<double>(12, 4.0));
  auto y = batchnorm1d(tape, x, bn, Mode::Train);
  for (double v : y->value) EXPECT_EQ(v, 0.0);
}

TEST(BatchNorm, NormalizedIsFixedPoint) {
  Tape<double> tape(false);
  BatchNorm<double> bn(1);
  auto x = constant({1, 1, 4}, {-1, 1, -1, 1});
  auto y = batchnorm1d(tape, x, bn, Mode::Train);
  const double f = 1.0 / std::sqrt(1.0 + 1e-5);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y->value[i], x->value[i] * f, 1e-15);
}

TEST(BatchNorm, EvalConvergesToTrain) {
  Tape<double> tape(false);
  BatchNorm<double> bn(3);
  auto x = param({4, 3, 6}, 3, 2.0);
  for (auto& v : x->value) v += 1.5;
  auto train = batchnorm1d(tape, x, bn, Mode::Train);
  double first = 0.0, last = 0.0;
  for (int it = 0; it < 200; ++it) {
    batchnorm1d(tape, x, bn, Mode::Train);
    auto eval = batchnorm1d(tape, x, bn, Mode::Eval);
    double d = 0.0;
    for (std::size_t i = 0; i < eval->size(); ++i) d = std::max(d, std::abs(eval->value[i] - train->value[i]));
    if (it == 0) first = d;
    last = d;
  }
  EXPECT_LT(last, first);
  // unbiased running variance vs biased batch variance leaves a factor sqrt((n-1)/n)
  EXPECT_LT(last, 0.1);
}

TEST(Backward, SumGivesOnes) {
  Tape<double> tape;
  auto x = param({2, 3}, 4);
  auto s = sum(tape, x);
  tape.backward(s);
  for (double g : x->grad) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SoftmaxCrossEntropyClosedForm) {
  Tape<double> tape;
  auto z = param({3, 4}, 5);
  std::vector<std::size_t> labels{0, 3, 2};
  auto loss = softmax_cross_entropy(tape, z, labels);
  tape.backward(loss);
  for (std::size_t n = 0; n < 3; ++n) {
    double mx = -1e300, s = 0.0;
    for (std::size_t c = 0; c < 4; ++c) mx = std::max(mx, z->value[n * 4 + c]);
    for (std::size_t c = 0; c < 4; ++c) s += std::exp(z->value[n * 4 + c] - mx);
    for (std::size_t c = 0; c < 4; ++c) {
      const double p = std::exp(z->value[n * 4 + c] - mx) / s;
      EXPECT_NEAR(z->grad[n * 4 + c], (p - (c == labels[n] ? 1.0 : 0.0)) / 3.0, 1e-14);
    }
  }
}

TEST(Backward, DetachedLossRejected) {
  Tape<double> tape;
  auto x = constant({1}, {1.0});
  EXPECT_THROW(tape.backward(x), std::logic_error);
}

TEST(Softmax, RowsSumToOne) {
  Tape<double> tape(false);
  auto z = param({5, 8}, 6, 30.0);
  auto p = softmax(tape, z);
  for (std::size_t n = 0; n < 5; ++n) {
    double s = 0.0;
    for (std::size_t c = 0; c < 8; ++c) {
      EXPECT_GT(p->value[n * 8 + c], 0.0);
      s += p->value[n * 8 + c];
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Add, SplitsGradient) {
  Tape<double> tape;
  auto a = param({2, 2}, 7), b = param({2, 2}, 8);
  auto y = add(tape, a, b);
  auto l = probe_loss(tape, y, 9);
  tape.backward(l);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a->grad[i], b->grad[i]);
}

TEST(Add, FanOutAccumulates) {
  Tape<double> tape;
  auto a = param({3}, 10);
  auto y = add(tape, a, a);
  auto s = sum(tape, y);
  tape.backward(s);
  for (double g : a->grad) EXPECT_EQ(g, 2.0);
}

TEST(GradCheck, Conv1d) {
  auto x = param({2, 3, 11}, 11), w = param({4, 3, 5}, 12);
  auto r = finite_difference_check(
      [&](Tape<double>& t) { return probe_loss(t, conv1d(t, x, w, 2, 2), 13); }, {{"x", x}, {"w", w}});
  expect_pass(r);
}

TEST(GradCheck, BatchNormTrainAndEval) {
  auto x = param({3, 2, 5}, 14);
  BatchNorm<double> bn(2);
  bn.scale->value = {1.3, -0.7};
  bn.shift->value = {0.2, 0.1};
  std::vector<Parameter<double>> ps{{"x", x}, {"scale", bn.scale}, {"shift", bn.shift}};
  expect_pass(finite_difference_check([&](Tape<double>& t) { return probe_loss(t, batchnorm1d(t, x, bn, Mode::Train), 15); },
                                      ps));
  bn.running_mean = {0.3, -0.2};
  bn.running_var = {1.7, 0.4};
  expect_pass(finite_difference_check([&](Tape<double>& t) { return probe_loss(t, batchnorm1d(t, x, bn, Mode::Eval), 16); },
                                      ps));
}

TEST(GradCheck, ReluPoolGapLinearSoftmax) {
  auto x = param({2, 3, 9}, 17);
  expect_pass(finite_difference_check([&](Tape<double>& t) { return probe_loss(t, relu(t, x), 18); }, {{"x", x}}));
  expect_pass(
      finite_difference_check([&](Tape<double>& t) { return probe_loss(t, max_pool1d(t, x, 3, 2, 1), 19); }, {{"x", x}}));
  expect_pass(
      finite_difference_check([&](Tape<double>& t) { return probe_loss(t, global_avg_pool1d(t, x), 20); }, {{"x", x}}));
  auto f = param({4, 6}, 21), w = param({3, 6}, 22), b = param({3}, 23);
  expect_pass(finite_difference_check([&](Tape<double>& t) { return probe_loss(t, linear(t, f, w, b), 24); },
                                      {{"f", f}, {"w", w}, {"b", b}}));
  std::vector<std::size_t> labels{2, 0, 1, 1};
  auto z = param({4, 3}, 25);
  expect_pass(
      finite_difference_check([&](Tape<double>& t) { return softmax_cross_entropy(t, z, labels); }, {{"z", z}}));
  expect_pass(finite_difference_check([&](Tape<double>& t) { return probe_loss(t, softmax(t, z), 26); }, {{"z", z}}));
  expect_pass(finite_difference_check(
      [&](Tape<double>& t) { return pick_sum(t, softmax(t, z), std::span<const std::size_t>(labels)); }, {{"z", z}}));
}

TEST(GradCheck, SmallResidualNetwork) {
  auto x = param({2, 2, 16}, 27);
  auto w1 = param({3, 2, 5}, 28, 0.5), w2 = param({3, 3, 3}, 29, 0.5), fw = param({4, 3}, 30), fb = param({4}, 31);
  BatchNorm<double> bn1(3), bn2(3);
  std::vector<std::size_t> labels{1, 3};
  auto loss = [&](Tape<double>& t) {
    auto h = relu(t, batchnorm1d(t, conv1d(t, x, w1, 1, 2), bn1, Mode::Train));
    auto p = max_pool1d(t, h, 3, 2, 1);
    auto r = relu(t, add(t, batchnorm1d(t, conv1d(t, p, w2, 1, 1), bn2, Mode::Train), p));
    return softmax_cross_entropy(t, linear(t, global_avg_pool1d(t, r), fw, fb), labels);
  };
  expect_pass(finite_difference_check(loss, {{"w1", w1}, {"bn1.scale", bn1.scale}, {"bn1.shift", bn1.shift},
                                             {"w2", w2}, {"bn2.scale", bn2.scale}, {"bn2.shift", bn2.shift},
                                             {"fc.w", fw}, {"fc.b", fb}, {"x", x}}));
}

TEST(GradCheck, CorruptedBackwardFails) {
  // y = 3x with a backward rule that uses 2
  auto x = param({5}, 32);
  auto bad = [&](Tape<double>& t) {
    auto y = t.output(Shape{5}, {x.get()});
    for (std::size_t i = 0; i < 5; ++i) y->value[i] = 3.0 * x->value[i];
    if (t.recording() && y->requires_grad) {
      t.record([x, y] {
        for (std::size_t i = 0; i < 5; ++i) x->grad[i] += 2.0 * y->grad[i];
      });
    }
    return probe_loss(t, y, 33);
  };
  const auto r = finite_difference_check(bad, {{"x", x}});
  EXPECT_FALSE(r.passed);
  EXPECT_NEAR(r.worst_rel_error, 1.0 / 3.0, 1e-6);
}

TEST(GradCheck, ReluKinkExcluded) {
  auto w = constant({1, 2}, {1.0, 0.0});
  w->requires_grad = true;
  w->grad.assign(2, 0.0);
  auto b = constant({1}, {0.0});
  b->requires_grad = true;
  b->grad.assign(1, 0.0);
  auto f = constant({1, 2}, {0.0, 0.0});  // pre-activation exactly 0
  const auto r = finite_difference_check(
      [&](Tape<double>& t) { return sum(t, relu(t, linear(t, f, w, b))); }, {{"w", w}, {"b", b}});
  EXPECT_TRUE(r.passed);
  EXPECT_GE(r.skipped_kinks, 1u);
}

TEST(GradCheck, CostGuard) {
  auto x = param({10001}, 34);
  EXPECT_THROW(finite_difference_check([&](Tape<double>& t) { return sum(t, x); }, {{"x", x}}), std::invalid_argument);
  GradCheckOptions o;
  o.max_per_tensor = 50;
  EXPECT_EQ(finite_difference_check([&](Tape<double>& t) { return sum(t, x); }, {{"x", x}}, o).checked, 50u);
}

TEST(Forward, Deterministic) {
  auto x = param({2, 2, 20}, 35), w = param({4, 2, 5}, 36);
  Tape<double> a(false), b(false);
  EXPECT_EQ(conv1d(a, x, w, 2, 2)->value, conv1d(b, x, w, 2, 2)->value);
}

TEST(Adam, ZeroGradientAndZeroLr) {
  auto p = param({4}, 37);
  const auto before = p->value;
  Adam<double> opt({{"p", p}}, {});
  opt.step();
  EXPECT_EQ(p->value, before);
  p->grad = {1, -2, 3, -4};
  AdamConfig c;
  c.lr = 0.0;
  Adam<double> frozen({{"p", p}}, c);
  frozen.step();
  EXPECT_EQ(p->value, before);
}

TEST(Adam, FirstStepIsSignedLr) {
  auto p = param({3}, 38);
  const auto before = p->value;
  p->grad = {5.0, -0.3, 1e-2};
  AdamConfig c;
  c.lr = 1e-3;
  Adam<double> opt({{"p", p}}, c);
  opt.step();
  for (std::size_t i = 0; i < 3; ++i) {
    const double sign = p->grad[i] > 0 ? 1.0 : -1.0;
    EXPECT_NEAR(p->value[i] - before[i], -c.lr * sign, 1e-8);
  }
}

TEST(Adam, MatchesReferenceUpdate) {
  auto p = param({2}, 39);
  auto ref = p->value;
  AdamConfig c;
  c.lr = 0.01;
  Adam<double> opt({{"p", p}}, c);
  std::vector<double> m(2, 0.0), v(2, 0.0);
  const std::vector<std::vector<double>> grads{{0.5, -1.0}, {0.1, 2.0}, {-0.3, 0.0}};
  for (std::size_t t = 0; t < grads.size(); ++t) {
    p->grad = grads[t];
    opt.step();
    for (std::size_t i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * grads[t][i];
      v[i] = 0.999 * v[i] + 0.001 * grads[t][i] * grads[t][i];
      const double mh = m[i] / (1 - std::pow(0.9, double(t + 1)));
      const double vh = v[i] / (1 - std::pow(0.999, double(t + 1)));
      ref[i] -= c.lr * mh / (std::sqrt(vh) + 1e-8);
      EXPECT_NEAR(p->value[i], ref[i], 1e-12);
    }
  }
}

TEST(Adam, NonFiniteGradientRejected) {
  auto p = param({3}, 40), q = param({2}, 41);
  q->grad = {1.0, 1.0};
  p->grad = {0.1, std::nan(""), 0.2};
  const auto pb = p->value, qb = q->value;
  Adam<double> opt({{"q", q}, {"p", p}}, {});
  try {
    opt.step();
    FAIL() << "expected NonFiniteGradient";
  } catch (const NonFiniteGradient& e) {
    EXPECT_EQ(e.param(), "p");
    EXPECT_EQ(e.index(), 1u);
  }
  EXPECT_EQ(p->value, pb);
  EXPECT_EQ(q->value, qb);
  EXPECT_EQ(opt.steps(), 0u);
}
