#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "acone/autodiff.hpp"

using namespace acone::ad;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

}  // namespace

TEST(Autodiff, ForwardExamples) {
  Tape t;
  EXPECT_DOUBLE_EQ(atan2(t.constant(1.0), t.constant(0.0)).item(), acone::kPi / 2);
  const Var s = softmax(t.constant({2, 1}, {0.0, 0.0}));
  EXPECT_DOUBLE_EQ(s[0], 0.5);
  EXPECT_DOUBLE_EQ(s[1], 0.5);
}

TEST(Autodiff, MinimumRoutesGradientToTheSmallerArgument) {
  Tape t;
  const Var a = t.variable({1, 1}, {3.0});
  const Var b = t.variable({1, 1}, {5.0});
  const Var m = minimum(a, b);
  EXPECT_DOUBLE_EQ(m.item(), 3.0);
  t.backward(m);
  EXPECT_DOUBLE_EQ(a.grad()[0], 1.0);
  EXPECT_DOUBLE_EQ(b.grad()[0], 0.0);
}

TEST(Autodiff, SubgradientConventions) {
  Tape t;
  const Var x = t.variable({1, 4}, {0.0, 2.0, -1.0, 2.0});
  // |0| -> 0; clamp to [0, 1] -> 0 outside; min tie -> first index.
  const Var y = sum(abs(slice_rows(x, 0, 1))) + sum(clamp(x, 0.0, 1.0)) + min(slice_rows(x, 0, 1) * -1.0);
  t.backward(y);
  const auto& g = x.grad();
  EXPECT_DOUBLE_EQ(g[0], 0.0 + 1.0 + 0.0);
  EXPECT_DOUBLE_EQ(g[1], 1.0 + 0.0 - 1.0);
  EXPECT_DOUBLE_EQ(g[2], -1.0 + 0.0 + 0.0);
  EXPECT_DOUBLE_EQ(g[3], 1.0 + 0.0 + 0.0);
}

TEST(Autodiff, SquareDerivative) {
  Tape t;
  const Var x = t.variable({1, 1}, {3.0});
  t.backward(x * x);
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Autodiff, L1GradientIsSignVector) {
  Tape t;
  const Var x = t.variable({1, 3}, {0.5, -2.0, 1.0});
  t.backward(sum(abs(x)));
  EXPECT_EQ(x.grad(), (std::vector<double>{1.0, -1.0, 1.0}));
}

TEST(Autodiff, Errors) {
  Tape t;
  const Var a = t.constant({1, 2}, {1.0, 2.0});
  const Var b = t.constant({2, 1}, {1.0, 2.0});
  EXPECT_THROW(a + b, std::invalid_argument);
  EXPECT_THROW(matmul(a, a), std::invalid_argument);
  EXPECT_THROW(log(t.constant({1, 2}, {1.0, 0.0})), std::domain_error);
  EXPECT_THROW(t.backward(a), std::invalid_argument);
  EXPECT_THROW(t.constant({2, 2}, {1.0}), std::invalid_argument);
  Tape other;
  EXPECT_THROW(a + other.constant({1, 2}, {0.0, 0.0}), std::invalid_argument);
}

TEST(Autodiff, StableSigmoidFamily) {
  Tape t;
  const Var x = t.constant({1, 4}, {-800.0, -30.0, 30.0, 800.0});
  for (double v : sigmoid(x).value()) EXPECT_TRUE(std::isfinite(v));
  for (double v : log_sigmoid(x).value()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(log_sigmoid(x)[0], -800.0, 1e-9);
  EXPECT_NEAR(log_sigmoid(x)[3], 0.0, 1e-12);
}

TEST(GradCheck, LinearFunctionIsExact) {
  const auto f = [](Tape& t, const Var& x) { return sum(x * 3.0 + 1.0); };
  EXPECT_LT(grad_check(f, {2, 3}, random_values(6, 1)), 1e-10);
}

TEST(GradCheck, Sine) {
  const auto f = [](Tape&, const Var& x) { return sum(sin(x)); };
  EXPECT_LT(grad_check(f, {1, 8}, random_values(8, 2)), 1e-7);
}

struct OpCase {
  const char* name;
  Shape shape;
  TensorFunction f;
  double lo = -2.0;
  double hi = 2.0;
};

class EveryOp : public ::testing::TestWithParam<OpCase> {};

TEST_P(EveryOp, MatchesCentralDifferences) {
  const OpCase& c = GetParam();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const double err = grad_check(c.f, c.shape, random_values(c.shape.size(), 100 + seed, c.lo, c.hi));
    EXPECT_LT(err, 1e-6) << c.name << " seed " << seed;
  }
}

const std::vector<double> kWeights = random_values(12, 77);

INSTANTIATE_TEST_SUITE_P(
    Ops, EveryOp,
    ::testing::Values(
        OpCase{"mul_add", {2, 3}, [](Tape&, const Var& x) { return sum(x * x + x * 0.5 - x); }},
        OpCase{"cos", {2, 3}, [](Tape&, const Var& x) { return sum(cos(x) * x); }},
        OpCase{"atan2", {2, 2},
               [](Tape&, const Var& x) { return sum(atan2(slice_rows(x, 0, 1), slice_rows(x, 1, 1) + 3.0)); }},
        OpCase{"exp_log", {1, 4}, [](Tape&, const Var& x) { return sum(log(exp(x) + 1.0)); }},
        OpCase{"sigmoid", {1, 4}, [](Tape&, const Var& x) { return sum(sigmoid(x * 2.0)); }},
        OpCase{"log_sigmoid", {1, 4}, [](Tape&, const Var& x) { return sum(log_sigmoid(x * 3.0)); }},
        OpCase{"relu", {1, 6}, [](Tape&, const Var& x) { return sum(relu(x) * x); }},
        OpCase{"matmul", {2, 3},
               [](Tape& t, const Var& x) {
                 const Var w = t.constant({3, 4}, kWeights);
                 return sum(sin(matmul(x, w)));
               }},
        OpCase{"matmul_weights", {3, 4},
               [](Tape& t, const Var& w) {
                 const Var x = t.constant({1, 3}, {0.3, -0.7, 1.1});
                 return sum(cos(matmul(x, w)));
               }},
        OpCase{"bias", {1, 3},
               [](Tape& t, const Var& b) {
                 const Var x = t.constant({2, 3}, {1, 2, 3, 4, 5, 6});
                 return sum(sin(add_bias(x, b)));
               }},
        OpCase{"softmax_rows", {3, 2}, [](Tape&, const Var& x) { return sum(softmax(x, 0) * cos(x)); }},
        OpCase{"softmax_cols", {2, 3}, [](Tape&, const Var& x) { return sum(softmax(x, 1) * sin(x)); }},
        OpCase{"sum_axis", {3, 2},
               [](Tape&, const Var& x) { return sum(sin(sum(x, 0))) + sum(cos(sum(x, 1))) + sum(sin(mean(x, 0))) + sum(mean(x, 1)); }},
        OpCase{"min_axis", {3, 4}, [](Tape&, const Var& x) { return sum(sin(min(x, 0))) + sum(min(x, 1)); }},
        OpCase{"concat", {2, 2},
               [](Tape&, const Var& x) { return sum(sin(concat(x, x * 2.0, 0))) + sum(cos(concat(x, x, 1))); }},
        OpCase{"broadcast", {1, 3}, [](Tape&, const Var& x) { return sum(sin(broadcast_rows(x, 4))); }},
        OpCase{"clamp_interior", {1, 4}, [](Tape&, const Var& x) { return sum(clamp(x, -5.0, 5.0) * x); }},
        OpCase{"wrap", {1, 4}, [](Tape&, const Var& x) { return sum(sin(wrap_angle(x * 3.0))); }},
        OpCase{"abs_min", {1, 4}, [](Tape&, const Var& x) { return min(abs(x) + x * 0.1); }, 0.2, 2.0}),
    [](const ::testing::TestParamInfo<OpCase>& info) { return std::string(info.param.name); });

TEST(Autodiff, BackwardIsLinear) {
  const auto x0 = random_values(5, 9);
  const auto grad_of = [&](const std::function<Var(const Var&)>& f) {
    Tape t;
    const Var x = t.variable({1, 5}, x0);
    t.backward(f(x));
    return x.grad();
  };
  const auto f = [](const Var& x) { return sum(sin(x) * x); };
  const auto g = [](const Var& x) { return sum(exp(x * 0.3)); };
  const auto gf = grad_of(f);
  const auto gg = grad_of(g);
  const auto gc = grad_of([&](const Var& x) { return f(x) * 2.5 + g(x) * -0.75; });
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(gc[i], 2.5 * gf[i] - 0.75 * gg[i], 1e-12);
}

TEST(Autodiff, DeterministicGradients) {
  const auto run = [] {
    Tape t;
    const Var x = t.variable({4, 3}, random_values(12, 3));
    t.backward(sum(softmax(x, 0) * sin(x)) + min(x));
    return x.grad();
  };
  const auto a = run();
  const auto b = run();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(std::memcmp(&a[i], &b[i], sizeof(double)), 0);
}

TEST(Autodiff, ParametersAndGatherAccumulateIntoSinks) {
  const std::vector<double> table{1, 2, 3, 4, 5, 6};  // 3 rows x 2 cols
  std::vector<double> sink(6, 0.0);
  Tape t;
  const std::size_t ids[] = {2, 0, 2};
  const Var rows = t.gather_rows(table, 2, ids, sink);
  EXPECT_EQ(rows.value(), (std::vector<double>{5, 6, 1, 2, 5, 6}));
  t.backward(sum(rows * 2.0));
  EXPECT_EQ(sink, (std::vector<double>{2, 2, 0, 0, 4, 4}));

  std::vector<double> psink(2, 1.0);
  Tape t2;
  const std::vector<double> w{0.5, -0.5};
  t2.backward(sum(t2.parameter({1, 2}, w, psink) * 3.0));
  EXPECT_EQ(psink, (std::vector<double>{4.0, 4.0}));
  const std::size_t bad[] = {3};
  EXPECT_THROW(t2.gather_rows(table, 2, bad, sink), std::out_of_range);
}
