#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <sstream>

#include "test_support.hpp"

using namespace anae;
using anae::testing::random_matrix;

namespace {

using Builder = std::function<Var(Tape&, Var)>;

// Analytic gradient of build(x) w.r.t. x next to its finite-difference twin.
std::pair<Matrix, Matrix> grads(const Builder& build, const Matrix& x0) {
  Parameter p("x", x0);
  Tape tape;
  Var loss = build(tape, tape.parameter(p));
  tape.backward(loss);
  Matrix numeric = finite_diff_grad(
      [&](const Matrix& x) {
        Tape t;
        return build(t, t.constant(x)).value()(0, 0);
      },
      x0);
  return {p.grad, numeric};
}

double grad_error(const Builder& build, const Matrix& x0) {
  auto [a, n] = grads(build, x0);
  return max_relative_error(a, n);
}

// Pushes entries away from the kink at 0.
Matrix away_from_zero(Matrix m) {
  for (Index k = 0; k < m.size(); ++k)
    if (std::abs(m.data()[k]) < 1e-3) m.data()[k] = 0.5;
  return m;
}

}  // namespace

TEST(Matmul, HandExample) {
  Tape t;
  Matrix a(2, 2), b(2, 1);
  a << 1, 2, 3, 4;
  b << 1, 1;
  Matrix expected(2, 1);
  expected << 3, 7;
  EXPECT_EQ(matmul(t.constant(a), t.constant(b)).value(), expected);
}

TEST(Matmul, IdentityPassesGradient) {
  Matrix m = random_matrix(3, 3, 1);
  Parameter p("m", m);
  Tape t;
  Var y = matmul(t.constant(Matrix::Identity(3, 3)), t.parameter(p));
  EXPECT_EQ(y.value(), m);
  t.backward(sum(squared_error(y, Matrix::Zero(3, 3))));
  EXPECT_LT(max_relative_error(p.grad, 2 * m), 1e-12);
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  const Matrix a = random_matrix(4, 5, 3), b = random_matrix(5, 3, 4), w = random_matrix(4, 3, 5);
  EXPECT_LT(grad_error([&](Tape& t, Var x) { return squared_error(matmul(x, t.constant(b)), w); }, a), 1e-6);
  EXPECT_LT(grad_error([&](Tape& t, Var x) { return squared_error(matmul(t.constant(a), x), w); }, b), 1e-6);
  const Matrix bt = b.transpose();
  EXPECT_LT(grad_error([&](Tape& t, Var x) { return squared_error(matmul_nt(x, t.constant(bt)), w); }, a), 1e-6);
  EXPECT_LT(grad_error([&](Tape& t, Var x) { return squared_error(matmul_nt(t.constant(a), x), w); }, bt), 1e-6);
}

TEST(Matmul, ShapeMismatch) {
  Tape t;
  EXPECT_THROW(matmul(t.constant(Matrix::Ones(2, 3)), t.constant(Matrix::Ones(2, 3))), DimensionError);
}

TEST(SegmentSoftmax, Examples) {
  std::vector<double> one{3.7};
  std::vector<std::size_t> off1{0, 1};
  EXPECT_EQ(segment_softmax(one, off1), std::vector<double>{1.0});

  std::vector<double> zeros{0, 0, 0};
  std::vector<std::size_t> off3{0, 3};
  for (double v : segment_softmax(zeros, off3)) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);

  std::vector<double> big{1000, 1000.5}, shifted{0, 0.5};
  std::vector<std::size_t> off2{0, 2};
  auto a = segment_softmax(big, off2), b = segment_softmax(shifted, off2);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_TRUE(std::isfinite(a[k]));
    EXPECT_NEAR(a[k], b[k], 1e-15);
  }
  EXPECT_NEAR(b[1], 1.0 / (1.0 + std::exp(-0.5)), 1e-15);

  std::vector<std::size_t> empty_seg{0, 2, 2};
  EXPECT_THROW(segment_softmax(shifted, empty_seg), std::invalid_argument);
}

TEST(SegmentSoftmax, SumsToOneAndShiftInvariant) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> off{0};
    const int segs = 1 + static_cast<int>(rng.index(10));
    for (int s = 0; s < segs; ++s) off.push_back(off.back() + 1 + rng.index(8));
    std::vector<double> logits(off.back());
    for (double& l : logits) l = rng.uniform(-30, 30);
    auto y = segment_softmax(logits, off);
    std::vector<double> shifted = logits;
    for (std::size_t s = 0; s + 1 < off.size(); ++s) {
      const double c = rng.uniform(-500, 500);
      for (std::size_t k = off[s]; k < off[s + 1]; ++k) shifted[k] += c;
    }
    auto ys = segment_softmax(shifted, off);
    for (std::size_t s = 0; s + 1 < off.size(); ++s) {
      double total = 0;
      for (std::size_t k = off[s]; k < off[s + 1]; ++k) {
        EXPECT_GT(y[k], 0.0);
        EXPECT_NEAR(y[k], ys[k], 1e-9);
        total += y[k];
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(SegmentSoftmax, TapeGradient) {
  std::vector<std::size_t> off{0, 1, 4, 6};
  Matrix w = random_matrix(6, 2, 10);
  EXPECT_LT(grad_error([&](Tape&, Var x) { return squared_error(segment_softmax(x, off), w); }, random_matrix(6, 2, 9, -3, 3)),
            1e-6);
}

TEST(Activations, Values) {
  Tape t;
  Matrix x(1, 4);
  x << -1, 0, 2, -50;
  Var lr = leaky_relu(t.constant(x), 0.2);
  EXPECT_DOUBLE_EQ(lr.value()(0, 0), -0.2);
  EXPECT_EQ(lr.value()(0, 1), 0.0);
  EXPECT_EQ(lr.value()(0, 2), 2.0);
  Var e = elu(t.constant(x));
  EXPECT_EQ(e.value()(0, 1), 0.0);
  EXPECT_EQ(e.value()(0, 2), 2.0);
  EXPECT_NEAR(e.value()(0, 3), -1.0, 1e-15);
  EXPECT_NEAR(e.value()(0, 0), std::exp(-1.0) - 1.0, 1e-15);
}

TEST(Activations, Gradients) {
  const Matrix x = away_from_zero(random_matrix(5, 4, 11, -3, 3));
  const Matrix w = random_matrix(5, 4, 12);
  EXPECT_LT(grad_error([&](Tape&, Var v) { return squared_error(leaky_relu(v, 0.2), w); }, x), 1e-6);
  EXPECT_LT(grad_error([&](Tape&, Var v) { return squared_error(elu(v), w); }, x), 1e-6);
}

TEST(Activations, KinkTakesPositiveBranch) {
  Parameter p("x", Matrix::Zero(1, 1));
  Tape t;
  t.backward(sum(leaky_relu(t.parameter(p), 0.2)));
  EXPECT_EQ(p.grad(0, 0), 1.0);
  p.zero_grad();
  Tape t2;
  t2.backward(sum(elu(t2.parameter(p))));
  EXPECT_EQ(p.grad(0, 0), 1.0);
}

TEST(Dropout, IdentityCases) {
  Rng rng(1);
  Tape t;
  Matrix x = random_matrix(10, 10, 2);
  EXPECT_EQ(dropout(t.constant(x), 0.0, true, rng).value(), x);
  EXPECT_EQ(dropout(t.constant(x), 0.5, false, rng).value(), x);
  EXPECT_EQ(dropout(t.constant(x), 0.9, false, rng).value(), x);
  EXPECT_THROW(dropout(t.constant(x), 1.0, true, rng), std::invalid_argument);
  EXPECT_THROW(dropout(t.constant(x), -0.1, true, rng), std::invalid_argument);
}

TEST(Dropout, KeepRateWithinThreeSigma) {
  Rng rng(3);
  const double p = 0.5;
  const Index n = 1000000;
  Tape t;
  Var y = dropout(t.constant(Matrix::Ones(1000, 1000)), p, true, rng);
  const double kept = static_cast<double>((y.value().array() != 0).count());
  const double sigma = std::sqrt(static_cast<double>(n) * p * (1 - p));
  EXPECT_LT(std::abs(kept - static_cast<double>(n) * (1 - p)), 3 * sigma);
  for (Index k = 0; k < n; ++k) {
    const double v = y.value().data()[k];
    ASSERT_TRUE(v == 0.0 || v == 2.0);
  }
}

TEST(Dropout, PreservesExpectation) {
  Rng rng(4);
  const Matrix x = random_matrix(4, 5, 5, 0.5, 2.0);
  Matrix acc = Matrix::Zero(4, 5);
  const int trials = 10000;
  for (int k = 0; k < trials; ++k) {
    Tape t;
    acc += dropout(t.constant(x), 0.5, true, rng).value();
  }
  acc /= trials;
  EXPECT_NEAR(acc.mean() / x.mean(), 1.0, 0.01);
}

TEST(Dropout, GradientUsesSameMask) {
  Rng rng(6);
  Parameter p("x", random_matrix(6, 6, 7));
  Tape t;
  Var y = dropout(t.parameter(p), 0.3, true, rng);
  t.backward(sum(y));
  for (Index k = 0; k < y.value().size(); ++k)
    EXPECT_DOUBLE_EQ(p.grad.data()[k], y.value().data()[k] == 0 ? 0.0 : 1.0 / 0.7);
}

TEST(Glorot, BoundsMeanDeterminism) {
  Rng a(9), b(9), c(10);
  const Matrix w = glorot_init(200, 500, a);
  const double bound = std::sqrt(6.0 / 700.0);
  EXPECT_LE(w.cwiseAbs().maxCoeff(), bound);
  const double sigma = bound / std::sqrt(3.0) / std::sqrt(static_cast<double>(w.size()));
  EXPECT_LT(std::abs(w.mean()), 3 * sigma);
  EXPECT_EQ(w, glorot_init(200, 500, b));
  EXPECT_NE(w, glorot_init(200, 500, c));
}

TEST(L2Penalty, Values) {
  Tape t;
  std::vector<Parameter*> none;
  EXPECT_EQ(l2_penalty(t, none, 5e-4).value()(0, 0), 0.0);
  Parameter w("w", Matrix::Constant(1, 1, 3.0));
  std::vector<Parameter*> one{&w};
  Var pen = l2_penalty(t, one, 5e-4);
  EXPECT_DOUBLE_EQ(pen.value()(0, 0), 5e-4 * 9.0);
  t.backward(pen);
  EXPECT_DOUBLE_EQ(w.grad(0, 0), 2 * 5e-4 * 3.0);
  EXPECT_LT(grad_error([](Tape&, Var x) { return l2_penalty(std::vector<Var>{x, scale(x, 2.0)}, 0.1); },
                       random_matrix(3, 4, 13)),
            1e-6);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Parameter p("p", random_matrix(3, 3, 1));
  const Matrix before = p.value;
  Adam adam;
  std::vector<Parameter*> ps{&p};
  for (int k = 0; k < 5; ++k) adam.step(ps);
  EXPECT_EQ(p.value, before);
  EXPECT_EQ(adam.steps(), 5);
}

TEST(Adam, FirstStepIsLrTimesSign) {
  Parameter p("p", Matrix::Zero(1, 4));
  p.grad << 3.0, -0.01, 200.0, -7.0;
  Adam adam({0.001});
  std::vector<Parameter*> ps{&p};
  adam.step(ps);
  for (Index k = 0; k < 4; ++k) EXPECT_NEAR(p.value(0, k), p.grad(0, k) > 0 ? -0.001 : 0.001, 1e-8);
}

TEST(Adam, ConvergesOnQuadratic) {
  const Matrix target = random_matrix(3, 2, 21);
  Parameter w("w", Matrix::Zero(3, 2));
  Adam adam({0.1});
  std::vector<Parameter*> ps{&w};
  for (int step = 0; step < 200; ++step) {
    Tape t;
    w.zero_grad();
    t.backward(squared_error(t.parameter(w), target));
    adam.step(ps);
  }
  EXPECT_LT((w.value - target).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Backward, SumGivesOnes) {
  Parameter w("w", random_matrix(3, 4, 1));
  Tape t;
  t.backward(sum(t.parameter(w)));
  EXPECT_EQ(w.grad, Matrix::Ones(3, 4));
}

TEST(Backward, SecondCallFails) {
  Parameter w("w", random_matrix(2, 2, 1));
  Tape t;
  Var loss = sum(t.parameter(w));
  t.backward(loss);
  EXPECT_THROW(t.backward(loss), std::logic_error);
}

TEST(Backward, UnreachableParametersStayZero) {
  Parameter used("a", random_matrix(2, 2, 1)), unused("b", random_matrix(2, 2, 2));
  Tape t;
  Var va = t.parameter(used);
  t.parameter(unused);
  t.backward(frobenius_sq(va));
  EXPECT_EQ(unused.grad, Matrix::Zero(2, 2));
  EXPECT_LT(max_relative_error(used.grad, 2 * used.value), 1e-14);
}

TEST(Backward, RejectsNonFinite) {
  Tape t;
  Var big = t.constant(Matrix::Constant(1, 1, 1e300));
  EXPECT_NO_THROW(elu(big));
  EXPECT_THROW(scale(big, 1e10), NumericalError);
}

TEST(Backward, CompositeGraphMatchesFiniteDifferences) {
  const Matrix w = random_matrix(4, 3, 30), target = random_matrix(5, 3, 31);
  const Matrix x0 = random_matrix(5, 4, 32);
  std::vector<std::size_t> rows{4, 0, 0, 2};
  Builder build = [&](Tape& t, Var x) {
    Var h = elu(matmul(x, t.constant(w)));
    Var g = gather_rows(leaky_relu(add(h, scale(h, 0.5)), 0.2), rows);
    Var s = head_mean(matmul_nt(x, t.constant(Matrix(w.transpose()))), 3);
    return add(add(squared_error(g, target.topRows(4)), frobenius_sq(s)),
               sum(slice_rows(h, 2)));
  };
  EXPECT_LT(grad_error(build, x0), 1e-5);
}

TEST(FiniteDiff, AnalyticCases) {
  const Matrix x = random_matrix(3, 3, 40);
  Matrix g = finite_diff_grad([](const Matrix& m) { return m.squaredNorm(); }, x);
  EXPECT_LT((g - 2 * x).cwiseAbs().maxCoeff(), 1e-6);
  const Matrix c = random_matrix(3, 3, 41);
  Matrix lin = finite_diff_grad([&](const Matrix& m) { return m.cwiseProduct(c).sum(); }, x);
  EXPECT_LT((lin - c).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Checkpoint, BitExactRoundTrip) {
  std::vector<NamedMatrix> params{{"encoder.0.weight", random_matrix(3, 5, 1, -1e10, 1e10)},
                                  {"é.attn", Matrix::Constant(1, 2, -0.0)},
                                  {"empty", Matrix(0, 4)}};
  params[0].value(0, 0) = std::numeric_limits<double>::denorm_min();
  std::stringstream buf;
  write_checkpoint(buf, params);
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 4), "ANAE");
  std::istringstream in(bytes);
  auto back = read_checkpoint(in);
  ASSERT_EQ(back.size(), params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    EXPECT_EQ(back[k].name, params[k].name);
    ASSERT_EQ(back[k].value.rows(), params[k].value.rows());
    ASSERT_EQ(back[k].value.cols(), params[k].value.cols());
    EXPECT_EQ(0, std::memcmp(back[k].value.data(), params[k].value.data(),
                             sizeof(double) * static_cast<std::size_t>(params[k].value.size())));
  }
  std::stringstream again;
  write_checkpoint(again, back);
  EXPECT_EQ(again.str(), bytes);
}

TEST(Checkpoint, RejectsCorruptInput) {
  std::istringstream bad_magic("XXXX\x01\0\0\0");
  EXPECT_THROW(read_checkpoint(bad_magic), ParseError);
  std::stringstream buf;
  write_checkpoint(buf, {{"w", random_matrix(2, 2, 1)}});
  std::string truncated = buf.str();
  truncated.resize(truncated.size() - 3);
  std::istringstream in(truncated);
  EXPECT_THROW(read_checkpoint(in), ParseError);
}
