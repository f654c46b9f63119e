#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "precise_loss.hpp"
#include "vad/errors.hpp"
#include "vad/nn/autoencoders.hpp"
#include "vad/nn/grad_check.hpp"
#include "vad/nn/layers.hpp"
#include "vad/nn/optim.hpp"
#include "vad/nn/train.hpp"
#include "vad/rng.hpp"

namespace vad::nn {
namespace {

Matrix random_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, scale);
  }
  return m;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// ---------------------------------------------------------------------------
// Dense layer

TEST(Dense, IdentityWeightsPassInputThrough) {
  DenseLayer layer{Matrix::Identity(3, 3), Vector::Zero(3), Activation::Identity};
  Matrix x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  EXPECT_EQ(layer.forward(x), x);
}

TEST(Dense, ReluClipsNegatives) {
  Matrix z(3, 1);
  z << -1, 0, 2;
  Matrix want(3, 1);
  want << 0, 0, 2;
  EXPECT_EQ(activate(Activation::ReLU, z), want);
}

TEST(Dense, MatchesStraightLineFormula) {
  Rng rng(3);
  for (Activation act : {Activation::Identity, Activation::ReLU, Activation::Sigmoid}) {
    DenseLayer layer{random_matrix(3, 4, rng), random_matrix(3, 1, rng).col(0), act};
    const Matrix x = random_matrix(4, 5, rng);
    const Matrix y = layer.forward(x);
    for (Index b = 0; b < 5; ++b) {
      for (Index o = 0; o < 3; ++o) {
        double z = layer.b(o);
        for (Index i = 0; i < 4; ++i) z += layer.W(o, i) * x(i, b);
        const double want = act == Activation::ReLU ? std::max(z, 0.0) : act == Activation::Sigmoid ? sigmoid(z) : z;
        EXPECT_NEAR(y(o, b), want, 1e-12);
      }
    }
  }
}

TEST(Dense, WrongInputWidthIsShapeError) {
  DenseLayer layer{Matrix::Zero(2, 3), Vector::Zero(2), Activation::Identity};
  EXPECT_THROW(layer.forward(Matrix::Zero(4, 1)), ShapeError);
}

TEST(Dense, LinearGradientIsSummedOuterProduct) {
  Rng rng(4);
  DenseLayer layer{random_matrix(2, 3, rng), Vector::Zero(2), Activation::Identity};
  const Matrix x = random_matrix(3, 4, rng);
  const DenseBackward g = dense_backward(layer, x, Matrix::Ones(2, 4));
  for (Index o = 0; o < 2; ++o) {
    for (Index i = 0; i < 3; ++i) EXPECT_NEAR(g.grad_W(o, i), x.row(i).sum(), 1e-12);
    EXPECT_NEAR(g.grad_b(o), 4.0, 1e-12);
  }
}

TEST(Dense, ReluBlocksGradientOfInactiveUnit) {
  Matrix W(2, 1);
  W << 1.0, -1.0;
  DenseLayer layer{W, Vector::Zero(2), Activation::ReLU};
  Matrix x(1, 1);
  x << 2.0;  // unit 1 has z = -2
  const DenseBackward g = dense_backward(layer, x, Matrix::Ones(2, 1));
  EXPECT_EQ(g.grad_W(1, 0), 0.0);
  EXPECT_EQ(g.grad_b(1), 0.0);
  EXPECT_EQ(g.grad_x(0, 0), 1.0);
}

// Loss = sum(upstream .* forward(x)); its gradient is exactly what
// dense_backward returns for that upstream.
TEST(Dense, GradientsMatchFiniteDifferences) {
  Rng rng(5);
  for (Activation act : {Activation::Identity, Activation::Sigmoid, Activation::ReLU}) {
    DenseLayer layer{random_matrix(4, 3, rng), random_matrix(4, 1, rng).col(0), act};
    Matrix x = random_matrix(3, 2, rng);
    const Matrix up = random_matrix(4, 2, rng);
    const DenseBackward g = dense_backward(layer, x, up);
    auto loss = [&] { return up.cwiseProduct(layer.forward(x)).sum(); };
    const double h = 1e-5;
    auto check = [&](double& theta, double analytic) {
      const double saved = theta;
      theta = saved + h;
      const double a = loss();
      theta = saved - h;
      const double b = loss();
      theta = saved;
      EXPECT_LE(relative_error(analytic, (a - b) / (2 * h)), 1e-6);
    };
    for (Index i = 0; i < layer.W.size(); ++i) check(layer.W.data()[i], g.grad_W.data()[i]);
    for (Index i = 0; i < layer.b.size(); ++i) check(layer.b(i), g.grad_b(i));
    for (Index i = 0; i < x.size(); ++i) check(x.data()[i], g.grad_x.data()[i]);
  }
}

// ---------------------------------------------------------------------------
// LSTM layer

std::vector<Matrix> random_sequence(Index width, Index batch, int steps, Rng& rng) {
  std::vector<Matrix> xs;
  for (int t = 0; t < steps; ++t) xs.push_back(random_matrix(width, batch, rng));
  return xs;
}

LstmLayer random_lstm(Index in, Index hidden, bool seq, Rng& rng) {
  LstmLayer l = LstmLayer::zeros(in, hidden, seq);
  l.W = random_matrix(4 * hidden, in, rng, 0.5);
  l.U = random_matrix(4 * hidden, hidden, rng, 0.5);
  l.b = random_matrix(4 * hidden, 1, rng, 0.5).col(0);
  return l;
}

TEST(Lstm, ZeroWeightsGiveZeroStates) {
  Rng rng(6);
  const LstmLayer l = LstmLayer::zeros(3, 2, true);
  for (const Matrix& h : l.forward(random_sequence(3, 4, 5, rng))) EXPECT_EQ(h.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Lstm, SingleUnitStepMatchesScalarFormula) {
  LstmLayer l = LstmLayer::zeros(1, 1, true);
  const double wi = 0.3, wf = -0.2, wo = 0.7, wg = 1.1;
  const double ui = 0.5, uf = 0.4, uo = -0.6, ug = 0.2;
  const double bi = 0.1, bf = 1.0, bo = -0.3, bg = 0.05;
  l.W << wi, wf, wo, wg;
  l.U << ui, uf, uo, ug;
  l.b << bi, bf, bo, bg;
  const double x1 = 0.8, x2 = -1.3;
  std::vector<Matrix> xs(2, Matrix(1, 1));
  xs[0](0, 0) = x1;
  xs[1](0, 0) = x2;
  const auto hs = l.forward(xs);

  double h = 0.0, c = 0.0;
  std::vector<double> want;
  for (double x : {x1, x2}) {
    const double i = sigmoid(wi * x + ui * h + bi);
    const double f = sigmoid(wf * x + uf * h + bf);
    const double o = sigmoid(wo * x + uo * h + bo);
    const double g = std::tanh(wg * x + ug * h + bg);
    c = f * c + i * g;
    h = o * std::tanh(c);
    want.push_back(h);
  }
  ASSERT_EQ(hs.size(), 2u);
  EXPECT_NEAR(hs[0](0, 0), want[0], 1e-12);
  EXPECT_NEAR(hs[1](0, 0), want[1], 1e-12);
}

TEST(Lstm, LastStateOnlyWhenNotReturningSequences) {
  Rng rng(7);
  LstmLayer l = random_lstm(3, 2, false, rng);
  const auto xs = random_sequence(3, 2, 4, rng);
  const auto last = l.forward(xs);
  l.return_sequences = true;
  const auto all = l.forward(xs);
  ASSERT_EQ(last.size(), 1u);
  ASSERT_EQ(all.size(), 4u);
  EXPECT_EQ(last[0], all[3]);
}

TEST(Lstm, BackwardWithoutCacheIsUsageError) {
  const LstmLayer l = LstmLayer::zeros(2, 2, true);
  LstmGrads g;
  EXPECT_THROW(l.backward(LstmCache{}, {Matrix::Zero(2, 1)}, g), UsageError);
}

LstmGrads zero_grads(const LstmLayer& l) {
  return {Matrix::Zero(l.W.rows(), l.W.cols()), Matrix::Zero(l.U.rows(), l.U.cols()), Vector::Zero(l.b.size())};
}

TEST(Lstm, ZeroUpstreamGivesZeroGradients) {
  Rng rng(8);
  const LstmLayer l = random_lstm(3, 2, true, rng);
  LstmCache cache;
  const auto xs = random_sequence(3, 2, 3, rng);
  l.forward(xs, &cache);
  LstmGrads g = zero_grads(l);
  const auto dx = l.backward(cache, std::vector<Matrix>(3, Matrix::Zero(2, 2)), g);
  EXPECT_EQ(g.W.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.U.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.b.cwiseAbs().maxCoeff(), 0.0);
  for (const auto& d : dx) EXPECT_EQ(d.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Lstm, GradientsMatchFiniteDifferences) {
  Rng rng(9);
  for (bool seq : {true, false}) {
    LstmLayer l = random_lstm(3, 2, seq, rng);
    auto xs = random_sequence(3, 2, 3, rng);
    const std::size_t outs = seq ? 3 : 1;
    const auto up = random_sequence(2, 2, static_cast<int>(outs), rng);
    auto loss = [&] {
      const auto hs = l.forward(xs);
      double s = 0.0;
      for (std::size_t t = 0; t < hs.size(); ++t) s += up[t].cwiseProduct(hs[t]).sum();
      return s;
    };
    LstmCache cache;
    l.forward(xs, &cache);
    LstmGrads g = zero_grads(l);
    const auto dx = l.backward(cache, up, g);
    const double h = 1e-5;
    double worst = 0.0;
    auto check = [&](double& theta, double analytic) {
      const double saved = theta;
      theta = saved + h;
      const double a = loss();
      theta = saved - h;
      const double b = loss();
      theta = saved;
      worst = std::max(worst, relative_error(analytic, (a - b) / (2 * h)));
    };
    for (Index i = 0; i < l.W.size(); ++i) check(l.W.data()[i], g.W.data()[i]);
    for (Index i = 0; i < l.U.size(); ++i) check(l.U.data()[i], g.U.data()[i]);
    for (Index i = 0; i < l.b.size(); ++i) check(l.b(i), g.b(i));
    for (std::size_t t = 0; t < xs.size(); ++t) {
      for (Index i = 0; i < xs[t].size(); ++i) check(xs[t].data()[i], dx[t].data()[i]);
    }
    EXPECT_LE(worst, 1e-5) << (seq ? "sequences" : "last state");
  }
}

// With the forget gate shut and no recurrent weights nothing from step 1
// reaches h_T.
TEST(Lstm, ClosedForgetGateCutsTheLongPath) {
  Rng rng(10);
  LstmLayer l = random_lstm(2, 2, false, rng);
  l.U.setZero();
  l.b_gate(Gate::Forget).setConstant(-50.0);
  auto xs = random_sequence(2, 1, 4, rng);

  auto grads_for = [&](const std::vector<Matrix>& input) {
    LstmCache cache;
    l.forward(input, &cache);
    LstmGrads g = zero_grads(l);
    return l.backward(cache, {Matrix::Ones(2, 1)}, g);
  };
  const auto dx = grads_for(xs);
  EXPECT_LT(dx.front().cwiseAbs().maxCoeff(), 1e-8);

  auto moved = xs;
  moved.front() *= -3.0;
  const auto dx_moved = grads_for(moved);
  EXPECT_LT((dx.back() - dx_moved.back()).cwiseAbs().maxCoeff(), 1e-8);
}

// ---------------------------------------------------------------------------
// Loss and optimiser

TEST(Mse, BasicValues) {
  const Matrix a = Matrix::Constant(2, 3, 0.7);
  EXPECT_EQ(mse(a, a), 0.0);
  EXPECT_EQ(mse(Matrix::Zero(2, 1), Matrix::Ones(2, 1)), 1.0);
  EXPECT_THROW(mse(Matrix::Zero(2, 1), Matrix::Zero(1, 2)), ShapeError);
}

TEST(Mse, MatchesLoopOnWindows) {
  Rng rng(11);
  for (int k = 0; k < 10; ++k) {
    const Matrix a = random_matrix(13, 8, rng);
    const Matrix b = random_matrix(13, 8, rng);
    double s = 0.0;
    for (int r = 0; r < 13; ++r) {
      for (int c = 0; c < 8; ++c) s += (a(r, c) - b(r, c)) * (a(r, c) - b(r, c));
    }
    EXPECT_NEAR(mse(a, b), s / 104.0, 1e-12);
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  double theta = 1.0;
  const ParamViews params = {std::span<double>(&theta, 1)};
  AdamState st = AdamState::for_params(params);
  Gradients g = {Vector::Constant(1, 4.0)};
  adam_step(st, params, g);
  EXPECT_EQ(st.t, 1);
  EXPECT_NEAR(1.0 - theta, 1e-3 * 4.0 / (4.0 + 1e-8), 1e-15);
}

TEST(Adam, ZeroGradientLeavesParametersAlone) {
  std::vector<double> p = {0.5, -2.0};
  const ParamViews params = {std::span<double>(p)};
  AdamState st = AdamState::for_params(params);
  adam_step(st, params, {Vector::Zero(2)});
  EXPECT_EQ(p[0], 0.5);
  EXPECT_EQ(p[1], -2.0);
  EXPECT_EQ(st.t, 1);
}

TEST(Adam, QuadraticLossDecreasesMonotonically) {
  std::vector<double> p = {1.0, -3.0, 0.25};
  const ParamViews params = {std::span<double>(p)};
  AdamState st = AdamState::for_params(params);
  auto loss = [&] { return p[0] * p[0] + 2 * p[1] * p[1] + 0.5 * p[2] * p[2]; };
  double prev = loss();
  for (int k = 0; k < 10; ++k) {
    Vector g(3);
    g << 2 * p[0], 4 * p[1], p[2];
    adam_step(st, params, {g});
    const double now = loss();
    EXPECT_LT(now, prev);
    prev = now;
  }
}

// ---------------------------------------------------------------------------
// Autoencoders and training

TEST(Autoencoders, DefaultShapes) {
  const DenseAutoencoder dense(VanillaAeSpec{}, 1);
  ASSERT_EQ(dense.layers().size(), 6u);
  const std::vector<Index> widths = {32, 16, 8, 16, 32, 8};
  for (std::size_t i = 0; i < widths.size(); ++i) EXPECT_EQ(dense.layers()[i].out(), widths[i]);
  EXPECT_EQ(dense.layers().back().activation, Activation::Sigmoid);

  const LstmAutoencoder lstm(LstmAeSpec{}, 1);
  EXPECT_EQ(lstm.encoder()[0].hidden(), 64);
  EXPECT_EQ(lstm.encoder()[1].hidden(), 32);
  EXPECT_FALSE(lstm.encoder()[1].return_sequences);
  EXPECT_EQ(lstm.decoder()[0].hidden(), 32);
  EXPECT_EQ(lstm.decoder()[1].hidden(), 64);
  EXPECT_EQ(lstm.output().out(), 8);
  EXPECT_EQ(lstm.encoder()[0].b.segment(64, 64), Vector::Ones(64));  // forget gate
}

TEST(Autoencoders, GlorotLimitHolds) {
  const DenseAutoencoder dense(VanillaAeSpec{}, 2);
  for (const auto& l : dense.layers()) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.in() + l.out()));
    EXPECT_LE(l.W.cwiseAbs().maxCoeff(), limit);
    EXPECT_EQ(l.b.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Autoencoders, DenseGradientCheck) {
  Rng rng(12);
  DenseAutoencoder model(VanillaAeSpec{}, 13);
  const Matrix x = random_matrix(8, 6, rng, 0.3).array() + 0.5;
  testing::PreciseLossModel<DenseAutoencoder> precise{model};
  const auto report = grad_check(precise, x, 1e-5, 1e-6);
  EXPECT_TRUE(report.passed) << report.max_relative_error << " at tensor " << report.worst_tensor << "[" << report.worst_index << "] analytic " << report.worst_analytic << " numeric " << report.worst_numeric;
  EXPECT_EQ(report.checked, static_cast<std::size_t>(8 * 32 + 32 + 32 * 16 + 16 + 16 * 8 + 8 + 8 * 16 + 16 + 16 * 32 + 32 + 32 * 8 + 8));
}

TEST(Autoencoders, LstmGradientCheck) {
  Rng rng(14);
  LstmAeSpec spec;
  spec.encoder = {6, 4};
  spec.decoder = {4, 6};
  spec.sequence_length = 5;
  LstmAutoencoder model(spec, 15);
  std::vector<Matrix> x;
  for (int t = 0; t < 5; ++t) x.push_back(random_matrix(8, 3, rng, 0.3).array() + 0.5);
  testing::PreciseLossModel<LstmAutoencoder> precise{model};
  const auto report = grad_check(precise, x, 1e-5, 1e-5);
  EXPECT_TRUE(report.passed) << report.max_relative_error << " at tensor " << report.worst_tensor << "[" << report.worst_index << "] analytic " << report.worst_analytic << " numeric " << report.worst_numeric;
}

TEST(Autoencoders, KinkCrossingEntriesAreSkipped) {
  Rng rng(16);
  DenseAutoencoder model(VanillaAeSpec{}, 17);
  const Matrix x = random_matrix(8, 1, rng, 0.3).array() + 0.5;
  // Put the first hidden unit's pre-activation on the ReLU kink.
  auto& first = model.layers().front();
  first.b(0) = -first.W.row(0).dot(x.col(0));

  const auto plain = grad_check(model, x, 1e-5, 1e-6);
  EXPECT_FALSE(plain.passed);
  EXPECT_EQ(plain.skipped, 0u);

  testing::PreciseLossModel<DenseAutoencoder> precise{model};
  const auto report = grad_check(precise, x, 1e-5, 1e-6);
  EXPECT_GE(report.skipped, 1u);
  EXPECT_LE(report.skipped, 9u);  // b(0) and the eight weights feeding the unit
  EXPECT_TRUE(report.passed) << report.max_relative_error << " at tensor " << report.worst_tensor;
}

TEST(Autoencoders, ZeroModelOnZeroInputHasZeroGradients) {
  DenseAutoencoder model(VanillaAeSpec{}, 1);
  for (auto& l : model.layers()) {
    l.W.setZero();
    l.b.setZero();
    l.activation = Activation::Identity;
  }
  const auto report = grad_check(model, Matrix::Zero(8, 2), 1e-5, 1e-6);
  EXPECT_TRUE(report.passed);
  EXPECT_EQ(report.max_relative_error, 0.0);
}

TEST(GradCheck, FloorTreatsTinyPairsAsEqual) {
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1e-12, 0.0), 1e-4);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
}

Matrix normal_rows(int n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix rows(n, 8);
  for (int i = 0; i < n; ++i) {
    const double level = rng.uniform(0.3, 0.7);
    for (int k = 0; k < 8; ++k) rows(i, k) = std::clamp(level + 0.05 * k + rng.normal(0.0, 0.02), 0.0, 1.0);
  }
  return rows;
}

TEST(Training, ZeroEpochsLeavesInitialisation) {
  const Matrix rows = normal_rows(50, 1);
  DenseAutoencoder model(VanillaAeSpec{}, 3);
  const DenseAutoencoder before = model;
  const TrainResult r = train(model, RowDataset(rows), TrainConfig{.epochs = 0});
  EXPECT_TRUE(r.loss_history.empty());
  for (std::size_t i = 0; i < model.layers().size(); ++i) EXPECT_EQ(model.layers()[i].W, before.layers()[i].W);
}

TEST(Training, SameSeedSameWeights) {
  const Matrix rows = normal_rows(200, 2);
  DenseAutoencoder a(VanillaAeSpec{}, 3), b(VanillaAeSpec{}, 3);
  const TrainConfig cfg{.epochs = 3, .batch_size = 32, .seed = 9};
  train(a, RowDataset(rows), cfg);
  train(b, RowDataset(rows), cfg);
  for (std::size_t i = 0; i < a.layers().size(); ++i) {
    EXPECT_EQ(a.layers()[i].W, b.layers()[i].W);
    EXPECT_EQ(a.layers()[i].b, b.layers()[i].b);
  }
}

TEST(Training, VanillaLossFallsOnNormalRows) {
  const Matrix rows = normal_rows(500, 3);
  const Matrix val = normal_rows(100, 4);
  DenseAutoencoder model(VanillaAeSpec{}, 5);
  RowDataset v(val);
  const TrainResult r = train(model, RowDataset(rows), TrainConfig{.epochs = 20, .seed = 6}, &v);
  ASSERT_EQ(r.loss_history.size(), 20u);
  ASSERT_EQ(r.validation_history.size(), 20u);
  EXPECT_LT(r.loss_history.back(), r.loss_history.front());
}

TEST(Training, LstmLossFallsOnWindows) {
  const Matrix rows = normal_rows(120, 7);
  LstmAeSpec spec;
  spec.encoder = {8, 4};
  spec.decoder = {4, 8};
  spec.sequence_length = 5;
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + 5 <= 120; ++s) starts.push_back(s);
  LstmAutoencoder model(spec, 8);
  const TrainResult r = train(model, WindowDataset(rows, starts, 5), TrainConfig{.epochs = 8, .batch_size = 16, .learning_rate = 5e-3, .seed = 1});
  EXPECT_LT(r.loss_history.back(), r.loss_history.front());
}

TEST(Training, NonFiniteLossIsDivergenceAtEpochOne) {
  Matrix rows = normal_rows(20, 1);
  rows(3, 2) = std::numeric_limits<double>::quiet_NaN();
  DenseAutoencoder model(VanillaAeSpec{}, 1);
  try {
    train(model, RowDataset(rows), TrainConfig{.epochs = 2, .batch_size = 64});
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), 1u);
  }
}

TEST(Training, RejectsEmptyDataAndBadConfig) {
  const Matrix none(0, 8);
  DenseAutoencoder model(VanillaAeSpec{}, 1);
  EXPECT_THROW(train(model, RowDataset(none), TrainConfig{}), EmptyInputError);
  const Matrix rows = normal_rows(5, 1);
  EXPECT_THROW(train(model, RowDataset(rows), TrainConfig{.batch_size = 0}), ParameterError);
}

}  // namespace
}  // namespace vad::nn
