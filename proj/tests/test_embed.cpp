#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "vad/embed.hpp"
#include "vad/errors.hpp"

namespace vad {
namespace {

using Eigen::MatrixXd;

MatrixXd random_points(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  return X;
}

MatrixXd random_stochastic(Eigen::Index n, Rng& rng) {
  MatrixXd P(n, n);
  for (Eigen::Index i = 0; i < P.size(); ++i) P.data()[i] = rng.uniform() + 1e-3;
  P.diagonal().setZero();
  return P / P.sum();
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

TEST(Affinities, JointMatrixInvariants) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto A = pairwise_affinities(random_points(60, 8, seed), 15.0);
    EXPECT_LE((A.P - A.P.transpose()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(A.P.sum(), 1.0, 1e-9);
    EXPECT_LE(A.P.diagonal().cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_GE(A.P.minCoeff(), 0.0);
  }
}

TEST(Affinities, EquidistantPointsAreUniform) {
  const MatrixXd corners = MatrixXd::Identity(4, 4);
  for (double perplexity : {1.5, 2.0, 2.9}) {
    const auto c = conditional_affinities(corners, perplexity);
    for (Eigen::Index i = 0; i < 4; ++i) {
      for (Eigen::Index j = 0; j < 4; ++j) EXPECT_NEAR(c.P(i, j), i == j ? 0.0 : 1.0 / 3.0, 1e-12);
    }
  }
}

TEST(Affinities, SearchHitsThePerplexity) {
  const MatrixXd X = random_points(50, 8, 4);
  for (double target : {5.0, 10.0, 30.0}) {
    const auto c = conditional_affinities(X, target);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      double h = 0.0;
      for (Eigen::Index j = 0; j < X.rows(); ++j) {
        const double p = c.P(i, j);
        if (p > 0.0) h -= p * std::log2(p);
      }
      EXPECT_LE(std::abs(std::exp2(h) - target), 1e-5) << "row " << i << " target " << target;
      EXPECT_NEAR(c.P.row(i).sum(), 1.0, 1e-12);
    }
  }
}

TEST(Affinities, DuplicatePointsStayFinite) {
  MatrixXd X = random_points(20, 3, 5);
  X.row(1) = X.row(0);
  X.row(2) = X.row(0);
  const auto A = pairwise_affinities(X, 5.0);
  EXPECT_TRUE(A.P.allFinite());
  EXPECT_NEAR(A.P.sum(), 1.0, 1e-9);
}

TEST(Affinities, RejectsTooFewPointsAndLargePerplexity) {
  EXPECT_THROW(pairwise_affinities(random_points(3, 2, 1), 1.0), InsufficientDataError);
  EXPECT_THROW(pairwise_affinities(random_points(10, 2, 1), 10.0), ParameterError);
}

TEST(Kl, SelfDivergenceIsZero) {
  Rng rng(6);
  const MatrixXd P = random_stochastic(12, rng);
  EXPECT_EQ(kl_divergence(P, P), 0.0);
}

TEST(Kl, GibbsInequality) {
  Rng rng(7);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(20));
    EXPECT_GE(kl_divergence(random_stochastic(n, rng), random_stochastic(n, rng)), 0.0);
  }
}

TEST(Kl, MatchesLoopOracle) {
  Rng rng(8);
  const MatrixXd P = random_stochastic(15, rng);
  const MatrixXd Q = random_stochastic(15, rng);
  double want = 0.0;
  for (int i = 0; i < 15; ++i) {
    for (int j = 0; j < 15; ++j) {
      if (i != j) want += P(i, j) * (std::log(P(i, j)) - std::log(Q(i, j)));
    }
  }
  EXPECT_NEAR(kl_divergence(P, Q), want, 1e-12);
  EXPECT_THROW(kl_divergence(P, MatrixXd::Zero(3, 3)), ShapeError);
}

TEST(LowDim, StudentKernelOracle) {
  const MatrixXd Y = random_points(9, 2, 9);
  const MatrixXd Q = low_dim_affinities(Y);
  double z = 0.0;
  for (int i = 0; i < 9; ++i) {
    for (int j = 0; j < 9; ++j) {
      if (i != j) z += 1.0 / (1.0 + (Y.row(i) - Y.row(j)).squaredNorm());
    }
  }
  for (int i = 0; i < 9; ++i) {
    for (int j = 0; j < 9; ++j) {
      const double want = i == j ? 0.0 : 1.0 / (1.0 + (Y.row(i) - Y.row(j)).squaredNorm()) / z;
      EXPECT_NEAR(Q(i, j), want, 1e-15);
    }
  }
}

TEST(Gradient, MatchesFiniteDifferences) {
  const MatrixXd P = pairwise_affinities(random_points(12, 5, 10), 4.0).P;
  MatrixXd Y = random_points(12, 2, 11);
  const MatrixXd G = tsne_gradient(P, Y);
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < Y.size(); ++i) {
    const double saved = Y.data()[i];
    Y.data()[i] = saved + h;
    const double up = tsne_objective(P, Y);
    Y.data()[i] = saved - h;
    const double down = tsne_objective(P, Y);
    Y.data()[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = G.data()[i];
    EXPECT_LE(std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8}), 1e-4);
  }
}

TEST(Gradient, MatchesClosedForm) {
  const MatrixXd P = pairwise_affinities(random_points(10, 3, 12), 3.0).P;
  const MatrixXd Y = random_points(10, 2, 13);
  const MatrixXd Q = low_dim_affinities(Y);
  const MatrixXd G = tsne_gradient(P, Y);
  for (int i = 0; i < 10; ++i) {
    Eigen::RowVector2d want = Eigen::RowVector2d::Zero();
    for (int j = 0; j < 10; ++j) {
      if (i == j) continue;
      want += 4.0 * (P(i, j) - Q(i, j)) * (Y.row(i) - Y.row(j)) / (1.0 + (Y.row(i) - Y.row(j)).squaredNorm());
    }
    EXPECT_NEAR((G.row(i) - want).cwiseAbs().maxCoeff(), 0.0, 1e-12);
  }
}

TEST(Tsne, TwoPointsHaveNothingToFix) {
  TsneConfig cfg;
  cfg.iterations = 200;
  const Embedding e = tsne(random_points(2, 8, 14), cfg);
  ASSERT_EQ(e.kl_history.size(), 200u);
  for (double kl : e.kl_history) EXPECT_NEAR(kl, 0.0, 1e-12);
  EXPECT_TRUE(e.Y.allFinite());
  EXPECT_GT((e.Y.row(0) - e.Y.row(1)).norm(), 0.0);
}

TEST(Tsne, ClustersSeparateAndKlFallsAfterExaggeration) {
  const auto [X, cls] = testing::two_clusters(25, 15);
  TsneConfig cfg;
  cfg.perplexity = 10.0;
  cfg.seed = 16;
  const Embedding e = tsne(X, cfg);
  ASSERT_EQ(e.kl_history.size(), 1000u);
  EXPECT_LT(e.kl_history[999], e.kl_history[250]);
  EXPECT_TRUE(testing::linearly_separable(e.Y, cls));
  EXPECT_LE(e.Y.colwise().mean().cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Tsne, Deterministic) {
  const MatrixXd X = random_points(30, 8, 17);
  TsneConfig cfg;
  cfg.perplexity = 8.0;
  cfg.iterations = 300;
  cfg.seed = 3;
  const Embedding a = tsne(X, cfg);
  const Embedding b = tsne(X, cfg);
  EXPECT_EQ(a.Y, b.Y);
  EXPECT_EQ(a.kl_history, b.kl_history);
}

TEST(Tsne, NonFiniteStepIsDivergence) {
  TsneConfig cfg;
  cfg.perplexity = 3.0;
  cfg.learning_rate = std::numeric_limits<double>::quiet_NaN();
  try {
    tsne(random_points(10, 3, 18), cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), 1u);
  }
}

TEST(MapOutput, OneRowAndOneCirclePerPoint) {
  Embedding e;
  e.Y = random_points(7, 2, 19);
  for (int i = 0; i < 7; ++i) {
    e.labels.push_back(static_cast<Label>(i % 3));
    e.timestamps.push_back(from_unix_seconds(1709280000 + 10 * i));
  }
  const std::string csv = format_embedding_csv(e);
  EXPECT_EQ(count(csv, "\n"), 8u);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "x,y,label,timestamp");
  EXPECT_NE(csv.find(",potential,2024-03-01T08:00:10Z"), std::string::npos);
  const std::string svg = render_map_svg(e);
  EXPECT_EQ(count(svg, "<circle"), 7u);
  EXPECT_EQ(count(svg, "<rect"), 3u);
  // Anomalies are painted last.
  EXPECT_GT(svg.rfind(std::string(label_colour(Label::HighScore))), svg.rfind("#9e9e9e\"/>\n"));
}

TEST(MapOutput, EmptyEmbeddingStillHasALegend) {
  const std::string svg = render_map_svg(Embedding{});
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(count(svg, "<circle"), 0u);
  EXPECT_EQ(count(svg, "<rect"), 3u);
  for (const char* name : {"Normal", "Potential Anomaly", "High-Score Anomaly"}) EXPECT_NE(svg.find(name), std::string::npos);
  EXPECT_EQ(format_embedding_csv(Embedding{}), "x,y,label,timestamp\n");
}

TEST(MapOutput, ExportWritesBothFiles) {
  testing::TempDir dir("map");
  Embedding e;
  e.Y = random_points(3, 2, 20);
  export_map(e, dir.path());
  EXPECT_EQ(read_text_file(dir / "embedding.csv"), format_embedding_csv(e));
  EXPECT_EQ(read_text_file(dir / "embedding.svg"), render_map_svg(e));
}

TEST(Timeline, DrawsThresholdsAndFlags) {
  std::vector<AnomalyVerdict> v;
  std::vector<TruthEntry> truth;
  for (int i = 0; i < 50; ++i) {
    const double score = i == 20 ? 0.08 : (i == 30 ? 0.03 : 0.001);
    v.push_back({from_unix_seconds(1709280000 + 10 * i), score, classify(score, {0.02, 0.05})});
    truth.push_back({v.back().timestamp, i >= 18 && i <= 22});
  }
  const std::string svg = render_timeline_svg(v, {0.02, 0.05}, truth);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
  EXPECT_EQ(count(svg, "<circle"), 2u);
  EXPECT_GE(count(svg, "stroke-dasharray"), 2u);
  EXPECT_NE(render_timeline_svg({}, {0.02, 0.05}).find("</svg>"), std::string::npos);
}

}  // namespace
}  // namespace vad
