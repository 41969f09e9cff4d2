#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "refsr/refsr.hpp"

using namespace refsr;

namespace {

FeatureMap offset(const FeatureMap& f, double d) {
  FeatureMap g = f;
  for (double& v : g.data()) v += d;
  return g;
}

DomainEmbedding noisy_pair_embedding(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.2, 0.8);
  std::normal_distribution<double> g(0.0, 0.05);
  FeatureMap b(1, n, n), a(1, n, n);
  for (std::size_t i = 0; i < b.size(); ++i) {
    b.data()[i] = u(rng);
    a.data()[i] = b.data()[i] + g(rng);
  }
  return extract_embedding(a, b);
}

DomainEmbedding random_embedding(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(kEmbeddingSize);
  for (double& x : v) x = u(rng);
  return DomainEmbedding(v);
}

}  // namespace

TEST(Charbonnier, Examples) {
  const FeatureMap x = oracle::random_map(3, 8, 8, 1);
  EXPECT_EQ(charbonnier(x, x), 1e-6);
  EXPECT_NEAR(charbonnier(x, offset(x, 3e-3)), 3.000000167e-3, 1e-12);
  double prev = 0.0;
  for (double d : {0.0, 1e-4, 1e-3, 1e-2, 0.1}) {
    const double c = charbonnier(x, offset(x, d));
    EXPECT_GT(c, prev);
    EXPECT_GE(c, 1e-6);
    prev = c;
  }
  EXPECT_THROW(charbonnier(x, FeatureMap(3, 8, 7)), GeometryError);
}

TEST(Charbonnier, ApproachesL1) {
  const FeatureMap x = oracle::random_map(2, 10, 10, 2), y = oracle::random_map(2, 10, 10, 3);
  double l1 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) l1 += std::abs(x.data()[i] - y.data()[i]);
  l1 /= static_cast<double>(x.size());
  EXPECT_NEAR(charbonnier(x, y, 1e-12), l1, 1e-9);
}

TEST(TotalLoss, WeightsAndErrors) {
  EXPECT_EQ(total_loss(0, 0, 0), 0.0);
  EXPECT_NEAR(total_loss(1, 1, 0.001), 2.01, 1e-12);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int t = 0; t < 100; ++t) {
    const double a = u(rng), b = u(rng), c = u(rng);
    EXPECT_EQ(total_loss(a, b, c), 1.0 * a + 0.01 * b + 1000.0 * c);
  }
  EXPECT_NEAR(total_loss(2, 0, 0) - total_loss(1, 0, 0), 1.0, 1e-15);
  EXPECT_NEAR(total_loss(0, 2, 0) - total_loss(0, 1, 0), 0.01, 1e-15);
  EXPECT_THROW(total_loss(-1, 0, 0), ParameterError);
  EXPECT_THROW(total_loss(0, std::nan(""), 0), ParameterError);
}

TEST(Psnr, Examples) {
  const FeatureMap x(3, 16, 16, 0.5);
  EXPECT_TRUE(std::isinf(psnr(x, x)));
  EXPECT_NEAR(psnr(x, FeatureMap(3, 16, 16, 0.6)), 20.0, 1e-9);
  EXPECT_NEAR(psnr(x, FeatureMap(3, 16, 16, 0.51)), 40.0, 1e-9);
  EXPECT_THROW(psnr(x, FeatureMap(1, 16, 16)), GeometryError);
  double prev = std::numeric_limits<double>::infinity();
  for (double amp : {0.001, 0.01, 0.05, 0.2}) {
    const double p = psnr(x, offset(x, amp));
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Ssim, Examples) {
  const FeatureMap x = oracle::random_map(3, 24, 20, 5), y = oracle::random_map(3, 24, 20, 6);
  EXPECT_NEAR(ssim(x, x), 1.0, 1e-9);
  EXPECT_DOUBLE_EQ(ssim(x, y), ssim(y, x));
  const double c1 = 1e-4;
  EXPECT_NEAR(ssim(FeatureMap(1, 11, 11, 0.0), FeatureMap(1, 11, 11, 1.0)), c1 / (1.0 + c1), 1e-12);
  EXPECT_THROW(ssim(FeatureMap(1, 10, 30), FeatureMap(1, 10, 30)), GeometryError);
  const double s = ssim(x, y);
  EXPECT_GE(s, -1.0);
  EXPECT_LE(s, 1.0);
}

TEST(Ssim, SelfIsOneForArbitraryValues) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const FeatureMap x = oracle::random_map(1, 16, 16, seed, -3.0, 7.0);
    EXPECT_NEAR(ssim(x, x), 1.0, 1e-9);
  }
}

TEST(MetricReport, NullForInfinitePsnr) {
  const FeatureMap x(1, 12, 12, 0.5);
  const nlohmann::json j = evaluate(x, x);
  EXPECT_TRUE(j.at("psnr").is_null());
  EXPECT_DOUBLE_EQ(j.at("ssim").get<double>(), 1.0);
  EXPECT_EQ(j.at("charbonnier").get<double>(), 1e-6);
}

TEST(DomainLoss, Examples) {
  DomainEmbedding zero;
  const DomainEmbedding flat(std::vector<double>(kEmbeddingSize, 1.0 / 1024.0));
  EXPECT_EQ(domain_loss(zero, zero), 0.0);
  EXPECT_DOUBLE_EQ(domain_loss(zero, flat), 1.0);
  std::mt19937_64 rng(7);
  for (int t = 0; t < 100; ++t) {
    const auto a = random_embedding(rng), b = random_embedding(rng), c = random_embedding(rng);
    EXPECT_EQ(domain_loss(a, b), domain_loss(b, a));
    EXPECT_LE(domain_loss(a, c), domain_loss(a, b) + domain_loss(b, c) + 1e-12);
  }
  EXPECT_THROW(DomainEmbedding(std::vector<double>(1023)), GeometryError);
}

TEST(Embedding, IdenticalPairConcentratesInBinZero) {
  const FeatureMap a = oracle::random_map(3, 32, 32, 8);
  const DomainEmbedding z = extract_embedding(a, a);
  EXPECT_EQ(z.values().size(), 1024u);
  EXPECT_EQ(z.histogram()[0], 1.0);
  for (std::size_t i = 1; i < kHistogramBins; ++i) EXPECT_EQ(z.histogram()[i], 0.0);
  for (double v : z.spectrum()) EXPECT_EQ(v, 0.0);
}

TEST(Embedding, NormalizationAndLength) {
  const FeatureMap lr = oracle::random_map(3, 16, 16, 9), hr = oracle::random_map(3, 32, 32, 10);
  const DomainEmbedding z = extract_embedding(lr, hr);
  EXPECT_EQ(z.values().size(), 1024u);
  double h = 0.0, s = 0.0;
  for (double v : z.histogram()) h += v;
  for (double v : z.spectrum()) {
    EXPECT_GE(v, 0.0);
    s += v;
  }
  EXPECT_NEAR(h, 1.0, 1e-12);
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_EQ(extract_embedding(lr, hr).values().size(), 1024u);
  EXPECT_THROW(extract_embedding(FeatureMap(1, 8, 8), FeatureMap(3, 8, 8)), GeometryError);
}

TEST(Embedding, IndependentPairsWithSameNoiseStatisticsAgree) {
  // At 2048x2048 the sampling spread of both halves is well inside the bound.
  const DomainEmbedding a = noisy_pair_embedding(2048, 101), b = noisy_pair_embedding(2048, 202);
  EXPECT_LT(domain_loss(a, b), 0.05);
}

TEST(Modulate, Examples) {
  const FeatureMap f = oracle::random_map(2, 5, 5, 11);
  EXPECT_EQ(modulate(f, {{1, 1}, {0, 0}}), f);
  const FeatureMap flat = modulate(f, {{0, 0}, {0.5, 0.5}});
  for (double v : flat.data()) EXPECT_EQ(v, 0.5);
  EXPECT_DOUBLE_EQ(modulate(FeatureMap(1, 1, 1, 0.2), {{2.0}, {0.1}}).at(0, 0, 0), 0.5);
  EXPECT_THROW(modulate(f, {{1}, {0, 0}}), ParameterError);
}

TEST(Modulate, InverseRoundTrip) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> g(0.2, 4.0), b(-1.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const FeatureMap f = oracle::random_map(3, 4, 4, 300 + t, -2.0, 2.0);
    ModulationParams p{{}, {}}, inv{{}, {}};
    for (int c = 0; c < 3; ++c) {
      const double gamma = (rng() % 2 ? 1 : -1) * g(rng), beta = b(rng);
      p.gamma.push_back(gamma);
      p.beta.push_back(beta);
      inv.gamma.push_back(1.0 / gamma);
      inv.beta.push_back(-beta / gamma);
    }
    const FeatureMap back = modulate(modulate(f, p), inv);
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(back.data()[i], f.data()[i], 1e-6);
  }
}
