#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "refsr/refsr.hpp"

using namespace refsr;

TEST(Features, ConstantImageGivesZeroStructureChannels) {
  const FeatureMap img(3, 16, 16, 0.42);
  const auto raw = raw_pyramid(img);
  for (const auto& lvl : raw) {
    for (std::size_t c = 1; c < 4; ++c) {
      for (double v : lvl.plane(c)) EXPECT_EQ(v, 0.0);
    }
  }
  const FeaturePyramid p = extract_pyramid(img);
  for (const auto& lvl : p.levels) {
    for (double v : lvl.data()) EXPECT_NEAR(v, 0.0, 1e-9);
  }
}

TEST(Features, HorizontalRampGradients) {
  FeatureMap img(1, 12, 12);
  for (std::size_t y = 0; y < 12; ++y) {
    for (std::size_t x = 0; x < 12; ++x) img.at(0, y, x) = 0.05 * static_cast<double>(x);
  }
  const FeatureMap f = raw_features(img);
  for (std::size_t y = 0; y < 12; ++y) {
    for (std::size_t x = 0; x < 12; ++x) {
      EXPECT_EQ(f.at(2, y, x), 0.0);
      EXPECT_NEAR(f.at(1, y, x), 0.05, 1e-15);
    }
  }
}

TEST(Features, LevelDims) {
  const FeaturePyramid p = extract_pyramid(oracle::random_map(3, 32, 32, 4));
  const std::size_t sides[3] = {32, 16, 8};
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(p[i].channels(), 4u);
    EXPECT_EQ(p[i].height(), sides[i]);
    EXPECT_EQ(p[i].width(), sides[i]);
  }
}

TEST(Features, StandardizedChannelsHaveUnitMoments) {
  const FeaturePyramid p = extract_pyramid(oracle::random_map(1, 40, 24, 8));
  for (const auto& lvl : p.levels) {
    for (std::size_t c = 0; c < 4; ++c) {
      double s = 0, s2 = 0;
      for (double v : lvl.plane(c)) {
        s += v;
        s2 += v * v;
      }
      const double n = static_cast<double>(lvl.plane_size());
      EXPECT_NEAR(s / n, 0.0, 1e-10);
      EXPECT_NEAR(s2 / n, 1.0, 1e-10);
    }
  }
}

TEST(Features, Errors) {
  EXPECT_THROW(extract_pyramid(FeatureMap(3, 7, 16)), GeometryError);
  EXPECT_THROW(extract_pyramid(FeatureMap(2, 16, 16)), GeometryError);
}

TEST(Features, PairSharesStatisticsSoCropInteriorMatches) {
  const FeatureMap lr = oracle::random_map(3, 32, 32, 21);
  const auto geom = ImageGeometry::make(2, 32, 32);
  const FeatureMap lrc = crop_center(lr, geom);
  const QueryKeyPyramids qk = extract_pair(lr, lrc);
  const FeatureMap& q = qk.query[0];
  const FeatureMap& k = qk.key[0];
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t y = 1; y + 1 < k.height(); ++y) {
      for (std::size_t x = 1; x + 1 < k.width(); ++x) {
        EXPECT_EQ(k.at(c, y, x), q.at(c, y + geom.offset_row, x + geom.offset_col));
      }
    }
  }
}

TEST(Features, Deterministic) {
  const FeatureMap a = oracle::random_map(3, 24, 24, 2);
  EXPECT_EQ(extract_pyramid(a), extract_pyramid(a));
  const auto p1 = extract_pair(a, a), p2 = extract_pair(a, a);
  EXPECT_EQ(p1.query, p2.query);
  EXPECT_EQ(p1.query, p1.key);
}

TEST(Features, BrightnessShiftLeavesGradientsAlone) {
  const FeatureMap a = oracle::random_map(3, 24, 24, 6, 0.0, 0.5);
  FeatureMap b = a;
  for (double& v : b.data()) v += 0.25;
  const auto fa = raw_features(a), fb = raw_features(b);
  for (std::size_t c : {1u, 2u, 3u}) {
    for (std::size_t i = 0; i < fa.plane_size(); ++i) EXPECT_NEAR(fa.plane(c)[i], fb.plane(c)[i], 1e-12);
  }
  const auto pa = extract_pyramid(a), pb = extract_pyramid(b);
  for (std::size_t l = 0; l < 3; ++l) {
    for (std::size_t i = 0; i < pa[l].size(); ++i) EXPECT_NEAR(pa[l].data()[i], pb[l].data()[i], 1e-9);
  }
}

TEST(Features, ScaleCovariance) {
  const FeatureMap a = oracle::random_map(1, 32, 32, 13, 0.0, 0.3);
  FeatureMap b = a;
  for (double& v : b.data()) v *= 3.0;
  const auto pa = extract_pyramid(a), pb = extract_pyramid(b);
  for (std::size_t l = 0; l < 3; ++l) {
    for (std::size_t i = 0; i < pa[l].size(); ++i) EXPECT_NEAR(pa[l].data()[i], pb[l].data()[i], 1e-6);
  }
  const auto ma = match(patchify(pa[0], 4, 4), patchify(pa[0], 4, 4));
  const auto mb = match(patchify(pb[0], 4, 4), patchify(pb[0], 4, 4));
  EXPECT_EQ(ma.indices, mb.indices);
}

TEST(Features, LuminanceWeights) {
  FeatureMap img(3, 1, 1);
  img.at(0, 0, 0) = 1.0;
  EXPECT_DOUBLE_EQ(luminance(img).at(0, 0, 0), 0.299);
  img.at(0, 0, 0) = 0.0;
  img.at(2, 0, 0) = 1.0;
  EXPECT_DOUBLE_EQ(luminance(img).at(0, 0, 0), 0.114);
}
