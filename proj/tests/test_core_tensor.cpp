#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <random>
#include <string>

#include "oracles.hpp"
#include "refsr/refsr.hpp"

using namespace refsr;
namespace fs = std::filesystem;

namespace {

fs::path tmp_path(const std::string& name) {
  fs::path dir = fs::path(REFSR_TEST_TMP) / "core";
  fs::create_directories(dir);
  return dir / name;
}

FeatureMap ramp(std::size_t h, std::size_t w) {
  FeatureMap f(1, h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) f.at(0, y, x) = static_cast<double>(x + y);
  }
  return f;
}

}  // namespace

TEST(FeatureMapType, RejectsNonFiniteAndBadLength) {
  EXPECT_THROW(FeatureMap(1, 2, 2, std::vector<double>(3, 0.0)), GeometryError);
  EXPECT_THROW(FeatureMap(1, 1, 2, std::vector<double>{0.0, std::nan("")}), ParameterError);
  EXPECT_THROW(FeatureMap(0, 2, 2), GeometryError);
  FeatureMap f(2, 3, 4, 0.5);
  EXPECT_EQ(f.size(), 24u);
}

TEST(Geometry, CenterOfEightSquare) {
  const auto g = ImageGeometry::make(2, 8, 8);
  EXPECT_EQ(g.center_h, 4u);
  EXPECT_EQ(g.offset_row, 2u);
  EXPECT_EQ(g.offset_col, 2u);
  const FeatureMap img = oracle::random_map(3, 8, 8, 1);
  const FeatureMap c = crop_center(img, g);
  ASSERT_EQ(c.channels(), 3u);
  ASSERT_EQ(c.height(), 4u);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::size_t y = 0; y < 4; ++y) {
      for (std::size_t x = 0; x < 4; ++x) EXPECT_EQ(c.at(ch, y, x), img.at(ch, y + 2, x + 2));
    }
  }
}

TEST(Geometry, ConstantCropIsConstant) {
  const FeatureMap img(1, 12, 12, 0.3);
  const FeatureMap c = crop_center(img, ImageGeometry::make(3, 12, 12));
  for (double v : c.data()) EXPECT_EQ(v, 0.3);
}

TEST(Geometry, RampCropZoomThree) {
  const FeatureMap c = crop_center(ramp(6, 6), ImageGeometry::make(3, 6, 6));
  ASSERT_EQ(c.height(), 2u);
  EXPECT_EQ(c.at(0, 0, 0), 4.0);
  EXPECT_EQ(c.at(0, 0, 1), 5.0);
  EXPECT_EQ(c.at(0, 1, 0), 5.0);
  EXPECT_EQ(c.at(0, 1, 1), 6.0);
}

TEST(Geometry, Violations) {
  EXPECT_THROW(ImageGeometry::make(3, 8, 9), GeometryError);
  // 10 - 5 = 5 is odd, so no integer centered offset exists.
  EXPECT_THROW(ImageGeometry::make(2, 10, 10), GeometryError);
  EXPECT_THROW(crop_center(FeatureMap(1, 8, 8), ImageGeometry::make(2, 12, 12)), GeometryError);
}

TEST(Geometry, CropDimsForRandomValidGeometries) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    const std::size_t d = 2 + rng() % 3;
    const std::size_t h = 2 * (1 + rng() % 6), w = 2 * (1 + rng() % 6);
    ImageGeometry g;
    try {
      g = ImageGeometry::make(d, d * h, d * w);
    } catch (const GeometryError&) {
      continue;
    }
    const FeatureMap c = crop_center(FeatureMap(1, d * h, d * w), g);
    EXPECT_EQ(c.height(), h);
    EXPECT_EQ(c.width(), w);
    EXPECT_EQ(g.offset_row, (d * h - h) / 2);
  }
}

TEST(Patchify, TilingAndSliding) {
  const FeatureMap f = ramp(4, 4);
  const PatchGrid g = patchify(f, 2, 2);
  EXPECT_EQ(g.rows, 2u);
  EXPECT_EQ(g.cols, 2u);
  EXPECT_EQ(g.count(), 4u);
  EXPECT_EQ(g.dim(), 4u);
  const PatchGrid s = patchify(f, 2, 1);
  EXPECT_EQ(s.count(), 9u);
  // Patch (1,1) of the sliding grid starts at pixel (1,1).
  EXPECT_EQ(s.patch(4)[0], 2.0);
  EXPECT_EQ(s.patch(4)[3], 4.0);
}

TEST(Patchify, RowsFormulaAndErrors) {
  const FeatureMap f(2, 7, 9);
  const PatchGrid g = patchify(f, 3, 2);
  EXPECT_EQ(g.rows, (7 - 3) / 2 + 1);
  EXPECT_EQ(g.cols, (9 - 3) / 2 + 1);
  EXPECT_EQ(g.dim(), 18u);
  EXPECT_THROW(patchify(f, 8, 1), GeometryError);
  EXPECT_THROW(patchify(f, 2, 0), ParameterError);
}

TEST(Patchify, RoundtripIsExact) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t p = 1 + seed % 4;
    const FeatureMap f = oracle::random_map(1 + seed % 3, p * (1 + seed % 5), p * (2 + seed % 3), seed);
    EXPECT_EQ(unpatchify(patchify(f, p, p)), f);
  }
}

TEST(Resize, ConstantsPreservedForAllModes) {
  const FeatureMap f(2, 5, 7, 5.0);
  for (Interp m : {Interp::kNearest, Interp::kBilinear, Interp::kBicubic}) {
    const FeatureMap r = resize(f, 10, 14, m);
    for (double v : r.data()) EXPECT_EQ(v, 5.0);
    const FeatureMap s = resize(f, 3, 4, m);
    for (double v : s.data()) EXPECT_EQ(v, 5.0);
  }
}

TEST(Resize, NearestReplicates) {
  const FeatureMap f(1, 1, 2, std::vector<double>{0.0, 1.0});
  const FeatureMap r = resize(f, 1, 4, Interp::kNearest);
  EXPECT_EQ(std::vector<double>(r.data().begin(), r.data().end()), (std::vector<double>{0, 0, 1, 1}));
}

TEST(Resize, BilinearHalfPixelCenters) {
  const FeatureMap f(1, 1, 2, std::vector<double>{0.0, 1.0});
  const FeatureMap r = resize(f, 1, 4, Interp::kBilinear);
  const double expect[4] = {0.0, 0.25, 0.75, 1.0};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(r.data()[i], expect[i], 1e-15);
}

TEST(Resize, BilinearUpThenPoolRecoversSmoothInterior) {
  FeatureMap f(1, 16, 16);
  for (std::size_t y = 0; y < 16; ++y) {
    for (std::size_t x = 0; x < 16; ++x) {
      f.at(0, y, x) = 0.1 + 0.02 * x + 0.03 * y + 1e-6 * static_cast<double>(x * x);
    }
  }
  const FeatureMap back = box_downsample(resize(f, 32, 32, Interp::kBilinear), 2);
  for (std::size_t y = 1; y + 1 < 16; ++y) {
    for (std::size_t x = 1; x + 1 < 16; ++x) EXPECT_NEAR(back.at(0, y, x), f.at(0, y, x), 1e-6);
  }
}

TEST(ImageIo, PgmDecodeValues) {
  const std::string hdr = "P5\n2 2\n255\n";
  Bytes b(hdr.begin(), hdr.end());
  for (std::uint8_t v : {0, 255, 128, 64}) b.push_back(v);
  const FeatureMap f = decode_netpbm(b);
  ASSERT_EQ(f.channels(), 1u);
  EXPECT_EQ(f.at(0, 0, 0), 0.0);
  EXPECT_EQ(f.at(0, 0, 1), 1.0);
  EXPECT_NEAR(f.at(0, 1, 0), 0.50196, 1e-5);
  EXPECT_NEAR(f.at(0, 1, 1), 0.25098, 1e-5);
  EXPECT_EQ(encode_netpbm(f), b);
}

TEST(ImageIo, PnmCommentsAccepted) {
  const std::string hdr = "P5\n# a comment\n1 1 # trailing\n255\n";
  Bytes b(hdr.begin(), hdr.end());
  b.push_back(51);
  EXPECT_DOUBLE_EQ(decode_netpbm(b).at(0, 0, 0), 0.2);
}

TEST(ImageIo, PpmRoundtripBytes) {
  std::mt19937_64 rng(3);
  const std::string hdr = "P6\n5 3\n255\n";
  Bytes b(hdr.begin(), hdr.end());
  for (int i = 0; i < 45; ++i) b.push_back(static_cast<std::uint8_t>(rng()));
  const fs::path p = tmp_path("rt.ppm");
  write_file(p, b);
  const FeatureMap f = load_image(p);
  EXPECT_EQ(f.channels(), 3u);
  const fs::path q = tmp_path("rt2.ppm");
  save_image(f, q);
  EXPECT_EQ(read_file(q), b);
}

TEST(ImageIo, PngRoundtripOfQuantizedValues) {
  FeatureMap f(3, 4, 6);
  std::mt19937_64 rng(9);
  for (double& v : f.data()) v = static_cast<double>(rng() % 256) / 255.0;
  const fs::path p = tmp_path("rt.png");
  save_image(f, p);
  EXPECT_EQ(load_image(p), f);
  FeatureMap g(1, 3, 3, 128.0 / 255.0);
  save_image(g, tmp_path("g.png"));
  EXPECT_EQ(load_image(tmp_path("g.png")), g);
}

TEST(ImageIo, Errors) {
  const std::string trunc = "P5\n2";
  EXPECT_THROW(decode_netpbm(Bytes(trunc.begin(), trunc.end())), FormatError);
  const std::string short_raster = "P5\n2 2\n255\n\x01";
  EXPECT_THROW(decode_netpbm(Bytes(short_raster.begin(), short_raster.end())), FormatError);
  const fs::path p = tmp_path("junk.bin");
  write_file(p, Bytes{'X', 'Y', 'Z'});
  EXPECT_THROW(load_image(p), FormatError);
  EXPECT_THROW(load_image(tmp_path("missing.png")), FormatError);
  EXPECT_THROW(save_image(FeatureMap(3, 2, 2), tmp_path("x.pgm")), GeometryError);
}

TEST(Fmap, OneValueLayout) {
  const Bytes b = encode_feature(FeatureMap(1, 1, 1, 1.0));
  ASSERT_EQ(b.size(), 20u);
  EXPECT_EQ(std::memcmp(b.data(), "FMAP", 4), 0);
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[16], 0x00);
  EXPECT_EQ(b[17], 0x00);
  EXPECT_EQ(b[18], 0x80);
  EXPECT_EQ(b[19], 0x3F);
}

TEST(Fmap, RoundtripBitExact) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 10; ++t) {
    FeatureMap f = oracle::random_map(1 + t % 4, 1 + t, 3 + t, 100 + t, -5.0, 5.0);
    // Float payload: only float-representable values survive a dump bit-exactly.
    for (double& v : f.data()) v = static_cast<float>(v);
    const fs::path p = tmp_path("f" + std::to_string(t) + ".fmap");
    dump_feature(f, p);
    EXPECT_EQ(load_feature(p), f);
    EXPECT_EQ(encode_feature(load_feature(p)), read_file(p));
  }
}

TEST(Fmap, SizeMismatchAndMagic) {
  Bytes b = encode_feature(FeatureMap(2, 2, 2, 0.5));
  b.resize(b.size() - 4);  // header says 8 floats, 7 present
  EXPECT_THROW(decode_feature(b), FormatError);
  Bytes c = encode_feature(FeatureMap(1, 1, 1));
  c[0] = 'X';
  EXPECT_THROW(decode_feature(c), FormatError);
}
