#include <gtest/gtest.h>

#include "kcmp/error.hpp"
#include "kcmp/probes.hpp"
#include "kcmp/raster.hpp"
#include "kcmp/rng.hpp"

using namespace kcmp;

namespace {

RgbImage noise_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  RgbImage img(w, h);
  for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(rng.uniform_below(256));
  return img;
}

Bitmap rect_mask(int w, int h, BoundingBox b) {
  Bitmap m(w, h);
  for (int y = b.y; y < b.y + b.h; ++y)
    for (int x = b.x; x < b.x + b.w; ++x) m.set(x, y);
  return m;
}

}  // namespace

TEST(Bitmap, CountAndBBox) {
  auto m = rect_mask(10, 8, {2, 3, 4, 2});
  EXPECT_EQ(m.count(), 8u);
  EXPECT_EQ(m.bbox(), (BoundingBox{2, 3, 4, 2}));
  EXPECT_EQ(Bitmap(5, 5).bbox(), (BoundingBox{0, 0, 0, 0}));
}

TEST(Rle, RoundTripRandomMasks) {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    Bitmap m(13, 7);
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 13; ++x) m.set(x, y, rng.bernoulli(0.4));
    EXPECT_EQ(decode_rle(13, 7, encode_rle(m)), m);
  }
}

TEST(Rle, StartsWithOffRun) {
  Bitmap m(3, 1);
  m.set(0, 0);
  const auto rle = encode_rle(m);
  ASSERT_GE(rle.size(), 2u);
  EXPECT_EQ(rle[0], 0u);
  EXPECT_EQ(rle[1], 1u);
}

TEST(Rle, RejectsBadCoverage) {
  EXPECT_THROW(decode_rle(2, 2, {1, 1}), ProtocolError);
  EXPECT_THROW(decode_rle(2, 2, {3, 3}), ProtocolError);
}

TEST(Png, RoundTripIsLossless) {
  const auto img = noise_image(17, 9, 1);
  const auto png = encode_png(img);
  EXPECT_EQ(decode_png(png), img);
  EXPECT_EQ(decode_image(png), img);
  EXPECT_EQ(encode_png(img), png);  // deterministic bytes
}

TEST(Jpeg, KeepsDimensions) {
  const auto img = noise_image(31, 23, 2);
  const auto jpg = encode_jpeg(img, 50);
  const auto back = decode_image(jpg);
  EXPECT_EQ(back.width(), 31);
  EXPECT_EQ(back.height(), 23);
}

TEST(Image, DecodeRejectsGarbage) { EXPECT_THROW(decode_image("not an image"), InvalidInput); }

TEST(Crop, CopiesRectangle) {
  const auto img = noise_image(10, 10, 3);
  const auto c = crop(img, {2, 3, 4, 5});
  EXPECT_EQ(c.width(), 4);
  EXPECT_EQ(c.height(), 5);
  EXPECT_EQ(c.at(0, 0), img.at(2, 3));
  EXPECT_EQ(c.at(3, 4), img.at(5, 7));
  EXPECT_THROW(crop(img, {8, 8, 4, 4}), InvalidInput);
}

TEST(MaskObject, FullMaskIsAllBlack) {
  const auto img = noise_image(6, 4, 5);
  const auto region = make_region("o0", img, rect_mask(6, 4, {0, 0, 6, 4}));
  const auto out = mask_object(img, region);
  for (auto b : out.bytes()) EXPECT_EQ(b, 0);
}

TEST(MaskObject, ComplementUntouchedAndNineBlack) {
  RgbImage img(10, 10, {200, 100, 50});
  const auto region = make_region("o0", img, rect_mask(10, 10, {4, 4, 3, 3}));
  const auto out = mask_object(img, region);
  int black = 0;
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) {
      if (region.mask.test(x, y))
        EXPECT_EQ(out.at(x, y), kBlack);
      else
        EXPECT_EQ(out.at(x, y), img.at(x, y));
      black += out.at(x, y) == kBlack;
    }
  EXPECT_EQ(black, 9);
}

TEST(MaskObject, DimensionMismatch) {
  RgbImage img(10, 10);
  auto region = make_region("o0", img, rect_mask(10, 10, {1, 1, 2, 2}));
  EXPECT_THROW(mask_object(RgbImage(9, 10), region), InvalidInput);
}

TEST(Luma, Bt601) {
  // 0.299 * 255 = 76.245
  EXPECT_EQ(luma601({255, 0, 0}), 76);
  EXPECT_EQ(luma601({0, 255, 0}), 150);
  EXPECT_EQ(luma601({0, 0, 255}), 29);
  EXPECT_EQ(luma601({255, 255, 255}), 255);
  EXPECT_EQ(luma601({128, 128, 128}), 128);
}

TEST(GrayscaleWithBox, OutlinePixelCountOn20x10) {
  RgbImage img(40, 30, {10, 200, 30});
  const auto region = make_region("o0", img, rect_mask(40, 30, {5, 7, 20, 10}));
  const auto out = grayscale_with_box(img, region);
  // Outer 20x10 minus inner (20-6)x(10-6).
  const int expected = 20 * 10 - 14 * 4;
  int red = 0;
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 40; ++x) {
      const auto c = out.at(x, y);
      if (c == kRed)
        ++red;
      else
        EXPECT_TRUE(c.r == c.g && c.g == c.b);
    }
  EXPECT_EQ(red, expected);
  EXPECT_EQ(expected, 144);
}

TEST(GrayscaleWithBox, GrayImageUnchangedOffOutline) {
  RgbImage img(12, 12, {90, 90, 90});
  const auto region = make_region("o0", img, rect_mask(12, 12, {3, 3, 8, 8}));
  const auto out = grayscale_with_box(img, region);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x)
      if (out.at(x, y) != kRed) EXPECT_EQ(out.at(x, y), img.at(x, y));
}

TEST(GrayscaleWithBox, PureRedOffOutline) {
  RgbImage img(20, 20, {255, 0, 0});
  const auto region = make_region("o0", img, rect_mask(20, 20, {10, 10, 8, 8}));
  const auto out = grayscale_with_box(img, region);
  EXPECT_EQ(out.at(0, 0), (Rgb{76, 76, 76}));
}

TEST(Region, EdgeTouchingMaskHasClippedBBox) {
  RgbImage img(10, 10, {1, 2, 3});
  const auto region = make_region("o0", img, rect_mask(10, 10, {6, 0, 4, 10}));
  EXPECT_EQ(region.bbox, (BoundingBox{6, 0, 4, 10}));
  EXPECT_EQ(region.crop.width(), 4);
  EXPECT_THROW(make_region("o1", img, Bitmap(10, 10)), InvalidInput);
}
