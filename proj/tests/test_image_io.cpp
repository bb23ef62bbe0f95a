#include <gtest/gtest.h>

#include <random>
#include <string>

#include "yolospp/errors.hpp"
#include "yolospp/image_io.hpp"

namespace yolospp {
namespace {

std::vector<std::byte> bytes_of(const std::string& s) {
  std::vector<std::byte> out;
  for (char c : s) out.push_back(static_cast<std::byte>(c));
  return out;
}

TEST(Ppm, EncodeDecodeRoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> level(0, 255);
  Tensor img = Tensor::feature_map(3, 7, 5);
  for (auto& v : img.data()) v = Real(level(rng)) / 255;
  const auto encoded = encode_ppm(img);
  EXPECT_EQ(decode_ppm(encoded), img);
  EXPECT_EQ(encode_ppm(decode_ppm(encoded)), encoded);
}

TEST(Ppm, HeaderCommentsAndSixteenBit) {
  auto bytes = bytes_of("P6\n# comment\n1 1\n65535\n");
  for (int b : {0xff, 0xff, 0x00, 0x00, 0x80, 0x00}) bytes.push_back(static_cast<std::byte>(b));
  const Tensor img = decode_ppm(bytes);
  EXPECT_EQ(img.at(0, 0, 0), 1);
  EXPECT_EQ(img.at(1, 0, 0), 0);
  EXPECT_NEAR(img.at(2, 0, 0), 32768.0 / 65535.0, 1e-12);
}

TEST(Ppm, Rejections) {
  EXPECT_THROW(decode_ppm(bytes_of("P3\n1 1\n255\n")), ParseError);
  EXPECT_THROW(decode_ppm(bytes_of("P6\n2 2\n255\nabc")), ParseError);
  EXPECT_THROW(decode_ppm(bytes_of("P6\n0 2\n255\n")), ParseError);
  try {
    decode_ppm(bytes_of("P6\n\n2 x\n255\n"));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(Ppm, EncodeClampsAndRejectsWrongChannels) {
  Tensor img = Tensor::feature_map(3, 1, 1);
  img.at(0, 0, 0) = 2;
  img.at(1, 0, 0) = -1;
  img.at(2, 0, 0) = Real(0.5);
  const auto bytes = encode_ppm(img);
  EXPECT_EQ(bytes[bytes.size() - 3], std::byte{255});
  EXPECT_EQ(bytes[bytes.size() - 2], std::byte{0});
  EXPECT_EQ(bytes[bytes.size() - 1], std::byte{128});
  EXPECT_THROW(encode_ppm(Tensor::feature_map(1, 2, 2)), ShapeError);
}

TEST(Render, OutlineIsTwoPixelsInsideTheBox) {
  Tensor img = Tensor::feature_map(3, 20, 20);
  const Color red = class_palette()[0];
  draw_box(img, Box::from_corners(4, 4, 14, 12), red);
  EXPECT_EQ(img.at(0, 4, 4), red[0]);
  EXPECT_EQ(img.at(0, 5, 8), red[0]);
  EXPECT_EQ(img.at(0, 11, 13), red[0]);
  EXPECT_EQ(img.at(0, 6, 8), 0);
  EXPECT_EQ(img.at(0, 3, 8), 0);
  EXPECT_EQ(img.at(0, 12, 8), 0);
  draw_box(img, {0, 0, 10, 10}, red);
  draw_box(img, {100, 100, 10, 10}, red);
}

TEST(Render, PaletteColorsByClass) {
  Tensor img = Tensor::feature_map(3, 10, 10);
  const std::vector<Detection> d{{"x", 11, 0.5, Box::from_corners(0, 0, 10, 10)}};
  render_detections(img, d);
  const Color blue = class_palette()[1];
  EXPECT_EQ(img.at(0, 0, 0), blue[0]);
  EXPECT_EQ(img.at(2, 0, 0), blue[2]);
}

}  // namespace
}  // namespace yolospp
