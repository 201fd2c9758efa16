#include <doctest.h>

#include "cpsl/codec.hpp"
#include "cpsl/errors.hpp"
#include "cpsl/metrics.hpp"
#include "support.hpp"

using namespace cpsl;

namespace {

ImageF smoothLayer(int w, int h) {
  ImageF img(w, h, 4, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float a = x < w - 4 ? 1.0f : 0.0f;
      float* p = img.pixel(x, y);
      p[0] = a * (0.5f + 0.4f * std::sin(0.3f * x));
      p[1] = a * (0.5f + 0.4f * std::cos(0.2f * y));
      p[2] = a * 0.25f;
      p[3] = a;
    }
  }
  return img;
}

double maxError(const ImageF& a, const ImageF& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.storage().size(); ++i) e = std::max(e, std::abs(double(a.storage()[i]) - b.storage()[i]));
  return e;
}

}  // namespace

TEST_SUITE("codec") {
  TEST_CASE("lossless is bit exact") {
    test::Rng rng(4);
    const auto stack = test::randomStack(rng, 1, 13, 9);
    const auto bytes = encodeLayerImage(stack[0].rgba, CodecId::Lossless, kMaxQuality);
    CHECK(decodeLayerImage(bytes, 13, 9, CodecId::Lossless).storage() == stack[0].rgba.storage());
  }

  TEST_CASE("lossy error shrinks with quality") {
    const ImageF img = smoothLayer(32, 24);
    double prev = 1e9;
    std::size_t prevSize = 0;
    for (int q = kMinQuality; q <= kMaxQuality; ++q) {
      const auto bytes = encodeLayerImage(img, CodecId::Lossy, q);
      const ImageF back = decodeLayerImage(bytes, 32, 24, CodecId::Lossy);
      const double e = maxError(img, back);
      CHECK(e <= prev + 1e-6);
      CHECK(bytes.size() + 16 >= prevSize);
      prev = e;
      prevSize = bytes.size();
      // transparent pixels stay transparent and black
      CHECK(back.at(31, 5, 3) == 0.0f);
      CHECK(back.at(31, 5, 0) == 0.0f);
    }
    CHECK(prev < 0.02);
  }

  TEST_CASE("deflate round trip and size check") {
    std::vector<std::uint8_t> data(1000);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<std::uint8_t>(i * 7 % 13);
    const auto z = deflateBytes(data);
    CHECK(z.size() < data.size());
    CHECK(inflateBytes(z, data.size()) == data);
    CHECK_THROWS_AS(inflateBytes(z, data.size() + 1), CorruptContainerError);
    CHECK_THROWS_AS(decodeLayerImage(z, 4, 4, CodecId::Lossless), CorruptContainerError);
  }

  TEST_CASE("names") {
    CHECK(codecFromName(codecName(CodecId::Lossy)) == CodecId::Lossy);
    CHECK(codecFromName(codecName(CodecId::Lossless)) == CodecId::Lossless);
    CHECK_THROWS_AS(codecFromName("webp"), CodecUnsupportedError);
  }
}
