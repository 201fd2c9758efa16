#include <doctest.h>

#include <json.hpp>

#include "cpsl/bundle.hpp"
#include "cpsl/errors.hpp"
#include "support.hpp"

using namespace cpsl;

namespace {

std::vector<BundleFrame> sequence(test::Rng& rng, int T) {
  const Camera cam = test::randomCamera(rng, 18, 12, 0.2, 0.5);
  std::vector<BundleFrame> frames;
  for (int t = 0; t < T; ++t) frames.push_back(test::randomBundleFrame(rng, 3, 18, 12, cam, t));
  return frames;
}

}  // namespace

TEST_SUITE("bundle") {
  TEST_CASE("lossless round trip is exact") {
    test::Rng rng(9);
    const auto frames = sequence(rng, 4);
    CHECK(unpackBundle(packBundle(frames)) == frames);
  }

  TEST_CASE("manifest") {
    test::Rng rng(10);
    const auto bytes = packBundle(sequence(rng, 3));
    const auto m = nlohmann::json::parse(readManifest(bytes));
    CHECK(m.at("format") == "cpsl");
    CHECK(m.at("version") == kBundleVersion);
  }

  TEST_CASE("damage is reported") {
    test::Rng rng(11);
    const auto bytes = packBundle(sequence(rng, 2));
    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x40;
    CHECK_THROWS_AS(unpackBundle(flipped), CorruptContainerError);

    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(unpackBundle(magic), CorruptContainerError);

    auto version = bytes;
    version[4] = 9;
    CHECK_THROWS_AS(unpackBundle(version), VersionMismatchError);

    for (std::size_t cut : {std::size_t{2}, std::size_t{6}, std::size_t{20}, bytes.size() - 3}) {
      const std::vector<std::uint8_t> head(bytes.begin(), bytes.begin() + static_cast<long>(cut));
      CHECK_THROWS_AS(unpackBundle(head), BundleError);
    }
    CHECK_THROWS_AS(unpackBundle(std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 3)), TruncatedStreamError);
  }

  TEST_CASE("lossy streams decode close to the source") {
    test::Rng rng(12);
    const auto frames = sequence(rng, 2);
    PackOptions opt;
    opt.codec = CodecId::Lossy;
    const auto back = unpackBundle(packBundle(frames, opt));
    REQUIRE(back.size() == frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t) {
      CHECK(back[t].edc == frames[t].edc);
      CHECK(back[t].type == frames[t].type);
      for (std::size_t k = 0; k < frames[t].layers.size(); ++k) {
        const auto& a = frames[t].layers.layers[k].rgba.storage();
        const auto& b = back[t].layers.layers[k].rgba.storage();
        for (std::size_t i = 3; i < a.size(); i += 4) CHECK(std::abs(a[i] - b[i]) <= 1.0f / 255.0f);
      }
    }
  }

  TEST_CASE("inconsistent frames are rejected") {
    test::Rng rng(13);
    auto frames = sequence(rng, 2);
    frames[1] = test::randomBundleFrame(rng, 3, 10, 12, frames[0].layers.sourceCamera, 1);
    CHECK_THROWS_AS(packBundle(frames), InputError);
  }
}
