#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cpsl/config.hpp"
#include "cpsl/errors.hpp"
#include "cpsl/imageio.hpp"
#include "support.hpp"

using namespace cpsl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("cpsl_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("png round trips") {
    TempDir dir("png");
    for (int bits : {8, 16}) {
      for (int ch : {1, 3, 4}) {
        PngData p{5, 3, ch, bits, {}};
        for (int i = 0; i < 5 * 3 * ch; ++i) p.samples.push_back(static_cast<std::uint16_t>((i * 4099) % (bits == 8 ? 256 : 65536)));
        const fs::path f = dir.path / "a.png";
        writePng(f, p);
        const PngData q = readPng(f);
        CHECK(q.width == 5);
        CHECK(q.channels == ch);
        CHECK(q.bitDepth == bits);
        CHECK(q.samples == p.samples);
      }
    }
    CHECK_THROWS_AS(readPng(dir.path / "missing.png"), Error);
  }

  TEST_CASE("float images round to bytes") {
    TempDir dir("img");
    ImageF img(4, 2, 3, 0.0f);
    for (std::size_t i = 0; i < img.storage().size(); ++i) img.storage()[i] = static_cast<float>(i) / 23.0f;
    writeImage(dir.path / "i.png", img);
    const ImageF back = readImage(dir.path / "i.png");
    for (std::size_t i = 0; i < img.storage().size(); ++i) CHECK(std::abs(back.storage()[i] - img.storage()[i]) <= 0.5f / 255.0f + 1e-6f);
    CHECK(toByte(0.5f / 255.0f) == 0);  // half to even
    CHECK(toByte(1.5f / 255.0f) == 2);
    CHECK(toByte(2.0f) == 255);
  }

  TEST_CASE("flo round trip") {
    TempDir dir("flo");
    PlaneF flow(3, 2, 2, 0.0f);
    for (std::size_t i = 0; i < flow.storage().size(); ++i) flow.storage()[i] = 0.25f * static_cast<float>(i) - 1.0f;
    writeFlo(dir.path / "f.flo", flow);
    CHECK(readFlo(dir.path / "f.flo").storage() == flow.storage());
    std::ofstream(dir.path / "bad.flo") << "nope";
    CHECK_THROWS_AS(readFlo(dir.path / "bad.flo"), Error);
  }

  TEST_CASE("sequence round trip") {
    TempDir dir("seq");
    const auto scene = SyntheticScene::twoPlane(40, 30);
    const auto gts = renderSequence(scene, 2);
    std::vector<FrameInputs> frames;
    for (const auto& g : gts) frames.push_back(g.inputs());
    writeSequence(dir.path, scene.camera, frames, 0.001, {MotionField::zero(40, 30), MotionField::constant(40, 30, 1.0, 0.5)});
    const Sequence s = loadSequence(dir.path);
    REQUIRE(s.frames.size() == 2);
    CHECK(s.camera.fx() == doctest::Approx(scene.camera.fx()));
    CHECK(s.motions.size() == 2);
    CHECK(s.motions[1].flow.at(3, 3, 0) == doctest::Approx(1.0));
    for (std::size_t i = 0; i < frames[0].depth.values.pixelCount(); ++i) {
      CHECK(std::abs(s.frames[0].depth.values.data()[i] - frames[0].depth.values.data()[i]) <= 0.0005f + 1e-6f);
      CHECK(s.frames[1].semantics.instance.data()[i] == frames[1].semantics.instance.data()[i]);
    }
    CHECK_THROWS_AS(loadSequence(dir.path / "nothing"), InputError);
  }

  TEST_CASE("config") {
    Config c;
    c.merge(R"({"energy": {"K": 3}, "dps": {"wMax": 12.0}, "render": {"filter": "nearest"}})");
    CHECK(c.decompose.energy.K == 3);
    CHECK(c.render.dpsParams.wMax == 12.0);
    CHECK(c.render.filter == Filter::Nearest);
    Config d;
    d.merge(c.dump());
    CHECK(d.dump() == c.dump());
    CHECK_THROWS_AS(c.merge(R"({"energy": {"kk": 3}})"), InputError);
    CHECK_THROWS_AS(c.merge(R"({"energy": {"K": "three"}})"), InputError);
    CHECK_THROWS_AS(c.merge("{not json"), InputError);
  }
}
