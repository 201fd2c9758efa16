#include "cpsl/imageio.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include <json.hpp>
#include <png.h>

#include "cpsl/errors.hpp"
#include "cpsl/layergen.hpp"

namespace cpsl {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void pngError(png_structp, png_const_charp msg) { throw IoError(std::string("png: ") + msg); }
void pngWarning(png_structp, png_const_charp) {}

PlaneF loadPlane16(const fs::path& path, int w, int h, double scale) {
  const PngData p = readPng(path);
  if (p.width != w || p.height != h) throw InputError(path.string() + " does not match the image size");
  PlaneF out(w, h, 1, 0.0f);
  const double norm = p.bitDepth == 16 ? 1.0 : 257.0;
  for (std::size_t i = 0; i < out.pixelCount(); ++i) {
    out.data()[i] = static_cast<float>(p.samples[i * static_cast<std::size_t>(p.channels)] * norm * scale);
  }
  return out;
}

PlaneI loadIds(const fs::path& path, int w, int h) {
  const PngData p = readPng(path);
  if (p.width != w || p.height != h) throw InputError(path.string() + " does not match the image size");
  PlaneI out(w, h, 1, 0);
  for (std::size_t i = 0; i < out.pixelCount(); ++i) out.data()[i] = p.samples[i * static_cast<std::size_t>(p.channels)];
  return out;
}

void savePlane16(const fs::path& path, const PlaneF& plane, double scale) {
  PngData p{plane.width(), plane.height(), 1, 16, {}};
  p.samples.resize(plane.pixelCount());
  for (std::size_t i = 0; i < plane.pixelCount(); ++i) {
    p.samples[i] = static_cast<std::uint16_t>(std::clamp(std::nearbyint(plane.data()[i] / scale), 0.0, 65535.0));
  }
  writePng(path, p);
}

void saveIds(const fs::path& path, const PlaneI& ids) {
  PngData p{ids.width(), ids.height(), 1, 16, {}};
  p.samples.resize(ids.pixelCount());
  for (std::size_t i = 0; i < ids.pixelCount(); ++i) {
    p.samples[i] = static_cast<std::uint16_t>(std::clamp<std::int32_t>(ids.data()[i], 0, 65535));
  }
  writePng(path, p);
}

fs::path required(const fs::path& dir, const json& f, const char* key) {
  if (!f.contains(key)) throw InputError(std::string("sequence frame is missing '") + key + "'");
  const fs::path p = dir / f.at(key).get<std::string>();
  if (!fs::exists(p)) throw InputError("missing input file " + p.string());
  return p;
}

std::optional<fs::path> optionalPath(const fs::path& dir, const json& f, const char* key) {
  if (!f.contains(key)) return std::nullopt;
  const fs::path p = dir / f.at(key).get<std::string>();
  if (!fs::exists(p)) throw InputError("missing input file " + p.string());
  return p;
}

}  // namespace

std::uint8_t toByte(float v) {
  return static_cast<std::uint8_t>(std::nearbyint(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

PngData readPng(const fs::path& path) {
  FilePtr f(std::fopen(path.string().c_str(), "rb"));
  if (!f) throw InputError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw InputError(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, pngError, pngWarning);
  png_infop info = png_create_info_struct(png);
  PngData out;
  try {
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int colorType = png_get_color_type(png, info);
    int bitDepth = png_get_bit_depth(png, info);
    if (colorType == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (colorType == PNG_COLOR_TYPE_GRAY && bitDepth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (colorType == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(png);
    if (bitDepth == 16) png_set_swap(png);  // little-endian host order
    png_read_update_info(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    bitDepth = png_get_bit_depth(png, info);
    out.bitDepth = bitDepth;
    const std::size_t rowBytes = png_get_rowbytes(png, info);
    std::vector<png_byte> buf(rowBytes * static_cast<std::size_t>(out.height));
    std::vector<png_bytep> rows(static_cast<std::size_t>(out.height));
    for (int y = 0; y < out.height; ++y) rows[static_cast<std::size_t>(y)] = buf.data() + rowBytes * static_cast<std::size_t>(y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    const std::size_t n = static_cast<std::size_t>(out.width) * out.height * static_cast<std::size_t>(out.channels);
    out.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.samples[i] = bitDepth == 16 ? static_cast<std::uint16_t>(buf[2 * i] | (buf[2 * i + 1] << 8)) : buf[i];
    }
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (out.channels != 1 && out.channels != 3 && out.channels != 4) {
    throw InputError(path.string() + ": unsupported channel layout");
  }
  return out;
}

void writePng(const fs::path& path, const PngData& d) {
  if (d.bitDepth != 8 && d.bitDepth != 16) throw InputError("PNG bit depth must be 8 or 16");
  int colorType;
  switch (d.channels) {
    case 1: colorType = PNG_COLOR_TYPE_GRAY; break;
    case 3: colorType = PNG_COLOR_TYPE_RGB; break;
    case 4: colorType = PNG_COLOR_TYPE_RGBA; break;
    default: throw InputError("PNG needs 1, 3 or 4 channels");
  }
  FilePtr f(std::fopen(path.string().c_str(), "wb"));
  if (!f) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, pngError, pngWarning);
  png_infop info = png_create_info_struct(png);
  try {
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(d.width), static_cast<png_uint_32>(d.height), d.bitDepth,
                 colorType, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t perRow = static_cast<std::size_t>(d.width) * static_cast<std::size_t>(d.channels);
    std::vector<png_byte> row(perRow * (d.bitDepth / 8));
    for (int y = 0; y < d.height; ++y) {
      const std::uint16_t* s = d.samples.data() + perRow * static_cast<std::size_t>(y);
      for (std::size_t i = 0; i < perRow; ++i) {
        if (d.bitDepth == 16) {
          row[2 * i] = static_cast<png_byte>(s[i] >> 8);
          row[2 * i + 1] = static_cast<png_byte>(s[i] & 0xff);
        } else {
          row[i] = static_cast<png_byte>(s[i]);
        }
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
}

ImageF readImage(const fs::path& path) {
  const PngData p = readPng(path);
  ImageF img(p.width, p.height, 3, 0.0f);
  const float norm = p.bitDepth == 16 ? 65535.0f : 255.0f;
  for (std::size_t i = 0; i < img.pixelCount(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const int src = p.channels == 1 ? 0 : c;
      img.data()[i * 3 + static_cast<std::size_t>(c)] =
          static_cast<float>(p.samples[i * static_cast<std::size_t>(p.channels) + static_cast<std::size_t>(src)]) / norm;
    }
  }
  return img;
}

void writeImage(const fs::path& path, const ImageF& img) {
  PngData p{img.width(), img.height(), img.channels(), 8, {}};
  p.samples.resize(img.data().size());
  for (std::size_t i = 0; i < p.samples.size(); ++i) p.samples[i] = toByte(img.data()[i]);
  writePng(path, p);
}

PlaneF readFlo(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  char magic[4];
  std::int32_t w = 0, h = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in || std::memcmp(magic, "PIEH", 4) != 0 || w <= 0 || h <= 0) {
    throw InputError(path.string() + " is not a .flo file");
  }
  PlaneF flow(w, h, 2, 0.0f);
  in.read(reinterpret_cast<char*>(flow.data().data()), static_cast<std::streamsize>(flow.data().size() * 4));
  if (!in) throw InputError(path.string() + " is truncated");
  for (float v : flow.data()) {
    if (!std::isfinite(v)) throw InputError(path.string() + " holds non-finite flow");
  }
  return flow;
}

void writeFlo(const fs::path& path, const PlaneF& flow) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const std::int32_t w = flow.width(), h = flow.height();
  out.write("PIEH", 4);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  out.write(reinterpret_cast<const char*>(flow.data().data()), static_cast<std::streamsize>(flow.data().size() * 4));
}

Sequence loadSequence(const fs::path& dir) {
  const fs::path manifestPath = dir / "sequence.json";
  std::ifstream in(manifestPath);
  if (!in) throw InputError("missing sequence manifest " + manifestPath.string());
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed sequence manifest: ") + e.what());
  }
  Sequence seq;
  try {
    const auto& cam = m.at("camera");
    seq.camera = Camera::make(cam.at("fx").get<double>(), cam.at("fy").get<double>(), cam.at("cx").get<double>(),
                              cam.at("cy").get<double>());
    const double depthScale = m.value("depthScale", 0.001);
    if (!(depthScale > 0.0)) throw InputError("depthScale must be positive");
    const auto& frames = m.at("frames");
    if (frames.empty()) throw InputError("sequence has no frames");
    bool allFlow = frames.size() > 1;
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const json& f = frames[t];
      FrameInputs fi;
      fi.image = readImage(required(dir, f, "image"));
      const int w = fi.image.width(), h = fi.image.height();
      PlaneF depth = loadPlane16(required(dir, f, "depth"), w, h, depthScale);
      Mask valid(w, h, 1, 0);
      for (std::size_t i = 0; i < valid.pixelCount(); ++i) valid.data()[i] = depth.data()[i] > 0.0f;
      PlaneF stability(w, h, 1, 1.0f);
      if (auto p = optionalPath(dir, f, "stability")) stability = loadPlane16(*p, w, h, 1.0 / 65535.0);
      fi.depth = DepthMap::make(std::move(depth), std::move(valid), std::move(stability));

      PlaneI label(w, h, 1, 0), instance(w, h, 1, 0);
      if (auto p = optionalPath(dir, f, "label")) label = loadIds(*p, w, h);
      if (auto p = optionalPath(dir, f, "instance")) instance = loadIds(*p, w, h);
      PlaneF saliency = [&] {
        if (auto p = optionalPath(dir, f, "saliency")) return loadPlane16(*p, w, h, 1.0 / 65535.0);
        return fallbackSaliency(fi.image);
      }();
      PlaneF edge(w, h, 1, 0.0f);
      if (auto p = optionalPath(dir, f, "edge")) {
        edge = loadPlane16(*p, w, h, 1.0 / 65535.0);
      } else {
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            auto differs = [&](int nx, int ny) {
              return nx >= 0 && ny >= 0 && nx < w && ny < h &&
                     (label.at(nx, ny) != label.at(x, y) || instance.at(nx, ny) != instance.at(x, y));
            };
            edge.at(x, y) = differs(x - 1, y) || differs(x + 1, y) || differs(x, y - 1) || differs(x, y + 1) ? 1.0f : 0.0f;
          }
        }
      }
      fi.semantics = SemanticMaps::make(std::move(saliency), std::move(label), std::move(instance), std::move(edge));
      if (t > 0) {
        if (auto p = optionalPath(dir, f, "flow")) {
          PlaneF flow = readFlo(*p);
          if (!flow.sameSize(fi.image)) throw InputError(p->string() + " does not match the image size");
          seq.motions.push_back(MotionField{std::move(flow)});
        } else {
          allFlow = false;
        }
      }
      if (t > 0 && (fi.width() != seq.frames.front().width() || fi.height() != seq.frames.front().height())) {
        throw InputError("sequence frames differ in size");
      }
      seq.frames.push_back(std::move(fi));
    }
    if (allFlow) {
      seq.motions.insert(seq.motions.begin(), MotionField::zero(seq.frames[0].width(), seq.frames[0].height()));
    } else {
      seq.motions.clear();
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed sequence manifest: ") + e.what());
  } catch (const InvariantError& e) {
    throw InputError(std::string("invalid sequence input: ") + e.what());
  }
  return seq;
}

void writeSequence(const fs::path& dir, const Camera& camera, const std::vector<FrameInputs>& frames,
                   double depthScale, const std::vector<MotionField>& motions) {
  fs::create_directories(dir);
  json m;
  m["camera"] = {{"fx", camera.fx()}, {"fy", camera.fy()}, {"cx", camera.cx()}, {"cy", camera.cy()}};
  m["depthScale"] = depthScale;
  json list = json::array();
  for (std::size_t t = 0; t < frames.size(); ++t) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "%04zu", t);
    const std::string s(stem);
    const FrameInputs& f = frames[t];
    json e;
    e["image"] = "rgb_" + s + ".png";
    e["depth"] = "depth_" + s + ".png";
    e["stability"] = "stability_" + s + ".png";
    e["label"] = "label_" + s + ".png";
    e["instance"] = "instance_" + s + ".png";
    e["saliency"] = "saliency_" + s + ".png";
    e["edge"] = "edge_" + s + ".png";
    writeImage(dir / e["image"].get<std::string>(), f.image);
    PlaneF depth = f.depth.values;
    for (std::size_t i = 0; i < depth.pixelCount(); ++i) {
      if (!f.depth.valid.data()[i]) depth.data()[i] = 0.0f;
    }
    savePlane16(dir / e["depth"].get<std::string>(), depth, depthScale);
    savePlane16(dir / e["stability"].get<std::string>(), f.depth.stability, 1.0 / 65535.0);
    saveIds(dir / e["label"].get<std::string>(), f.semantics.label);
    saveIds(dir / e["instance"].get<std::string>(), f.semantics.instance);
    savePlane16(dir / e["saliency"].get<std::string>(), f.semantics.saliency, 1.0 / 65535.0);
    savePlane16(dir / e["edge"].get<std::string>(), f.semantics.semanticEdge, 1.0 / 65535.0);
    if (t > 0 && t < motions.size()) {
      e["flow"] = "flow_" + s + ".flo";
      writeFlo(dir / e["flow"].get<std::string>(), motions[t].flow);
    }
    list.push_back(e);
  }
  m["frames"] = list;
  std::ofstream out(dir / "sequence.json");
  out << m.dump(2) << '\n';
  if (!out) throw IoError("cannot write the sequence manifest");
}

}  // namespace cpsl
