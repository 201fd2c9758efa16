#include "cpsl/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <zlib.h>

#include "cpsl/errors.hpp"

namespace cpsl {
namespace {

void putU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t getU32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

std::uint8_t quantize(float v, int levels) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * static_cast<float>(levels)));
}

}  // namespace

std::string codecName(CodecId id) { return id == CodecId::Lossless ? "lossless" : "lossy"; }

CodecId codecFromName(const std::string& name) {
  if (name == "lossless") return CodecId::Lossless;
  if (name == "lossy") return CodecId::Lossy;
  throw CodecUnsupportedError("unsupported codec '" + name + "'");
}

std::vector<std::uint8_t> deflateBytes(std::span<const std::uint8_t> in) {
  uLongf cap = compressBound(static_cast<uLong>(in.size()));
  std::vector<std::uint8_t> out(cap);
  if (compress2(out.data(), &cap, in.data(), static_cast<uLong>(in.size()), 6) != Z_OK) {
    throw IoError("deflate failed");
  }
  out.resize(cap);
  return out;
}

std::vector<std::uint8_t> inflateBytes(std::span<const std::uint8_t> in, std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  uLongf len = static_cast<uLongf>(expected);
  const int rc = uncompress(out.data(), &len, in.data(), static_cast<uLong>(in.size()));
  if (rc != Z_OK || len != expected) throw CorruptContainerError("layer payload does not inflate");
  return out;
}

std::vector<std::uint8_t> encodeLayerImage(const ImageF& rgba, CodecId codec, int quality) {
  if (rgba.channels() != 4) throw InputError("layer images carry 4 channels");
  const std::size_t n = rgba.pixelCount();
  std::vector<std::uint8_t> raw;
  if (codec == CodecId::Lossless) {
    raw.resize(n * 16);
    for (int c = 0; c < 4; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, &rgba.data()[i * 4 + c], 4);
        std::uint8_t* p = raw.data() + (static_cast<std::size_t>(c) * n + i) * 4;
        for (int b = 0; b < 4; ++b) p[b] = static_cast<std::uint8_t>(bits >> (8 * b));
      }
    }
    return deflateBytes(raw);
  }
  if (codec != CodecId::Lossy) throw CodecUnsupportedError("unsupported codec id");
  if (quality < kMinQuality || quality > kMaxQuality) throw InputError("lossy quality out of range");

  const int w = rgba.width(), h = rgba.height();
  const int levels = (1 << quality) - 1;
  const bool subsample = quality < 5;
  const int cw = subsample ? (w + 1) / 2 : w, ch = subsample ? (h + 1) / 2 : h;
  std::vector<float> Y(n), Cb(n), Cr(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* p = rgba.data().data() + i * 4;
    const float a = p[3];
    float c[3] = {0, 0, 0};
    if (a > 0.0f) {
      for (int j = 0; j < 3; ++j) c[j] = std::min(1.0f, p[j] / a);
    }
    Y[i] = 0.299f * c[0] + 0.587f * c[1] + 0.114f * c[2];
    Cb[i] = 0.5f + (c[2] - Y[i]) * 0.5643f;
    Cr[i] = 0.5f + (c[0] - Y[i]) * 0.7133f;
  }
  raw.push_back(static_cast<std::uint8_t>(quality));
  for (std::size_t i = 0; i < n; ++i) raw.push_back(quantize(rgba.data()[i * 4 + 3], 255));
  for (std::size_t i = 0; i < n; ++i) raw.push_back(rgba.data()[i * 4 + 3] > 0.0f ? quantize(Y[i], levels) : 0);
  for (const auto* plane : {&Cb, &Cr}) {
    for (int y = 0; y < ch; ++y) {
      for (int x = 0; x < cw; ++x) {
        if (!subsample) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          raw.push_back(rgba.data()[i * 4 + 3] > 0.0f ? quantize((*plane)[i], levels) : 0);
          continue;
        }
        double sum = 0.0, wsum = 0.0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int sx = 2 * x + dx, sy = 2 * y + dy;
            if (sx >= w || sy >= h) continue;
            const std::size_t i = static_cast<std::size_t>(sy) * w + sx;
            const double a = rgba.data()[i * 4 + 3];
            sum += a * (*plane)[i];
            wsum += a;
          }
        }
        raw.push_back(wsum > 0.0 ? quantize(static_cast<float>(sum / wsum), levels) : 0);
      }
    }
  }
  std::vector<std::uint8_t> out;
  putU32(out, static_cast<std::uint32_t>(raw.size()));
  const auto z = deflateBytes(raw);
  out.insert(out.end(), z.begin(), z.end());
  return out;
}

ImageF decodeLayerImage(std::span<const std::uint8_t> bytes, int width, int height, CodecId codec) {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  ImageF img(width, height, 4, 0.0f);
  if (codec == CodecId::Lossless) {
    const auto raw = inflateBytes(bytes, n * 16);
    for (int c = 0; c < 4; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t bits = getU32(raw.data() + (static_cast<std::size_t>(c) * n + i) * 4);
        std::memcpy(&img.data()[i * 4 + c], &bits, 4);
      }
    }
    return img;
  }
  if (codec != CodecId::Lossy) throw CodecUnsupportedError("unsupported codec id");
  if (bytes.size() < 4) throw CorruptContainerError("lossy payload too short");
  const std::size_t rawSize = getU32(bytes.data());
  const auto raw = inflateBytes(bytes.subspan(4), rawSize);
  if (raw.empty()) throw CorruptContainerError("empty lossy payload");
  const int quality = raw[0];
  if (quality < kMinQuality || quality > kMaxQuality) throw CorruptContainerError("bad lossy quality");
  const int levels = (1 << quality) - 1;
  const bool subsample = quality < 5;
  const int cw = subsample ? (width + 1) / 2 : width, ch = subsample ? (height + 1) / 2 : height;
  const std::size_t cn = static_cast<std::size_t>(cw) * ch;
  if (raw.size() != 1 + 2 * n + 2 * cn) throw CorruptContainerError("lossy payload size mismatch");
  const std::uint8_t* A = raw.data() + 1;
  const std::uint8_t* Yq = A + n;
  const std::uint8_t* Cbq = Yq + n;
  const std::uint8_t* Crq = Cbq + cn;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      const std::size_t ci = subsample ? static_cast<std::size_t>(y / 2) * cw + x / 2 : i;
      const float a = A[i] / 255.0f;
      const float Y = Yq[i] / static_cast<float>(levels);
      const float cb = Cbq[ci] / static_cast<float>(levels) - 0.5f;
      const float cr = Crq[ci] / static_cast<float>(levels) - 0.5f;
      const float r = std::clamp(Y + 1.402f * cr, 0.0f, 1.0f);
      const float g = std::clamp(Y - 0.344136f * cb - 0.714136f * cr, 0.0f, 1.0f);
      const float b = std::clamp(Y + 1.772f * cb, 0.0f, 1.0f);
      float* p = img.pixel(x, y);
      p[0] = a * r;
      p[1] = a * g;
      p[2] = a * b;
      p[3] = a;
    }
  }
  return img;
}

}  // namespace cpsl
