#include "cpsl/bundle.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include <json.hpp>
#include <zlib.h>

#include "cpsl/errors.hpp"
#include "cpsl/metrics.hpp"
#include "cpsl/parallel.hpp"

namespace cpsl {
namespace {

using json = nlohmann::json;

constexpr char kMagic[4] = {'C', 'P', 'S', 'L'};

class Writer {
 public:
  std::vector<std::uint8_t> bytes;

  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) {
    std::uint64_t b;
    std::memcpy(&b, &v, 8);
    u64(b);
  }
  void raw(std::span<const std::uint8_t> s) { bytes.insert(bytes.end(), s.begin(), s.end()); }
  void tag(const char t[4]) { raw({reinterpret_cast<const std::uint8_t*>(t), 4}); }

  void chunk(const char t[4], std::span<const std::uint8_t> payload) {
    tag(t);
    u64(payload.size());
    raw(payload);
    u32(static_cast<std::uint32_t>(crc32(0L, payload.data(), static_cast<uInt>(payload.size()))));
  }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> s) : s_(s) {}

  std::size_t remaining() const { return s_.size() - pos_; }
  bool done() const { return pos_ == s_.size(); }

  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > remaining()) throw TruncatedStreamError("unexpected end of bundle data");
    auto out = s_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint64_t le(int n) {
    const auto b = take(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t(b[static_cast<std::size_t>(i)]) << (8 * i);
    return v;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() {
    const std::uint64_t b = u64();
    double v;
    std::memcpy(&v, &b, 8);
    return v;
  }

 private:
  std::span<const std::uint8_t> s_;
  std::size_t pos_ = 0;
};

struct Chunk {
  std::string tag;
  std::span<const std::uint8_t> payload;
};

std::vector<Chunk> readChunks(std::span<const std::uint8_t> bytes) {
  const std::size_t head = std::min<std::size_t>(4, bytes.size());
  if (std::memcmp(bytes.data(), kMagic, head) != 0) throw CorruptContainerError("not a CPSL bundle (bad magic)");
  if (bytes.size() < 8) throw TruncatedStreamError("bundle header is truncated");
  Reader r(bytes.subspan(4));
  const std::uint32_t version = r.u32();
  if (version != kBundleVersion) {
    throw VersionMismatchError("bundle version " + std::to_string(version) + ", expected " +
                               std::to_string(kBundleVersion));
  }
  std::vector<Chunk> out;
  while (!r.done()) {
    if (r.remaining() < 12) throw TruncatedStreamError("chunk header is truncated");
    const auto t = r.take(4);
    std::string tag(reinterpret_cast<const char*>(t.data()), 4);
    if (tag != "MANI" && tag != "LAYR" && tag != "EDCS" && tag != "CONF") {
      throw CorruptContainerError("unknown chunk tag");
    }
    const std::uint64_t len = r.u64();
    if (len > r.remaining() || r.remaining() - len < 4) throw TruncatedStreamError("chunk '" + tag + "' is truncated");
    const auto payload = r.take(static_cast<std::size_t>(len));
    const std::uint32_t crc = r.u32();
    if (crc != static_cast<std::uint32_t>(crc32(0L, payload.data(), static_cast<uInt>(payload.size())))) {
      throw CorruptContainerError("checksum mismatch in chunk '" + tag + "'");
    }
    out.push_back({std::move(tag), payload});
  }
  return out;
}

json cameraJson(const Camera& c) {
  json R = json::array(), t = json::array();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) R.push_back(c.rotation()(i, j));
    t.push_back(c.translation()(i));
  }
  return {{"fx", c.fx()}, {"fy", c.fy()}, {"cx", c.cx()}, {"cy", c.cy()}, {"rotation", R}, {"translation", t}};
}

Camera cameraFromJson(const json& j) {
  Mat3 R;
  Vec3 t;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) R(i, k) = j.at("rotation").at(static_cast<std::size_t>(3 * i + k)).get<double>();
    t(i) = j.at("translation").at(static_cast<std::size_t>(i)).get<double>();
  }
  return Camera::make(j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
                      j.at("cy").get<double>(), R, t);
}

std::size_t streamCount(const std::vector<BundleFrame>& frames) {
  std::size_t n = 0;
  for (const auto& f : frames) n = std::max(n, f.layers.size());
  return n;
}

}  // namespace

std::vector<std::uint8_t> packBundle(const std::vector<BundleFrame>& frames, const PackOptions& options) {
  if (frames.empty()) throw InputError("cannot pack an empty sequence");
  const int w = frames.front().layers.width();
  const int h = frames.front().layers.height();
  const DzQuantizer q = frames.front().edc.quantizer;
  for (const auto& f : frames) {
    if (f.layers.layers.empty()) throw InputError("every frame needs at least one layer");
    if (f.layers.width() != w || f.layers.height() != h) throw InputError("frame sizes differ");
    if (!(f.edc.quantizer == q)) throw InputError("frames use different depth-gap quantizers");
    if (f.layers.size() > 16) throw InputError("the EDC sidecar holds at most 16 layers");
  }
  const std::size_t S = streamCount(frames);
  std::vector<StreamSettings> streams = options.streams;
  if (streams.empty()) streams.assign(S, StreamSettings{options.codec, kMaxQuality, 0.0, 0.0});
  if (streams.size() != S) throw InputError("stream settings do not match the layer count");

  json manifest;
  manifest["format"] = "cpsl";
  manifest["version"] = kBundleVersion;
  manifest["width"] = w;
  manifest["height"] = h;
  manifest["frameCount"] = frames.size();
  manifest["dz"] = {{"min", q.dzMin()}, {"max", q.dzMax()}, {"mu", q.mu()}};
  json js = json::array();
  for (std::size_t s = 0; s < S; ++s) {
    js.push_back({{"index", s},
                  {"codec", codecName(streams[s].codec)},
                  {"quality", streams[s].quality},
                  {"weight", streams[s].weight},
                  {"rate", streams[s].rate}});
  }
  manifest["streams"] = js;
  json gop = json::array();
  for (const auto& f : frames) {
    json layers = json::array();
    for (const Layer& L : f.layers.layers) {
      layers.push_back({{"depth", L.depth},
                        {"saliency", L.saliencyScore},
                        {"instances", std::vector<std::int32_t>(L.instanceIds.begin(), L.instanceIds.end())}});
    }
    gop.push_back({{"frame", f.layers.frameIndex},
                   {"type", f.type == FrameType::I ? "I" : "P"},
                   {"camera", cameraJson(f.layers.sourceCamera)},
                   {"layers", layers}});
  }
  manifest["gop"] = gop;

  // Encode every (stream, frame) image in parallel.
  std::vector<std::vector<std::vector<std::uint8_t>>> encoded(S);
  for (std::size_t s = 0; s < S; ++s) encoded[s].resize(frames.size());
  parallelFor(0, static_cast<int>(S * frames.size()), [&](int i0, int i1) {
    for (int i = i0; i < i1; ++i) {
      const std::size_t s = static_cast<std::size_t>(i) / frames.size();
      const std::size_t t = static_cast<std::size_t>(i) % frames.size();
      if (s >= frames[t].layers.size()) continue;
      encoded[s][t] = encodeLayerImage(frames[t].layers.layers[s].rgba, streams[s].codec, streams[s].quality);
    }
  });

  Writer out;
  out.raw({reinterpret_cast<const std::uint8_t*>(kMagic), 4});
  out.u32(kBundleVersion);
  const std::string text = manifest.dump();
  out.chunk("MANI", {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  for (std::size_t s = 0; s < S; ++s) {
    Writer p;
    p.u32(static_cast<std::uint32_t>(s));
    std::uint32_t count = 0;
    for (const auto& f : frames) count += f.layers.size() > s;
    p.u32(count);
    for (std::size_t t = 0; t < frames.size(); ++t) {
      if (s >= frames[t].layers.size()) continue;
      p.u32(static_cast<std::uint32_t>(t));
      p.u8(static_cast<std::uint8_t>(streams[s].codec));
      p.u8(static_cast<std::uint8_t>(streams[s].quality));
      p.u64(encoded[s][t].size());
      p.raw(encoded[s][t]);
    }
    out.chunk("LAYR", p.bytes);
  }
  {
    Writer p;
    p.u32(static_cast<std::uint32_t>(frames.size()));
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const auto& samples = frames[t].edc.samples;
      p.u32(static_cast<std::uint32_t>(t));
      p.u32(static_cast<std::uint32_t>(samples.size()));
      for (const EdgeSample& e : samples) {
        p.u16(e.x);
        p.u16(e.y);
        p.u8(static_cast<std::uint8_t>((e.frontLayer << 4) | (e.backLayer & 0x0f)));
        p.u8(e.dzQuant);
      }
    }
    out.chunk("EDCS", p.bytes);
  }
  {
    Writer p;
    p.u32(static_cast<std::uint32_t>(frames.size()));
    for (const auto& f : frames) {
      p.u32(static_cast<std::uint32_t>(f.layers.size()));
      for (const Layer& L : f.layers.layers) p.f64(L.confidence);
    }
    out.chunk("CONF", p.bytes);
  }
  return std::move(out.bytes);
}

std::string readManifest(std::span<const std::uint8_t> bytes) {
  const auto chunks = readChunks(bytes);
  if (chunks.empty() || chunks.front().tag != "MANI") throw TruncatedStreamError("bundle has no manifest");
  const auto& p = chunks.front().payload;
  return std::string(reinterpret_cast<const char*>(p.data()), p.size());
}

std::vector<BundleFrame> unpackBundle(std::span<const std::uint8_t> bytes) {
  const auto chunks = readChunks(bytes);
  if (chunks.empty() || chunks.front().tag != "MANI") throw TruncatedStreamError("bundle has no manifest");
  json m;
  try {
    const auto& p = chunks.front().payload;
    m = json::parse(std::string(reinterpret_cast<const char*>(p.data()), p.size()));
  } catch (const json::exception&) {
    throw CorruptContainerError("manifest is not valid JSON");
  }

  try {
    if (m.at("format").get<std::string>() != "cpsl") throw CorruptContainerError("manifest format is not cpsl");
    if (m.at("version").get<std::uint32_t>() != kBundleVersion) throw VersionMismatchError("manifest version mismatch");
    const int w = m.at("width").get<int>();
    const int h = m.at("height").get<int>();
    const std::size_t T = m.at("frameCount").get<std::size_t>();
    const auto& streams = m.at("streams");
    const auto& gop = m.at("gop");
    if (w <= 0 || h <= 0 || gop.size() != T) throw CorruptContainerError("manifest is inconsistent");
    const std::size_t S = streams.size();
    const std::size_t expected = 1 + S + 2;
    if (chunks.size() < expected) throw TruncatedStreamError("bundle is missing chunks");
    if (chunks.size() > expected) throw CorruptContainerError("bundle has extra chunks");
    for (std::size_t s = 0; s < S; ++s) {
      if (chunks[1 + s].tag != "LAYR") throw CorruptContainerError("expected a LAYR chunk");
    }
    if (chunks[1 + S].tag != "EDCS" || chunks[2 + S].tag != "CONF") {
      throw CorruptContainerError("expected EDCS and CONF chunks");
    }
    const DzQuantizer quant(m.at("dz").at("min").get<double>(), m.at("dz").at("max").get<double>(),
                            m.at("dz").at("mu").get<double>());

    std::vector<BundleFrame> frames(T);
    for (std::size_t t = 0; t < T; ++t) {
      const auto& g = gop[t];
      const std::string type = g.at("type").get<std::string>();
      if (type != "I" && type != "P") throw CorruptContainerError("bad frame type");
      frames[t].type = type == "I" ? FrameType::I : FrameType::P;
      frames[t].layers.frameIndex = g.at("frame").get<int>();
      frames[t].layers.sourceCamera = cameraFromJson(g.at("camera"));
      const auto& layers = g.at("layers");
      if (layers.empty() || layers.size() > S) throw CorruptContainerError("frame layer count is inconsistent");
      for (const auto& lj : layers) {
        Layer L;
        L.depth = lj.at("depth").get<double>();
        L.saliencyScore = lj.at("saliency").get<double>();
        for (const auto& id : lj.at("instances")) L.instanceIds.insert(id.get<std::int32_t>());
        frames[t].layers.layers.push_back(std::move(L));
      }
      frames[t].edc.quantizer = quant;
    }

    // Layer streams: collect records, decode in parallel.
    struct Record {
      std::size_t frame, stream;
      CodecId codec;
      std::span<const std::uint8_t> data;
    };
    std::vector<Record> records;
    for (std::size_t s = 0; s < S; ++s) {
      Reader r(chunks[1 + s].payload);
      if (r.u32() != s) throw CorruptContainerError("LAYR chunks out of order");
      const std::uint32_t count = r.u32();
      std::size_t expectedCount = 0;
      for (const auto& f : frames) expectedCount += f.layers.size() > s;
      if (count != expectedCount) throw CorruptContainerError("stream frame count disagrees with the GOP table");
      for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t t = r.u32();
        const std::uint8_t codec = r.u8();
        r.u8();
        const std::uint64_t len = r.u64();
        if (t >= T || s >= frames[t].layers.size()) throw CorruptContainerError("stream references a missing frame");
        if (codec > 1) throw CorruptContainerError("unknown codec id");
        records.push_back({t, s, static_cast<CodecId>(codec), r.take(static_cast<std::size_t>(len))});
      }
      if (!r.done()) throw CorruptContainerError("trailing bytes in LAYR chunk");
    }
    std::vector<int> seen(T * S, 0);
    for (const auto& rec : records) {
      if (seen[rec.frame * S + rec.stream]++) throw CorruptContainerError("duplicate layer record");
    }
    parallelFor(0, static_cast<int>(records.size()), [&](int i0, int i1) {
      for (int i = i0; i < i1; ++i) {
        const Record& rec = records[static_cast<std::size_t>(i)];
        frames[rec.frame].layers.layers[rec.stream].rgba = decodeLayerImage(rec.data, w, h, rec.codec);
      }
    });

    {
      Reader r(chunks[1 + S].payload);
      if (r.u32() != T) throw CorruptContainerError("EDC frame count disagrees with the GOP table");
      for (std::size_t t = 0; t < T; ++t) {
        if (r.u32() != t) throw CorruptContainerError("EDC frames out of order");
        const std::uint32_t n = r.u32();
        if (static_cast<std::size_t>(n) * 6 > r.remaining()) throw TruncatedStreamError("EDC sidecar is truncated");
        auto& samples = frames[t].edc.samples;
        samples.resize(n);
        for (auto& e : samples) {
          e.x = r.u16();
          e.y = r.u16();
          const std::uint8_t fb = r.u8();
          e.frontLayer = fb >> 4;
          e.backLayer = fb & 0x0f;
          e.dzQuant = r.u8();
        }
      }
      if (!r.done()) throw CorruptContainerError("trailing bytes in EDCS chunk");
    }
    {
      Reader r(chunks[2 + S].payload);
      if (r.u32() != T) throw CorruptContainerError("confidence frame count disagrees with the GOP table");
      for (std::size_t t = 0; t < T; ++t) {
        if (r.u32() != frames[t].layers.size()) throw CorruptContainerError("confidence layer count mismatch");
        for (Layer& L : frames[t].layers.layers) L.confidence = r.f64();
      }
      if (!r.done()) throw CorruptContainerError("trailing bytes in CONF chunk");
    }
    for (const auto& f : frames) {
      if (!validateLayerSet(f.layers, std::max<int>(kDefaultMaxLayers, static_cast<int>(S))).empty()) {
        throw CorruptContainerError("decoded layer set violates its invariants");
      }
    }
    return frames;
  } catch (const BundleError&) {
    throw;
  } catch (const json::exception& e) {
    throw CorruptContainerError(std::string("manifest is malformed: ") + e.what());
  } catch (const Error& e) {
    throw CorruptContainerError(std::string("bundle content is invalid: ") + e.what());
  }
}

std::vector<RdCurve> measureRdCurves(const std::vector<BundleFrame>& frames) {
  const std::size_t S = streamCount(frames);
  std::vector<RdCurve> curves(S);
  parallelFor(0, static_cast<int>(S), [&](int s0, int s1) {
    for (int s = s0; s < s1; ++s) {
      std::vector<RdPoint> pts;
      for (int q = kMinQuality; q <= kMaxQuality; ++q) {
        double bytes = 0.0, dist = 0.0;
        int n = 0;
        for (const auto& f : frames) {
          if (static_cast<std::size_t>(s) >= f.layers.size()) continue;
          const ImageF& src = f.layers.layers[static_cast<std::size_t>(s)].rgba;
          const auto enc = encodeLayerImage(src, CodecId::Lossy, q);
          const ImageF dec = decodeLayerImage(enc, src.width(), src.height(), CodecId::Lossy);
          ImageF a(src.width(), src.height(), 3), b(src.width(), src.height(), 3);
          for (std::size_t i = 0; i < a.pixelCount(); ++i) {
            for (int c = 0; c < 3; ++c) {
              a.data()[i * 3 + c] = src.data()[i * 4 + c];
              b.data()[i * 3 + c] = dec.data()[i * 4 + c];
            }
          }
          bytes += static_cast<double>(enc.size());
          dist += 1.0 - ssim(a, b);
          ++n;
        }
        const double T = static_cast<double>(frames.size());
        pts.push_back({bytes / T, n > 0 ? dist / n : 0.0, q});
      }
      curves[static_cast<std::size_t>(s)] = RdCurve::fromSamples(std::move(pts));
    }
  });
  return curves;
}

std::vector<double> streamWeights(const std::vector<BundleFrame>& frames, double mu) {
  const std::size_t S = streamCount(frames);
  std::vector<double> w(S, 0.0);
  for (const auto& f : frames) {
    const auto lw = layerWeights(f.layers, mu);
    for (std::size_t k = 0; k < lw.size(); ++k) w[k] += lw[k];
  }
  for (double& v : w) v /= static_cast<double>(std::max<std::size_t>(1, frames.size()));
  return w;
}

PackOptions allocateStreams(const std::vector<BundleFrame>& frames, double bytesPerFrame) {
  const auto curves = measureRdCurves(frames);
  const auto weights = streamWeights(frames);
  const Allocation a = allocateRates(curves, weights, bytesPerFrame);
  PackOptions opt;
  opt.codec = CodecId::Lossy;
  for (std::size_t s = 0; s < curves.size(); ++s) {
    const RdPoint& p = curves[s].points[static_cast<std::size_t>(a.point[s])];
    opt.streams.push_back({CodecId::Lossy, p.quality, weights[s], p.rate});
  }
  return opt;
}

std::vector<std::uint8_t> readFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void writeFile(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace cpsl
