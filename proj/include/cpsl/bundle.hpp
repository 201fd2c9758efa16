#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cpsl/codec.hpp"
#include "cpsl/core.hpp"
#include "cpsl/ratealloc.hpp"
#include "cpsl/temporal.hpp"

namespace cpsl {

inline constexpr std::uint32_t kBundleVersion = 1;

/// One frame of a bundle. Per-layer confidences travel in Layer::confidence.
struct BundleFrame {
  LayerSet layers;
  EdgeDepthCache edc;
  FrameType type = FrameType::I;

  bool operator==(const BundleFrame& o) const = default;
};

struct StreamSettings {
  CodecId codec = CodecId::Lossless;
  int quality = kMaxQuality;
  double weight = 0.0;
  double rate = 0.0;  // allocated bytes per frame (informational)
};

struct PackOptions {
  CodecId codec = CodecId::Lossless;
  /// Per-stream settings; empty uses `codec` at kMaxQuality for every stream.
  std::vector<StreamSettings> streams;
};

/// Serializes frames into the container. Layer k of every frame belongs to
/// stream k. Throws InputError on inconsistent frame sizes or quantizers.
std::vector<std::uint8_t> packBundle(const std::vector<BundleFrame>& frames,
                                     const PackOptions& options = {});

/// Inverse of packBundle. Throws CorruptContainerError, VersionMismatchError
/// or TruncatedStreamError.
std::vector<BundleFrame> unpackBundle(std::span<const std::uint8_t> bytes);

/// The manifest (UTF-8 JSON) of a container, validated like unpackBundle.
std::string readManifest(std::span<const std::uint8_t> bytes);

/// Per-stream RD curves over the lossy quality levels: rate is mean encoded
/// bytes per frame, distortion the mean 1 - SSIM of the premultiplied color.
std::vector<RdCurve> measureRdCurves(const std::vector<BundleFrame>& frames);

/// Mean of layerWeights over the frames, per stream.
std::vector<double> streamWeights(const std::vector<BundleFrame>& frames, double mu = 1.0);

/// Allocates a per-frame byte budget across streams and returns lossy
/// stream settings. Throws InfeasibleError when the budget cannot be met.
PackOptions allocateStreams(const std::vector<BundleFrame>& frames, double bytesPerFrame);

std::vector<std::uint8_t> readFile(const std::filesystem::path& path);
void writeFile(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace cpsl
