#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cpsl/image.hpp"

namespace cpsl {

enum class CodecId : std::uint8_t { Lossless = 0, Lossy = 1 };

inline constexpr int kMinQuality = 1;
inline constexpr int kMaxQuality = 8;

std::string codecName(CodecId id);
/// Throws CodecUnsupportedError for unknown names.
CodecId codecFromName(const std::string& name);

/// Lossless: float32 planes (R, G, B, A premultiplied), deflated.
/// Lossy: alpha on 8 bits, un-premultiplied color as YCbCr on `quality` bits,
/// chroma 2x2 subsampled below quality 5, zeroed where alpha is 0, deflated.
std::vector<std::uint8_t> encodeLayerImage(const ImageF& rgba, CodecId codec, int quality);

/// Throws CorruptContainerError if the payload does not decode to w x h.
ImageF decodeLayerImage(std::span<const std::uint8_t> bytes, int width, int height, CodecId codec);

std::vector<std::uint8_t> deflateBytes(std::span<const std::uint8_t> in);
/// `expected` is the exact inflated size; mismatches throw CorruptContainerError.
std::vector<std::uint8_t> inflateBytes(std::span<const std::uint8_t> in, std::size_t expected);

}  // namespace cpsl
