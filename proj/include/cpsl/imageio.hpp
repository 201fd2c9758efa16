#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cpsl/energy.hpp"
#include "cpsl/temporal.hpp"

namespace cpsl {

/// Raw PNG samples: 8- or 16-bit, 1, 3 or 4 channels, row-major interleaved.
struct PngData {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bitDepth = 8;
  std::vector<std::uint16_t> samples;
};

/// Throws IoError/InputError on unreadable or unsupported files. Palette
/// images are expanded; 16-bit samples are kept.
PngData readPng(const std::filesystem::path& path);
void writePng(const std::filesystem::path& path, const PngData& png);

/// [0,1] float image <-> 8-bit PNG (round half to even). Alpha is dropped on
/// read; gray is replicated to RGB.
ImageF readImage(const std::filesystem::path& path);
void writeImage(const std::filesystem::path& path, const ImageF& img);

std::uint8_t toByte(float v);

/// Middlebury .flo: "PIEH" magic, int32 width and height, float32 (u, v) pairs.
PlaneF readFlo(const std::filesystem::path& path);
void writeFlo(const std::filesystem::path& path, const PlaneF& flow);

struct Sequence {
  Camera camera;
  std::vector<FrameInputs> frames;
  std::vector<MotionField> motions;  // empty unless every frame after the first has flow
};

/// Reads `dir/sequence.json`:
///   {"camera": {"fx","fy","cx","cy"}, "depthScale": metres per 16-bit step,
///    "frames": [{"image", "depth", "label"?, "instance"?, "saliency"?,
///                "stability"?, "edge"?, "flow"?}, ...]}
/// Depth 0 marks invalid pixels. Missing saliency uses fallbackSaliency; a
/// missing edge map uses label/instance boundaries. Throws InputError for a
/// missing or malformed manifest or a missing required file.
Sequence loadSequence(const std::filesystem::path& dir);

/// Writes frames in the layout loadSequence reads. Depth is quantized with
/// `depthScale`; saliency, stability and edges on 16 bits.
void writeSequence(const std::filesystem::path& dir, const Camera& camera,
                   const std::vector<FrameInputs>& frames, double depthScale,
                   const std::vector<MotionField>& motions = {});

}  // namespace cpsl
