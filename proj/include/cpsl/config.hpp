#pragma once

#include <filesystem>
#include <string>

#include "cpsl/layergen.hpp"
#include "cpsl/render.hpp"
#include "cpsl/temporal.hpp"

namespace cpsl {

/// Every tunable constant of the pipeline, defaulted.
struct Config {
  DecomposeParams decompose;
  RenderParams render;
  GopParams gop;
  double depthScale = 0.001;  // metres per 16-bit depth step
  double weightMu = 1.0;      // contour term of the rate-allocation weights

  /// Overlays a JSON document. Unknown keys and wrong types throw InputError.
  void merge(const std::string& json);
  std::string dump() const;
  void validate() const;
};

/// Defaults overlaid with the file at `path` (if not empty).
Config loadConfig(const std::filesystem::path& path);

}  // namespace cpsl
