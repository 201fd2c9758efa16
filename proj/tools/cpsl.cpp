#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cpsl/bundle.hpp"
#include "cpsl/config.hpp"
#include "cpsl/errors.hpp"
#include "cpsl/imageio.hpp"
#include "cpsl/metrics.hpp"
#include "cpsl/parallel.hpp"
#include "cpsl/render.hpp"
#include "cpsl/synth.hpp"

// After Eigen: <resolv.h> defines a _res macro.
#include <httplib.h>

namespace fs = std::filesystem;
using namespace cpsl;

namespace {

using Clock = std::chrono::steady_clock;

double msSince(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct PoseArgs {
  double yaw = 0.0;
  double pitch = 0.0;
  double baseline = 0.0;
  std::vector<double> pose;  // r00..r22 t0 t1 t2
};

void addPoseOptions(CLI::App* cmd, PoseArgs& p) {
  cmd->add_option("--yaw", p.yaw, "Yaw about the scene pivot (degrees)");
  cmd->add_option("--pitch", p.pitch, "Pitch about the scene pivot (degrees)");
  cmd->add_option("--baseline", p.baseline, "Lateral offset (metres)");
  cmd->add_option("--pose", p.pose, "Explicit pose: 9 rotation entries (row-major) then 3 translation entries")
      ->expected(12);
}

Camera resolvePose(const LayerSet& ls, const PoseArgs& p) {
  const Camera& src = ls.sourceCamera;
  if (!p.pose.empty()) {
    Mat3 r;
    for (int i = 0; i < 9; ++i) r(i / 3, i % 3) = p.pose[static_cast<std::size_t>(i)];
    const Vec3 t(p.pose[9], p.pose[10], p.pose[11]);
    try {
      return src.withPose(r, t);
    } catch (const InvariantError& e) {
      throw InputError(std::string("invalid pose: ") + e.what());
    }
  }
  return orbitPose(src, p.yaw, p.pitch, p.baseline, sceneMedianDepth(ls));
}

std::vector<BundleFrame> loadBundle(const fs::path& path) {
  const auto bytes = readFile(path);
  return unpackBundle(bytes);
}

const BundleFrame& pickFrame(const std::vector<BundleFrame>& frames, int index) {
  if (index < 0 || static_cast<std::size_t>(index) >= frames.size()) {
    throw InputError("frame index " + std::to_string(index) + " out of range");
  }
  return frames[static_cast<std::size_t>(index)];
}

ImageF toDisplay(const CompositeOutput& out) { return compositeOverBackdrop(out, {0.0f, 0.0f, 0.0f}); }

SyntheticScene namedScene(const std::string& name, int w, int h, int layers) {
  if (name == "two-plane") return SyntheticScene::twoPlane(w, h);
  if (name == "slabs") return SyntheticScene::slabs(w, h, layers);
  throw InputError("unknown scene '" + name + "'");
}

std::vector<double> parseAngles(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError("invalid angle '" + item + "'");
    }
  }
  if (out.empty()) throw InputError("angle list is empty");
  return out;
}

// ---------------------------------------------------------------------------

int cmdSynthScene(const std::string& scene, const fs::path& out, int w, int h, int layers, int frames,
                  int jitter, std::uint64_t seed, double depthScale) {
  if (w < 16 || h < 16 || frames < 1 || layers < 1 || jitter < 0) throw InputError("invalid scene size");
  const SyntheticScene s = namedScene(scene, w, h, layers);
  std::vector<FrameInputs> inputs;
  if (jitter > 0) {
    inputs = jitteredSequence(s, frames, jitter, seed);
  } else {
    for (const GroundTruth& gt : renderSequence(s, frames)) inputs.push_back(gt.inputs());
  }
  writeSequence(out, s.camera, inputs, depthScale);
  std::cout << "wrote " << inputs.size() << " frame(s) to " << out.string() << "\n";
  return 0;
}

int cmdGenerate(const Config& cfg, const fs::path& in, const fs::path& out, bool temporal) {
  const Sequence seq = loadSequence(in);
  const auto frames = processSequence(seq.frames, seq.motions, seq.camera, cfg.decompose, cfg.gop, temporal);
  std::vector<BundleFrame> bundle;
  for (const SequenceFrame& f : frames) bundle.push_back(BundleFrame{f.layers, f.edc, f.type});
  writeFile(out, packBundle(bundle));
  std::size_t iFrames = 0;
  for (const auto& f : bundle) iFrames += f.type == FrameType::I;
  std::cout << "frames=" << bundle.size() << " i_frames=" << iFrames << " layers=" << bundle.front().layers.size()
            << "\n";
  return 0;
}

int cmdPack(const fs::path& in, const fs::path& out, double budget, const std::string& codec, int quality) {
  const auto frames = loadBundle(in);
  PackOptions opts;
  if (budget > 0.0) {
    opts = allocateStreams(frames, budget);
  } else {
    opts.codec = codecFromName(codec);
    if (quality < kMinQuality || quality > kMaxQuality) throw InputError("quality must lie in [1, 8]");
    if (opts.codec == CodecId::Lossy) {
      std::size_t streams = 0;
      for (const auto& f : frames) streams = std::max(streams, f.layers.size());
      opts.streams.assign(streams, StreamSettings{CodecId::Lossy, quality, 0.0, 0.0});
    }
  }
  const auto bytes = packBundle(frames, opts);
  writeFile(out, bytes);
  std::cout << "bytes=" << bytes.size() << " bytes_per_frame=" << static_cast<double>(bytes.size()) / frames.size()
            << "\n";
  for (std::size_t k = 0; k < opts.streams.size(); ++k) {
    const auto& s = opts.streams[k];
    std::cout << "stream " << k << " codec=" << codecName(s.codec) << " quality=" << s.quality
              << " weight=" << s.weight << " rate=" << s.rate << "\n";
  }
  return 0;
}

int cmdRender(const Config& cfg, const fs::path& in, const fs::path& out, int frame, const PoseArgs& pose,
              bool noDps) {
  const auto frames = loadBundle(in);
  const BundleFrame& f = pickFrame(frames, frame);
  RenderParams params = cfg.render;
  if (noDps) params.dps = false;
  const Camera viewer = resolvePose(f.layers, pose);
  const RenderResult r = renderView(f.layers, f.edc, viewer, params);
  writeImage(out, toDisplay(r.out));
  std::cout << "crack_rate=" << crackRate(r.out, crackBand(r.warped)) << "\n";
  return 0;
}

int cmdSweep(const Config& cfg, const fs::path& in, const fs::path& outDir, int frame, const std::string& angleList,
             const std::string& scene, int layers) {
  const std::vector<double> angles = parseAngles(angleList);
  const auto frames = loadBundle(in);
  const BundleFrame& f = pickFrame(frames, frame);
  const LayerSet& ls = f.layers;
  const int w = ls.width(), h = ls.height();
  std::optional<SyntheticScene> truth;
  if (!scene.empty()) {
    truth = namedScene(scene, w, h, layers);
    if (!(truth->camera == ls.sourceCamera)) throw InputError("scene camera does not match the bundle");
  }
  fs::create_directories(outDir);
  const std::string sceneName = scene.empty() ? in.stem().string() : scene;
  const double pivot = sceneMedianDepth(ls);

  std::vector<MetricsRow> rows;
  std::optional<ImageF> reference0;
  for (double angle : angles) {
    const Camera viewer = orbitPose(ls.sourceCamera, angle, 0.0, 0.0, pivot);
    for (bool dps : {true, false}) {
      RenderParams params = cfg.render;
      params.dps = dps;
      const RenderResult r = renderView(ls, f.edc, viewer, params);
      const ImageF img = toDisplay(r.out);
      const std::string method = dps ? "cpsl" : "cpsl-nodps";
      char name[64];
      std::snprintf(name, sizeof name, "%s_%05.1f.png", method.c_str(), angle);
      writeImage(outDir / name, img);

      MetricsRow row{sceneName, method, angle, 0.0, 0.0, crackRate(r.out, crackBand(r.warped))};
      if (truth) {
        const GroundTruth gt = renderGroundTruth(*truth, viewer, ls.frameIndex);
        Mask keep = disocclusionMask(*truth, ls.sourceCamera, viewer, ls.frameIndex);
        for (auto& v : keep.data()) v = !v;
        row.psnr = psnr(img, gt.image, &keep);
        row.ssim = ssim(img, gt.image);
      } else {
        if (!reference0) {
          reference0 = toDisplay(renderView(ls, f.edc, ls.sourceCamera, params).out);
        }
        row.psnr = psnr(img, *reference0);
        row.ssim = ssim(img, *reference0);
      }
      rows.push_back(row);
    }
  }
  std::ofstream csv(outDir / "metrics.csv");
  writeMetricsCsv(csv, rows);
  writeMetricsCsv(std::cout, rows);
  if (!csv) throw IoError("cannot write metrics.csv");
  return 0;
}

int cmdBench(const Config& cfg, const fs::path& in, int frame, int repeat, double yaw) {
  if (repeat < 1) throw InputError("repeat must be positive");
  const auto bytes = readFile(in);
  double unpackMs = 0.0;
  std::vector<BundleFrame> frames;
  for (int i = 0; i < repeat; ++i) {
    const auto t0 = Clock::now();
    frames = unpackBundle(bytes);
    unpackMs += msSince(t0);
  }
  const BundleFrame& f = pickFrame(frames, frame);
  const Camera viewer = orbitPose(f.layers.sourceCamera, yaw, 0.0, 0.0, sceneMedianDepth(f.layers));
  StageTimes total;
  for (int i = 0; i < repeat; ++i) {
    const RenderResult r = renderView(f.layers, f.edc, viewer, cfg.render);
    total.warpMs += r.times.warpMs;
    total.compositeMs += r.times.compositeMs;
    total.dpsMs += r.times.dpsMs;
  }
  const FrameRenderer fused(f.layers, f.edc);
  CompositeOutput out;
  StageTimes fusedTotal;
  for (int i = 0; i < repeat; ++i) {
    StageTimes t;
    fused.render(viewer, cfg.render, out, &t);
    fusedTotal.compositeMs += t.compositeMs;
    fusedTotal.dpsMs += t.dpsMs;
  }
  const double n = repeat;
  std::cout << "stage,ms\n";
  std::cout << "unpack," << unpackMs / n / static_cast<double>(frames.size()) << "\n";
  std::cout << "warp," << total.warpMs / n << "\n";
  std::cout << "composite," << total.compositeMs / n << "\n";
  std::cout << "dps," << total.dpsMs / n << "\n";
  std::cout << "fused_prepare," << fused.prepareMs() << "\n";
  std::cout << "fused_warp_composite," << fusedTotal.compositeMs / n << "\n";
  std::cout << "fused_dps," << fusedTotal.dpsMs / n << "\n";
  return 0;
}

int cmdMetrics(const fs::path& a, const fs::path& b, const fs::path& maskPath) {
  const ImageF ia = readImage(a), ib = readImage(b);
  if (!ia.sameSize(ib)) throw InputError("images differ in size");
  std::optional<Mask> mask;
  if (!maskPath.empty()) {
    const ImageF m = readImage(maskPath);
    if (!m.sameSize(ia)) throw InputError("mask differs in size");
    mask.emplace(m.width(), m.height(), 1, 0);
    for (std::size_t i = 0; i < mask->pixelCount(); ++i) mask->data()[i] = m.data()[i * 3] >= 0.5f;
  }
  std::cout << "psnr,ssim\n" << psnr(ia, ib, mask ? &*mask : nullptr) << "," << ssim(ia, ib) << "\n";
  return 0;
}

int cmdServe(const fs::path& root, const std::string& host, int port) {
  if (!fs::exists(root)) throw InputError("nothing to serve at " + root.string());
  httplib::Server server;
  const fs::path dir = fs::is_directory(root) ? root : root.parent_path().empty() ? fs::path(".") : root.parent_path();
  if (!server.set_mount_point("/", dir.string())) throw InputError("cannot serve " + dir.string());
  server.set_file_extension_and_mimetype_mapping("cpsl", "application/octet-stream");
  server.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
  });
  if (!fs::is_directory(root)) {
    const std::string name = root.filename().string();
    server.Get("/bundle.cpsl", [root](const httplib::Request&, httplib::Response& res) {
      const auto bytes = readFile(root);
      res.set_content(std::string(bytes.begin(), bytes.end()), "application/octet-stream");
    });
    std::cout << "serving " << name << " as /bundle.cpsl\n";
  }
  std::cout << "listening on http://" << host << ":" << port << "/\n" << std::flush;
  if (!server.listen(host, port)) throw IoError("cannot listen on port " + std::to_string(port));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layered novel-view pipeline: decompose, pack, render and measure."};
  app.require_subcommand(1);

  int threads = 0;
  std::uint64_t seed = 1;
  std::string configPath;
  app.add_option("--threads", threads, "Worker cap (0: CPSL_THREADS or all cores)")->envname("CPSL_THREADS");
  app.add_option("--seed", seed, "Seed for randomized steps");
  app.add_option("--config", configPath, "JSON config overriding the defaults");
  bool dumpConfig = false;
  app.add_flag("--dump-config", dumpConfig, "Print the effective config and exit");

  std::string input, output;
  int frame = 0;

  auto* synth = app.add_subcommand("synth-scene", "Write a synthetic sequence directory");
  std::string sceneName = "two-plane";
  int width = 256, height = 192, layers = 3, frames = 1, jitter = 0;
  synth->add_option("out", output, "Output directory")->required();
  synth->add_option("--scene", sceneName, "two-plane or slabs");
  synth->add_option("--width", width);
  synth->add_option("--height", height);
  synth->add_option("--layers", layers, "Slab count for the slabs scene");
  synth->add_option("--frames", frames);
  synth->add_option("--jitter", jitter, "Per-frame depth/semantic jitter (px)");

  auto* generate = app.add_subcommand("generate", "Decompose a sequence into a lossless layer bundle");
  bool noTemporal = false;
  generate->add_option("input", input, "Sequence directory")->required();
  generate->add_option("-o,--out", output, "Output bundle")->required();
  generate->add_flag("--no-temporal", noTemporal, "Decompose every frame independently");

  auto* pack = app.add_subcommand("pack", "Re-encode a bundle under a byte budget or a fixed codec");
  double budget = 0.0;
  std::string codec = "lossless";
  int quality = kMaxQuality;
  pack->add_option("input", input, "Layer bundle")->required();
  pack->add_option("-o,--out", output, "Output bundle")->required();
  pack->add_option("--budget", budget, "Bytes per frame (enables rate allocation)");
  pack->add_option("--codec", codec, "lossless or lossy");
  pack->add_option("--quality", quality, "Lossy quality, 1..8");

  auto* render = app.add_subcommand("render", "Render one frame at a novel pose");
  PoseArgs pose;
  bool noDps = false;
  render->add_option("input", input, "Bundle")->required();
  render->add_option("-o,--out", output, "Output PNG")->required();
  render->add_option("--frame", frame);
  render->add_flag("--no-dps", noDps, "Skip crack repair");
  addPoseOptions(render, pose);

  auto* sweep = app.add_subcommand("sweep", "Render a yaw sweep and write images plus metrics.csv");
  std::string angles = "0,5,10,15,20,30";
  std::string truthScene;
  sweep->add_option("input", input, "Bundle")->required();
  sweep->add_option("-o,--out", output, "Output directory")->required();
  sweep->add_option("--frame", frame);
  sweep->add_option("--angles", angles, "Comma-separated yaw angles (degrees)");
  sweep->add_option("--scene", truthScene, "Synthetic scene to score against (two-plane or slabs)");
  sweep->add_option("--layers", layers, "Slab count for the slabs scene");

  auto* bench = app.add_subcommand("bench", "Per-stage timings as CSV");
  int repeat = 10;
  double benchYaw = 10.0;
  bench->add_option("input", input, "Bundle")->required();
  bench->add_option("--frame", frame);
  bench->add_option("--repeat", repeat);
  bench->add_option("--yaw", benchYaw);

  auto* metrics = app.add_subcommand("metrics", "PSNR and SSIM between two images");
  std::string imageB, maskPath;
  metrics->add_option("a", input)->required();
  metrics->add_option("b", imageB)->required();
  metrics->add_option("--mask", maskPath, "Only score pixels where this image is white");

  auto* serve = app.add_subcommand("serve", "Static HTTP server for a bundle or a directory");
  std::string host = "127.0.0.1";
  int port = 8080;
  serve->add_option("path", input, "Bundle file or directory")->required();
  serve->add_option("--host", host);
  serve->add_option("--port", port);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    setThreadCount(threads);
    Config cfg = loadConfig(configPath);
    if (dumpConfig) {
      std::cout << cfg.dump() << "\n";
      return 0;
    }
    if (*synth) return cmdSynthScene(sceneName, output, width, height, layers, frames, jitter, seed, cfg.depthScale);
    if (*generate) return cmdGenerate(cfg, input, output, !noTemporal);
    if (*pack) return cmdPack(input, output, budget, codec, quality);
    if (*render) return cmdRender(cfg, input, output, frame, pose, noDps);
    if (*sweep) return cmdSweep(cfg, input, output, frame, angles, truthScene, layers);
    if (*bench) return cmdBench(cfg, input, frame, repeat, benchYaw);
    if (*metrics) return cmdMetrics(input, imageB, maskPath);
    if (*serve) return cmdServe(input, host, port);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exitCode();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
