#include "cpsl/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cpsl/errors.hpp"

namespace cpsl {
namespace {

using json = nlohmann::json;

// Reads a JSON object into named fields. Keys are consumed as they are
// bound, so anything left at the end is unknown.
class Binder {
 public:
  Binder(json obj, std::string path) : obj_(std::move(obj)), path_(std::move(path)) {
    if (!obj_.is_object()) throw InputError("config: '" + path_ + "' must be an object");
  }

  template <typename T>
  void bind(const char* key, T& field) {
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw InputError("");
      } else if constexpr (std::is_arithmetic_v<T>) {
        if (!it->is_number()) throw InputError("");
        if constexpr (std::is_integral_v<T>) {
          if (!it->is_number_integer()) throw InputError("");
        }
      }
      field = it->get<T>();
    } catch (const std::exception&) {
      throw InputError("config: wrong type for '" + path_ + key + "'");
    }
    obj_.erase(it);
  }

  std::optional<Binder> child(const char* key) {
    auto it = obj_.find(key);
    if (it == obj_.end()) return std::nullopt;
    Binder b(*it, path_ + key + ".");
    obj_.erase(it);
    return b;
  }

  std::optional<json> take(const char* key) {
    auto it = obj_.find(key);
    if (it == obj_.end()) return std::nullopt;
    json v = *it;
    obj_.erase(it);
    return v;
  }

  void finish() const {
    if (!obj_.empty()) throw InputError("config: unknown key '" + path_ + obj_.begin().key() + "'");
  }

 private:
  json obj_;
  std::string path_;
};

Filter filterFromName(const std::string& s) {
  if (s == "nearest") return Filter::Nearest;
  if (s == "bilinear") return Filter::Bilinear;
  throw InputError("config: unknown filter '" + s + "'");
}

}  // namespace

void Config::merge(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("config: malformed JSON: ") + e.what());
  }
  Binder top(std::move(root), "");
  top.bind("depthScale", depthScale);
  top.bind("weightMu", weightMu);

  if (auto e = top.child("energy")) {
    EnergyParams& p = decompose.energy;
    e->bind("K", p.K);
    e->bind("lambdaB", p.lambdaB);
    e->bind("alphaGrad", p.alphaGrad);
    e->bind("betaSem", p.betaSem);
    e->bind("huberDelta", p.huberDelta);
    e->bind("kappaSem", p.kappaSem);
    e->bind("kappaInst", p.kappaInst);
    e->bind("maxIters", p.maxIters);
    e->bind("logisticSaliency", p.logisticSaliency);
    e->finish();
  }
  if (auto e = top.child("promotion")) {
    e->bind("thetaPromote", decompose.promotion.thetaPromote);
    e->bind("textureWeight", decompose.promotion.textureWeight);
    e->finish();
  }
  if (auto e = top.child("matte")) {
    MatteParams& p = decompose.matte;
    e->bind("w0", p.w0);
    e->bind("a", p.a);
    e->bind("b", p.b);
    e->bind("wMin", p.wMin);
    e->bind("wMax", p.wMax);
    e->finish();
  }
  if (auto e = top.child("decompose")) {
    e->bind("layerBudget", decompose.layerBudget);
    e->bind("maxLayers", decompose.maxLayers);
    double dzMin = decompose.quantizer.dzMin(), dzMax = decompose.quantizer.dzMax(), mu = decompose.quantizer.mu();
    e->bind("dzMin", dzMin);
    e->bind("dzMax", dzMax);
    e->bind("dzMu", mu);
    try {
      decompose.quantizer = DzQuantizer(dzMin, dzMax, mu);
    } catch (const InvariantError& err) {
      throw InputError(std::string("config: ") + err.what());
    }
    e->finish();
  }
  if (auto e = top.child("dps")) {
    DpsParams& p = render.dpsParams;
    e->bind("wMin", p.wMin);
    e->bind("wMax", p.wMax);
    e->bind("cParallax", p.cParallax);
    e->bind("tauEdge", p.tauEdge);
    e->bind("rEdc", p.rEdc);
    e->bind("searchRadius", p.searchRadius);
    e->bind("holeCoverage", p.holeCoverage);
    e->finish();
  }
  if (auto e = top.child("render")) {
    e->bind("dps", render.dps);
    if (auto f = e->take("filter")) {
      if (!f->is_string()) throw InputError("config: wrong type for 'render.filter'");
      render.filter = filterFromName(f->get<std::string>());
    }
    e->finish();
  }
  if (auto e = top.child("gop")) {
    e->bind("iouThresh", gop.iouThresh);
    e->bind("crackThresh", gop.crackThresh);
    e->bind("ema", gop.ema);
    e->bind("emaBoundary", gop.emaBoundary);
    e->bind("maxGop", gop.maxGop);
    e->bind("hysteresis", gop.hysteresis);
    e->bind("patience", gop.patience);
    e->bind("restructure", gop.restructure);
    e->bind("refresh", gop.refresh);
    e->finish();
  }
  top.finish();
  validate();
}

void Config::validate() const {
  try {
    decompose.energy.validate();
    decompose.matte.validate();
    gop.validate();
  } catch (const InvariantError& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  if (!(depthScale > 0.0)) throw InputError("config: depthScale must be positive");
  if (!(weightMu >= 0.0)) throw InputError("config: weightMu must be non-negative");
  if (decompose.layerBudget < 1 || decompose.layerBudget > decompose.maxLayers) {
    throw InputError("config: layerBudget must lie in [1, maxLayers]");
  }
  const DpsParams& d = render.dpsParams;
  if (!(d.wMin > 0.0 && d.wMax >= d.wMin && d.cParallax >= 0.0 && d.tauEdge > 0.0 && d.rEdc >= 0.0 &&
        d.searchRadius > 0 && d.holeCoverage > 0.0f && d.holeCoverage <= 1.0f)) {
    throw InputError("config: invalid dps parameters");
  }
}

std::string Config::dump() const {
  const EnergyParams& e = decompose.energy;
  const MatteParams& m = decompose.matte;
  const DpsParams& d = render.dpsParams;
  json j;
  j["depthScale"] = depthScale;
  j["weightMu"] = weightMu;
  j["energy"] = {{"K", e.K},           {"lambdaB", e.lambdaB},     {"alphaGrad", e.alphaGrad},
                 {"betaSem", e.betaSem}, {"huberDelta", e.huberDelta}, {"kappaSem", e.kappaSem},
                 {"kappaInst", e.kappaInst}, {"maxIters", e.maxIters}, {"logisticSaliency", e.logisticSaliency}};
  j["promotion"] = {{"thetaPromote", decompose.promotion.thetaPromote},
                    {"textureWeight", decompose.promotion.textureWeight}};
  j["matte"] = {{"w0", m.w0}, {"a", m.a}, {"b", m.b}, {"wMin", m.wMin}, {"wMax", m.wMax}};
  j["decompose"] = {{"layerBudget", decompose.layerBudget},
                    {"maxLayers", decompose.maxLayers},
                    {"dzMin", decompose.quantizer.dzMin()},
                    {"dzMax", decompose.quantizer.dzMax()},
                    {"dzMu", decompose.quantizer.mu()}};
  j["dps"] = {{"wMin", d.wMin},   {"wMax", d.wMax},   {"cParallax", d.cParallax},         {"tauEdge", d.tauEdge},
              {"rEdc", d.rEdc},   {"searchRadius", d.searchRadius}, {"holeCoverage", d.holeCoverage}};
  j["render"] = {{"dps", render.dps}, {"filter", render.filter == Filter::Nearest ? "nearest" : "bilinear"}};
  j["gop"] = {{"iouThresh", gop.iouThresh}, {"crackThresh", gop.crackThresh}, {"ema", gop.ema},
              {"emaBoundary", gop.emaBoundary}, {"maxGop", gop.maxGop}, {"hysteresis", gop.hysteresis},
              {"patience", gop.patience}, {"restructure", gop.restructure}, {"refresh", gop.refresh}};
  return j.dump(2);
}

Config loadConfig(const std::filesystem::path& path) {
  Config c;
  if (path.empty()) return c;
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  c.merge(ss.str());
  return c;
}

}  // namespace cpsl
