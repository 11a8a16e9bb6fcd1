#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ropkit/ropkit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitPartial = 2;

// One JSON object per line on stderr; a line is written under a lock so
// concurrent workers never interleave.
class Log {
 public:
  explicit Log(std::string cmd) : cmd_(std::move(cmd)) {}

  void write(const std::string& level, const std::string& event, json fields = json::object()) const {
    json line = {{"level", level}, {"cmd", cmd_}, {"event", event}};
    line.update(fields);
    const std::string text = line.dump() + "\n";
    std::lock_guard lock(mutex());
    std::fputs(text.c_str(), stderr);
    std::fflush(stderr);
  }
  void info(const std::string& event, json fields = json::object()) const { write("info", event, std::move(fields)); }
  void warn(const std::string& event, json fields = json::object()) const { write("warn", event, std::move(fields)); }
  void error(const std::string& event, json fields = json::object()) const { write("error", event, std::move(fields)); }

 private:
  static std::mutex& mutex() {
    static std::mutex m;
    return m;
  }
  std::string cmd_;
};

template <typename F>
void parallel_for(std::size_t n, int jobs, F&& task) {
  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i; (i = next++) < n;) task(i);
  };
  if (workers == 1) {
    run();
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(run);
}

// Keys of the flat config file that are also exposed as --flags.
const std::vector<std::string> kEnhanceKeys{"clahe_tiles", "clahe_clip", "hist_bins", "sigmoid_c", "sigmoid_offset",
                                            "c_lo",        "c_hi",       "psf_sigma", "psf_size",  "wiener_nsr"};
const std::vector<std::string> kDetectKeys{"scales", "threshold_percentile", "min_area", "max_detections"};

std::string flag_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

struct SettingsArgs {
  std::string config;
  std::map<std::string, std::string> values;
  bool fit_c = false;

  void add(CLI::App* cmd, const std::vector<std::string>& keys) {
    cmd->add_option("--config", config, "key = value settings file")->check(CLI::ExistingFile);
    for (const auto& key : keys) {
      cmd->add_option_function<std::string>(flag_name(key), [this, key](const std::string& v) { values[key] = v; },
                                            "setting '" + key + "'");
    }
  }

  ropkit::PipelineSettings resolve() const {
    ropkit::PipelineSettings s = config.empty() ? ropkit::PipelineSettings{} : ropkit::load_settings(config);
    for (const auto& [k, v] : values) ropkit::apply_setting(s, k, v);
    if (fit_c) s.enhance.fit_c = true;
    s.validate();
    return s;
  }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ropkit::IoError("cannot create output directory " + dir.string());
  const fs::path probe = dir / ".ropkit_write_probe";
  std::ofstream(probe) << "";
  if (!fs::exists(probe)) throw ropkit::IoError("output directory " + dir.string() + " is not writable");
  fs::remove(probe, ec);
}

// --- enhance ---------------------------------------------------------------

struct EnhanceArgs {
  std::vector<std::string> images;
  std::string out;
  int jobs = 1;
  SettingsArgs settings;
};

int cmd_enhance(const EnhanceArgs& a) {
  const Log log("enhance");
  ropkit::PipelineSettings s;
  try {
    s = a.settings.resolve();
    ensure_dir(fs::path(a.out) / "overlays");
  } catch (const std::exception& e) {
    log.error("setup", {{"error", e.what()}});
    return kExitFatal;
  }
  std::atomic<int> failed{0};
  parallel_for(a.images.size(), a.jobs, [&](std::size_t i) {
    const fs::path in = a.images[i];
    try {
      const auto img = ropkit::to_rgb(ropkit::load_image(in));
      const auto st = ropkit::enhance_stages(img, s.enhance);
      const fs::path dst = fs::path(a.out) / (in.stem().string() + ".png");
      ropkit::save_image(st.rgb, dst);
      ropkit::save_image(ropkit::hconcat({img, st.rgb}), fs::path(a.out) / "overlays" / (in.stem().string() + "_compare.png"));
      json fields = {{"path", in.string()}, {"output", dst.string()}, {"sigmoid_c", st.sigmoid_c}};
      if (st.fit_degenerate) log.warn("fit_degenerate", {{"path", in.string()}, {"sigmoid_c", st.sigmoid_c}});
      log.info("image", fields);
    } catch (const std::exception& e) {
      ++failed;
      log.error("image", {{"path", in.string()}, {"error", e.what()}});
    }
  });
  log.info("done", {{"images", a.images.size()}, {"failed", failed.load()}});
  return failed ? kExitPartial : kExitOk;
}

// --- phantom ---------------------------------------------------------------

struct PhantomArgs {
  int n = 1;
  std::uint64_t seed = 1;
  std::string spec;
  std::string out;
  std::string prefix = "phantom";
  int jobs = 1;
  std::optional<int> width, height;
  std::optional<double> ridge_contrast, gradient, blur, noise, contrast_factor;
  std::vector<double> contrast_range;
};

int cmd_phantom(const PhantomArgs& a) {
  const Log log("phantom");
  std::vector<ropkit::PhantomSpec> specs;
  try {
    ropkit::PhantomSpec base = a.spec.empty() ? ropkit::PhantomSpec{} : ropkit::load_phantom_spec(a.spec);
    base.seed = a.seed;
    if (a.width) base.width = *a.width;
    if (a.height) base.height = *a.height;
    if (a.ridge_contrast) base.ridge.contrast = *a.ridge_contrast;
    if (a.gradient) base.degrade.illum_gradient = *a.gradient;
    if (a.blur) base.degrade.blur_sigma = *a.blur;
    if (a.noise) base.degrade.noise_sigma = *a.noise;
    if (a.contrast_factor) base.degrade.contrast_factor = *a.contrast_factor;
    base.validate();
    const double lo = a.contrast_range.empty() ? base.ridge.contrast : a.contrast_range[0];
    const double hi = a.contrast_range.empty() ? base.ridge.contrast : a.contrast_range[1];
    specs = ropkit::phantom_series(base, a.n, lo, hi);
    for (const auto& s : specs) s.validate();
    ensure_dir(a.out);
  } catch (const std::exception& e) {
    log.error("setup", {{"error", e.what()}});
    return kExitFatal;
  }

  ropkit::DatasetManifest manifest;
  manifest.images.resize(specs.size());
  std::atomic<int> failed{0};
  parallel_for(specs.size(), a.jobs, [&](std::size_t i) {
    char id[64];
    std::snprintf(id, sizeof id, "%s_%03zu", a.prefix.c_str(), i);
    try {
      const auto ph = ropkit::generate_phantom(specs[i], id);
      const fs::path dir = a.out;
      ropkit::save_image(ph.image, dir / (std::string(id) + ".png"));
      ropkit::save_mask(ph.vessel_mask, dir / (std::string(id) + "_vessels.png"));
      ropkit::ManifestEntry entry{id, std::string(id) + ".png", specs[i].width, specs[i].height, {ph.annotation}};
      ropkit::DatasetManifest single{"test", {entry}};
      ropkit::save_manifest(single, dir / (std::string(id) + "_ann.json"));
      manifest.images[i] = std::move(entry);
      log.info("image", {{"image_id", id}, {"seed", specs[i].seed}, {"ridge_contrast", specs[i].ridge.contrast}});
    } catch (const std::exception& e) {
      ++failed;
      log.error("image", {{"image_id", id}, {"error", e.what()}});
    }
  });
  if (failed) return kExitFatal;
  try {
    ropkit::save_manifest(manifest, fs::path(a.out) / "manifest.json");
  } catch (const std::exception& e) {
    log.error("manifest", {{"error", e.what()}});
    return kExitFatal;
  }
  log.info("done", {{"images", specs.size()}, {"manifest", (fs::path(a.out) / "manifest.json").string()}});
  return kExitOk;
}

// --- detect ----------------------------------------------------------------

struct DetectArgs {
  std::vector<std::string> images;
  std::string manifest;
  std::string out;
  bool raw = false;
  int jobs = 1;
  SettingsArgs settings;
};

ropkit::RasterImage detection_overlay(const ropkit::DetectionRun& run) {
  ropkit::RasterImage proposals = run.input, kept = run.input, masks = run.input;
  for (const auto& d : run.proposals) ropkit::draw_box(proposals, d.box, ropkit::kProposalColour);
  for (const auto& d : run.kept) {
    ropkit::draw_box(kept, d.box, ropkit::kKeptColour);
    ropkit::tint_mask(masks, d.mask, ropkit::kMaskColour);
  }
  return ropkit::hconcat({run.input, proposals, kept, masks});
}

int cmd_detect(const DetectArgs& a) {
  const Log log("detect");
  ropkit::PipelineSettings s;
  std::vector<std::pair<std::string, fs::path>> inputs;  // image id, path
  try {
    s = a.settings.resolve();
    if (!a.manifest.empty()) {
      const auto loaded = ropkit::load_manifest(a.manifest);
      for (const auto& w : loaded.warnings) log.warn("manifest", {{"warning", w}});
      for (const auto& e : loaded.value.images) inputs.emplace_back(e.image_id, ropkit::resolve_image_path(a.manifest, e));
    }
    for (const auto& p : a.images) inputs.emplace_back(fs::path(p).stem().string(), p);
    ensure_dir(fs::path(a.out) / "overlays");
  } catch (const std::exception& e) {
    log.error("setup", {{"error", e.what()}});
    return kExitFatal;
  }

  std::vector<std::vector<ropkit::PredictionRecord>> per_image(inputs.size());
  std::atomic<int> failed{0};
  parallel_for(inputs.size(), a.jobs, [&](std::size_t i) {
    const auto& [id, path] = inputs[i];
    try {
      const auto run = ropkit::run_detection(ropkit::load_image(path), s, a.raw, id);
      for (const auto& d : run.kept) per_image[i].push_back(ropkit::to_prediction(d));
      ropkit::save_image(detection_overlay(run), fs::path(a.out) / "overlays" / (id + ".png"));
      log.info("image", {{"image_id", id}, {"path", path.string()}, {"proposals", run.proposals.size()},
                         {"detections", run.kept.size()}});
    } catch (const std::exception& e) {
      ++failed;
      log.error("image", {{"image_id", id}, {"path", path.string()}, {"error", e.what()}});
    }
  });

  ropkit::PredictionSet set;
  set.mode = a.raw ? "raw" : "enhanced";
  for (auto& v : per_image) set.predictions.insert(set.predictions.end(), v.begin(), v.end());
  const fs::path dst = fs::path(a.out) / "predictions.json";
  try {
    ropkit::save_predictions(set, dst);
  } catch (const std::exception& e) {
    log.error("predictions", {{"error", e.what()}});
    return kExitFatal;
  }
  log.info("done", {{"images", inputs.size()}, {"failed", failed.load()}, {"predictions", set.predictions.size()},
                    {"mode", *set.mode}, {"output", dst.string()}});
  return failed ? kExitPartial : kExitOk;
}

// --- score -----------------------------------------------------------------

struct ScoreArgs {
  std::string manifest;
  std::string predictions;
  std::string out;
  std::string csv;
  SettingsArgs settings;
};

int cmd_score(const ScoreArgs& a) {
  const Log log("score");
  try {
    const auto s = a.settings.resolve();
    const auto manifest = ropkit::load_manifest(a.manifest);
    for (const auto& w : manifest.warnings) log.warn("manifest", {{"warning", w}});
    auto preds = ropkit::load_predictions(a.predictions);
    for (const auto& w : preds.warnings) log.warn("predictions", {{"warning", w}});
    ropkit::validate_predictions(preds.value, manifest.value);

    const auto score = ropkit::score_dataset(manifest.value, preds.value, s.match_iou);
    const json report = ropkit::report_to_json(score);
    ropkit::validate_report_json(report);
    if (a.out.empty()) {
      std::cout << report.dump(2) << '\n';
    } else {
      std::ofstream os(a.out);
      if (!(os << report.dump(2) << '\n')) throw ropkit::IoError("cannot write " + a.out);
    }
    if (!a.csv.empty()) {
      std::ofstream os(a.csv);
      ropkit::write_per_image_csv(score, os);
      if (!os) throw ropkit::IoError("cannot write " + a.csv);
    }
    log.info("done", {{"precision", score.object.precision}, {"recall", score.object.recall}, {"f1", score.object.f1},
                      {"images", score.matches.images.size()}});
    return kExitOk;
  } catch (const std::exception& e) {
    log.error("score", {{"error", e.what()}});
    return kExitFatal;
  }
}

// --- gt2pred ---------------------------------------------------------------

struct Gt2PredArgs {
  std::string manifest;
  std::string out;
};

int cmd_gt2pred(const Gt2PredArgs& a) {
  const Log log("gt2pred");
  try {
    const auto manifest = ropkit::load_manifest(a.manifest, false);
    ropkit::PredictionSet set;
    for (const auto& ann : manifest.value.annotations()) set.predictions.push_back(ropkit::to_prediction(ann));
    ropkit::save_predictions(set, a.out);
    log.info("done", {{"predictions", set.predictions.size()}, {"output", a.out}});
    return kExitOk;
  } catch (const std::exception& e) {
    log.error("gt2pred", {{"error", e.what()}});
    return kExitFatal;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fundus enhancement, ridge detection and scoring"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ropkit 0.1.0");

  EnhanceArgs ea;
  auto* enhance = app.add_subcommand("enhance", "Enhance images (YIQ CLAHE, sigmoid stretch, Wiener)");
  enhance->add_option("images", ea.images, "input images");
  enhance->add_option("--out", ea.out, "output directory")->required();
  enhance->add_option("--jobs", ea.jobs, "worker threads")->check(CLI::PositiveNumber);
  enhance->add_flag("--fit-c", ea.settings.fit_c, "fit the sigmoid c by AMBE minimization");
  ea.settings.add(enhance, kEnhanceKeys);

  PhantomArgs pa;
  auto* phantom = app.add_subcommand("phantom", "Generate synthetic fundus phantoms with ridge ground truth");
  phantom->add_option("--n", pa.n, "number of phantoms")->check(CLI::NonNegativeNumber);
  phantom->add_option("--seed", pa.seed, "seed of the first phantom; phantom i uses seed + i");
  phantom->add_option("--spec", pa.spec, "phantom spec JSON")->check(CLI::ExistingFile);
  phantom->add_option("--out", pa.out, "output directory")->required();
  phantom->add_option("--prefix", pa.prefix, "image id prefix");
  phantom->add_option("--jobs", pa.jobs, "worker threads")->check(CLI::PositiveNumber);
  phantom->add_option("--width", pa.width, "image width");
  phantom->add_option("--height", pa.height, "image height");
  phantom->add_option("--ridge-contrast", pa.ridge_contrast, "ridge contrast");
  phantom->add_option("--contrast-range", pa.contrast_range, "ridge contrast spread over the batch: LO HI")
      ->expected(2);
  phantom->add_option("--gradient", pa.gradient, "illumination gradient");
  phantom->add_option("--blur", pa.blur, "blur sigma");
  phantom->add_option("--noise", pa.noise, "noise sigma");
  phantom->add_option("--contrast-factor", pa.contrast_factor, "global contrast factor");

  DetectArgs da;
  auto* detect = app.add_subcommand("detect", "Detect ridges and write predictions JSON plus overlays");
  detect->add_option("images", da.images, "input images (ids are file stems)");
  detect->add_option("--manifest", da.manifest, "dataset manifest listing the images")->check(CLI::ExistingFile);
  detect->add_option("--out", da.out, "output directory")->required();
  detect->add_option("--jobs", da.jobs, "worker threads")->check(CLI::PositiveNumber);
  detect->add_flag("--raw", da.raw, "skip enhancement");
  detect->add_flag("--fit-c", da.settings.fit_c, "fit the sigmoid c by AMBE minimization");
  auto detect_keys = kEnhanceKeys;
  detect_keys.insert(detect_keys.end(), kDetectKeys.begin(), kDetectKeys.end());
  detect_keys.push_back("nms_thresh");
  da.settings.add(detect, detect_keys);

  ScoreArgs sa;
  auto* score = app.add_subcommand("score", "Score predictions against a dataset manifest");
  score->add_option("--manifest", sa.manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
  score->add_option("--predictions", sa.predictions, "predictions JSON")->required()->check(CLI::ExistingFile);
  score->add_option("--out", sa.out, "report path (stdout when omitted)");
  score->add_option("--csv", sa.csv, "per-image CSV path");
  sa.settings.add(score, {"match_iou"});

  Gt2PredArgs ga;
  auto* gt2pred = app.add_subcommand("gt2pred", "Write a manifest's annotations as predictions (score 1)");
  gt2pred->add_option("--manifest", ga.manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
  gt2pred->add_option("--out", ga.out, "predictions path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitFatal;
  }

  if (*enhance) return cmd_enhance(ea);
  if (*phantom) return cmd_phantom(pa);
  if (*detect) return cmd_detect(da);
  if (*score) return cmd_score(sa);
  return cmd_gt2pred(ga);
}
