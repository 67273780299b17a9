#include "sdgcount_cli/commands.hpp"

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>

#include "sdgcount/errors.hpp"
#include "sdgcount/npy.hpp"
#include "sdgcount_cli/render.hpp"

namespace sdgcount::cli {

namespace {

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string sidecar_fingerprint(const fs::path& p) {
  try {
    return nlohmann::json::parse(read_bytes(p)).value("fingerprint", "");
  } catch (const nlohmann::json::exception&) {
    return "";
  }
}

fs::path resolve(const SampleManifest& m, const fs::path& p) { return p.is_absolute() ? p : m.root / p; }

std::vector<LabeledImage> load_split(const fs::path& manifest, const std::string& split) {
  const SampleManifest m = load_manifest(manifest);
  const auto records = m.with_split(split);
  if (records.empty()) throw DataError("manifest " + manifest.string() + " has no '" + split + "' records");
  return load_dataset(m, records);
}

PatchClassMap crop_grid(const PatchClassMap& pcm, int height, int width) {
  const int rows = (height + pcm.patch_size - 1) / pcm.patch_size;
  const int cols = (width + pcm.patch_size - 1) / pcm.patch_size;
  PatchClassMap out{Tensor({rows, cols}), pcm.patch_size};
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out.values.at(r, c) = pcm.values.at(r, c);
  return out;
}

}  // namespace

RunConfig resolve_config(const CommonOptions& opts) {
  if (opts.device != "cpu") throw ConfigError("device '" + opts.device + "' is not available; only 'cpu' is supported");
  RunConfig cfg = opts.config.empty() ? RunConfig{} : load_config(opts.config);
  if (opts.seed) cfg.train.seed = *opts.seed;
  return cfg;
}

fs::path cache_root() {
  if (const char* env = std::getenv("SDGCOUNT_CACHE"); env && *env) return env;
  return ".sdgcount_cache";
}

PrepareStats cmd_prepare(const fs::path& manifest_path, const fs::path& out_dir, double sigma, int patch_size,
                         bool renormalize) {
  const SampleManifest manifest = load_manifest(manifest_path);
  fs::create_directories(out_dir);
  PrepareStats stats;
  std::vector<std::string> problems;
  for (const auto& rec : manifest.records) {
    try {
      const fs::path ann_path = resolve(manifest, rec.annotation);
      const fs::path img_path = resolve(manifest, rec.image);
      const auto [h, w] = png_dimensions(img_path);
      std::ostringstream key;
      key.precision(17);
      key << read_bytes(ann_path) << '|' << h << 'x' << w << '|' << sigma << '|' << patch_size << '|' << renormalize;
      const std::string fingerprint = fnv1a_hex(key.str());

      const fs::path dens_out = out_dir / (rec.id + "_density.npy");
      const fs::path pcm_out = out_dir / (rec.id + "_pcm.npy");
      const fs::path sidecar = out_dir / (rec.id + "_gt.json");
      if (fs::exists(dens_out) && fs::exists(pcm_out) && fs::exists(sidecar) &&
          sidecar_fingerprint(sidecar) == fingerprint) {
        ++stats.skipped;
        continue;
      }
      const PointAnnotation ann = load_annotation(ann_path);
      const DensityMap density = generate_density_map(ann, h, w, sigma, renormalize);
      const int ph = (h + patch_size - 1) / patch_size * patch_size;
      const int pw = (w + patch_size - 1) / patch_size * patch_size;
      const PatchClassMap pcm = generate_pcm_gt(pad_density(density, ph, pw), patch_size);
      save_npy(density.values, dens_out);
      save_npy(pcm.values, pcm_out);
      nlohmann::ordered_json meta;
      meta["id"] = rec.id;
      meta["scale"] = density.scale;
      meta["sigma"] = sigma;
      meta["patch_size"] = patch_size;
      meta["renormalize"] = renormalize;
      meta["height"] = h;
      meta["width"] = w;
      meta["count"] = ann.points.size();
      meta["fingerprint"] = fingerprint;
      write_text(sidecar, meta.dump(2) + "\n");
      ++stats.written;
    } catch (const Error& e) {
      problems.push_back(rec.id + ": " + e.what());
    }
  }
  if (!problems.empty()) throw DataError("prepare failed for " + std::to_string(problems.size()) + " record(s)", problems);
  return stats;
}

TrainHistory cmd_train(const RunConfig& config, const fs::path& manifest, const std::string& split,
                       const fs::path& out_dir, const fs::path& resume_from) {
  if (auto errs = config.validate(); !errs.empty()) throw ConfigError("invalid configuration", errs);
  const auto samples = make_train_samples(load_split(manifest, split), config.data);
  MPCountModel model(config.model, config.train.seed);
  if (!config.model.pretrained_weights.empty() && resume_from.empty()) {
    load_pretrained_encoder(config.model.pretrained_weights, model);
  }
  fs::create_directories(out_dir);
  save_config(config, out_dir / "config.json");
  TrainOptions opts;
  opts.out_dir = out_dir;
  opts.resume_from = resume_from;
  return train(model, samples, config, opts);
}

EvalReport cmd_eval(const fs::path& checkpoint, const fs::path& manifest, const std::string& split,
                    const fs::path& out_dir, bool pde_diagnostic) {
  RunConfig cfg;
  const MPCountModel model = load_model(checkpoint, &cfg);
  cfg.eval.pde_diagnostic = cfg.eval.pde_diagnostic || pde_diagnostic;
  const auto images = load_split(manifest, split);
  const ModelPredictor predictor(model, cfg.train.density_scale);
  EvalReport report = evaluate(predictor, images, cfg, &model);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(out_dir / "eval_report.json", report.to_json());
    write_text(out_dir / "per_image.csv", report.to_csv());
  }
  return report;
}

double cmd_predict(const fs::path& checkpoint, const fs::path& image_path, const fs::path& out_dir) {
  RunConfig cfg;
  const MPCountModel model = load_model(checkpoint, &cfg);
  const Image image = load_png(image_path);
  const InferenceResult r = model.forward_infer(image, cfg.train.density_scale);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    save_npy(r.density.values, out_dir / "density.npy");
    save_png(render_heatmap(r.density), out_dir / "density.png");
    save_png(hstack({render_pcm_panel(image, crop_grid(r.pcm, image.height, image.width)),
                     render_pcm_panel(image, crop_grid(r.pcm_binary, image.height, image.width))}),
             out_dir / "pcm.png");
  }
  return r.count;
}

void cmd_visualize(const fs::path& checkpoint, const fs::path& image_path, const fs::path& out_png,
                   const fs::path& annotation) {
  RunConfig cfg;
  const MPCountModel model = load_model(checkpoint, &cfg);
  const Image image = load_png(image_path);
  const InferenceResult r = model.forward_infer(image, cfg.train.density_scale);

  std::vector<Image> panels;
  if (!annotation.empty()) {
    const PointAnnotation ann = load_annotation(annotation);
    const DensityMap d = generate_density_map(ann, image.height, image.width, cfg.data.sigma, cfg.data.renormalize);
    const int p = cfg.model.patch_size;
    const PatchClassMap gt = generate_pcm_gt(pad_density(d, r.pcm.rows() * p, r.pcm.cols() * p), p);
    panels.push_back(render_pcm_panel(image, crop_grid(gt, image.height, image.width)));
  }
  panels.push_back(render_pcm_panel(image, crop_grid(r.pcm, image.height, image.width)));
  panels.push_back(render_pcm_panel(image, crop_grid(r.pcm_binary, image.height, image.width)));

  if (out_png.has_parent_path()) fs::create_directories(out_png.parent_path());
  save_png(render_heatmap(r.density), out_png);
  fs::path overlay = out_png;
  overlay.replace_filename(out_png.stem().string() + "_pcm.png");
  save_png(hstack(panels), overlay);
}

fs::path cmd_synth(const SynthOptions& opts, const fs::path& out_dir) {
  Rng rng(opts.seed);
  const DomainPair pair = generate_domain_pair(opts.spec, opts.n_train, opts.n_test, rng);
  fs::create_directories(out_dir);
  SampleManifest manifest;
  manifest.root = out_dir;
  write_split(pair.source, out_dir / "train", out_dir, "train", manifest);
  write_split(pair.target, out_dir / "test", out_dir, "test", manifest);
  const fs::path path = out_dir / "manifest.jsonl";
  save_manifest(manifest, path);
  return path;
}

}  // namespace sdgcount::cli
