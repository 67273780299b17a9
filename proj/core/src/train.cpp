#include "sdgcount/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "sdgcount/augment.hpp"
#include "sdgcount/errors.hpp"
#include "sdgcount/optim.hpp"

namespace sdgcount {

namespace {

// Stream tags for Rng::derive so the different consumers never collide.
constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kSampleStream = 2;
constexpr std::uint64_t kDropoutStream = 3;

struct Batch {
  Tensor ori, aug, density, pcm;
};

Batch build_batch(const std::vector<TrainSample>& samples, const std::vector<std::size_t>& idx,
                  const RunConfig& cfg, std::int64_t epoch) {
  std::vector<Image> ori_imgs, aug_imgs;
  std::vector<DensityMap> dens;
  std::vector<PatchClassMap> pcms;
  for (std::size_t i : idx) {
    Rng rng = Rng::derive(cfg.train.seed, {kSampleStream, static_cast<std::uint64_t>(epoch), i});
    AugmentedPair pair = augment_pair(samples[i].image, samples[i].density, cfg.model.patch_size, cfg.augmentation, rng);
    ori_imgs.push_back(std::move(pair.ori.image));
    aug_imgs.push_back(std::move(pair.aug.image));
    dens.push_back(std::move(pair.ori.density));
    pcms.push_back(std::move(pair.ori.pcm));
  }
  const std::int64_t n = static_cast<std::int64_t>(idx.size());
  const std::int64_t h = dens[0].height(), w = dens[0].width();
  const std::int64_t gh = pcms[0].rows(), gw = pcms[0].cols();
  Batch b{images_to_tensor(ori_imgs), images_to_tensor(aug_imgs), Tensor({n, 1, h, w}), Tensor({n, 1, gh, gw})};
  for (std::int64_t k = 0; k < n; ++k) {
    const auto& d = dens[static_cast<std::size_t>(k)].values;
    for (std::int64_t j = 0; j < h * w; ++j) b.density[k * h * w + j] = d[j] * cfg.train.density_scale;
    const auto& p = pcms[static_cast<std::size_t>(k)].values;
    for (std::int64_t j = 0; j < gh * gw; ++j) b.pcm[k * gh * gw + j] = p[j];
  }
  return b;
}

struct StepOutcome {
  LossBreakdown loss;
};

/// One forward/backward/update. Returns the loss breakdown before the update.
StepOutcome train_step(MPCountModel& model, AdamW& opt, const Batch& batch, const RunConfig& cfg, double lr,
                       std::int64_t global_step) {
  Rng dropout_rng = Rng::derive(cfg.train.seed, {kDropoutStream, static_cast<std::uint64_t>(global_step)});
  TrainOutputs out = model.forward_train(batch.ori, batch.aug, dropout_rng, true);
  const auto& sw = cfg.model.switches;

  LossTerms terms;
  terms.den_ori = density_loss(out.density_ori, batch.density);
  terms.den_aug = density_loss(out.density_aug, batch.density);
  if (sw.pc) {
    terms.cls_ori = pc_loss(out.pcm_ori, batch.pcm);
    terms.cls_aug = pc_loss(out.pcm_aug, batch.pcm);
  }
  if (sw.acl && out.attn_ori.defined()) terms.con = attention_consistency_loss(out.attn_ori, out.attn_aug);

  auto val = [](const ag::Var& v) { return v.defined() ? v.value()[0] : 0.0; };
  const LossParts parts{val(terms.den_ori), val(terms.den_aug), val(terms.cls_ori), val(terms.cls_aug), val(terms.con)};
  StepOutcome result{total_loss(parts, cfg.loss)};  // throws on non-finite terms

  ag::Var total = total_loss(terms, cfg.loss);
  opt.zero_grad();
  total.backward();
  nn::ParameterSet params = opt.params();
  if (cfg.train.grad_clip > 0) clip_grad_norm(params, cfg.train.grad_clip);
  opt.step(lr);
  return result;
}

AdamWConfig adam_config(const RunConfig& cfg) {
  AdamWConfig a;
  a.weight_decay = cfg.train.weight_decay;
  return a;
}

}  // namespace

std::vector<TrainSample> make_train_samples(const std::vector<LabeledImage>& images, const DataConfig& data) {
  std::vector<TrainSample> out;
  out.reserve(images.size());
  for (const auto& li : images) {
    out.push_back({li.id, li.image,
                   generate_density_map(li.annotation, li.image.height, li.image.width, data.sigma, data.renormalize)});
  }
  return out;
}

std::string StepRecord::to_json_line() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["epoch"] = epoch;
  j["lr"] = lr;
  for (const auto& [name, value] : loss.labeled()) j[name] = value;
  j["wall_time"] = wall_time;
  return j.dump();
}

std::int64_t steps_per_epoch(std::size_t n, int batch_size) {
  return (static_cast<std::int64_t>(n) + batch_size - 1) / batch_size;
}

TrainHistory train(MPCountModel& model, const std::vector<TrainSample>& samples, const RunConfig& config,
                   const TrainOptions& options) {
  if (samples.empty()) throw DataError("train: dataset is empty");
  if (auto errs = config.validate(); !errs.empty()) throw ConfigError("invalid configuration", errs);
  if (!(model.config().switches == config.model.switches)) {
    throw ConfigError("train: model switches differ from the run configuration");
  }
  const auto& tc = config.train;
  const std::int64_t per_epoch = steps_per_epoch(samples.size(), tc.batch_size);
  const OneCycleLR schedule(tc.max_lr, per_epoch * tc.max_epochs, tc.warmup_fraction, tc.initial_div, tc.final_div);
  AdamW opt(model.parameters(), adam_config(config));

  TrainHistory history;
  if (!options.resume_from.empty()) {
    const CheckpointHeader h = read_checkpoint_header(options.resume_from);
    if (h.config_hash != config_hash(config)) {
      throw ConfigError("resume: checkpoint " + options.resume_from.string() + " was written with a different config (" +
                        h.config_hash + " vs " + config_hash(config) + ")");
    }
    history.progress = load_checkpoint(options.resume_from, model, &opt).progress;
    history.last_checkpoint = options.resume_from;
  }

  std::ofstream log;
  std::filesystem::path ckpt_dir;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    ckpt_dir = options.out_dir / "checkpoints";
    std::filesystem::create_directories(ckpt_dir);
    log.open(options.out_dir / "train_log.jsonl", options.resume_from.empty() ? std::ios::trunc : std::ios::app);
    if (!log) throw Error("cannot write training log in " + options.out_dir.string());
  }

  const auto t0 = std::chrono::steady_clock::now();
  for (std::int64_t epoch = history.progress.epochs_done; epoch < tc.max_epochs; ++epoch) {
    if (options.stop_after_epochs && epoch >= *options.stop_after_epochs) break;
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = Rng::derive(tc.seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)});
    shuffle_rng.shuffle(order);

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(end));
      const Batch batch = build_batch(samples, idx, config, epoch);
      const double lr = schedule.lr_at(history.progress.global_step);
      StepRecord rec;
      try {
        rec.loss = train_step(model, opt, batch, config, lr, history.progress.global_step).loss;
      } catch (const NumericError& e) {
        const std::string last =
            history.last_checkpoint.empty() ? "none written yet" : history.last_checkpoint.string();
        throw NumericError(std::string(e.what()) + " at step " + std::to_string(history.progress.global_step) +
                           "; last good checkpoint: " + last);
      }
      rec.step = history.progress.global_step;
      rec.epoch = epoch;
      rec.lr = lr;
      rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (log.is_open()) log << rec.to_json_line() << '\n';
      if (options.on_step) options.on_step(rec);
      history.steps.push_back(std::move(rec));
      ++history.progress.global_step;
    }
    history.progress.epochs_done = epoch + 1;

    const bool last_epoch = history.progress.epochs_done == tc.max_epochs;
    if (!ckpt_dir.empty() && (history.progress.epochs_done % tc.checkpoint_every == 0 || last_epoch)) {
      const auto path = ckpt_dir / "last.ckpt";
      save_checkpoint(path, config, model, &opt, history.progress);
      history.last_checkpoint = path;
    }
  }
  if (log.is_open()) log.flush();
  return history;
}

double count_mae(const MPCountModel& model, const std::vector<TrainSample>& samples, double density_scale) {
  if (samples.empty()) return 0.0;
  double err = 0.0;
  for (const auto& s : samples) err += std::abs(model.forward_infer(s.image, density_scale).count - s.density.count());
  return err / static_cast<double>(samples.size());
}

ProbeResult overfit_probe(MPCountModel& model, const std::vector<TrainSample>& samples, const RunConfig& config,
                          std::int64_t steps) {
  if (samples.empty() || samples.size() > 8) throw DataError("overfit_probe: needs 1 to 8 samples");
  RunConfig cfg = config;
  cfg.augmentation.crop_size = samples[0].image.height;
  for (const auto& s : samples) {
    if (s.image.height != cfg.augmentation.crop_size || s.image.width != cfg.augmentation.crop_size)
      throw ShapeError("overfit_probe: samples must be square and of equal size");
  }
  cfg.augmentation.hflip_prob = 0.0;

  ProbeResult result;
  for (const auto& s : samples) result.mean_count += s.density.count();
  result.mean_count /= static_cast<double>(samples.size());

  if (steps > 0) {
    std::vector<std::size_t> all(samples.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const OneCycleLR schedule(cfg.train.max_lr, steps, cfg.train.warmup_fraction, cfg.train.initial_div,
                              cfg.train.final_div);
    AdamW opt(model.parameters(), adam_config(cfg));
    for (std::int64_t step = 0; step < steps; ++step) {
      const Batch batch = build_batch(samples, all, cfg, step);
      result.losses.push_back(train_step(model, opt, batch, cfg, schedule.lr_at(step), step).loss.total);
    }
  }
  result.mae = count_mae(model, samples, cfg.train.density_scale);
  return result;
}

}  // namespace sdgcount
