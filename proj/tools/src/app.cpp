#include "sdgcount_cli/app.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <ostream>

#include "sdgcount/errors.hpp"
#include "sdgcount_cli/commands.hpp"

namespace sdgcount::cli {

namespace {

void add_common(CLI::App* cmd, CommonOptions& opts, bool out_required) {
  cmd->add_option("--config", opts.config, "Run configuration (JSON)");
  cmd->add_option("--seed", opts.seed, "Override the configured seed");
  cmd->add_option("--device", opts.device, "Compute device (cpu)");
  auto* out = cmd->add_option("--out", opts.out, "Output directory");
  if (out_required) out->required();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Single-domain generalized crowd counting"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string manifest, checkpoint, image, annotation, output_png, resume;
  double sigma = 4.0;
  int patch = 16;
  bool no_renorm = false, pde = false;
  SynthOptions synth;
  std::string transform = "haze";
  // Per-command variables: CLI11 writes default_val() at definition time.
  std::string train_split = "train", eval_split = "test";

  auto* prepare = app.add_subcommand("prepare", "Materialize density and patch-class ground truth");
  add_common(prepare, common, false);
  prepare->add_option("--manifest", manifest)->required();
  prepare->add_option("--sigma", sigma);
  prepare->add_option("--patch-size", patch);
  prepare->add_flag("--no-renormalize", no_renorm);

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  add_common(train_cmd, common, true);
  train_cmd->add_option("--manifest", manifest)->required();
  train_cmd->add_option("--split", train_split)->capture_default_str();
  train_cmd->add_option("--resume", resume, "Checkpoint to continue from");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval_cmd, common, false);
  eval_cmd->add_option("--checkpoint", checkpoint)->required();
  eval_cmd->add_option("--manifest", manifest)->required();
  eval_cmd->add_option("--split", eval_split)->capture_default_str();
  eval_cmd->add_flag("--pde", pde, "Also report the portion of diminished elements");

  auto* predict = app.add_subcommand("predict", "Count one image");
  add_common(predict, common, false);
  predict->add_option("--checkpoint", checkpoint)->required();
  predict->add_option("--image", image)->required();

  auto* visualize = app.add_subcommand("visualize", "Render density and patch-map overlays");
  add_common(visualize, common, false);
  visualize->add_option("--checkpoint", checkpoint)->required();
  visualize->add_option("--image", image)->required();
  visualize->add_option("--annotation", annotation);
  visualize->add_option("--output", output_png, "Heat-map PNG path")->required();

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic source/target dataset");
  add_common(synth_cmd, common, true);
  synth_cmd->add_option("--n-train", synth.n_train);
  synth_cmd->add_option("--n-test", synth.n_test);
  synth_cmd->add_option("--size", synth.spec.height, "Square canvas size");
  synth_cmd->add_option("--min-count", synth.spec.min_count);
  synth_cmd->add_option("--max-count", synth.spec.max_count);
  synth_cmd->add_option("--texture", synth.spec.texture);
  synth_cmd->add_option("--transform", transform)->default_val("haze");
  synth_cmd->add_option("--strength", synth.spec.strength)->default_val(0.6);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    if (*prepare) {
      if (common.device != "cpu") throw ConfigError("only the 'cpu' device is supported");
      const auto dir = common.out.empty() ? cache_root() / "prepared" : common.out;
      const PrepareStats s = cmd_prepare(manifest, dir, sigma, patch, !no_renorm);
      out << "prepared " << s.written << " written, " << s.skipped << " up to date -> " << dir.string() << "\n";
    } else if (*train_cmd) {
      const RunConfig cfg = resolve_config(common);
      const TrainHistory h = cmd_train(cfg, manifest, train_split, common.out, resume);
      out << "trained " << h.progress.epochs_done << " epochs, " << h.progress.global_step << " steps";
      if (!h.steps.empty()) out << ", final loss " << fmt(h.steps.back().loss.total);
      out << "\ncheckpoint: " << h.last_checkpoint.string() << "\n";
    } else if (*eval_cmd) {
      resolve_config(common);
      const EvalReport r = cmd_eval(checkpoint, manifest, eval_split, common.out, pde);
      out << "mae " << fmt(r.mae) << " mse " << fmt(r.mse) << " miou " << fmt(r.pcm.miou);
      if (r.pde) out << " pde " << fmt(*r.pde) << "%";
      out << "\n";
    } else if (*predict) {
      resolve_config(common);
      out << fmt(cmd_predict(checkpoint, image, common.out)) << "\n";
    } else if (*visualize) {
      resolve_config(common);
      cmd_visualize(checkpoint, image, output_png, annotation);
      out << "wrote " << output_png << "\n";
    } else if (*synth_cmd) {
      resolve_config(common);
      synth.spec.width = synth.spec.height;
      synth.spec.transform = parse_transform(transform);
      if (common.seed) synth.seed = *common.seed;
      out << cmd_synth(synth, common.out).string() << "\n";
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace sdgcount::cli
