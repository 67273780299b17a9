#include "sdgcount/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <map>
#include <sstream>

#include "sdgcount/errors.hpp"

namespace sdgcount {

using nlohmann::json;

namespace {

json backbone_json(const BackboneSpec& b) {
  return json{{"name", b.name},
              {"widths", b.widths},
              {"convs", b.convs},
              {"decoder_width", b.decoder_width},
              {"pc_hidden", b.pc_hidden}};
}

json to_json(const RunConfig& c) {
  const auto& a = c.augmentation;
  const auto& m = c.model;
  const auto& t = c.train;
  return json{
      {"data", {{"sigma", c.data.sigma}, {"renormalize", c.data.renormalize}}},
      {"augmentation",
       {{"jitter_prob", a.jitter_prob},
        {"brightness", a.brightness},
        {"contrast", a.contrast},
        {"saturation", a.saturation},
        {"hue", a.hue},
        {"blur_prob", a.blur_prob},
        {"blur_kernel", a.blur_kernel},
        {"blur_sigma", a.blur_sigma},
        {"sharpen_prob", a.sharpen_prob},
        {"sharpen_factor", a.sharpen_factor},
        {"crop_size", a.crop_size},
        {"hflip_prob", a.hflip_prob}}},
      {"model",
       {{"memory_count", m.memory_count},
        {"memory_dim", m.memory_dim},
        {"alpha", m.alpha},
        {"dropout_rate", m.dropout_rate},
        {"patch_size", m.patch_size},
        {"pcm_threshold", m.pcm_threshold},
        {"use_amb", m.switches.amb},
        {"use_cem", m.switches.cem},
        {"use_acl", m.switches.acl},
        {"use_pc", m.switches.pc},
        {"backbone", backbone_json(m.backbone)},
        {"pretrained_weights", m.pretrained_weights}}},
      {"loss", {{"lambda_cls", c.loss.lambda_cls}, {"lambda_con", c.loss.lambda_con}}},
      {"train",
       {{"max_epochs", t.max_epochs},
        {"batch_size", t.batch_size},
        {"max_lr", t.max_lr},
        {"weight_decay", t.weight_decay},
        {"seed", t.seed},
        {"density_scale", t.density_scale},
        {"checkpoint_every", t.checkpoint_every},
        {"warmup_fraction", t.warmup_fraction},
        {"initial_div", t.initial_div},
        {"final_div", t.final_div},
        {"grad_clip", t.grad_clip}}},
      {"eval", {{"pde_diagnostic", c.eval.pde_diagnostic}}},
  };
}

/// Key-by-key reader that accumulates every problem instead of stopping at the first.
class Reader {
 public:
  using Setter = std::function<void(const json&, const std::string& path)>;

  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  void section(const json& doc, const std::string& name, const std::map<std::string, Setter>& fields) {
    if (!doc.contains(name)) return;
    const json& sec = doc.at(name);
    if (!sec.is_object()) {
      errors_.push_back(name + ": expected an object");
      return;
    }
    for (const auto& [key, value] : sec.items()) {
      const std::string path = name + "." + key;
      auto it = fields.find(key);
      if (it == fields.end()) {
        errors_.push_back(path + ": unknown key");
        continue;
      }
      it->second(value, path);
    }
  }

  Setter real(double& out) {
    return [this, &out](const json& v, const std::string& path) {
      if (!v.is_number()) return fail(path, "expected a number");
      out = v.get<double>();
    };
  }
  Setter integer(int& out) {
    return [this, &out](const json& v, const std::string& path) {
      if (!v.is_number_integer()) return fail(path, "expected an integer");
      out = v.get<int>();
    };
  }
  Setter unsigned64(std::uint64_t& out) {
    return [this, &out](const json& v, const std::string& path) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        return fail(path, "expected a non-negative integer");
      out = v.get<std::uint64_t>();
    };
  }
  Setter boolean(bool& out) {
    return [this, &out](const json& v, const std::string& path) {
      if (!v.is_boolean()) return fail(path, "expected true or false");
      out = v.get<bool>();
    };
  }
  Setter text(std::string& out) {
    return [this, &out](const json& v, const std::string& path) {
      if (!v.is_string()) return fail(path, "expected a string");
      out = v.get<std::string>();
    };
  }
  Setter int_list(std::vector<int>& out) {
    return [this, &out](const json& v, const std::string& path) {
      if (!v.is_array()) return fail(path, "expected an array of integers");
      std::vector<int> tmp;
      for (const auto& e : v) {
        if (!e.is_number_integer()) return fail(path, "expected an array of integers");
        tmp.push_back(e.get<int>());
      }
      out = std::move(tmp);
    };
  }
  Setter object(std::map<std::string, Setter> fields) {
    return [this, fields = std::move(fields)](const json& v, const std::string& path) {
      if (!v.is_object()) return fail(path, "expected an object");
      for (const auto& [key, value] : v.items()) {
        auto it = fields.find(key);
        if (it == fields.end()) {
          errors_.push_back(path + "." + key + ": unknown key");
          continue;
        }
        it->second(value, path + "." + key);
      }
    };
  }

 private:
  void fail(const std::string& path, const char* why) { errors_.push_back(path + ": " + why); }
  std::vector<std::string>& errors_;
};

}  // namespace

std::vector<std::string> RunConfig::validate() const {
  std::vector<std::string> errs = model.validate();
  auto aug = augmentation.validate(model.patch_size, kDeepestStride);
  errs.insert(errs.end(), aug.begin(), aug.end());
  if (!(data.sigma > 0)) errs.push_back("data.sigma must be > 0");
  if (!(loss.lambda_cls >= 0) || !std::isfinite(loss.lambda_cls)) errs.push_back("loss.lambda_cls must be finite and >= 0");
  if (!(loss.lambda_con >= 0) || !std::isfinite(loss.lambda_con)) errs.push_back("loss.lambda_con must be finite and >= 0");
  if (train.max_epochs < 1) errs.push_back("train.max_epochs must be >= 1");
  if (train.batch_size < 1) errs.push_back("train.batch_size must be >= 1");
  if (!(train.max_lr > 0)) errs.push_back("train.max_lr must be > 0");
  if (!(train.weight_decay >= 0)) errs.push_back("train.weight_decay must be >= 0");
  if (!(train.density_scale > 0)) errs.push_back("train.density_scale must be > 0");
  if (train.checkpoint_every < 1) errs.push_back("train.checkpoint_every must be >= 1");
  if (!(train.warmup_fraction > 0 && train.warmup_fraction < 1)) errs.push_back("train.warmup_fraction must be in (0,1)");
  if (!(train.initial_div >= 1)) errs.push_back("train.initial_div must be >= 1");
  if (!(train.final_div >= 1)) errs.push_back("train.final_div must be >= 1");
  if (!(train.grad_clip >= 0)) errs.push_back("train.grad_clip must be >= 0");
  return errs;
}

RunConfig RunConfig::desk_scale() {
  RunConfig c;
  c.model.backbone = BackboneSpec::tiny();
  c.model.memory_count = 64;
  c.model.memory_dim = 32;
  c.augmentation.crop_size = 64;
  c.train.batch_size = 4;
  c.train.max_epochs = 30;
  return c;
}

std::string serialize_config(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

RunConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  RunConfig c;
  std::vector<std::string> errors;
  Reader r(errors);
  static const char* kSections[] = {"data", "augmentation", "model", "loss", "train", "eval"};
  for (const auto& [key, value] : doc.items()) {
    if (std::find(std::begin(kSections), std::end(kSections), key) == std::end(kSections)) {
      errors.push_back(key + ": unknown section");
    }
  }
  auto& a = c.augmentation;
  auto& m = c.model;
  auto& t = c.train;
  r.section(doc, "data", {{"sigma", r.real(c.data.sigma)}, {"renormalize", r.boolean(c.data.renormalize)}});
  r.section(doc, "augmentation",
            {{"jitter_prob", r.real(a.jitter_prob)},
             {"brightness", r.real(a.brightness)},
             {"contrast", r.real(a.contrast)},
             {"saturation", r.real(a.saturation)},
             {"hue", r.real(a.hue)},
             {"blur_prob", r.real(a.blur_prob)},
             {"blur_kernel", r.integer(a.blur_kernel)},
             {"blur_sigma", r.real(a.blur_sigma)},
             {"sharpen_prob", r.real(a.sharpen_prob)},
             {"sharpen_factor", r.real(a.sharpen_factor)},
             {"crop_size", r.integer(a.crop_size)},
             {"hflip_prob", r.real(a.hflip_prob)}});
  r.section(doc, "model",
            {{"memory_count", r.integer(m.memory_count)},
             {"memory_dim", r.integer(m.memory_dim)},
             {"alpha", r.real(m.alpha)},
             {"dropout_rate", r.real(m.dropout_rate)},
             {"patch_size", r.integer(m.patch_size)},
             {"pcm_threshold", r.real(m.pcm_threshold)},
             {"use_amb", r.boolean(m.switches.amb)},
             {"use_cem", r.boolean(m.switches.cem)},
             {"use_acl", r.boolean(m.switches.acl)},
             {"use_pc", r.boolean(m.switches.pc)},
             {"backbone", r.object({{"name", r.text(m.backbone.name)},
                                    {"widths", r.int_list(m.backbone.widths)},
                                    {"convs", r.int_list(m.backbone.convs)},
                                    {"decoder_width", r.integer(m.backbone.decoder_width)},
                                    {"pc_hidden", r.integer(m.backbone.pc_hidden)}})},
             {"pretrained_weights", r.text(m.pretrained_weights)}});
  r.section(doc, "loss", {{"lambda_cls", r.real(c.loss.lambda_cls)}, {"lambda_con", r.real(c.loss.lambda_con)}});
  r.section(doc, "train",
            {{"max_epochs", r.integer(t.max_epochs)},
             {"batch_size", r.integer(t.batch_size)},
             {"max_lr", r.real(t.max_lr)},
             {"weight_decay", r.real(t.weight_decay)},
             {"seed", r.unsigned64(t.seed)},
             {"density_scale", r.real(t.density_scale)},
             {"checkpoint_every", r.integer(t.checkpoint_every)},
             {"warmup_fraction", r.real(t.warmup_fraction)},
             {"initial_div", r.real(t.initial_div)},
             {"final_div", r.real(t.final_div)},
             {"grad_clip", r.real(t.grad_clip)}});
  r.section(doc, "eval", {{"pde_diagnostic", r.boolean(c.eval.pde_diagnostic)}});

  if (errors.empty()) errors = c.validate();
  if (!errors.empty()) throw ConfigError("invalid configuration", errors);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void save_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << serialize_config(config);
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace sdgcount
