#include "sdgcount/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>
#include <map>
#include <system_error>

#include "sdgcount/errors.hpp"

namespace sdgcount {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'S', 'D', 'G', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

struct Entry {
  Shape shape;
  std::uint64_t offset = 0;  // in doubles from the payload start
};

struct Parsed {
  CheckpointHeader header;
  std::map<std::string, Entry> table;
  std::map<std::string, std::int64_t> adam_steps;
  std::vector<double> payload;
};

Parsed read_file(const std::filesystem::path& path, bool want_payload) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw DataError(path.string() + " is not a checkpoint");
  if (version != kVersion) throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DataError(path.string() + ": truncated header");

  Parsed p;
  try {
    json h = json::parse(text);
    p.header.config_text = h.at("config").get<std::string>();
    p.header.config_hash = h.at("config_hash").get<std::string>();
    p.header.seed = h.at("seed").get<std::uint64_t>();
    p.header.progress.epochs_done = h.at("epochs_done").get<std::int64_t>();
    p.header.progress.global_step = h.at("global_step").get<std::int64_t>();
    p.header.has_optimizer = h.at("has_optimizer").get<bool>();
    for (const auto& [name, e] : h.at("tensors").items()) {
      p.table[name] = Entry{e.at("shape").get<Shape>(), e.at("offset").get<std::uint64_t>()};
    }
    if (h.contains("adam_steps")) p.adam_steps = h.at("adam_steps").get<std::map<std::string, std::int64_t>>();
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed checkpoint header: " + e.what());
  }
  if (want_payload) {
    std::uint64_t total = 0;
    for (const auto& [_, e] : p.table) total = std::max<std::uint64_t>(total, e.offset + shape_numel(e.shape));
    p.payload.resize(total);
    in.read(reinterpret_cast<char*>(p.payload.data()), static_cast<std::streamsize>(total * sizeof(double)));
    if (!in) throw DataError(path.string() + ": truncated payload");
  }
  return p;
}

/// Copies a stored tensor into `dst`, recording any problem in `errors`.
void restore(const Parsed& p, const std::string& name, Tensor& dst, std::vector<std::string>& errors) {
  auto it = p.table.find(name);
  if (it == p.table.end()) {
    errors.push_back(name + ": missing");
    return;
  }
  if (it->second.shape != dst.shape()) {
    errors.push_back(name + ": stored " + shape_str(it->second.shape) + ", expected " + shape_str(dst.shape()));
    return;
  }
  std::copy_n(p.payload.begin() + static_cast<std::ptrdiff_t>(it->second.offset), dst.numel(), dst.data());
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config, MPCountModel& model,
                     const AdamW* optimizer, TrainProgress progress) {
  nn::ParameterSet ps = model.parameters();
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (auto& [name, v] : ps.params) tensors.emplace_back("param/" + name, &v.value());
  for (auto& [name, t] : ps.buffers) tensors.emplace_back("buffer/" + name, t);
  json adam_steps = json::object();
  if (optimizer) {
    const auto& names = optimizer->params().params;
    const auto& slots = optimizer->slots();
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (slots[i].steps == 0) continue;
      tensors.emplace_back("adam_m/" + names[i].first, &slots[i].exp_avg);
      tensors.emplace_back("adam_v/" + names[i].first, &slots[i].exp_avg_sq);
      adam_steps[names[i].first] = slots[i].steps;
    }
  }

  json table = json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    table[name] = {{"shape", t->shape()}, {"offset", offset}};
    offset += static_cast<std::uint64_t>(t->numel());
  }
  json header = {{"config", serialize_config(config)},
                 {"config_hash", config_hash(config)},
                 {"seed", config.train.seed},
                 {"epochs_done", progress.epochs_done},
                 {"global_step", progress.global_step},
                 {"has_optimizer", optimizer != nullptr},
                 {"adam_steps", adam_steps},
                 {"tensors", table}};
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    const std::uint64_t len = text.size();
    out.write(kMagic, 8);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(len));
    for (const auto& [_, t] : tensors) {
      out.write(reinterpret_cast<const char*>(t->data()), static_cast<std::streamsize>(t->numel() * sizeof(double)));
    }
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) { return read_file(path, false).header; }

CheckpointHeader load_checkpoint(const std::filesystem::path& path, MPCountModel& model, AdamW* optimizer) {
  Parsed p = read_file(path, true);
  std::vector<std::string> errors;
  nn::ParameterSet ps = model.parameters();
  for (auto& [name, v] : ps.params) restore(p, "param/" + name, v.value_mut(), errors);
  for (auto& [name, t] : ps.buffers) restore(p, "buffer/" + name, *t, errors);
  if (optimizer && p.header.has_optimizer) {
    const auto& names = optimizer->params().params;
    auto& slots = optimizer->slots();
    for (std::size_t i = 0; i < names.size(); ++i) {
      auto it = p.adam_steps.find(names[i].first);
      if (it == p.adam_steps.end()) {
        slots[i] = AdamW::Slot{};
        continue;
      }
      const Shape& shape = names[i].second.shape();
      slots[i].exp_avg = Tensor(shape);
      slots[i].exp_avg_sq = Tensor(shape);
      restore(p, "adam_m/" + names[i].first, slots[i].exp_avg, errors);
      restore(p, "adam_v/" + names[i].first, slots[i].exp_avg_sq, errors);
      slots[i].steps = it->second;
    }
  }
  if (!errors.empty()) throw DataError("checkpoint " + path.string() + " does not match the model", errors);
  return p.header;
}

MPCountModel load_model(const std::filesystem::path& path, RunConfig* config_out) {
  const CheckpointHeader h = read_checkpoint_header(path);
  RunConfig cfg = parse_config(h.config_text);
  cfg.model.pretrained_weights.clear();
  MPCountModel model(cfg.model, cfg.train.seed);
  load_checkpoint(path, model);
  if (config_out) *config_out = cfg;
  return model;
}

int load_pretrained_encoder(const std::filesystem::path& path, MPCountModel& model) {
  Parsed p = read_file(path, true);
  std::vector<std::string> errors;
  int loaded = 0;
  nn::ParameterSet ps = model.parameters();
  auto is_encoder = [](const std::string& n) { return n.rfind("encoder.", 0) == 0; };
  for (auto& [name, v] : ps.params) {
    if (!is_encoder(name)) continue;
    restore(p, "param/" + name, v.value_mut(), errors);
    ++loaded;
  }
  for (auto& [name, t] : ps.buffers) {
    if (!is_encoder(name)) continue;
    restore(p, "buffer/" + name, *t, errors);
    ++loaded;
  }
  if (!errors.empty()) throw DataError("pretrained encoder " + path.string() + " does not fit the backbone", errors);
  return loaded;
}

}  // namespace sdgcount
