#include "duality/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace duality {

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t read_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw LoadError("checkpoint truncated while reading " + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in, const std::string& what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw LoadError("checkpoint truncated while reading " + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_doubles_le(std::ostream& out, const std::vector<double>& v) {
  for (double d : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    write_u64(out, bits);
  }
}

void read_doubles_le(std::istream& in, std::vector<double>& v,
                     const std::string& what) {
  for (auto& d : v) {
    const std::uint64_t bits = read_u64(in, what);
    std::memcpy(&d, &bits, 8);
  }
}

nlohmann::json shape_json(const std::vector<int>& shape) {
  return nlohmann::json(shape);
}

std::vector<int> shape_from_json(const nlohmann::json& j) {
  std::vector<int> s;
  for (const auto& d : j) s.push_back(d.get<int>());
  return s;
}

// Assign loaded tensors onto a model's parameters by name.
void restore_params(const std::vector<Parameter*>& params,
                    const std::map<std::string, TensorPtr>& tensors) {
  for (auto* p : params) {
    auto it = tensors.find(p->name);
    if (it == tensors.end())
      throw LoadError("checkpoint is missing tensor '" + p->name + "'");
    if (it->second->shape != p->tensor->shape)
      throw LoadError("checkpoint tensor '" + p->name + "' has shape " +
                      Tensor::shape_str(it->second->shape) + ", expected " +
                      Tensor::shape_str(p->tensor->shape));
    p->tensor->values = it->second->values;
  }
}

}  // namespace

void save_checkpoint_raw(
    const std::string& path, const std::string& module,
    const nlohmann::json& config,
    const std::vector<std::pair<std::string, TensorPtr>>& tensors) {
  nlohmann::json manifest;
  manifest["format_version"] = kCheckpointVersion;
  manifest["module"] = module;
  manifest["config"] = config;
  nlohmann::json tensor_list = nlohmann::json::array();
  for (const auto& [name, t] : tensors)
    tensor_list.push_back({{"name", name}, {"shape", shape_json(t->shape)}});
  manifest["tensors"] = tensor_list;
  const std::string manifest_str = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write checkpoint '" + path + "'");
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_u32(out, kCheckpointVersion);
  write_u64(out, manifest_str.size());
  out.write(manifest_str.data(),
            static_cast<std::streamsize>(manifest_str.size()));
  for (const auto& [name, t] : tensors) write_doubles_le(out, t->values);
  if (!out) throw LoadError("failed while writing checkpoint '" + path + "'");
}

LoadedCheckpoint load_checkpoint_raw(const std::string& path,
                                     const std::string& expected_module) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint '" + path + "'");
  char magic[sizeof(kCheckpointMagic)];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw LoadError("'" + path + "' is not a checkpoint file (bad magic)");
  const auto version = read_u32(in, "format_version");
  if (version != kCheckpointVersion)
    throw LoadError("checkpoint format_version " + std::to_string(version) +
                    " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  const auto manifest_len = read_u64(in, "manifest length");
  std::string manifest_str(manifest_len, '\0');
  if (!in.read(manifest_str.data(),
               static_cast<std::streamsize>(manifest_len)))
    throw LoadError("checkpoint truncated while reading manifest");
  LoadedCheckpoint ck;
  try {
    ck.manifest = nlohmann::json::parse(manifest_str);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("corrupt checkpoint manifest: ") + e.what());
  }
  if (ck.manifest.value("module", "") != expected_module)
    throw LoadError("checkpoint module '" +
                    ck.manifest.value("module", std::string("?")) +
                    "' does not match expected '" + expected_module + "'");
  for (const auto& entry : ck.manifest.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    auto shape = shape_from_json(entry.at("shape"));
    auto t = Tensor::zeros(shape);
    read_doubles_le(in, t->values, "tensor '" + name + "'");
    ck.tensors.emplace(name, std::move(t));
  }
  return ck;
}

void save_checkpoint(const LanguageModel& m, const std::string& path) {
  nlohmann::json cfg = {{"vocab_size", m.vocab_size},
                        {"embedding_dim", m.embedding_dim},
                        {"hidden_size", m.hidden_size}};
  std::vector<std::pair<std::string, TensorPtr>> tensors;
  for (auto* p : const_cast<LanguageModel&>(m).parameters())
    tensors.emplace_back(p->name, p->tensor);
  save_checkpoint_raw(path, "lm", cfg, tensors);
}

LanguageModel load_language_model(const std::string& path) {
  auto ck = load_checkpoint_raw(path, "lm");
  const auto& cfg = ck.manifest.at("config");
  Rng rng(0);
  LanguageModel m(cfg.at("vocab_size").get<int>(),
                  cfg.at("embedding_dim").get<int>(),
                  cfg.at("hidden_size").get<int>(), rng);
  restore_params(m.parameters(), ck.tensors);
  return m;
}

void save_checkpoint(const MadeEnsemble& ens, const std::string& path) {
  nlohmann::json cfg;
  cfg["D"] = ens.D;
  cfg["ensemble_size"] = ens.members.size();
  nlohmann::json members = nlohmann::json::array();
  std::vector<std::pair<std::string, TensorPtr>> tensors;
  for (std::size_t k = 0; k < ens.members.size(); ++k) {
    const auto& member = ens.members[k];
    nlohmann::json mj;
    mj["hidden_widths"] = member.hidden_widths;
    mj["ordering"] = member.mask_set.ordering;
    mj["hidden_degrees"] = member.mask_set.hidden_degrees;
    members.push_back(mj);
    for (auto* p : const_cast<MadeNetwork&>(member).parameters())
      tensors.emplace_back(p->name, p->tensor);
    for (std::size_t l = 0; l < member.mask_set.masks.size(); ++l)
      tensors.emplace_back("made" + std::to_string(k) + ".mask" +
                               std::to_string(l),
                           member.mask_set.masks[l]);
  }
  cfg["members"] = members;
  save_checkpoint_raw(path, "made", cfg, tensors);
}

MadeEnsemble load_made_ensemble(const std::string& path) {
  auto ck = load_checkpoint_raw(path, "made");
  const auto& cfg = ck.manifest.at("config");
  MadeEnsemble ens;
  ens.D = cfg.at("D").get<int>();
  const auto& members = cfg.at("members");
  Rng rng(0);
  for (std::size_t k = 0; k < members.size(); ++k) {
    const auto& mj = members[k];
    std::vector<int> hidden_widths = mj.at("hidden_widths").get<std::vector<int>>();
    std::vector<int> ordering = mj.at("ordering").get<std::vector<int>>();
    auto hidden_degrees =
        mj.at("hidden_degrees").get<std::vector<std::vector<int>>>();
    auto mask_set = masks_from_degrees(ordering, hidden_degrees);
    // the stored masks must agree with the degree-rebuilt ones
    for (std::size_t l = 0; l < mask_set.masks.size(); ++l) {
      const std::string name =
          "made" + std::to_string(k) + ".mask" + std::to_string(l);
      auto it = ck.tensors.find(name);
      if (it == ck.tensors.end())
        throw LoadError("checkpoint is missing tensor '" + name + "'");
      if (it->second->values != mask_set.masks[l]->values)
        throw LoadError("stored mask '" + name +
                        "' disagrees with its degree vectors");
    }
    MadeNetwork net(ens.D, hidden_widths, std::move(mask_set), rng,
                    "made" + std::to_string(k));
    restore_params(net.parameters(), ck.tensors);
    ens.members.push_back(std::move(net));
  }
  return ens;
}

void save_checkpoint(const NlgModel& m, const std::string& path) {
  nlohmann::json cfg = {{"label_dim", m.label_dim},
                        {"vocab_size", m.vocab_size},
                        {"embedding_dim", m.embedding_dim},
                        {"hidden_size", m.hidden_size}};
  std::vector<std::pair<std::string, TensorPtr>> tensors;
  for (auto* p : const_cast<NlgModel&>(m).parameters())
    tensors.emplace_back(p->name, p->tensor);
  save_checkpoint_raw(path, "nlg", cfg, tensors);
}

NlgModel load_nlg_model(const std::string& path) {
  auto ck = load_checkpoint_raw(path, "nlg");
  const auto& cfg = ck.manifest.at("config");
  Rng rng(0);
  NlgModel m(cfg.at("label_dim").get<int>(), cfg.at("vocab_size").get<int>(),
             cfg.at("embedding_dim").get<int>(),
             cfg.at("hidden_size").get<int>(), rng);
  restore_params(m.parameters(), ck.tensors);
  return m;
}

void save_checkpoint(const NluModel& m, const std::string& path) {
  nlohmann::json cfg = {{"label_dim", m.label_dim},
                        {"vocab_size", m.vocab_size},
                        {"embedding_dim", m.embedding_dim},
                        {"hidden_size", m.hidden_size}};
  std::vector<std::pair<std::string, TensorPtr>> tensors;
  for (auto* p : const_cast<NluModel&>(m).parameters())
    tensors.emplace_back(p->name, p->tensor);
  save_checkpoint_raw(path, "nlu", cfg, tensors);
}

NluModel load_nlu_model(const std::string& path) {
  auto ck = load_checkpoint_raw(path, "nlu");
  const auto& cfg = ck.manifest.at("config");
  Rng rng(0);
  NluModel m(cfg.at("label_dim").get<int>(), cfg.at("vocab_size").get<int>(),
             cfg.at("embedding_dim").get<int>(),
             cfg.at("hidden_size").get<int>(), rng);
  restore_params(m.parameters(), ck.tensors);
  return m;
}

}  // namespace duality
