#include "multiexit/numcore/checkpoint.hpp"

#include <fstream>
#include <map>

#include "json.hpp"
#include "multiexit/common/base64.hpp"
#include "multiexit/common/hash.hpp"

namespace multiexit::numcore {

namespace {
constexpr int kSchemaVersion = 1;
}

void save_checkpoint(const std::string& path, const NamedParams& params) {
  nlohmann::json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "multiexit-checkpoint";
  auto& tensors = doc["tensors"] = nlohmann::json::array();
  for (const auto& [name, t] : params) {
    nlohmann::json entry;
    entry["name"] = name;
    entry["shape"] = t->shape();
    entry["data"] = encode_f64_le(t->data());
    tensors.push_back(std::move(entry));
  }
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open checkpoint for writing: " + path);
  out << doc.dump(1) << "\n";
}

namespace {
nlohmann::json read_doc(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint parse failure in " + path + ": " + e.what());
  }
  if (!doc.contains("schema_version") || doc["schema_version"].get<int>() != kSchemaVersion) {
    throw ParseError("unsupported checkpoint schema in " + path);
  }
  return doc;
}
}  // namespace

NamedParams load_checkpoint(const std::string& path) {
  const auto doc = read_doc(path);
  NamedParams out;
  for (const auto& entry : doc.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<int>>();
    auto data = decode_f64_le(entry.at("data").get<std::string>());
    out.emplace_back(name, Tensor::make(shape, std::move(data)));
  }
  return out;
}

void load_checkpoint_into(const std::string& path, const NamedParams& dst) {
  const auto loaded = load_checkpoint(path);
  std::map<std::string, TensorPtr> by_name;
  for (const auto& [name, t] : loaded) by_name[name] = t;
  for (const auto& [name, t] : dst) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ParseError("checkpoint missing tensor '" + name + "'");
    if (it->second->shape() != t->shape()) {
      throw DimensionError("checkpoint shape mismatch for '" + name + "'");
    }
    t->data() = it->second->data();
  }
}

std::uint64_t params_fingerprint(const NamedParams& params) {
  Fnv1a h;
  for (const auto& [name, t] : params) {
    h.update(name);
    h.update(t->data());
  }
  return h.digest();
}

}  // namespace multiexit::numcore
