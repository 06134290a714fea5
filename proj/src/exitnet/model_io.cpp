#include "multiexit/exitnet/model_io.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "multiexit/common/errors.hpp"

namespace multiexit::exitnet {

namespace {
constexpr int kSchemaVersion = 1;

nlohmann::json block_to_json(const Block& b) {
  return {{"kind", numcore::block_kind_name(b.kind)}, {"in", b.in_dim}, {"out", b.out_dim}};
}

Block block_from_json(const nlohmann::json& j) {
  const auto kind = numcore::block_kind_from_name(j.at("kind").get<std::string>());
  const int in = j.at("in").get<int>();
  const int out = j.at("out").get<int>();
  switch (kind) {
    case numcore::BlockKind::Dense: {
      // Placeholder zeros; real values come from the checkpoint.
      Block b;
      b.kind = kind;
      b.in_dim = in;
      b.out_dim = out;
      b.weight = numcore::Tensor::zeros({in, out}, true);
      b.bias = numcore::Tensor::zeros({out}, true);
      return b;
    }
    case numcore::BlockKind::Relu: return Block::relu(out);
    case numcore::BlockKind::SoftmaxOutput: return Block::softmax_output(out);
    case numcore::BlockKind::Identity: return Block::identity(out);
  }
  throw ParseError("unhandled block kind");
}
}  // namespace

void save_model(const MultiExitNetwork& net, const std::string& model_path,
                const std::string& checkpoint_name) {
  nlohmann::json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "multiexit-model";
  doc["class_count"] = net.class_count();
  auto& backbone = doc["backbone"] = nlohmann::json::array();
  for (const auto& b : net.backbone()) backbone.push_back(block_to_json(b));
  auto& exits = doc["exits"] = nlohmann::json::array();
  for (const auto& head : net.exits()) {
    nlohmann::json e;
    e["attach"] = head.attach_index;
    e["pool_to"] = head.pool_to;
    auto& layers = e["layers"] = nlohmann::json::array();
    for (const auto& l : head.layers) layers.push_back(block_to_json(l));
    exits.push_back(std::move(e));
  }
  auto& gates = doc["gates"] = nlohmann::json::array();
  for (const auto& gate : net.gates()) {
    gates.push_back({{"attach", gate.attach_index}, {"in", gate.lin.in_dim}});
  }
  doc["checkpoint"] = checkpoint_name;

  std::ofstream out(model_path);
  if (!out) throw ParseError("cannot open model file for writing: " + model_path);
  out << doc.dump(1) << "\n";

  const auto dir = std::filesystem::path(model_path).parent_path();
  numcore::save_checkpoint((dir / checkpoint_name).string(), net.named_params());
}

MultiExitNetwork load_model(const std::string& model_path) {
  std::ifstream in(model_path);
  if (!in) throw ParseError("cannot open model file: " + model_path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model parse failure in " + model_path + ": " + e.what());
  }
  if (doc.value("schema_version", -1) != kSchemaVersion) {
    throw ParseError("unsupported model schema in " + model_path);
  }
  const int class_count = doc.at("class_count").get<int>();
  std::vector<Block> backbone;
  for (const auto& j : doc.at("backbone")) backbone.push_back(block_from_json(j));
  MultiExitNetwork net(std::move(backbone), class_count);
  for (const auto& e : doc.at("exits")) {
    AuxiliaryHead head;
    head.attach_index = e.at("attach").get<int>();
    head.pool_to = e.value("pool_to", 0);
    for (const auto& j : e.at("layers")) head.layers.push_back(block_from_json(j));
    net.exits().push_back(std::move(head));
  }
  for (const auto& g : doc.at("gates")) {
    ExitGate gate;
    gate.attach_index = g.at("attach").get<int>();
    const int in = g.at("in").get<int>();
    gate.lin.kind = numcore::BlockKind::Dense;
    gate.lin.in_dim = in;
    gate.lin.out_dim = 1;
    gate.lin.weight = numcore::Tensor::zeros({in, 1}, true);
    gate.lin.bias = numcore::Tensor::zeros({1}, true);
    net.gates().push_back(std::move(gate));
  }
  const auto dir = std::filesystem::path(model_path).parent_path();
  const auto ckpt = doc.at("checkpoint").get<std::string>();
  numcore::load_checkpoint_into((dir / ckpt).string(), net.named_params());
  return net;
}

}  // namespace multiexit::exitnet
