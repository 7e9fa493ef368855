#include "uem/checkpoint.hpp"

#include "uem/error.hpp"
#include "uem/textio.hpp"

namespace uem::checkpoint {

namespace {

using Json = nlohmann::ordered_json;
using diffkit::Tensor;

constexpr const char* kFormat = "uem-checkpoint-1";

Json tensor_json(const Tensor& t) {
  Json j;
  j["shape"] = t.shape();
  j["data"] = t.storage();
  return j;
}

Tensor tensor_from(const nlohmann::json& j) {
  return Tensor(j.at("shape").get<diffkit::Shape>(), j.at("data").get<std::vector<double>>());
}

Json layer_json(const encoder::Layer& l) {
  Json j;
  j["relu"] = l.relu;
  j["weight"] = tensor_json(l.weight);
  j["bias"] = tensor_json(l.bias);
  return j;
}

encoder::Layer layer_from(const nlohmann::json& j) {
  return encoder::Layer{tensor_from(j.at("weight")), tensor_from(j.at("bias")), j.at("relu").get<bool>()};
}

Json encoder_json(const encoder::EncoderParams& e) {
  Json layers = Json::array();
  for (const auto& l : e.layers) layers.push_back(layer_json(l));
  return layers;
}

encoder::EncoderParams encoder_from(const nlohmann::json& j) {
  encoder::EncoderParams e;
  for (const auto& l : j) e.layers.push_back(layer_from(l));
  if (e.layers.empty()) throw DataError("checkpoint encoder has no layers");
  encoder::validate(e);
  return e;
}

Json bank_json(const membank::MemoryBank& b) {
  Json j;
  j["momentum"] = b.momentum;
  j["entries"] = tensor_json(b.entries);
  return j;
}

membank::MemoryBank bank_from(const nlohmann::json& j, Domain d) {
  return membank::MemoryBank{tensor_from(j.at("entries")), j.at("momentum").get<double>(), d};
}

Json tensors_json(const std::vector<Tensor>& v) {
  Json a = Json::array();
  for (const auto& t : v) a.push_back(tensor_json(t));
  return a;
}

std::vector<Tensor> tensors_from(const nlohmann::json& j) {
  std::vector<Tensor> v;
  for (const auto& t : j) v.push_back(tensor_from(t));
  return v;
}

}  // namespace

std::string serialize(const trainer::TrainState& s, const nlohmann::ordered_json& run_config) {
  Json j;
  j["format"] = kFormat;
  j["config"] = run_config;
  j["global_step"] = s.global_step;
  j["stage1_epochs_done"] = s.stage1_epochs_done;
  j["stage2_epochs_done"] = s.stage2_epochs_done;
  j["encoder"] = encoder_json(s.encoder);
  j["classifier"] = {{"hidden", layer_json(s.classifier.hidden)}, {"output", layer_json(s.classifier.output)}};
  j["frozen"] = s.frozen ? encoder_json(*s.frozen) : Json(nullptr);
  j["banks"] = {{"A", bank_json(s.bank_a)}, {"B", bank_json(s.bank_b)}};
  j["velocity"] = {{"encoder", tensors_json(s.velocity_encoder)},
                   {"classifier", tensors_json(s.velocity_classifier)}};
  return j.dump(1) + "\n";
}

Loaded deserialize(std::string_view text, const std::string& source) {
  Loaded out;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.value("format", "") != kFormat) throw DataError(source + ": not a checkpoint (format tag missing)");
    trainer::TrainState& s = out.state;
    s.global_step = j.at("global_step").get<std::size_t>();
    s.stage1_epochs_done = j.at("stage1_epochs_done").get<std::size_t>();
    s.stage2_epochs_done = j.at("stage2_epochs_done").get<std::size_t>();
    s.encoder = encoder_from(j.at("encoder"));
    s.classifier.hidden = layer_from(j.at("classifier").at("hidden"));
    s.classifier.output = layer_from(j.at("classifier").at("output"));
    if (!j.at("frozen").is_null()) s.frozen = encoder_from(j.at("frozen"));
    s.bank_a = bank_from(j.at("banks").at("A"), Domain::a);
    s.bank_b = bank_from(j.at("banks").at("B"), Domain::b);
    s.velocity_encoder = tensors_from(j.at("velocity").at("encoder"));
    s.velocity_classifier = tensors_from(j.at("velocity").at("classifier"));
    out.run_config = j.at("config");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": malformed checkpoint: " + e.what());
  } catch (const DataError&) {
    throw;
  } catch (const Error& e) {
    throw DataError(source + ": malformed checkpoint: " + e.what());
  }
  return out;
}

void save(const std::filesystem::path& path, const trainer::TrainState& state,
          const nlohmann::ordered_json& run_config) {
  textio::write_file(path, serialize(state, run_config));
}

Loaded load(const std::filesystem::path& path) {
  return deserialize(textio::read_file(path), path.string());
}

}  // namespace uem::checkpoint
