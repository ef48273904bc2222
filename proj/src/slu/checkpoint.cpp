#include "slu/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "slu/error.hpp"

namespace slu {
namespace {

using json = nlohmann::json;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json config_to_json(const ModelConfig& c, bool embedding_trainable) {
  json j;
  j["family"] = name(c.family);
  j["cell"] = name(c.cell);
  j["bidirectional"] = c.bidirectional;
  j["hidden_dim"] = c.hidden_dim;
  j["attention"] = name(c.attention);
  j["dropout"] = c.dropout;
  j["embedding_dim"] = c.embedding_dim;
  j["embedding_trainable"] = embedding_trainable;
  return j;
}

template <class T, class Parse>
T parse_enum(const json& j, const char* key, Parse parse, const std::string& source) {
  const std::string text = j.at(key).get<std::string>();
  auto v = parse(text);
  if (!v) fail(ErrorKind::kFormat, source + ": config field '" + key + "': unknown value '" + text + "'");
  return *v;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string serialize_model(const TrainedModel& model) {
  ModelParams params = model.params;
  json payload;
  payload["config"] = config_to_json(model.config, model.params.embedding.trainable);
  payload["vocab"] = model.vocab.tokens();
  payload["lexicon"] = json::parse(lexicon_to_json(model.lexicon));
  payload["tensors"] = json::array();
  for (const auto& t : params.collect(true)) {
    json entry;
    entry["name"] = t.name;
    entry["rows"] = t.rows;
    entry["cols"] = t.cols;
    entry["values"] = std::vector<double>(t.values.begin(), t.values.end());
    payload["tensors"].push_back(std::move(entry));
  }
  json doc;
  doc["format"] = "slu-model";
  doc["version"] = kCheckpointVersion;
  doc["checksum"] = hex64(fnv1a64(payload.dump()));
  doc["payload"] = std::move(payload);
  return doc.dump();
}

TrainedModel deserialize_model(std::string_view text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kIntegrity, source + ": unreadable or truncated checkpoint (" + e.what() + ")");
  }
  if (!doc.is_object() || doc.value("format", "") != "slu-model") {
    fail(ErrorKind::kIntegrity, source + ": not a model checkpoint");
  }
  if (!doc.contains("version") || !doc["version"].is_number_integer()) {
    fail(ErrorKind::kVersion, source + ": missing checkpoint version");
  }
  const int version = doc["version"].get<int>();
  if (version != kCheckpointVersion) {
    fail(ErrorKind::kVersion, source + ": checkpoint version " + std::to_string(version) +
                                  " is not supported (expected " +
                                  std::to_string(kCheckpointVersion) + ")");
  }
  if (!doc.contains("payload") || !doc.contains("checksum") || !doc["checksum"].is_string()) {
    fail(ErrorKind::kIntegrity, source + ": checkpoint lacks payload or checksum");
  }
  const json& payload = doc["payload"];
  if (doc["checksum"].get<std::string>() != hex64(fnv1a64(payload.dump()))) {
    fail(ErrorKind::kIntegrity, source + ": checksum mismatch");
  }
  try {
    TrainedModel model;
    const json& c = payload.at("config");
    model.config.family = parse_enum<Family>(c, "family", parse_family, source);
    model.config.cell = parse_enum<CellKind>(c, "cell", parse_cell, source);
    model.config.attention = parse_enum<AttentionKind>(c, "attention", parse_attention, source);
    model.config.bidirectional = c.at("bidirectional").get<bool>();
    model.config.hidden_dim = c.at("hidden_dim").get<std::size_t>();
    model.config.dropout = c.at("dropout").get<double>();
    model.config.embedding_dim = c.at("embedding_dim").get<std::size_t>();
    model.vocab = Vocabulary::from_tokens(payload.at("vocab").get<std::vector<std::string>>());
    model.lexicon = parse_lexicon(payload.at("lexicon").dump(), source);
    EmbeddingMatrix table{RealMatrix(model.vocab.size(), model.config.embedding_dim),
                          c.at("embedding_trainable").get<bool>()};
    SeededRng unused(0);
    model.params = ModelParams::create(model.config, std::move(table), unused);
    TensorList tensors = model.params.collect(true);
    const json& stored = payload.at("tensors");
    if (stored.size() != tensors.size()) {
      fail(ErrorKind::kFormat, source + ": expected " + std::to_string(tensors.size()) +
                                   " tensors, found " + std::to_string(stored.size()));
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const json& s = stored[i];
      auto& t = tensors[i];
      if (s.at("name").get<std::string>() != t.name || s.at("rows").get<std::size_t>() != t.rows ||
          s.at("cols").get<std::size_t>() != t.cols) {
        fail(ErrorKind::kFormat, source + ": tensor " + std::to_string(i) + " should be " +
                                     t.name + " [" + std::to_string(t.rows) + "x" +
                                     std::to_string(t.cols) + "]");
      }
      const auto values = s.at("values").get<std::vector<double>>();
      if (values.size() != t.values.size()) {
        fail(ErrorKind::kFormat, source + ": tensor " + t.name + " has " +
                                     std::to_string(values.size()) + " values");
      }
      std::copy(values.begin(), values.end(), t.values.begin());
    }
    return model;
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, source + ": malformed checkpoint payload (" + e.what() + ")");
  }
}

void save_model(const TrainedModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write model file: " + path);
  out << serialize_model(model) << '\n';
  if (!out) fail(ErrorKind::kIo, "failed writing model file: " + path);
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open model file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return deserialize_model(buffer.str(), path);
}

}  // namespace slu
