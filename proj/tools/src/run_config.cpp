#include "protodetect_cli/run_config.hpp"

#include <set>

#include "json.hpp"
#include "protodetect/error.hpp"
#include "protodetect/numeric.hpp"
#include "protodetect/serialization.hpp"

namespace protodetect::cli {

using nlohmann::json;

namespace {

const std::set<std::string> kSections{"world", "model", "train", "loss", "eval", "gradcheck", "paths"};

json parse_document(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON (") + e.what() + ")");
  }
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not of the form a.b=value");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty path component");
    if (!node->is_object()) throw ConfigError("override '" + assignment + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

json section(const json& doc, const char* name) {
  auto it = doc.find(name);
  if (it == doc.end()) return json::object();
  if (!it->is_object()) throw ConfigError(std::string(name) + ": expected a JSON object");
  return *it;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const char* name) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError(std::string(name) + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const char* name) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(name) + "." + key + ": wrong type");
  }
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const std::vector<std::string>& overrides) {
  json doc = text.empty() ? json::object() : parse_document(text);
  if (!doc.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& o : overrides) apply_override(doc, o);
  check_keys(doc, kSections, "config");

  RunConfig config;
  config.world = parse_world_config(section(doc, "world").dump());

  json model = section(doc, "model");
  if (model.contains("input_dim")) throw ConfigError("model.input_dim is derived from world.feature_dim");
  model["input_dim"] = config.world.feature_dim;
  config.model = parse_model_config(model.dump());

  config.train = parse_train_config(section(doc, "train").dump());
  config.train.episode.noise_std = config.world.feature_noise;
  config.loss = parse_loss_config(section(doc, "loss").dump());

  const json eval = section(doc, "eval");
  check_keys(eval, {"mode", "unknown_includes_background"}, "eval");
  std::string mode(to_string(config.eval.mode));
  read(eval, "mode", mode, "eval");
  config.eval.mode = parse_protocol_mode(mode);
  read(eval, "unknown_includes_background", config.eval.unknown_includes_background, "eval");

  config.gradcheck = parse_gradcheck_config(section(doc, "gradcheck").dump());
  config.gradcheck.loss = config.loss;

  const json paths = section(doc, "paths");
  check_keys(paths, {"dataset", "checkpoint", "log", "report", "dataset_digest"}, "paths");
  read(paths, "dataset", config.paths.dataset, "paths");
  read(paths, "checkpoint", config.paths.checkpoint, "paths");
  read(paths, "log", config.paths.log, "paths");
  read(paths, "report", config.paths.report, "paths");
  read(paths, "dataset_digest", config.paths.dataset_digest, "paths");
  return config;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  return parse_run_config(read_text_file(path), overrides);
}

std::string canonical_config(const RunConfig& config) {
  json model = json::parse(dump_model_config(config.model));
  model.erase("input_dim");
  const json doc = {{"world", json::parse(dump_world_config(config.world))},
                    {"model", std::move(model)},
                    {"train", json::parse(dump_train_config(config.train))},
                    {"loss", json::parse(dump_loss_config(config.loss))},
                    {"eval",
                     {{"mode", std::string(to_string(config.eval.mode))},
                      {"unknown_includes_background", config.eval.unknown_includes_background}}},
                    {"gradcheck", json::parse(dump_gradcheck_config(config.gradcheck))}};
  return doc.dump();
}

std::string config_hash(const RunConfig& config) {
  const std::string canonical = canonical_config(config);
  return hex_digest(fnv1a64(canonical));
}

}  // namespace protodetect::cli
