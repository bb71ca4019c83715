#include "protodetect/serialization.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"
#include "protodetect/error.hpp"

namespace protodetect {

using nlohmann::json;

namespace {

json parse_or_throw(std::string_view text, const char* what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": invalid JSON (" + e.what() + ")");
  }
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const char* section) {
  if (!j.is_object()) throw ConfigError(std::string(section) + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError(std::string(section) + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out, const char* section) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(section) + "." + key + ": wrong type");
  }
}

template <typename T>
T require(const json& j, const char* key, const char* what) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(std::string(what) + ": missing '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(what) + "." + key + ": wrong type");
  }
}

const json& child(const json& j, const char* key, const char* what) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(std::string(what) + ": missing '" + key + "'");
  return *it;
}

json vec_json(const Vec& v) {
  if (!all_finite(v.values())) throw NumericError("refusing to serialize non-finite values");
  return json(v.data());
}

Vec vec_from(const json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + ": expected an array");
  std::vector<double> values;
  values.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw ConfigError(std::string(what) + ": expected numbers");
    values.push_back(x.get<double>());
  }
  return Vec(std::move(values));
}

json box_json(const Box& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

Box box_from(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ConfigError("box: expected [x1, y1, x2, y2]");
  return Box::make(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>());
}

json layer_json(const DenseLayer& layer) {
  if (!all_finite(layer.weight.values()) || !all_finite(layer.bias.values())) {
    throw NumericError("refusing to serialize non-finite parameters");
  }
  return {{"rows", layer.weight.rows()},
          {"cols", layer.weight.cols()},
          {"weight", layer.weight.data()},
          {"bias", layer.bias.data()}};
}

DenseLayer layer_from(const json& j) {
  const auto rows = require<std::size_t>(j, "rows", "layer");
  const auto cols = require<std::size_t>(j, "cols", "layer");
  DenseLayer layer{Mat(rows, cols, require<std::vector<double>>(j, "weight", "layer")),
                   Vec(require<std::vector<double>>(j, "bias", "layer"))};
  if (layer.bias.dim() != rows) throw ShapeError("layer: bias length does not match rows");
  return layer;
}

json provenance_json(const Provenance& p) {
  return {{"config_hash", p.config_hash}, {"dataset_digest", p.dataset_digest}};
}

Provenance provenance_from(const json& j) {
  Provenance p;
  if (auto it = j.find("header"); it != j.end() && it->is_object()) {
    read_field(*it, "config_hash", p.config_hash, "header");
    read_field(*it, "dataset_digest", p.dataset_digest, "header");
  }
  return p;
}

std::string dump(const json& j) { return j.dump(); }

json world_json(const WorldConfig& c) {
  return {{"num_seen", c.num_seen},
          {"num_unseen", c.num_unseen},
          {"feature_dim", c.feature_dim},
          {"separation", c.separation},
          {"feature_noise", c.feature_noise},
          {"foreground_center_norm", c.foreground_center_norm},
          {"background_std", c.background_std},
          {"scene_size", c.scene_size},
          {"min_box_size", c.min_box_size},
          {"max_box_size", c.max_box_size},
          {"objects_per_scene", c.objects_per_scene},
          {"proposals_per_scene", c.proposals_per_scene},
          {"box_jitter", c.box_jitter},
          {"train_scenes", c.train_scenes},
          {"test_scenes", c.test_scenes},
          {"shots", c.shots},
          {"seed", c.seed}};
}

WorldConfig world_from(const json& j) {
  WorldConfig c;
  reject_unknown(j,
                 {"num_seen", "num_unseen", "feature_dim", "separation", "feature_noise", "foreground_center_norm",
                  "background_std", "scene_size", "min_box_size", "max_box_size", "objects_per_scene",
                  "proposals_per_scene", "box_jitter", "train_scenes", "test_scenes", "shots", "seed"},
                 "world");
  const char* s = "world";
  read_field(j, "num_seen", c.num_seen, s);
  read_field(j, "num_unseen", c.num_unseen, s);
  read_field(j, "feature_dim", c.feature_dim, s);
  read_field(j, "separation", c.separation, s);
  read_field(j, "feature_noise", c.feature_noise, s);
  read_field(j, "foreground_center_norm", c.foreground_center_norm, s);
  read_field(j, "background_std", c.background_std, s);
  read_field(j, "scene_size", c.scene_size, s);
  read_field(j, "min_box_size", c.min_box_size, s);
  read_field(j, "max_box_size", c.max_box_size, s);
  read_field(j, "objects_per_scene", c.objects_per_scene, s);
  read_field(j, "proposals_per_scene", c.proposals_per_scene, s);
  read_field(j, "box_jitter", c.box_jitter, s);
  read_field(j, "train_scenes", c.train_scenes, s);
  read_field(j, "test_scenes", c.test_scenes, s);
  read_field(j, "shots", c.shots, s);
  read_field(j, "seed", c.seed, s);
  c.validate();
  return c;
}

json model_json(const EmbeddingConfig& c) {
  return {{"input_dim", c.input_dim}, {"hidden_dim", c.hidden_dim}, {"embed_dim", c.embed_dim}, {"depth", c.depth}};
}

EmbeddingConfig model_from(const json& j) {
  EmbeddingConfig c;
  reject_unknown(j, {"input_dim", "hidden_dim", "embed_dim", "depth"}, "model");
  read_field(j, "input_dim", c.input_dim, "model");
  read_field(j, "hidden_dim", c.hidden_dim, "model");
  read_field(j, "embed_dim", c.embed_dim, "model");
  read_field(j, "depth", c.depth, "model");
  c.validate();
  return c;
}

json loss_json(const LossConfig& c) {
  return {{"lambda_kl", c.lambda_kl},
          {"lambda_align", c.lambda_align},
          {"tau", c.tau},
          {"kl_stop_teacher", c.kl_stop_teacher},
          {"align_include_background", c.align_include_background},
          {"reduction", c.reduction == Reduction::kMean ? "mean" : "sum"}};
}

LossConfig loss_from(const json& j) {
  LossConfig c;
  reject_unknown(j, {"lambda_kl", "lambda_align", "tau", "kl_stop_teacher", "align_include_background", "reduction"},
                 "loss");
  read_field(j, "lambda_kl", c.lambda_kl, "loss");
  read_field(j, "lambda_align", c.lambda_align, "loss");
  read_field(j, "tau", c.tau, "loss");
  read_field(j, "kl_stop_teacher", c.kl_stop_teacher, "loss");
  read_field(j, "align_include_background", c.align_include_background, "loss");
  std::string reduction = c.reduction == Reduction::kMean ? "mean" : "sum";
  read_field(j, "reduction", reduction, "loss");
  if (reduction == "mean") {
    c.reduction = Reduction::kMean;
  } else if (reduction == "sum") {
    c.reduction = Reduction::kSum;
  } else {
    throw ConfigError("loss.reduction must be 'mean' or 'sum'");
  }
  c.validate();
  return c;
}

json train_json(const TrainConfig& c) {
  return {{"lr", c.optimizer.lr},
          {"weight_decay", c.optimizer.weight_decay},
          {"beta1", c.optimizer.beta1},
          {"beta2", c.optimizer.beta2},
          {"eps", c.optimizer.eps},
          {"stage1_steps", c.stage1_steps},
          {"stage2_steps", c.stage2_steps},
          {"queries_per_support", c.episode.queries_per_support},
          {"augment", c.episode.augment},
          {"augment_strength", c.episode.augment_strength},
          {"split", c.episode.split == SplitMode::kFull ? "full" : "partial"},
          {"background_scenes", c.background_scenes},
          {"background_queries", c.background_queries},
          {"grad_clip", c.grad_clip},
          {"seed", c.seed}};
}

TrainConfig train_from(const json& j) {
  TrainConfig c;
  reject_unknown(j,
                 {"lr", "weight_decay", "beta1", "beta2", "eps", "stage1_steps", "stage2_steps", "queries_per_support",
                  "augment", "augment_strength", "split", "background_scenes", "background_queries", "grad_clip",
                  "seed"},
                 "train");
  const char* s = "train";
  read_field(j, "lr", c.optimizer.lr, s);
  read_field(j, "weight_decay", c.optimizer.weight_decay, s);
  read_field(j, "beta1", c.optimizer.beta1, s);
  read_field(j, "beta2", c.optimizer.beta2, s);
  read_field(j, "eps", c.optimizer.eps, s);
  read_field(j, "stage1_steps", c.stage1_steps, s);
  read_field(j, "stage2_steps", c.stage2_steps, s);
  read_field(j, "queries_per_support", c.episode.queries_per_support, s);
  read_field(j, "augment", c.episode.augment, s);
  read_field(j, "augment_strength", c.episode.augment_strength, s);
  std::string split = "full";
  read_field(j, "split", split, s);
  if (split == "full") {
    c.episode.split = SplitMode::kFull;
  } else if (split == "partial") {
    c.episode.split = SplitMode::kPartial;
  } else {
    throw ConfigError("train.split must be 'full' or 'partial'");
  }
  read_field(j, "background_scenes", c.background_scenes, s);
  read_field(j, "background_queries", c.background_queries, s);
  read_field(j, "grad_clip", c.grad_clip, s);
  read_field(j, "seed", c.seed, s);
  c.validate();
  return c;
}

json gradcheck_json(const GradcheckConfig& c) {
  return {{"instances", c.instances}, {"input_dim", c.input_dim}, {"hidden_dim", c.hidden_dim},
          {"embed_dim", c.embed_dim}, {"classes", c.classes},     {"batch", c.batch},
          {"shots", c.shots},         {"background", c.background}, {"depths", c.depths},
          {"step", c.step},           {"tolerance", c.tolerance}, {"norm_floor", c.norm_floor}, {"seed", c.seed},
          {"corrupt_block", c.corrupt_block}};
}

GradcheckConfig gradcheck_from(const json& j) {
  GradcheckConfig c;
  reject_unknown(j,
                 {"instances", "input_dim", "hidden_dim", "embed_dim", "classes", "batch", "shots", "background",
                  "depths", "step", "tolerance", "norm_floor", "seed", "corrupt_block"},
                 "gradcheck");
  const char* s = "gradcheck";
  read_field(j, "instances", c.instances, s);
  read_field(j, "input_dim", c.input_dim, s);
  read_field(j, "hidden_dim", c.hidden_dim, s);
  read_field(j, "embed_dim", c.embed_dim, s);
  read_field(j, "classes", c.classes, s);
  read_field(j, "batch", c.batch, s);
  read_field(j, "shots", c.shots, s);
  read_field(j, "background", c.background, s);
  read_field(j, "depths", c.depths, s);
  read_field(j, "step", c.step, s);
  read_field(j, "tolerance", c.tolerance, s);
  read_field(j, "norm_floor", c.norm_floor, s);
  read_field(j, "seed", c.seed, s);
  read_field(j, "corrupt_block", c.corrupt_block, s);
  c.validate();
  return c;
}

json scene_json(const Scene& scene, const char* split) {
  json gt = json::array();
  for (const auto& g : scene.gt) gt.push_back({{"box", box_json(g.box)}, {"label", g.label}});
  json proposals = json::array();
  for (const auto& p : scene.proposals) {
    proposals.push_back({{"box", box_json(p.box)}, {"feature", vec_json(p.feature)}});
  }
  return {{"id", scene.id}, {"split", split}, {"gt", std::move(gt)}, {"proposals", std::move(proposals)}};
}

Scene scene_from(const json& j) {
  Scene scene;
  scene.id = require<std::size_t>(j, "id", "scene");
  for (const auto& g : child(j, "gt", "scene")) {
    scene.gt.push_back({box_from(child(g, "box", "gt")), require<int>(g, "label", "gt")});
  }
  for (const auto& p : child(j, "proposals", "scene")) {
    scene.proposals.push_back({box_from(child(p, "box", "proposal")),
                               vec_from(child(p, "feature", "proposal"), "proposal.feature")});
  }
  return scene;
}

json dataset_body(const Dataset& data) {
  json classes = json::array();
  for (const auto& c : data.classes) {
    classes.push_back({{"class_id", c.class_id},
                       {"mean", vec_json(c.mean)},
                       {"noise_std", c.noise_std},
                       {"min_box_size", c.min_box_size},
                       {"max_box_size", c.max_box_size},
                       {"seen", c.seen}});
  }
  json scenes = json::array();
  for (const auto& s : data.train_scenes) scenes.push_back(scene_json(s, "train"));
  for (const auto& s : data.test_scenes) scenes.push_back(scene_json(s, "test"));
  json support = json::object();
  for (const auto& [id, features] : data.support) {
    json list = json::array();
    for (const auto& v : features) list.push_back(vec_json(v));
    support[std::to_string(id)] = std::move(list);
  }
  return {{"format", "protodetect-dataset"},
          {"config", world_json(data.config)},
          {"class_models", std::move(classes)},
          {"scenes", std::move(scenes)},
          {"support", std::move(support)}};
}

json bank_json(const PrototypeBank& bank) {
  json list = json::array();
  for (const auto& p : bank.entries()) list.push_back({{"class_id", p.class_id}, {"center", vec_json(p.center)}});
  return {{"prototypes", std::move(list)}};
}

PrototypeBank bank_from(const json& j) {
  PrototypeBank bank;
  for (const auto& p : child(j, "prototypes", "bank")) {
    bank.set(require<int>(p, "class_id", "prototype"), vec_from(child(p, "center", "prototype"), "center"));
  }
  return bank;
}

std::string format_number(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << *v;
  return os.str();
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string threshold_label(std::size_t t) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << iou_threshold(t);
  return os.str();
}

std::string class_label(int id) { return id == kUnknownClass ? "unknown" : std::to_string(id); }

}  // namespace

std::string dump_world_config(const WorldConfig& config) { return dump(world_json(config)); }
WorldConfig parse_world_config(std::string_view text) { return world_from(parse_or_throw(text, "world")); }
std::string dump_model_config(const EmbeddingConfig& config) { return dump(model_json(config)); }
EmbeddingConfig parse_model_config(std::string_view text) { return model_from(parse_or_throw(text, "model")); }
std::string dump_loss_config(const LossConfig& config) { return dump(loss_json(config)); }
LossConfig parse_loss_config(std::string_view text) { return loss_from(parse_or_throw(text, "loss")); }
std::string dump_train_config(const TrainConfig& config) { return dump(train_json(config)); }
TrainConfig parse_train_config(std::string_view text) { return train_from(parse_or_throw(text, "train")); }
std::string dump_gradcheck_config(const GradcheckConfig& config) { return dump(gradcheck_json(config)); }
GradcheckConfig parse_gradcheck_config(std::string_view text) {
  return gradcheck_from(parse_or_throw(text, "gradcheck"));
}

std::string dataset_digest(const Dataset& data) {
  const std::string body = dump(dataset_body(data));
  return hex_digest(fnv1a64(body));
}

std::string dump_dataset(const Dataset& data, const Provenance& provenance) {
  json j = dataset_body(data);
  Provenance p = provenance;
  p.dataset_digest = dataset_digest(data);
  j["header"] = provenance_json(p);
  return dump(j) + "\n";
}

Dataset parse_dataset(std::string_view text) {
  const json j = parse_or_throw(text, "dataset");
  if (j.value("format", "") != "protodetect-dataset") throw ConfigError("dataset: unrecognized format");
  Dataset data;
  data.config = world_from(child(j, "config", "dataset"));
  for (const auto& c : child(j, "class_models", "dataset")) {
    ClassModel m;
    m.class_id = require<int>(c, "class_id", "class_model");
    m.mean = vec_from(child(c, "mean", "class_model"), "mean");
    m.noise_std = require<double>(c, "noise_std", "class_model");
    m.min_box_size = require<double>(c, "min_box_size", "class_model");
    m.max_box_size = require<double>(c, "max_box_size", "class_model");
    m.seen = require<bool>(c, "seen", "class_model");
    data.classes.push_back(std::move(m));
  }
  for (const auto& s : child(j, "scenes", "dataset")) {
    const auto split = require<std::string>(s, "split", "scene");
    if (split == "train") {
      data.train_scenes.push_back(scene_from(s));
    } else if (split == "test") {
      data.test_scenes.push_back(scene_from(s));
    } else {
      throw ConfigError("scene: unknown split '" + split + "'");
    }
  }
  for (const auto& [key, list] : child(j, "support", "dataset").items()) {
    int id = 0;
    const auto [end, ec] = std::from_chars(key.data(), key.data() + key.size(), id);
    if (ec != std::errc() || end != key.data() + key.size()) throw ConfigError("support: bad class id '" + key + "'");
    auto& features = data.support[id];
    for (const auto& v : list) features.push_back(vec_from(v, "support"));
  }
  return data;
}

std::string dump_checkpoint(const Checkpoint& ckpt) {
  json layers = json::array();
  for (const auto& layer : ckpt.net.layers()) layers.push_back(layer_json(layer));
  json j = {{"format", "protodetect-checkpoint"},
            {"header", provenance_json(ckpt.provenance)},
            {"embedder",
             {{"input_dim", ckpt.net.input_dim()}, {"depth", ckpt.net.depth()}, {"layers", std::move(layers)}}},
            {"classifier", layer_json(ckpt.classifier.layer())},
            {"bank", bank_json(ckpt.bank)},
            {"seen_classes", ckpt.seen_classes},
            {"heldout_accuracy", ckpt.heldout_accuracy},
            {"heldout_count", ckpt.heldout_count}};
  return dump(j) + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  const json j = parse_or_throw(text, "checkpoint");
  if (j.value("format", "") != "protodetect-checkpoint") throw ConfigError("checkpoint: unrecognized format");
  Checkpoint ckpt;
  ckpt.provenance = provenance_from(j);
  const json& emb = child(j, "embedder", "checkpoint");
  std::vector<DenseLayer> layers;
  for (const auto& l : child(emb, "layers", "embedder")) layers.push_back(layer_from(l));
  if (layers.size() != require<std::size_t>(emb, "depth", "embedder")) {
    throw ShapeError("checkpoint: depth does not match layer count");
  }
  ckpt.net = EmbeddingNet::from_layers(require<std::size_t>(emb, "input_dim", "embedder"), std::move(layers));
  ckpt.classifier = LinearClassifier(layer_from(child(j, "classifier", "checkpoint")));
  ckpt.bank = bank_from(child(j, "bank", "checkpoint"));
  ckpt.seen_classes = require<std::vector<int>>(j, "seen_classes", "checkpoint");
  ckpt.heldout_accuracy = require<double>(j, "heldout_accuracy", "checkpoint");
  ckpt.heldout_count = require<std::size_t>(j, "heldout_count", "checkpoint");
  return ckpt;
}

std::string dump_bank(const PrototypeBank& bank) { return dump(bank_json(bank)) + "\n"; }
PrototypeBank parse_bank(std::string_view text) { return bank_from(parse_or_throw(text, "bank")); }

std::string dump_step_record(const StepRecord& r) {
  json j = {{"step", r.step},       {"stage", r.stage},     {"l_match", r.l_match},     {"l_kl", r.l_kl},
            {"l_align", r.l_align}, {"l_total", r.l_total}, {"grad_norm", r.grad_norm}};
  return dump(j);
}

StepRecord parse_step_record(std::string_view line) {
  const json j = parse_or_throw(line, "log record");
  return {require<std::size_t>(j, "step", "log"),      require<int>(j, "stage", "log"),
          require<double>(j, "l_match", "log"),        require<double>(j, "l_kl", "log"),
          require<double>(j, "l_align", "log"),        require<double>(j, "l_total", "log"),
          require<double>(j, "grad_norm", "log")};
}

std::string dump_detections(const std::vector<SceneDetections>& detections, const Provenance& provenance) {
  json results = json::array();
  for (const auto& sd : detections) {
    json list = json::array();
    for (const auto& d : sd.detections) {
      list.push_back({{"box", box_json(d.box)},
                      {"class_id", d.class_id},
                      {"score", d.score},
                      {"proposal_index", d.proposal_index}});
    }
    results.push_back({{"scene_id", sd.scene_id}, {"detections", std::move(list)}});
  }
  json j = {{"format", "protodetect-detections"}, {"header", provenance_json(provenance)}, {"results", results}};
  return dump(j) + "\n";
}

std::vector<SceneDetections> parse_detections(std::string_view text) {
  const json j = parse_or_throw(text, "detections");
  std::vector<SceneDetections> out;
  for (const auto& r : child(j, "results", "detections")) {
    SceneDetections sd;
    sd.scene_id = require<std::size_t>(r, "scene_id", "detections");
    for (const auto& d : child(r, "detections", "detections")) {
      sd.detections.push_back({box_from(child(d, "box", "detection")), require<int>(d, "class_id", "detection"),
                               require<double>(d, "score", "detection"),
                               require<std::size_t>(d, "proposal_index", "detection")});
    }
    out.push_back(std::move(sd));
  }
  return out;
}

std::string report_to_csv(const EvalReport& report, const Provenance& provenance) {
  std::ostringstream os;
  os << "# config_hash=" << provenance.config_hash << " dataset_digest=" << provenance.dataset_digest << "\n";
  os << "protocol,class,iou_threshold,ap,ar\n";
  for (const auto& c : report.cells) {
    os << report.protocol << ',' << class_label(c.class_id) << ',' << threshold_label(c.threshold_index) << ','
       << format_number(c.ap) << ',' << format_number(c.ar) << '\n';
  }
  for (const auto& row : report.aggregates) {
    os << report.protocol << ',' << row.name << ",0.50:0.95," << format_number(row.map) << ','
       << format_number(row.mar) << '\n';
    os << report.protocol << ',' << row.name << ",0.50," << format_number(row.ap50) << ','
       << format_number(row.ar50) << '\n';
  }
  return os.str();
}

std::string report_to_json(const EvalReport& report, const Provenance& provenance) {
  json cells = json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"class", class_label(c.class_id)},
                     {"class_id", c.class_id},
                     {"iou_threshold", iou_threshold(c.threshold_index)},
                     {"ap", optional_json(c.ap)},
                     {"ar", optional_json(c.ar)},
                     {"n_gt", c.n_gt},
                     {"n_detections", c.n_detections},
                     {"n_matched", c.n_matched}});
  }
  json aggregates = json::array();
  for (const auto& row : report.aggregates) {
    aggregates.push_back({{"name", row.name},
                          {"map", optional_json(row.map)},
                          {"mar", optional_json(row.mar)},
                          {"ap50", optional_json(row.ap50)},
                          {"ar50", optional_json(row.ar50)}});
  }
  json j = {{"format", "protodetect-report"},
            {"header", provenance_json(provenance)},
            {"protocol", report.protocol},
            {"cells", std::move(cells)},
            {"aggregates", std::move(aggregates)},
            {"total_gt", report.total_gt},
            {"total_detections", report.total_detections}};
  return j.dump(2) + "\n";
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, std::string_view content) {
  const std::filesystem::path p(path);
  const auto parent = p.parent_path();
  if (!parent.empty() && !std::filesystem::is_directory(parent)) {
    throw ConfigError("output directory '" + parent.string() + "' does not exist");
  }
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw ConfigError("failed writing '" + path + "'");
}

}  // namespace protodetect
