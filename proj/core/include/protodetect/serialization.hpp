#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "protodetect/embedder.hpp"
#include "protodetect/evaluator.hpp"
#include "protodetect/gradcheck.hpp"
#include "protodetect/inference.hpp"
#include "protodetect/losses.hpp"
#include "protodetect/prototype_bank.hpp"
#include "protodetect/proposal_sim.hpp"
#include "protodetect/trainer.hpp"

// JSON and CSV formats. Doubles are written in the shortest decimal form
// that parses back to the identical bit pattern, and object keys are sorted,
// so equal inputs always produce byte-identical files.
namespace protodetect {

// Stamped into every output file.
struct Provenance {
  std::string config_hash;
  std::string dataset_digest;
};

// Config sections. Parsing starts from the defaults, overrides the keys that
// are present and rejects unknown keys with ConfigError.
std::string dump_world_config(const WorldConfig& config);
WorldConfig parse_world_config(std::string_view json);
std::string dump_model_config(const EmbeddingConfig& config);
EmbeddingConfig parse_model_config(std::string_view json);
std::string dump_loss_config(const LossConfig& config);
LossConfig parse_loss_config(std::string_view json);
std::string dump_train_config(const TrainConfig& config);
TrainConfig parse_train_config(std::string_view json);
std::string dump_gradcheck_config(const GradcheckConfig& config);
GradcheckConfig parse_gradcheck_config(std::string_view json);

// Dataset file: {format, header, config, class_models, scenes, support}.
// Each scene carries "split": "train" | "test".
std::string dump_dataset(const Dataset& data, const Provenance& provenance);
Dataset parse_dataset(std::string_view json);
// Content hash of the dataset body (everything except the header).
std::string dataset_digest(const Dataset& data);

struct Checkpoint {
  EmbeddingNet net;
  LinearClassifier classifier;
  PrototypeBank bank;
  std::vector<int> seen_classes;
  double heldout_accuracy = 0.0;
  std::size_t heldout_count = 0;
  Provenance provenance;
};

std::string dump_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view json);

// {"prototypes": [{"class_id": k, "center": [...]}, ...]}
std::string dump_bank(const PrototypeBank& bank);
PrototypeBank parse_bank(std::string_view json);

// One JSON-lines record (no trailing newline).
std::string dump_step_record(const StepRecord& record);
StepRecord parse_step_record(std::string_view line);

// {"header", "results": [{"scene_id", "detections": [{box, class_id, score, proposal_index}]}]}
std::string dump_detections(const std::vector<SceneDetections>& detections, const Provenance& provenance);
std::vector<SceneDetections> parse_detections(std::string_view json);

// CSV with columns protocol,class,iou_threshold,ap,ar: one row per class
// and threshold, then per aggregate group a "0.50:0.95" row and a "0.50"
// row. Header lines start with '#'. Undefined values are written as "nan".
std::string report_to_csv(const EvalReport& report, const Provenance& provenance);
std::string report_to_json(const EvalReport& report, const Provenance& provenance);

std::string read_text_file(const std::string& path);
// Throws ConfigError if the parent directory does not exist or the file
// cannot be written.
void write_text_file(const std::string& path, std::string_view content);

}  // namespace protodetect
