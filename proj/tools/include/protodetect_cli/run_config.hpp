#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "protodetect/embedder.hpp"
#include "protodetect/gradcheck.hpp"
#include "protodetect/inference.hpp"
#include "protodetect/losses.hpp"
#include "protodetect/proposal_sim.hpp"
#include "protodetect/trainer.hpp"

namespace protodetect::cli {

// Relative paths resolve against the working directory. The report path is a
// prefix: eval writes <report>.csv, <report>.json and <report>.detections.json.
struct PathsConfig {
  std::string dataset = "dataset.json";
  std::string checkpoint = "checkpoint.json";
  std::string log = "train_log.jsonl";
  std::string report = "report";
  // When non-empty, train and eval refuse a dataset with a different digest.
  std::string dataset_digest;
};

struct RunConfig {
  WorldConfig world;
  EmbeddingConfig model;
  TrainConfig train;
  LossConfig loss;
  ProtocolSpec eval;
  GradcheckConfig gradcheck;
  PathsConfig paths;
};

// Parses a config document and applies "a.b=value" overrides. Values parse
// as JSON when they can and are taken as strings otherwise. Sections:
// world, model, train, loss, eval, gradcheck, paths. model.input_dim is not
// accepted; it always equals world.feature_dim.
RunConfig parse_run_config(std::string_view json, const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {});

// Every section except paths, with all defaults filled in and keys sorted.
std::string canonical_config(const RunConfig& config);
std::string config_hash(const RunConfig& config);

}  // namespace protodetect::cli
