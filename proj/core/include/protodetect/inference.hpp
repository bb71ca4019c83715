#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "protodetect/embedder.hpp"
#include "protodetect/prototype_bank.hpp"
#include "protodetect/proposal_sim.hpp"

namespace protodetect {

struct Classification {
  // Empty when the nearest prototype is background (REJECT).
  std::optional<int> class_id;
  // Posterior of the nearest prototype over the full bank, background included.
  double score = 0.0;

  bool rejected() const { return !class_id.has_value(); }
};

// Nearest-prototype decision; proposals closest to p_0 are rejected. Throws
// ConfigError if the bank has no background prototype.
Classification classify_proposal(const Vec& query, const PrototypeBank& bank);

struct Detection {
  Box box;
  int class_id = 0;
  double score = 0.0;
  std::size_t proposal_index = 0;
};

struct SceneDetections {
  std::size_t scene_id = 0;
  std::vector<Detection> detections;
};

// Embeds and classifies every proposal, dropping rejections. No duplicate
// suppression; output follows proposal order.
std::vector<Detection> detect_scene(const Scene& scene, const EmbeddingNet& net, const PrototypeBank& bank);

// Runs detect_scene over every scene. Output order matches `scenes`
// regardless of thread count.
std::vector<SceneDetections> detect_scenes(const std::vector<Scene>& scenes, const EmbeddingNet& net,
                                           const PrototypeBank& bank, std::size_t threads = 1);

enum class ProtocolMode {
  kFewShot,
  kOpenSet,
  kZeroShotUnseenOnly,
  kZeroShotMixedUnseenEval,
  kZeroShotMixedSeenEval,
};

// "fewshot", "openset", "zs-uo", "zs-mpu", "zs-mps"
std::string_view to_string(ProtocolMode mode);
ProtocolMode parse_protocol_mode(std::string_view name);

struct ProtocolSpec {
  ProtocolMode mode = ProtocolMode::kFewShot;
  // Whether p_0 takes part in the composed unknown prototype (open-set only).
  bool unknown_includes_background = true;
};

struct ClassGroup {
  std::string name;
  std::vector<int> classes;
};

// What the evaluator scores: the classes, how GT labels map onto them, and
// the aggregate rows to report.
struct EvaluationTarget {
  std::string protocol;
  std::vector<int> classes;
  // GT labels rewritten before matching (open-set maps unseen ids to the
  // unknown id). Unlisted labels pass through unchanged.
  std::map<int, int> gt_label_map;
  std::vector<ClassGroup> groups;
};

struct ProtocolInputs {
  SupportSet seen_support;
  SupportSet unseen_support;
  std::vector<int> unseen_classes;
  Vec background_prototype;
};

struct AssembledProtocol {
  PrototypeBank bank;
  EvaluationTarget target;
};

// Builds the active prototype bank and evaluation target for a protocol from
// a frozen embedder.
AssembledProtocol assemble_protocol(const ProtocolSpec& spec, const ProtocolInputs& inputs,
                                    const EmbeddingNet& net);

}  // namespace protodetect
