#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "protodetect/inference.hpp"
#include "protodetect/proposal_sim.hpp"

namespace protodetect {

// COCO conventions: IoU thresholds 0.50:0.05:0.95, 101 recall points,
// at most 100 detections per scene and class.
inline constexpr std::size_t kIouThresholdCount = 10;
inline constexpr std::size_t kRecallPointCount = 101;
inline constexpr std::size_t kMaxDetectionsPerScene = 100;

double iou_threshold(std::size_t index);

// Greedy matching for one class in one scene. `detections` must already be
// in descending score order; each one takes the highest-IoU unmatched GT
// with IoU >= threshold (ties to the lower GT index).
std::vector<bool> match_at_threshold(std::span<const Box> detections, std::span<const Box> gt,
                                     double threshold);

// 101-point interpolated AP from TP/FP flags in descending score order.
// Empty when n_gt == 0 (the cell is excluded from means).
std::optional<double> average_precision(const std::vector<bool>& flags, std::size_t n_gt);

struct EvalCell {
  int class_id = 0;
  std::size_t threshold_index = 0;
  std::optional<double> ap;
  std::optional<double> ar;
  std::size_t n_gt = 0;
  std::size_t n_detections = 0;
  std::size_t n_matched = 0;
};

struct AggregateRow {
  std::string name;
  // Mean over classes and thresholds 0.50:0.95.
  std::optional<double> map;
  std::optional<double> mar;
  // Mean over classes at IoU 0.50.
  std::optional<double> ap50;
  std::optional<double> ar50;
};

struct EvalReport {
  std::string protocol;
  std::vector<int> classes;
  // Class-major, threshold-minor.
  std::vector<EvalCell> cells;
  std::vector<AggregateRow> aggregates;
  std::size_t total_gt = 0;
  std::size_t total_detections = 0;

  const EvalCell& cell(int class_id, std::size_t threshold_index) const;
  const AggregateRow& aggregate(const std::string& name) const;
};

// Scores detections against the test scenes for the target's classes.
// Throws ConfigError if a detection references an unknown scene id.
EvalReport evaluate(const std::vector<SceneDetections>& detections, const std::vector<Scene>& scenes,
                    const EvaluationTarget& target);

}  // namespace protodetect
