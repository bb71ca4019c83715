#include "protodetect/evaluator.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <string>

#include "protodetect/error.hpp"

namespace protodetect {

double iou_threshold(std::size_t index) { return static_cast<double>(50 + 5 * index) / 100.0; }

std::vector<bool> match_at_threshold(std::span<const Box> detections, std::span<const Box> gt,
                                     double threshold) {
  std::vector<bool> flags(detections.size(), false);
  std::vector<bool> taken(gt.size(), false);
  for (std::size_t d = 0; d < detections.size(); ++d) {
    std::optional<std::size_t> best;
    double best_iou = threshold;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (taken[g]) continue;
      const double overlap = iou(detections[d], gt[g]);
      if (overlap >= best_iou && (!best || overlap > best_iou)) {
        best = g;
        best_iou = overlap;
      }
    }
    if (best) {
      taken[*best] = true;
      flags[d] = true;
    }
  }
  return flags;
}

std::optional<double> average_precision(const std::vector<bool>& flags, std::size_t n_gt) {
  if (n_gt == 0) return std::nullopt;
  const std::size_t n = flags.size();
  std::vector<double> recall(n);
  std::vector<double> precision(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (flags[i]) ++tp;
    recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  // Precision envelope: running max from the right.
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

  double sum = 0.0;
  for (std::size_t k = 0; k < kRecallPointCount; ++k) {
    const double r = static_cast<double>(k) / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / static_cast<double>(kRecallPointCount);
}

const EvalCell& EvalReport::cell(int class_id, std::size_t threshold_index) const {
  for (const auto& c : cells) {
    if (c.class_id == class_id && c.threshold_index == threshold_index) return c;
  }
  throw ConfigError("report has no cell for class " + std::to_string(class_id));
}

const AggregateRow& EvalReport::aggregate(const std::string& name) const {
  for (const auto& row : aggregates) {
    if (row.name == name) return row;
  }
  throw ConfigError("report has no aggregate row '" + name + "'");
}

namespace {

struct RankedDetection {
  double score;
  std::size_t scene_pos;
  std::size_t proposal_index;
  Box box;
};

bool ranks_before(const RankedDetection& a, const RankedDetection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.scene_pos != b.scene_pos) return a.scene_pos < b.scene_pos;
  return a.proposal_index < b.proposal_index;
}

std::optional<double> mean_of_cells(const std::vector<const EvalCell*>& cells, bool use_ap) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const EvalCell* c : cells) {
    const auto& v = use_ap ? c->ap : c->ar;
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

EvalReport evaluate(const std::vector<SceneDetections>& detections, const std::vector<Scene>& scenes,
                    const EvaluationTarget& target) {
  std::map<std::size_t, std::size_t> scene_pos;
  for (std::size_t s = 0; s < scenes.size(); ++s) scene_pos[scenes[s].id] = s;

  // Per scene, per class detections in rank order.
  std::vector<std::map<int, std::vector<RankedDetection>>> by_scene(scenes.size());
  for (const auto& sd : detections) {
    auto it = scene_pos.find(sd.scene_id);
    if (it == scene_pos.end()) {
      throw ConfigError("detection references unknown scene id " + std::to_string(sd.scene_id));
    }
    for (const auto& d : sd.detections) {
      by_scene[it->second][d.class_id].push_back({d.score, it->second, d.proposal_index, d.box});
    }
  }
  for (auto& per_class : by_scene) {
    for (auto& [id, list] : per_class) {
      std::sort(list.begin(), list.end(), ranks_before);
      if (list.size() > kMaxDetectionsPerScene) list.resize(kMaxDetectionsPerScene);
    }
  }

  auto mapped_label = [&](int label) {
    auto it = target.gt_label_map.find(label);
    return it == target.gt_label_map.end() ? label : it->second;
  };

  EvalReport report;
  report.protocol = target.protocol;
  report.classes = target.classes;

  for (int class_id : target.classes) {
    std::vector<std::vector<Box>> gt_boxes(scenes.size());
    std::size_t n_gt = 0;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
      for (const auto& g : scenes[s].gt) {
        if (mapped_label(g.label) == class_id) gt_boxes[s].push_back(g.box);
      }
      n_gt += gt_boxes[s].size();
    }
    std::size_t n_det = 0;
    for (const auto& per_class : by_scene) {
      auto it = per_class.find(class_id);
      if (it != per_class.end()) n_det += it->second.size();
    }
    report.total_gt += n_gt;
    report.total_detections += n_det;

    for (std::size_t t = 0; t < kIouThresholdCount; ++t) {
      const double threshold = iou_threshold(t);
      std::vector<std::pair<RankedDetection, bool>> ranked;
      ranked.reserve(n_det);
      for (std::size_t s = 0; s < scenes.size(); ++s) {
        auto it = by_scene[s].find(class_id);
        if (it == by_scene[s].end()) continue;
        std::vector<Box> boxes;
        boxes.reserve(it->second.size());
        for (const auto& d : it->second) boxes.push_back(d.box);
        const auto flags = match_at_threshold(boxes, gt_boxes[s], threshold);
        for (std::size_t k = 0; k < flags.size(); ++k) ranked.emplace_back(it->second[k], flags[k]);
      }
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const auto& a, const auto& b) { return ranks_before(a.first, b.first); });
      std::vector<bool> flags;
      flags.reserve(ranked.size());
      std::size_t matched = 0;
      for (const auto& [d, tp] : ranked) {
        flags.push_back(tp);
        if (tp) ++matched;
      }

      EvalCell cell;
      cell.class_id = class_id;
      cell.threshold_index = t;
      cell.n_gt = n_gt;
      cell.n_detections = n_det;
      cell.n_matched = matched;
      cell.ap = average_precision(flags, n_gt);
      if (n_gt > 0) cell.ar = static_cast<double>(matched) / static_cast<double>(n_gt);
      report.cells.push_back(cell);
    }
  }

  for (const auto& group : target.groups) {
    std::vector<const EvalCell*> all;
    std::vector<const EvalCell*> at50;
    for (const auto& c : report.cells) {
      if (std::find(group.classes.begin(), group.classes.end(), c.class_id) == group.classes.end()) continue;
      all.push_back(&c);
      if (c.threshold_index == 0) at50.push_back(&c);
    }
    report.aggregates.push_back({group.name, mean_of_cells(all, true), mean_of_cells(all, false),
                                 mean_of_cells(at50, true), mean_of_cells(at50, false)});
  }
  return report;
}

}  // namespace protodetect
