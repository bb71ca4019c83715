#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "protodetect/numeric.hpp"

namespace protodetect {

inline constexpr int kBackgroundClass = 0;

// Axis-aligned box in scene units.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  // Validating constructor; throws ConfigError unless x2 > x1, y2 > y1 and
  // all coordinates are finite.
  static Box make(double x1, double y1, double x2, double y2);

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }

  bool operator==(const Box&) const = default;
};

double iou(const Box& a, const Box& b);

struct GroundTruth {
  Box box;
  int label = 0;
};

struct Proposal {
  Box box;
  Vec feature;
};

struct Scene {
  std::size_t id = 0;
  std::vector<GroundTruth> gt;
  std::vector<Proposal> proposals;
};

// Class-conditional feature generator: features ~ N(mean, noise_std^2 I).
struct ClassModel {
  int class_id = 0;
  Vec mean;
  double noise_std = 1.0;
  double min_box_size = 16.0;
  double max_box_size = 48.0;
  bool seen = true;
};

struct WorldConfig {
  std::size_t num_seen = 15;
  std::size_t num_unseen = 5;
  std::size_t feature_dim = 64;
  // Minimum pairwise distance between class means, also the minimum norm of
  // every class mean.
  double separation = 10.0;
  double feature_noise = 1.0;
  // Class means are center + offset_k, with |offset_k| = separation and a
  // shared foreground center of this norm.
  double foreground_center_norm = 10.0;
  // Background features ~ N(0, background_std^2 I).
  double background_std = 1.0;
  double scene_size = 256.0;
  double min_box_size = 16.0;
  double max_box_size = 48.0;
  std::size_t objects_per_scene = 3;
  // GT-aligned proposals plus (proposals - objects) background proposals.
  std::size_t proposals_per_scene = 12;
  // Each GT-aligned proposal corner moves by up to jitter * box side.
  double box_jitter = 0.0;
  std::size_t train_scenes = 40;
  std::size_t test_scenes = 40;
  std::size_t shots = 5;
  std::uint64_t seed = 7;

  void validate() const;
};

using SupportSet = std::map<int, std::vector<Vec>>;

struct Dataset {
  WorldConfig config;
  std::vector<ClassModel> classes;
  std::vector<Scene> train_scenes;
  std::vector<Scene> test_scenes;
  // Support exemplars for every class, seen and unseen.
  SupportSet support;

  std::vector<int> seen_classes() const;
  std::vector<int> unseen_classes() const;
  SupportSet support_for(const std::vector<int>& class_ids) const;
  const Scene* find_test_scene(std::size_t id) const;
};

// Class ids: seen classes are 1..num_seen, unseen classes follow. Train
// scenes only contain seen classes; test scenes draw from all classes.
Dataset generate_world(const WorldConfig& config);

struct AugmentOptions {
  bool scale = true;
  bool rotate = true;
  bool noise = true;
};

// v' = R (gamma v) + eps with gamma ~ U[1-s, 1+s], R a Givens rotation in a
// random coordinate plane with |angle| <= s*pi/8, eps ~ N(0, (s*noise_std)^2).
Vec augment_feature(Rng& rng, const Vec& v, double strength, double noise_std,
                    const AugmentOptions& options = {});

inline constexpr double kForegroundIou = 0.5;
inline constexpr double kBackgroundIou = 0.3;

struct ProposalLabel {
  std::size_t proposal_index = 0;
  // Empty for proposals in the ignore band [0.3, 0.5).
  std::optional<int> label;
};

// max IoU >= 0.5: class of the best GT; < 0.3: background; otherwise ignored.
std::vector<ProposalLabel> label_proposals(const Scene& scene);

double max_iou(const Box& box, const std::vector<GroundTruth>& gt);

}  // namespace protodetect
