#include "protodetect/proposal_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "protodetect/error.hpp"

namespace protodetect {

Box Box::make(double x1, double y1, double x2, double y2) {
  if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) || !std::isfinite(y2)) {
    throw ConfigError("box coordinates must be finite");
  }
  if (!(x2 > x1) || !(y2 > y1)) throw ConfigError("degenerate box");
  return {x1, y1, x2, y2};
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

double max_iou(const Box& box, const std::vector<GroundTruth>& gt) {
  double best = 0.0;
  for (const auto& g : gt) best = std::max(best, iou(box, g.box));
  return best;
}

void WorldConfig::validate() const {
  if (num_seen == 0) throw ConfigError("world: num_seen must be positive");
  if (feature_dim == 0) throw ConfigError("world: feature_dim must be positive");
  if (!(separation > 0.0)) throw ConfigError("world: separation must be positive");
  if (!(feature_noise >= 0.0) || !(background_std >= 0.0) || !(foreground_center_norm >= 0.0)) {
    throw ConfigError("world: noise scales and center norm must be nonnegative");
  }
  if (!(min_box_size > 0.0) || !(max_box_size >= min_box_size)) {
    throw ConfigError("world: invalid box size range");
  }
  if (!(scene_size > max_box_size)) throw ConfigError("world: scene_size must exceed max_box_size");
  if (proposals_per_scene < objects_per_scene) {
    throw ConfigError("world: proposals_per_scene must be >= objects_per_scene");
  }
  if (!(box_jitter >= 0.0) || box_jitter >= 0.5) throw ConfigError("world: box_jitter must be in [0, 0.5)");
  if (shots == 0) throw ConfigError("world: shots must be positive");
}

std::vector<int> Dataset::seen_classes() const {
  std::vector<int> ids;
  for (const auto& c : classes) {
    if (c.seen) ids.push_back(c.class_id);
  }
  return ids;
}

std::vector<int> Dataset::unseen_classes() const {
  std::vector<int> ids;
  for (const auto& c : classes) {
    if (!c.seen) ids.push_back(c.class_id);
  }
  return ids;
}

SupportSet Dataset::support_for(const std::vector<int>& class_ids) const {
  SupportSet out;
  for (int id : class_ids) {
    auto it = support.find(id);
    if (it == support.end() || it->second.empty()) {
      throw ConfigError("no support for class " + std::to_string(id));
    }
    out.emplace(id, it->second);
  }
  return out;
}

const Scene* Dataset::find_test_scene(std::size_t id) const {
  for (const auto& s : test_scenes) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

namespace {

Vec random_unit(Rng& rng, std::size_t dim) {
  Vec v(dim);
  double norm2 = 0.0;
  while (norm2 < 1e-12) {
    for (double& x : v) x = rng.normal();
    norm2 = squared_norm(v);
  }
  v *= 1.0 / std::sqrt(norm2);
  return v;
}

Vec sample_feature(Rng& rng, const Vec& mean, double stddev) {
  Vec v = mean;
  for (double& x : v) x += stddev * rng.normal();
  return v;
}

std::vector<ClassModel> place_classes(const WorldConfig& config, Rng& rng) {
  constexpr int kMaxAttempts = 10000;
  const std::size_t total = config.num_seen + config.num_unseen;
  const Vec center = config.foreground_center_norm * random_unit(rng, config.feature_dim);

  std::vector<ClassModel> classes;
  for (std::size_t k = 0; k < total; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      Vec mean = center + config.separation * random_unit(rng, config.feature_dim);
      if (std::sqrt(squared_norm(mean)) < config.separation) continue;
      const bool far_enough = std::all_of(classes.begin(), classes.end(), [&](const ClassModel& c) {
        return std::sqrt(sq_euclidean(c.mean, mean)) >= config.separation;
      });
      if (!far_enough) continue;
      ClassModel model;
      model.class_id = static_cast<int>(k + 1);
      model.mean = std::move(mean);
      model.noise_std = config.feature_noise;
      model.min_box_size = config.min_box_size;
      model.max_box_size = config.max_box_size;
      model.seen = k < config.num_seen;
      classes.push_back(std::move(model));
      placed = true;
    }
    if (!placed) {
      throw ConfigError("world: cannot place class means with separation " +
                        std::to_string(config.separation));
    }
  }
  return classes;
}

Box random_box(Rng& rng, double scene_size, double min_size, double max_size) {
  const double w = rng.uniform(min_size, max_size);
  const double h = rng.uniform(min_size, max_size);
  const double x = rng.uniform(0.0, scene_size - w);
  const double y = rng.uniform(0.0, scene_size - h);
  return Box::make(x, y, x + w, y + h);
}

Box jitter_box(Rng& rng, const Box& box, double jitter) {
  if (jitter == 0.0) return box;
  const double w = box.width();
  const double h = box.height();
  return Box::make(box.x1 + jitter * w * rng.uniform(-1.0, 1.0),
                   box.y1 + jitter * h * rng.uniform(-1.0, 1.0),
                   box.x2 + jitter * w * rng.uniform(-1.0, 1.0),
                   box.y2 + jitter * h * rng.uniform(-1.0, 1.0));
}

Scene make_scene(std::size_t id, const WorldConfig& config, const std::vector<const ClassModel*>& pool,
                 Rng& rng) {
  constexpr int kMaxPlacement = 200;
  Scene scene;
  scene.id = id;

  // Objects are kept nearly disjoint so each GT has an unambiguous proposal.
  for (std::size_t k = 0; k < config.objects_per_scene; ++k) {
    const ClassModel& cls = *pool[rng.uniform_index(pool.size())];
    Box box = random_box(rng, config.scene_size, cls.min_box_size, cls.max_box_size);
    for (int attempt = 0; attempt < kMaxPlacement && max_iou(box, scene.gt) > 0.05; ++attempt) {
      box = random_box(rng, config.scene_size, cls.min_box_size, cls.max_box_size);
    }
    scene.gt.push_back({box, cls.class_id});
    scene.proposals.push_back({jitter_box(rng, box, config.box_jitter),
                               sample_feature(rng, cls.mean, cls.noise_std)});
  }

  // Background proposals avoid the GT boxes (IoU < 0.3) when placement allows.
  const Vec origin(config.feature_dim);
  for (std::size_t k = config.objects_per_scene; k < config.proposals_per_scene; ++k) {
    Box box = random_box(rng, config.scene_size, config.min_box_size, config.max_box_size);
    for (int attempt = 0; attempt < kMaxPlacement && max_iou(box, scene.gt) >= kBackgroundIou;
         ++attempt) {
      box = random_box(rng, config.scene_size, config.min_box_size, config.max_box_size);
    }
    scene.proposals.push_back({box, sample_feature(rng, origin, config.background_std)});
  }
  return scene;
}

}  // namespace

Dataset generate_world(const WorldConfig& config) {
  config.validate();
  Rng rng(config.seed);
  Rng class_rng = rng.split();
  Rng support_rng = rng.split();
  Rng train_rng = rng.split();
  Rng test_rng = rng.split();

  Dataset data;
  data.config = config;
  data.classes = place_classes(config, class_rng);

  for (const auto& cls : data.classes) {
    auto& exemplars = data.support[cls.class_id];
    for (std::size_t i = 0; i < config.shots; ++i) {
      exemplars.push_back(sample_feature(support_rng, cls.mean, cls.noise_std));
    }
  }

  std::vector<const ClassModel*> seen_pool;
  std::vector<const ClassModel*> all_pool;
  for (const auto& cls : data.classes) {
    all_pool.push_back(&cls);
    if (cls.seen) seen_pool.push_back(&cls);
  }

  for (std::size_t s = 0; s < config.train_scenes; ++s) {
    data.train_scenes.push_back(make_scene(s, config, seen_pool, train_rng));
  }
  for (std::size_t s = 0; s < config.test_scenes; ++s) {
    data.test_scenes.push_back(make_scene(config.train_scenes + s, config, all_pool, test_rng));
  }
  return data;
}

Vec augment_feature(Rng& rng, const Vec& v, double strength, double noise_std,
                    const AugmentOptions& options) {
  if (!(strength >= 0.0)) throw ConfigError("augment: strength must be nonnegative");
  Vec out = v;
  if (options.scale) {
    const double gamma = 1.0 + strength * rng.uniform(-1.0, 1.0);
    out *= gamma;
  }
  if (options.rotate && out.dim() >= 2) {
    const std::size_t i = rng.uniform_index(out.dim());
    std::size_t j = rng.uniform_index(out.dim() - 1);
    if (j >= i) ++j;
    const double angle = strength * (std::numbers::pi / 8.0) * rng.uniform(-1.0, 1.0);
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double a = out[i];
    const double b = out[j];
    out[i] = c * a - s * b;
    out[j] = s * a + c * b;
  }
  if (options.noise) {
    const double stddev = strength * noise_std;
    for (double& x : out) x += stddev * rng.normal();
  }
  return out;
}

std::vector<ProposalLabel> label_proposals(const Scene& scene) {
  std::vector<ProposalLabel> labels;
  labels.reserve(scene.proposals.size());
  for (std::size_t p = 0; p < scene.proposals.size(); ++p) {
    double best = 0.0;
    int best_label = kBackgroundClass;
    for (const auto& g : scene.gt) {
      const double overlap = iou(scene.proposals[p].box, g.box);
      if (overlap > best) {
        best = overlap;
        best_label = g.label;
      }
    }
    ProposalLabel entry{p, std::nullopt};
    if (best >= kForegroundIou) {
      entry.label = best_label;
    } else if (best < kBackgroundIou) {
      entry.label = kBackgroundClass;
    }
    labels.push_back(entry);
  }
  return labels;
}

}  // namespace protodetect
