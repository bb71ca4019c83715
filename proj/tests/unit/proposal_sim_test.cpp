#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "../support/generators.hpp"
#include "../support/oracles.hpp"
#include "protodetect/error.hpp"
#include "protodetect/prototype_bank.hpp"
#include "protodetect/proposal_sim.hpp"
#include "protodetect/serialization.hpp"

using namespace protodetect;

namespace {

WorldConfig small_world() {
  WorldConfig c;
  c.num_seen = 4;
  c.num_unseen = 2;
  c.feature_dim = 16;
  c.train_scenes = 6;
  c.test_scenes = 5;
  return c;
}

}  // namespace

TEST(Iou, Examples) {
  const Box a = Box::make(0, 0, 2, 2);
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(a, Box::make(5, 5, 6, 6)), 0.0);
  EXPECT_EQ(iou(a, Box::make(2, 0, 4, 2)), 0.0);
  EXPECT_EQ(iou(a, Box::make(1, 1, 3, 3)), 1.0 / 7.0);
}

TEST(Box, RejectsDegenerateAndNonFinite) {
  EXPECT_THROW(Box::make(0, 0, 0, 1), ConfigError);
  EXPECT_THROW(Box::make(0, 0, 1, -1), ConfigError);
  EXPECT_THROW(Box::make(0, 0, NAN, 1), ConfigError);
}

TEST(IouProperty, SymmetricBoundedAndMatchesOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 2000; ++trial) {
    const Box a = gen::box(rng);
    const Box b = gen::box(rng);
    const double v = iou(a, b);
    EXPECT_EQ(v, iou(b, a));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, std::min(a.area(), b.area()) / std::max(a.area(), b.area()) + 1e-15);
    EXPECT_NEAR(v, oracle::iou(a, b), 1e-15);
  }
}

TEST(LabelProposals, BandsAndEdges) {
  Scene scene;
  scene.gt = {{Box::make(0, 0, 10, 10), 3}};
  const Vec f(2);
  for (const Box& b : {Box::make(0, 0, 10, 10), Box::make(50, 50, 60, 60), Box::make(0, 0, 10, 4),
                       Box::make(0, 0, 10, 5), Box::make(0, 0, 10, 3)}) {
    scene.proposals.push_back({b, f});
  }
  const auto labels = label_proposals(scene);
  ASSERT_EQ(labels.size(), 5u);
  EXPECT_EQ(labels[0].label, 3);
  EXPECT_EQ(labels[1].label, 0);
  EXPECT_FALSE(labels[2].label.has_value());  // IoU 0.4
  EXPECT_EQ(labels[3].label, 3);              // IoU 0.5 is foreground
  EXPECT_FALSE(labels[4].label.has_value());  // IoU 0.3 is not background
}

TEST(LabelProposals, BestMatchingGtWins) {
  Scene scene;
  scene.gt = {{Box::make(0, 0, 10, 10), 1}, {Box::make(2, 0, 12, 10), 2}};
  scene.proposals = {{Box::make(2, 0, 12, 10), Vec(1)}};
  EXPECT_EQ(label_proposals(scene)[0].label, 2);
}

TEST(WorldConfig, Validation) {
  WorldConfig c = small_world();
  EXPECT_NO_THROW(c.validate());
  c.proposals_per_scene = 2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_world();
  c.separation = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_world();
  c.box_jitter = 0.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_world();
  c.num_seen = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(GenerateWorld, DefaultsMirrorSeenUnseenSplit) {
  WorldConfig c;
  c.train_scenes = 2;
  c.test_scenes = 2;
  const Dataset data = generate_world(c);
  EXPECT_EQ(data.seen_classes().size(), 15u);
  EXPECT_EQ(data.unseen_classes().size(), 5u);
  EXPECT_EQ(data.seen_classes().front(), 1);
  EXPECT_EQ(data.unseen_classes().front(), 16);
}

TEST(GenerateWorld, ClassMeansAreSeparated) {
  const WorldConfig c = small_world();
  const Dataset data = generate_world(c);
  ASSERT_EQ(data.classes.size(), 6u);
  for (std::size_t a = 0; a < data.classes.size(); ++a) {
    EXPECT_GE(std::sqrt(squared_norm(data.classes[a].mean)), c.separation);
    for (std::size_t b = a + 1; b < data.classes.size(); ++b) {
      EXPECT_GE(std::sqrt(sq_euclidean(data.classes[a].mean, data.classes[b].mean)), c.separation);
    }
  }
}

TEST(GenerateWorld, ScenesSupportAndLabels) {
  const WorldConfig c = small_world();
  const Dataset data = generate_world(c);
  ASSERT_EQ(data.train_scenes.size(), c.train_scenes);
  ASSERT_EQ(data.test_scenes.size(), c.test_scenes);
  for (const auto& [id, features] : data.support) {
    EXPECT_EQ(features.size(), c.shots);
    for (const auto& f : features) EXPECT_EQ(f.dim(), c.feature_dim);
  }
  EXPECT_EQ(data.support.size(), 6u);
  const auto seen = data.seen_classes();
  for (const auto& scene : data.train_scenes) {
    for (const auto& g : scene.gt) EXPECT_NE(std::find(seen.begin(), seen.end(), g.label), seen.end());
  }
  for (const auto* scenes : {&data.train_scenes, &data.test_scenes}) {
    for (const auto& scene : *scenes) {
      EXPECT_EQ(scene.gt.size(), c.objects_per_scene);
      EXPECT_EQ(scene.proposals.size(), c.proposals_per_scene);
      std::size_t fg = 0;
      std::size_t bg = 0;
      for (const auto& l : label_proposals(scene)) {
        ASSERT_TRUE(l.label.has_value());
        (*l.label == kBackgroundClass ? bg : fg) += 1;
      }
      EXPECT_EQ(fg, c.objects_per_scene);
      EXPECT_EQ(bg, c.proposals_per_scene - c.objects_per_scene);
      for (const auto& p : scene.proposals) {
        EXPECT_GE(p.box.x1, 0.0);
        EXPECT_LE(p.box.x2, c.scene_size);
      }
    }
  }
  EXPECT_EQ(data.test_scenes.front().id, c.train_scenes);
  EXPECT_NE(data.find_test_scene(c.train_scenes), nullptr);
  EXPECT_EQ(data.find_test_scene(0), nullptr);
}

TEST(GenerateWorld, ZeroNoiseGivesExactClassMeans) {
  WorldConfig c = small_world();
  c.feature_noise = 0.0;
  const Dataset data = generate_world(c);
  for (const auto& scene : data.test_scenes) {
    for (const auto& l : label_proposals(scene)) {
      if (*l.label == kBackgroundClass) continue;
      const auto& mean = data.classes[static_cast<std::size_t>(*l.label - 1)].mean;
      EXPECT_EQ(scene.proposals[l.proposal_index].feature, mean);
    }
  }
  for (const auto& [id, features] : data.support) {
    for (const auto& f : features) EXPECT_EQ(f, data.classes[static_cast<std::size_t>(id - 1)].mean);
  }
}

TEST(GenerateWorld, ZeroNoiseNearestMeanIsPerfect) {
  WorldConfig c = small_world();
  c.feature_noise = 0.0;
  const Dataset data = generate_world(c);
  for (const auto& scene : data.test_scenes) {
    for (const auto& l : label_proposals(scene)) {
      if (*l.label == kBackgroundClass) continue;
      const Vec& f = scene.proposals[l.proposal_index].feature;
      int best = 0;
      double best_d = INFINITY;
      for (const auto& m : data.classes) {
        const double d = sq_euclidean(f, m.mean);
        if (d < best_d) {
          best_d = d;
          best = m.class_id;
        }
      }
      EXPECT_EQ(best, *l.label);
    }
  }
}

TEST(GenerateWorld, NoBackgroundProposalsMeansNoPool) {
  WorldConfig c = small_world();
  c.proposals_per_scene = c.objects_per_scene;
  const Dataset data = generate_world(c);
  Rng rng(1);
  const EmbeddingNet net = gen::net(rng, c.feature_dim, 8, 4, 2);
  const Scene& scene = data.train_scenes.front();
  EXPECT_TRUE(background_pool(scene.proposals, scene.gt).empty());
  try {
    build_background_prototype(net, scene.proposals, scene.gt);
    FAIL() << "expected an error";
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "no background pool");
  }
}

TEST(GenerateWorld, SeededRunsAreByteIdentical) {
  const WorldConfig c = small_world();
  const std::string a = dump_dataset(generate_world(c), {});
  const std::string b = dump_dataset(generate_world(c), {});
  EXPECT_EQ(a, b);
  WorldConfig other = c;
  other.seed += 1;
  EXPECT_NE(dump_dataset(generate_world(other), {}), a);
}

TEST(GenerateWorld, ImpossibleSeparationFails) {
  WorldConfig c = small_world();
  c.feature_dim = 1;
  c.num_seen = 3;
  c.num_unseen = 0;
  EXPECT_THROW(generate_world(c), ConfigError);
}

TEST(GenerateWorld, JitteredProposalsStayForeground) {
  WorldConfig c = small_world();
  c.box_jitter = 0.05;
  const Dataset data = generate_world(c);
  std::size_t moved = 0;
  for (const auto& scene : data.test_scenes) {
    for (const auto& l : label_proposals(scene)) {
      if (*l.label == kBackgroundClass) continue;
      const Box& b = scene.proposals[l.proposal_index].box;
      moved += std::none_of(scene.gt.begin(), scene.gt.end(), [&](const auto& g) { return g.box == b; });
    }
  }
  EXPECT_GT(moved, 0u);
}

TEST(Augment, ZeroStrengthIsIdentity) {
  Rng rng(3);
  const Vec v = gen::vec(rng, 10, 3.0);
  EXPECT_EQ(augment_feature(rng, v, 0.0, 1.0), v);
}

TEST(Augment, RotationOnlyPreservesNorm) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec v = gen::vec(rng, 10, 3.0);
    const Vec r = augment_feature(rng, v, 0.8, 1.0, AugmentOptions{false, true, false});
    EXPECT_NEAR(std::sqrt(squared_norm(r)), std::sqrt(squared_norm(v)), 1e-9);
  }
}

TEST(Augment, DisplacementGrowsWithStrength) {
  Rng rng(5);
  const Vec v = gen::vec(rng, 16, 5.0);
  double previous = 0.0;
  for (double strength : {0.05, 0.2, 0.5, 1.0}) {
    double total = 0.0;
    for (int draw = 0; draw < 1000; ++draw) total += std::sqrt(sq_euclidean(augment_feature(rng, v, strength, 1.0), v));
    const double mean = total / 1000.0;
    EXPECT_GT(mean, previous) << "strength " << strength;
    previous = mean;
  }
}

TEST(Augment, RejectsNegativeStrength) {
  Rng rng(6);
  EXPECT_THROW(augment_feature(rng, Vec{1.0, 2.0}, -0.1, 1.0), ConfigError);
}
