#include <gtest/gtest.h>

#include <cmath>

#include "../support/generators.hpp"
#include "protodetect/error.hpp"
#include "protodetect/inference.hpp"
#include "protodetect/trainer.hpp"

using namespace protodetect;

namespace {

PrototypeBank line_bank() {
  PrototypeBank bank;
  bank.set(0, Vec{0.0, 0.0});
  bank.set(1, Vec{2.0, 0.0});
  bank.set(2, Vec{0.0, 3.0});
  return bank;
}

EmbeddingNet identity(std::size_t dim) { return EmbeddingNet::zeros({dim, 1, dim, 0}); }

WorldConfig clean_world() {
  WorldConfig c;
  c.num_seen = 4;
  c.num_unseen = 3;
  c.feature_dim = 12;
  c.feature_noise = 0.0;
  c.train_scenes = 5;
  c.test_scenes = 6;
  return c;
}

}  // namespace

TEST(ClassifyProposal, Examples) {
  const PrototypeBank bank = line_bank();
  EXPECT_TRUE(classify_proposal(Vec{0.0, 0.0}, bank).rejected());
  const Classification at1 = classify_proposal(Vec{2.0, 0.0}, bank);
  ASSERT_FALSE(at1.rejected());
  EXPECT_EQ(*at1.class_id, 1);
  EXPECT_DOUBLE_EQ(at1.score, posteriors(Vec{2.0, 0.0}, bank)[1]);
  EXPECT_EQ(*classify_proposal(Vec{0.0, 3.0}, bank).class_id, 2);
  // Midpoint of p_0 and p_1 ties; the lower id (background) wins.
  EXPECT_TRUE(classify_proposal(Vec{1.0, 0.0}, bank).rejected());
}

TEST(ClassifyProposal, MissingBackgroundIsAnError) {
  PrototypeBank bank;
  bank.set(1, Vec{1.0});
  EXPECT_THROW(classify_proposal(Vec{1.0}, bank), ConfigError);
}

TEST(ClassifyProposalProperty, DecisionFollowsDistanceOrder) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const PrototypeBank bank = gen::bank(rng, 1 + rng.uniform_index(5), 3);
    const Vec q = gen::vec(rng, 3, 1.5);
    // Nearest by plain (square-rooted) Euclidean distance, a monotone transform.
    int best = -1;
    double best_d = INFINITY;
    for (const auto& e : bank.entries()) {
      const double d = std::sqrt(sq_euclidean(q, e.center));
      if (d < best_d) {
        best_d = d;
        best = e.class_id;
      }
    }
    const Classification c = classify_proposal(q, bank);
    EXPECT_EQ(c.rejected(), best == kBackgroundClass);
    if (!c.rejected()) {
      EXPECT_EQ(*c.class_id, best);
      EXPECT_GT(c.score, 0.0);
      EXPECT_LE(c.score, 1.0);
    }
  }
}

TEST(DetectScene, EmptySceneGivesNoDetections) {
  Scene scene;
  EXPECT_TRUE(detect_scene(scene, identity(2), line_bank()).empty());
}

TEST(DetectScene, CleanWorldFindsEveryObject) {
  const Dataset data = generate_world(clean_world());
  const EmbeddingNet net = identity(12);
  const std::vector<int> all_ids = [&] {
    std::vector<int> ids;
    for (const auto& c : data.classes) ids.push_back(c.class_id);
    return ids;
  }();
  const PrototypeBank bank = final_bank(net, data, all_ids);
  for (const auto& scene : data.test_scenes) {
    const auto dets = detect_scene(scene, net, bank);
    EXPECT_LE(dets.size(), scene.proposals.size());
    for (const auto& g : scene.gt) {
      const bool found = std::any_of(dets.begin(), dets.end(),
                                     [&](const Detection& d) { return d.box == g.box && d.class_id == g.label; });
      EXPECT_TRUE(found);
    }
    for (std::size_t i = 0; i < dets.size(); ++i) {
      EXPECT_GT(dets[i].score, 0.0);
      EXPECT_LE(dets[i].score, 1.0);
      EXPECT_NE(dets[i].class_id, kBackgroundClass);
      if (i > 0) {
        EXPECT_LT(dets[i - 1].proposal_index, dets[i].proposal_index);
      }
    }
  }
}

TEST(DetectScenes, ThreadCountDoesNotChangeOutput) {
  const Dataset data = generate_world(clean_world());
  Rng rng(2);
  const EmbeddingNet net = gen::net(rng, 12, 10, 5, 2);
  const PrototypeBank bank = final_bank(net, data, data.seen_classes());
  const auto one = detect_scenes(data.test_scenes, net, bank, 1);
  for (std::size_t threads : {2u, 3u, 8u, 64u}) {
    const auto many = detect_scenes(data.test_scenes, net, bank, threads);
    ASSERT_EQ(many.size(), one.size());
    for (std::size_t s = 0; s < one.size(); ++s) {
      EXPECT_EQ(many[s].scene_id, one[s].scene_id);
      ASSERT_EQ(many[s].detections.size(), one[s].detections.size());
      for (std::size_t k = 0; k < one[s].detections.size(); ++k) {
        EXPECT_EQ(many[s].detections[k].score, one[s].detections[k].score);
        EXPECT_EQ(many[s].detections[k].proposal_index, one[s].detections[k].proposal_index);
      }
    }
  }
}

TEST(ProtocolMode, NamesRoundTrip) {
  for (auto mode : {ProtocolMode::kFewShot, ProtocolMode::kOpenSet, ProtocolMode::kZeroShotUnseenOnly,
                    ProtocolMode::kZeroShotMixedUnseenEval, ProtocolMode::kZeroShotMixedSeenEval}) {
    EXPECT_EQ(parse_protocol_mode(to_string(mode)), mode);
  }
  EXPECT_EQ(to_string(ProtocolMode::kZeroShotMixedUnseenEval), "zs-mpu");
  EXPECT_THROW(parse_protocol_mode("closed-set"), ConfigError);
}

class AssembleProtocol : public ::testing::Test {
 protected:
  void SetUp() override {
    WorldConfig c;
    c.train_scenes = 2;
    c.test_scenes = 2;
    c.feature_dim = 8;
    data_ = generate_world(c);
    Rng rng(3);
    net_ = gen::net(rng, 8, 10, 4, 2);
    inputs_.seen_support = data_.support_for(data_.seen_classes());
    inputs_.unseen_support = data_.support_for(data_.unseen_classes());
    inputs_.unseen_classes = data_.unseen_classes();
    inputs_.background_prototype = gen::vec(rng, 4);
  }

  Dataset data_;
  EmbeddingNet net_;
  ProtocolInputs inputs_;
};

TEST_F(AssembleProtocol, UnseenOnly) {
  const auto p = assemble_protocol({ProtocolMode::kZeroShotUnseenOnly}, inputs_, net_);
  EXPECT_EQ(p.bank.size(), 6u);
  EXPECT_TRUE(p.bank.contains(kBackgroundClass));
  EXPECT_EQ(p.target.classes, data_.unseen_classes());
}

TEST_F(AssembleProtocol, OpenSet) {
  const auto p = assemble_protocol({ProtocolMode::kOpenSet, true}, inputs_, net_);
  EXPECT_EQ(p.bank.size(), 17u);
  EXPECT_TRUE(p.bank.contains(kUnknownClass));
  ASSERT_EQ(p.target.groups.size(), 2u);
  EXPECT_EQ(p.target.groups[0].name, "Known");
  EXPECT_EQ(p.target.groups[1].name, "Unknown");
  EXPECT_EQ(p.target.groups[1].classes, std::vector<int>{kUnknownClass});
  for (int id : data_.unseen_classes()) EXPECT_EQ(p.target.gt_label_map.at(id), kUnknownClass);

  PrototypeBank without_unknown = p.bank;
  without_unknown.erase(kUnknownClass);
  EXPECT_EQ(p.bank.at(kUnknownClass), compose_unknown_prototype(without_unknown, true));
  const auto off = assemble_protocol({ProtocolMode::kOpenSet, false}, inputs_, net_);
  EXPECT_EQ(off.bank.at(kUnknownClass), compose_unknown_prototype(without_unknown, false));
}

TEST_F(AssembleProtocol, MixedModes) {
  const auto mps = assemble_protocol({ProtocolMode::kZeroShotMixedSeenEval}, inputs_, net_);
  const auto mpu = assemble_protocol({ProtocolMode::kZeroShotMixedUnseenEval}, inputs_, net_);
  EXPECT_EQ(mps.bank.size(), 21u);
  EXPECT_EQ(mps.bank, mpu.bank);
  EXPECT_EQ(mps.target.classes, data_.seen_classes());
  EXPECT_EQ(mpu.target.classes, data_.unseen_classes());
  for (int id : mps.target.classes) {
    EXPECT_EQ(std::count(inputs_.unseen_classes.begin(), inputs_.unseen_classes.end(), id), 0);
  }
}

TEST_F(AssembleProtocol, FewShotAndMissingSupport) {
  const auto fs = assemble_protocol({ProtocolMode::kFewShot}, inputs_, net_);
  EXPECT_EQ(fs.bank.size(), 16u);
  EXPECT_EQ(fs.target.groups.front().name, "all");
  ProtocolInputs missing = inputs_;
  missing.unseen_support.clear();
  EXPECT_THROW(assemble_protocol({ProtocolMode::kZeroShotUnseenOnly}, missing, net_), ConfigError);
  EXPECT_THROW(assemble_protocol({ProtocolMode::kZeroShotMixedSeenEval}, missing, net_), ConfigError);
}

TEST_F(AssembleProtocol, LeavesNetworkUntouched) {
  const EmbeddingNet before = net_;
  assemble_protocol({ProtocolMode::kOpenSet}, inputs_, net_);
  EXPECT_EQ(net_, before);
}
