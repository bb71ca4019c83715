#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "protodetect/embedder.hpp"
#include "protodetect/losses.hpp"
#include "protodetect/prototype_bank.hpp"
#include "protodetect/proposal_sim.hpp"

namespace protodetect {

struct AdamWConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

struct AdamWState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;
};

// One AdamW update with decoupled weight decay: theta *= (1 - lr*wd), then
// the bias-corrected Adam step. The state is sized lazily on first use.
// Throws NumericError, leaving params and state untouched, if any gradient
// is non-finite.
void adamw_step(const std::vector<ParamBlock>& params, const std::vector<ConstParamBlock>& grads,
                AdamWState& state, const AdamWConfig& config);

enum class SplitMode {
  // Prototypes from every support vector, queries are augmented copies.
  kFull,
  // 3/5 of each class's support builds the prototype, 2/5 become queries.
  kPartial,
};

struct EpisodeConfig {
  std::size_t queries_per_support = 4;
  bool augment = true;
  double augment_strength = 0.3;
  // Noise scale handed to augment_feature (the world's feature noise).
  double noise_std = 1.0;
  SplitMode split = SplitMode::kFull;

  void validate() const;
};

struct EpisodeSplit {
  SupportSet support;
  std::vector<RawQuery> queries;
};

EpisodeSplit make_episode(Rng& rng, const SupportSet& support, const EpisodeConfig& config);

struct TrainConfig {
  AdamWConfig optimizer;
  std::size_t stage1_steps = 500;
  std::size_t stage2_steps = 200;
  EpisodeConfig episode;
  // Train scenes sampled per step to form the background pool for p_0.
  std::size_t background_scenes = 2;
  // Background proposals added to each step's queries with label 0.
  std::size_t background_queries = 20;
  // Global-norm clipping threshold; 0 disables.
  double grad_clip = 10.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;
  int stage = 1;
  double l_match = 0.0;
  double l_kl = 0.0;
  double l_align = 0.0;
  double l_total = 0.0;
  // Global gradient norm before clipping.
  double grad_norm = 0.0;

  bool operator==(const StepRecord&) const = default;
};

struct TrainResult {
  EmbeddingNet net;
  LinearClassifier classifier;
  // Seen-class prototypes from the full support set plus p_0 from every
  // train scene's background pool.
  PrototypeBank bank;
  std::vector<StepRecord> log;
  double heldout_accuracy = 0.0;
  std::size_t heldout_count = 0;
};

using StepCallback = std::function<void(const StepRecord&)>;

// Stage 1 runs stage1_steps of the matching loss alone; stage 2 runs
// stage2_steps with loss_config's lambdas.
TrainResult train(const Dataset& data, const EmbeddingConfig& model, const LossConfig& loss_config,
                  const TrainConfig& config, const StepCallback& on_step = {});

// Builds the inference bank for `classes` from the dataset support, with p_0
// from all train-scene background proposals.
PrototypeBank final_bank(const EmbeddingNet& net, const Dataset& data, const std::vector<int>& classes);

std::vector<Vec> train_background_pool(const Dataset& data);

// Fraction of GT-aligned test proposals of `classes` whose nearest prototype
// is their own class (nearest = p_0 counts as a miss).
double nearest_prototype_accuracy(const EmbeddingNet& net, const PrototypeBank& bank,
                                  const std::vector<Scene>& scenes, const std::vector<int>& classes,
                                  std::size_t* evaluated = nullptr);

}  // namespace protodetect
