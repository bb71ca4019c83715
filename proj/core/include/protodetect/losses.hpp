#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "protodetect/embedder.hpp"
#include "protodetect/numeric.hpp"
#include "protodetect/prototype_bank.hpp"

namespace protodetect {

enum class Reduction { kSum, kMean };

// Weights applied to the three loss terms when forming l_total.
struct TermWeights {
  double match = 1.0;
  double kl = 0.0;
  double align = 0.0;
};

struct LossConfig {
  double lambda_kl = 1.0;
  double lambda_align = 1.0;
  double tau = 10.0;
  // Stage 1 trains the matching loss alone regardless of the lambdas.
  int stage = 2;
  // Treat the prototype distribution as a fixed target in the KL term.
  bool kl_stop_teacher = false;
  // Whether the alignment softmax runs over p_0 as well as the class
  // prototypes. When off, background-labelled queries do not contribute.
  bool align_include_background = true;
  Reduction reduction = Reduction::kMean;

  void validate() const;
  TermWeights weights() const;
};

struct LabeledEmbedding {
  Vec embedding;
  int label = 0;
};

using QueryBatch = std::vector<LabeledEmbedding>;

// Gradients with respect to the loss inputs: one entry per query, one per
// bank position, plus the classifier parameters.
struct EmbeddingGrads {
  std::vector<Vec> queries;
  std::vector<Vec> prototypes;
  DenseLayer classifier;

  static EmbeddingGrads zeros(const QueryBatch& batch, const PrototypeBank& bank,
                              const LinearClassifier* clf);
  void add_scaled(const EmbeddingGrads& other, double scale);
};

struct LossTerm {
  double value = 0.0;
  EmbeddingGrads grads;
};

// -sum_i log softmax_j(-|q_i - p_j|^2)[y_i]
LossTerm matching_loss(const QueryBatch& batch, const PrototypeBank& bank);

// sum_i KL(P_proto(.|q_i) || P_clf(.|q_i)); classifier output k pairs with
// bank position k.
LossTerm kl_loss(const QueryBatch& batch, const PrototypeBank& bank, const LinearClassifier& clf,
                 bool stop_teacher = false);

// -sum_i log softmax_j(<q_i, p_j> / tau)[y_i]
LossTerm alignment_loss(const QueryBatch& batch, const PrototypeBank& bank, double tau,
                        bool include_background = true);

struct LossValues {
  double match = 0.0;
  double kl = 0.0;
  double align = 0.0;
  double total = 0.0;
};

struct LossBundle {
  // Plain sums over queries.
  LossValues raw;
  // After the configured reduction; the gradients below are of reduced.total.
  LossValues reduced;
  std::size_t batch_size = 0;
  TermWeights weights;
  EmbeddingGrads embedding_grads;
  // Parameter gradients. total_loss fills only the classifier block;
  // episode_loss also fills the embedder blocks.
  ParamGrads grads;
};

LossBundle total_loss(const QueryBatch& batch, const PrototypeBank& bank, const LinearClassifier& clf,
                      const LossConfig& config);
LossBundle total_loss(const QueryBatch& batch, const PrototypeBank& bank, const LinearClassifier& clf,
                      const LossConfig& config, const TermWeights& weights);

struct RawQuery {
  Vec feature;
  int label = 0;
};

// One training step's worth of raw features.
struct Episode {
  SupportSet support;
  // Raw features for p_0; when empty, background_fallback (or the zero vector)
  // is used without gradient.
  std::vector<Vec> background;
  std::optional<Vec> background_fallback;
  std::vector<RawQuery> queries;
};

struct EpisodeLoss {
  LossBundle bundle;
  PrototypeBank bank;
  bool background_from_pool = false;
};

// Embeds the episode, builds the bank (p_0 plus class prototypes), evaluates
// the objective and back-propagates through the embedder, including the
// prototype paths.
EpisodeLoss episode_loss(const EmbeddingNet& net, const LinearClassifier& clf, const Episode& episode,
                         const LossConfig& config);
EpisodeLoss episode_loss(const EmbeddingNet& net, const LinearClassifier& clf, const Episode& episode,
                         const LossConfig& config, const TermWeights& weights);

}  // namespace protodetect
