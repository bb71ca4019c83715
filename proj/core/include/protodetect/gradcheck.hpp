#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "protodetect/embedder.hpp"
#include "protodetect/losses.hpp"

namespace protodetect {

struct GradcheckConfig {
  std::size_t instances = 20;
  std::size_t input_dim = 8;
  std::size_t hidden_dim = 10;
  std::size_t embed_dim = 6;
  std::size_t classes = 3;
  std::size_t batch = 12;
  std::size_t shots = 2;
  std::size_t background = 3;
  std::vector<std::size_t> depths{2, 3, 4};
  double step = 1e-6;
  double tolerance = 1e-4;
  // Denominator floor for the relative error. Blocks whose true gradient is
  // zero (the last bias under the translation-invariant matching loss) are
  // then held to |a - n| <= tolerance * norm_floor.
  double norm_floor = 1e-4;
  std::uint64_t seed = 2024;
  LossConfig loss;
  // Test hook: perturb the analytic gradient of the named block
  // (e.g. "embed.0.weight") so the harness must report it.
  std::string corrupt_block;

  void validate() const;
};

struct GradcheckFailure {
  std::string loss;
  std::size_t depth = 0;
  std::size_t instance = 0;
  std::string block;
  double rel_error = 0.0;
};

struct GradcheckLossSummary {
  std::string loss;
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<GradcheckLossSummary> losses;
  std::vector<GradcheckFailure> failures;
  std::size_t blocks_checked = 0;
  bool passed = true;
};

// |a - n|_2 / max(|a|_2, |n|_2, norm_floor)
double block_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                            double norm_floor = 0.0);

// A random model plus episode sized by the config (labels cover background
// and every class).
struct GradcheckInstance {
  EmbeddingNet net;
  LinearClassifier classifier;
  Episode episode;
};

GradcheckInstance make_gradcheck_instance(const GradcheckConfig& config, std::size_t depth, Rng& rng);

// Central-difference check of match, kl, align and total (stage 2 weights)
// against the analytic gradients of episode_loss, over every depth and
// instance.
GradcheckReport run_gradcheck(const GradcheckConfig& config);

}  // namespace protodetect
