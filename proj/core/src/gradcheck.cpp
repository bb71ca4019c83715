#include "protodetect/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "protodetect/error.hpp"

namespace protodetect {

void GradcheckConfig::validate() const {
  if (instances == 0 || input_dim == 0 || embed_dim == 0 || classes == 0 || batch == 0 || shots == 0) {
    throw ConfigError("gradcheck: sizes must be positive");
  }
  if (!(step > 0.0) || !(tolerance > 0.0)) throw ConfigError("gradcheck: step and tolerance must be positive");
  if (!(norm_floor >= 0.0)) throw ConfigError("gradcheck: norm_floor must be nonnegative");
  loss.validate();
}

double block_relative_error(std::span<const double> analytic, std::span<const double> numeric, double norm_floor) {
  if (analytic.size() != numeric.size()) throw ShapeError("gradcheck: block size mismatch");
  double diff = 0.0;
  double na = 0.0;
  double nn = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    diff += (analytic[k] - numeric[k]) * (analytic[k] - numeric[k]);
    na += analytic[k] * analytic[k];
    nn += numeric[k] * numeric[k];
  }
  const double scale = std::max(std::sqrt(std::max(na, nn)), norm_floor);
  if (scale == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(diff) / scale;
}

GradcheckInstance make_gradcheck_instance(const GradcheckConfig& config, std::size_t depth, Rng& rng) {
  EmbeddingConfig model{config.input_dim, config.hidden_dim, config.embed_dim, depth};
  GradcheckInstance inst;
  inst.net = EmbeddingNet(model, rng);
  // Nonzero biases so that every parameter path is exercised.
  for (auto& layer : inst.net.layers()) {
    for (double& b : layer.bias) b = rng.uniform(-0.5, 0.5);
  }
  inst.classifier = LinearClassifier(config.classes + 1, config.embed_dim, rng);
  for (double& b : inst.classifier.layer().bias) b = rng.uniform(-0.5, 0.5);

  auto random_feature = [&] {
    Vec v(config.input_dim);
    for (double& x : v) x = rng.normal();
    return v;
  };
  for (std::size_t c = 1; c <= config.classes; ++c) {
    auto& support = inst.episode.support[static_cast<int>(c)];
    for (std::size_t s = 0; s < config.shots; ++s) support.push_back(random_feature());
  }
  for (std::size_t b = 0; b < config.background; ++b) inst.episode.background.push_back(random_feature());
  for (std::size_t i = 0; i < config.batch; ++i) {
    inst.episode.queries.push_back({random_feature(), static_cast<int>(i % (config.classes + 1))});
  }
  return inst;
}

namespace {

struct NamedWeights {
  const char* name;
  TermWeights weights;
};

}  // namespace

GradcheckReport run_gradcheck(const GradcheckConfig& config) {
  config.validate();
  const NamedWeights terms[] = {
      {"match", {1.0, 0.0, 0.0}},
      {"kl", {0.0, 1.0, 0.0}},
      {"align", {0.0, 0.0, 1.0}},
      {"total", {1.0, config.loss.lambda_kl, config.loss.lambda_align}},
  };
  LossConfig loss_config = config.loss;
  loss_config.stage = 2;

  GradcheckReport report;
  for (const auto& term : terms) report.losses.push_back({term.name, 0.0, true});

  Rng rng(config.seed);
  for (std::size_t depth : config.depths) {
    for (std::size_t instance = 0; instance < config.instances; ++instance) {
      GradcheckInstance inst = make_gradcheck_instance(config, depth, rng);
      for (std::size_t t = 0; t < std::size(terms); ++t) {
        const auto& term = terms[t];
        EpisodeLoss analytic = episode_loss(inst.net, inst.classifier, inst.episode, loss_config, term.weights);
        auto grad_blocks = gradient_blocks(analytic.bundle.grads);
        auto params = parameter_blocks(inst.net, inst.classifier);

        for (std::size_t b = 0; b < params.size(); ++b) {
          std::vector<double> numeric(params[b].values.size());
          for (std::size_t k = 0; k < numeric.size(); ++k) {
            double& theta = params[b].values[k];
            const double saved = theta;
            theta = saved + config.step;
            const double up =
                episode_loss(inst.net, inst.classifier, inst.episode, loss_config, term.weights).bundle.reduced.total;
            theta = saved - config.step;
            const double down =
                episode_loss(inst.net, inst.classifier, inst.episode, loss_config, term.weights).bundle.reduced.total;
            theta = saved;
            numeric[k] = (up - down) / (2.0 * config.step);
          }
          std::vector<double> analytic_block(grad_blocks[b].values.begin(), grad_blocks[b].values.end());
          if (!config.corrupt_block.empty() && grad_blocks[b].name == config.corrupt_block &&
              !analytic_block.empty()) {
            analytic_block[0] += 1e-2 * (1.0 + std::abs(analytic_block[0]));
          }
          const double err = block_relative_error(analytic_block, numeric, config.norm_floor);
          ++report.blocks_checked;
          auto& summary = report.losses[t];
          summary.max_rel_error = std::max(summary.max_rel_error, err);
          if (!(err <= config.tolerance)) {
            summary.passed = false;
            report.passed = false;
            report.failures.push_back({term.name, depth, instance, params[b].name, err});
          }
        }
      }
    }
  }
  return report;
}

}  // namespace protodetect
