#include "protodetect/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "protodetect/error.hpp"

namespace protodetect {

void AdamWConfig::validate() const {
  if (!(lr >= 0.0) || !(weight_decay >= 0.0)) throw ConfigError("adamw: lr and weight_decay must be nonnegative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adamw: betas must be in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("adamw: eps must be positive");
}

void adamw_step(const std::vector<ParamBlock>& params, const std::vector<ConstParamBlock>& grads,
                AdamWState& state, const AdamWConfig& config) {
  if (params.size() != grads.size()) throw ShapeError("adamw: parameter/gradient block count mismatch");
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].values.size() != grads[b].values.size()) {
      throw ShapeError("adamw: shape mismatch in block " + params[b].name);
    }
    if (!all_finite(grads[b].values)) throw NumericError("adamw: non-finite gradient in " + grads[b].name);
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.values.size(), 0.0);
      state.second_moment.emplace_back(p.values.size(), 0.0);
    }
  } else if (state.first_moment.size() != params.size()) {
    throw ShapeError("adamw: state does not match parameters");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  const double step_size = config.lr / bias1;
  const double sqrt_bias2 = std::sqrt(bias2);
  const double decay = 1.0 - config.lr * config.weight_decay;

  for (std::size_t b = 0; b < params.size(); ++b) {
    auto theta = params[b].values;
    auto g = grads[b].values;
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    if (m.size() != theta.size()) throw ShapeError("adamw: state shape mismatch in " + params[b].name);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      theta[k] *= decay;
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      const double denom = std::sqrt(v[k]) / sqrt_bias2 + config.eps;
      theta[k] -= step_size * m[k] / denom;
    }
  }
}

void EpisodeConfig::validate() const {
  if (queries_per_support == 0) throw ConfigError("episode: queries_per_support must be >= 1");
  if (!(augment_strength >= 0.0)) throw ConfigError("episode: augment_strength must be nonnegative");
  if (!(noise_std >= 0.0)) throw ConfigError("episode: noise_std must be nonnegative");
}

EpisodeSplit make_episode(Rng& rng, const SupportSet& support, const EpisodeConfig& config) {
  config.validate();
  if (support.empty()) throw ConfigError("support set is empty");

  auto emit_queries = [&](int class_id, const Vec& v, std::size_t copies, std::vector<RawQuery>& out) {
    for (std::size_t c = 0; c < copies; ++c) {
      out.push_back({config.augment ? augment_feature(rng, v, config.augment_strength, config.noise_std) : v,
                     class_id});
    }
  };

  EpisodeSplit split;
  for (const auto& [class_id, features] : support) {
    if (features.empty()) throw ConfigError("class " + std::to_string(class_id) + " has no support");
    if (config.split == SplitMode::kFull) {
      split.support.emplace(class_id, features);
      for (const Vec& v : features) emit_queries(class_id, v, config.queries_per_support, split.queries);
      continue;
    }
    if (features.size() < 5) throw ConfigError("split requires 5 shots");
    std::vector<std::size_t> order(features.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    shuffle(order, rng);
    const std::size_t n_support = features.size() * 3 / 5;
    auto& protos = split.support[class_id];
    for (std::size_t k = 0; k < n_support; ++k) protos.push_back(features[order[k]]);
    const std::size_t copies = config.augment ? config.queries_per_support : 1;
    for (std::size_t k = n_support; k < order.size(); ++k) {
      emit_queries(class_id, features[order[k]], copies, split.queries);
    }
  }
  return split;
}

void TrainConfig::validate() const {
  optimizer.validate();
  episode.validate();
  if (!(grad_clip >= 0.0)) throw ConfigError("train: grad_clip must be nonnegative");
}

std::vector<Vec> train_background_pool(const Dataset& data) {
  std::vector<Vec> pool;
  for (const auto& scene : data.train_scenes) {
    auto part = background_pool(scene.proposals, scene.gt);
    for (auto& v : part) pool.push_back(std::move(v));
  }
  return pool;
}

PrototypeBank final_bank(const EmbeddingNet& net, const Dataset& data, const std::vector<int>& classes) {
  PrototypeBank bank = build_prototypes(net, data.support_for(classes));
  const auto pool = train_background_pool(data);
  bank.set(kBackgroundClass, pool.empty() ? Vec(net.embed_dim()) : build_background_prototype(net, pool));
  return bank;
}

double nearest_prototype_accuracy(const EmbeddingNet& net, const PrototypeBank& bank,
                                  const std::vector<Scene>& scenes, const std::vector<int>& classes,
                                  std::size_t* evaluated) {
  std::size_t total = 0;
  std::size_t correct = 0;
  for (const auto& scene : scenes) {
    for (const auto& entry : label_proposals(scene)) {
      if (!entry.label || std::find(classes.begin(), classes.end(), *entry.label) == classes.end()) continue;
      const Vec q = net.embed(scene.proposals[entry.proposal_index].feature);
      const std::size_t nearest = nearest_prototype(q, bank);
      ++total;
      if (bank.entries()[nearest].class_id == *entry.label) ++correct;
    }
  }
  if (evaluated != nullptr) *evaluated = total;
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

namespace {

Episode assemble_episode(Rng& rng, const Dataset& data, const SupportSet& seen_support,
                         const TrainConfig& config, const std::optional<Vec>& last_background) {
  EpisodeSplit split = make_episode(rng, seen_support, config.episode);
  Episode episode;
  episode.support = std::move(split.support);
  episode.queries = std::move(split.queries);

  if (!data.train_scenes.empty()) {
    for (std::size_t k = 0; k < config.background_scenes; ++k) {
      const Scene& scene = data.train_scenes[rng.uniform_index(data.train_scenes.size())];
      for (const auto& entry : label_proposals(scene)) {
        if (entry.label && *entry.label == kBackgroundClass) {
          episode.background.push_back(scene.proposals[entry.proposal_index].feature);
        }
      }
    }
  }
  if (!episode.background.empty()) {
    for (std::size_t k = 0; k < config.background_queries; ++k) {
      const Vec& v = episode.background[rng.uniform_index(episode.background.size())];
      episode.queries.push_back(
          {config.episode.augment
               ? augment_feature(rng, v, config.episode.augment_strength, config.episode.noise_std)
               : v,
           kBackgroundClass});
    }
  }
  episode.background_fallback = last_background;
  return episode;
}

}  // namespace

TrainResult train(const Dataset& data, const EmbeddingConfig& model, const LossConfig& loss_config,
                  const TrainConfig& config, const StepCallback& on_step) {
  config.validate();
  loss_config.validate();
  model.validate();
  if (model.input_dim != data.config.feature_dim) {
    throw ConfigError("model input_dim " + std::to_string(model.input_dim) +
                      " does not match dataset feature_dim " + std::to_string(data.config.feature_dim));
  }
  const std::vector<int> seen = data.seen_classes();
  if (seen.empty()) throw ConfigError("dataset has no seen classes");
  const SupportSet seen_support = data.support_for(seen);

  Rng rng(config.seed);
  Rng init_rng = rng.split();
  Rng episode_rng = rng.split();

  TrainResult result;
  result.net = EmbeddingNet(model, init_rng);
  result.classifier = LinearClassifier(seen.size() + 1, model.embed_dim, init_rng);

  AdamWState state;
  std::optional<Vec> last_background;
  const std::size_t total_steps = config.stage1_steps + config.stage2_steps;
  result.log.reserve(total_steps);

  for (std::size_t step = 0; step < total_steps; ++step) {
    LossConfig step_loss = loss_config;
    step_loss.stage = step < config.stage1_steps ? 1 : 2;

    const Episode episode = assemble_episode(episode_rng, data, seen_support, config, last_background);
    if (episode.support.size() + 1 != result.classifier.num_outputs()) {
      throw ConfigError("classifier width does not match class count");
    }

    EpisodeLoss loss;
    try {
      loss = episode_loss(result.net, result.classifier, episode, step_loss);
    } catch (const NumericError&) {
      throw NumericError("diverged at step " + std::to_string(step));
    }
    if (loss.background_from_pool) last_background = loss.bank.at(kBackgroundClass);

    ParamGrads& grads = loss.bundle.grads;
    const double grad_norm = std::sqrt(grads.squared_norm());
    if (!std::isfinite(grad_norm) || !std::isfinite(loss.bundle.reduced.total)) {
      throw NumericError("diverged at step " + std::to_string(step));
    }
    if (config.grad_clip > 0.0 && grad_norm > config.grad_clip) grads.scale(config.grad_clip / grad_norm);

    adamw_step(parameter_blocks(result.net, result.classifier), gradient_blocks(std::as_const(grads)), state,
               config.optimizer);

    const LossValues& v = loss.bundle.reduced;
    StepRecord record{step, step_loss.stage, v.match, v.kl, v.align, v.total, grad_norm};
    result.log.push_back(record);
    if (on_step) on_step(record);
  }

  result.bank = final_bank(result.net, data, seen);
  result.heldout_accuracy =
      nearest_prototype_accuracy(result.net, result.bank, data.test_scenes, seen, &result.heldout_count);
  return result;
}

}  // namespace protodetect
