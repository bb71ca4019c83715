#include "protodetect/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "protodetect/error.hpp"

namespace protodetect {

void LossConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("loss: tau must be positive");
  if (!(lambda_kl >= 0.0) || !(lambda_align >= 0.0)) throw ConfigError("loss: lambdas must be nonnegative");
  if (stage != 1 && stage != 2) throw ConfigError("loss: stage must be 1 or 2");
}

TermWeights LossConfig::weights() const {
  if (stage == 1) return {1.0, 0.0, 0.0};
  return {1.0, lambda_kl, lambda_align};
}

EmbeddingGrads EmbeddingGrads::zeros(const QueryBatch& batch, const PrototypeBank& bank,
                                     const LinearClassifier* clf) {
  EmbeddingGrads g;
  g.queries.reserve(batch.size());
  for (const auto& q : batch) g.queries.emplace_back(q.embedding.dim());
  g.prototypes.reserve(bank.size());
  for (const auto& p : bank.entries()) g.prototypes.emplace_back(p.center.dim());
  if (clf != nullptr) g.classifier = DenseLayer::zeros(clf->num_outputs(), clf->embed_dim());
  return g;
}

void EmbeddingGrads::add_scaled(const EmbeddingGrads& other, double scale) {
  for (std::size_t i = 0; i < queries.size(); ++i) queries[i].add_scaled(other.queries[i], scale);
  for (std::size_t j = 0; j < prototypes.size(); ++j) prototypes[j].add_scaled(other.prototypes[j], scale);
  if (other.classifier.weight.size() != 0) {
    if (classifier.weight.size() == 0) {
      classifier = DenseLayer::zeros(other.classifier.out_dim(), other.classifier.in_dim());
    }
    auto dst = classifier.weight.values();
    auto src = other.classifier.weight.values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * src[k];
    classifier.bias.add_scaled(other.classifier.bias, scale);
  }
}

namespace {

std::size_t label_position(const PrototypeBank& bank, int label) {
  auto idx = bank.index_of(label);
  if (!idx) throw ConfigError("label " + std::to_string(label) + " has no prototype");
  return *idx;
}

void check_batch(const QueryBatch& batch, const PrototypeBank& bank) {
  if (bank.empty()) throw ConfigError("prototype bank is empty");
  for (const auto& q : batch) {
    if (q.embedding.dim() != bank.embed_dim()) throw ShapeError("query dim does not match prototype dim");
  }
}

// Chains dL/dz_j for z_j = -|q - p_j|^2 into the query and prototype grads.
void backprop_negative_energies(const Vec& q, const PrototypeBank& bank, const Vec& grad_z, Vec& grad_q,
                                std::vector<Vec>& grad_p) {
  for (std::size_t j = 0; j < bank.size(); ++j) {
    const double g = grad_z[j];
    if (g == 0.0) continue;
    const Vec& p = bank.entries()[j].center;
    for (std::size_t k = 0; k < q.dim(); ++k) {
      const double diff = q[k] - p[k];
      grad_q[k] -= 2.0 * g * diff;
      grad_p[j][k] += 2.0 * g * diff;
    }
  }
}

}  // namespace

LossTerm matching_loss(const QueryBatch& batch, const PrototypeBank& bank) {
  check_batch(batch, bank);
  LossTerm out;
  out.grads = EmbeddingGrads::zeros(batch, bank, nullptr);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Vec& q = batch[i].embedding;
    const std::size_t y = label_position(bank, batch[i].label);
    const Vec z = negative_energies(q, bank);
    const double lse = log_sum_exp(z.values());
    out.value += lse - z[y];

    Vec grad_z(z.dim());
    for (std::size_t j = 0; j < z.dim(); ++j) grad_z[j] = std::exp(z[j] - lse);
    grad_z[y] -= 1.0;
    backprop_negative_energies(q, bank, grad_z, out.grads.queries[i], out.grads.prototypes);
  }
  return out;
}

LossTerm kl_loss(const QueryBatch& batch, const PrototypeBank& bank, const LinearClassifier& clf,
                 bool stop_teacher) {
  check_batch(batch, bank);
  if (clf.num_outputs() != bank.size()) {
    throw ConfigError("classifier width " + std::to_string(clf.num_outputs()) +
                      " does not match prototype bank size " + std::to_string(bank.size()));
  }
  LossTerm out;
  out.grads = EmbeddingGrads::zeros(batch, bank, &clf);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Vec& q = batch[i].embedding;
    const Vec log_p = log_softmax(negative_energies(q, bank));
    const Vec log_q = log_softmax(clf.logits(q));

    // Terms with P_j == 0 contribute exactly 0; no log of a raw probability.
    Vec p(log_p.dim());
    Vec gap(log_p.dim());
    double kl = 0.0;
    for (std::size_t j = 0; j < p.dim(); ++j) {
      p[j] = std::exp(log_p[j]);
      gap[j] = log_p[j] - log_q[j];
      kl += p[j] * gap[j];
    }
    // Gibbs: KL >= 0; rounding can land a hair below.
    kl = std::max(kl, 0.0);
    out.value += kl;

    Vec grad_logits(p.dim());
    for (std::size_t j = 0; j < p.dim(); ++j) grad_logits[j] = std::exp(log_q[j]) - p[j];
    out.grads.queries[i] += clf.backward(q, grad_logits, out.grads.classifier);

    if (!stop_teacher) {
      Vec grad_z(p.dim());
      for (std::size_t j = 0; j < p.dim(); ++j) grad_z[j] = p[j] * (gap[j] - kl);
      backprop_negative_energies(q, bank, grad_z, out.grads.queries[i], out.grads.prototypes);
    }
  }
  return out;
}

LossTerm alignment_loss(const QueryBatch& batch, const PrototypeBank& bank, double tau,
                        bool include_background) {
  if (!(tau > 0.0)) throw ConfigError("alignment loss: tau must be positive");
  check_batch(batch, bank);

  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < bank.size(); ++j) {
    if (include_background || bank.entries()[j].class_id != kBackgroundClass) active.push_back(j);
  }
  if (active.empty()) throw ConfigError("alignment loss: no prototypes selected");

  LossTerm out;
  out.grads = EmbeddingGrads::zeros(batch, bank, nullptr);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const int label = batch[i].label;
    if (!include_background && label == kBackgroundClass) continue;
    const std::size_t y_bank = label_position(bank, label);
    const auto y_it = std::find(active.begin(), active.end(), y_bank);
    const std::size_t y = static_cast<std::size_t>(y_it - active.begin());

    const Vec& q = batch[i].embedding;
    Vec s(active.size());
    for (std::size_t a = 0; a < active.size(); ++a) s[a] = dot(q, bank.entries()[active[a]].center) / tau;
    const double lse = log_sum_exp(s.values());
    out.value += lse - s[y];

    for (std::size_t a = 0; a < active.size(); ++a) {
      double g = std::exp(s[a] - lse);
      if (a == y) g -= 1.0;
      if (g == 0.0) continue;
      const std::size_t j = active[a];
      out.grads.queries[i].add_scaled(bank.entries()[j].center, g / tau);
      out.grads.prototypes[j].add_scaled(q, g / tau);
    }
  }
  return out;
}

LossBundle total_loss(const QueryBatch& batch, const PrototypeBank& bank, const LinearClassifier& clf,
                      const LossConfig& config) {
  return total_loss(batch, bank, clf, config, config.weights());
}

LossBundle total_loss(const QueryBatch& batch, const PrototypeBank& bank, const LinearClassifier& clf,
                      const LossConfig& config, const TermWeights& weights) {
  config.validate();
  if (batch.empty()) throw ConfigError("query batch is empty");

  const LossTerm match = matching_loss(batch, bank);
  const LossTerm kl = kl_loss(batch, bank, clf, config.kl_stop_teacher);
  const LossTerm align = alignment_loss(batch, bank, config.tau, config.align_include_background);

  LossBundle bundle;
  bundle.batch_size = batch.size();
  bundle.weights = weights;
  bundle.raw = {match.value, kl.value, align.value,
                weights.match * match.value + weights.kl * kl.value + weights.align * align.value};

  const double scale = config.reduction == Reduction::kMean ? 1.0 / static_cast<double>(batch.size()) : 1.0;
  bundle.reduced.match = bundle.raw.match * scale;
  bundle.reduced.kl = bundle.raw.kl * scale;
  bundle.reduced.align = bundle.raw.align * scale;
  bundle.reduced.total = weights.match * bundle.reduced.match + weights.kl * bundle.reduced.kl +
                         weights.align * bundle.reduced.align;

  if (!std::isfinite(bundle.raw.total)) throw NumericError("non-finite loss");

  bundle.embedding_grads = EmbeddingGrads::zeros(batch, bank, &clf);
  if (weights.match != 0.0) bundle.embedding_grads.add_scaled(match.grads, weights.match * scale);
  if (weights.kl != 0.0) bundle.embedding_grads.add_scaled(kl.grads, weights.kl * scale);
  if (weights.align != 0.0) bundle.embedding_grads.add_scaled(align.grads, weights.align * scale);
  bundle.grads.classifier = bundle.embedding_grads.classifier;
  return bundle;
}

EpisodeLoss episode_loss(const EmbeddingNet& net, const LinearClassifier& clf, const Episode& episode,
                         const LossConfig& config) {
  return episode_loss(net, clf, episode, config, config.weights());
}

EpisodeLoss episode_loss(const EmbeddingNet& net, const LinearClassifier& clf, const Episode& episode,
                         const LossConfig& config, const TermWeights& weights) {
  if (episode.support.empty()) throw ConfigError("episode has no support");
  if (episode.queries.empty()) throw ConfigError("episode has no queries");

  EpisodeLoss result;

  // Class prototypes with cached activations for the backward pass.
  std::vector<std::vector<EmbedCache>> support_caches;
  for (const auto& [class_id, features] : episode.support) {
    if (features.empty()) throw ConfigError("class " + std::to_string(class_id) + " has no support");
    if (class_id == kBackgroundClass) throw ConfigError("support may not contain the background class");
    Vec acc(net.embed_dim());
    auto& caches = support_caches.emplace_back();
    for (const Vec& v : features) {
      EmbedResult r = net.forward(v);
      acc += r.embedding;
      caches.push_back(std::move(r.cache));
    }
    acc *= 1.0 / static_cast<double>(features.size());
    result.bank.set(class_id, std::move(acc));
  }

  std::vector<EmbedCache> background_caches;
  if (!episode.background.empty()) {
    Vec acc(net.embed_dim());
    for (const Vec& v : episode.background) {
      EmbedResult r = net.forward(v);
      acc += r.embedding;
      background_caches.push_back(std::move(r.cache));
    }
    acc *= 1.0 / static_cast<double>(episode.background.size());
    result.bank.set(kBackgroundClass, std::move(acc));
    result.background_from_pool = true;
  } else if (episode.background_fallback) {
    result.bank.set(kBackgroundClass, *episode.background_fallback);
  } else {
    result.bank.set(kBackgroundClass, Vec(net.embed_dim()));
  }

  QueryBatch batch;
  std::vector<EmbedCache> query_caches;
  batch.reserve(episode.queries.size());
  for (const auto& rq : episode.queries) {
    EmbedResult r = net.forward(rq.feature);
    batch.push_back({std::move(r.embedding), rq.label});
    query_caches.push_back(std::move(r.cache));
  }

  result.bundle = total_loss(batch, result.bank, clf, config, weights);
  ParamGrads& grads = result.bundle.grads;
  grads.embed = net.zero_grads();
  const EmbeddingGrads& eg = result.bundle.embedding_grads;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    net.backward(query_caches[i], eg.queries[i], grads.embed);
  }

  std::size_t class_index = 0;
  for (const auto& [class_id, features] : episode.support) {
    const std::size_t pos = *result.bank.index_of(class_id);
    const Vec share = (1.0 / static_cast<double>(features.size())) * eg.prototypes[pos];
    for (const auto& cache : support_caches[class_index]) net.backward(cache, share, grads.embed);
    ++class_index;
  }

  if (result.background_from_pool) {
    const std::size_t pos = *result.bank.index_of(kBackgroundClass);
    const Vec share = (1.0 / static_cast<double>(background_caches.size())) * eg.prototypes[pos];
    for (const auto& cache : background_caches) net.backward(cache, share, grads.embed);
  }
  return result;
}

}  // namespace protodetect
