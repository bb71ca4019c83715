#include "protodetect/embedder.hpp"

#include <cmath>

#include "protodetect/error.hpp"

namespace protodetect {

namespace {

void add_layer_blocks(const std::string& prefix, DenseLayer& layer, std::vector<ParamBlock>& out) {
  out.push_back({prefix + ".weight", layer.weight.values()});
  out.push_back({prefix + ".bias", layer.bias.values()});
}

void accumulate(DenseLayer& into, const DenseLayer& from) {
  auto dst = into.weight.values();
  auto src = from.weight.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  into.bias += from.bias;
}

double layer_squared_norm(const DenseLayer& layer) {
  double s = 0.0;
  for (double x : layer.weight.values()) s += x * x;
  for (double x : layer.bias.values()) s += x * x;
  return s;
}

void scale_layer(DenseLayer& layer, double factor) {
  for (double& x : layer.weight.values()) x *= factor;
  layer.bias *= factor;
}

}  // namespace

DenseLayer DenseLayer::glorot(std::size_t out, std::size_t in, Rng& rng) {
  DenseLayer layer = zeros(out, in);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& w : layer.weight.values()) w = rng.uniform(-limit, limit);
  return layer;
}

void EmbeddingConfig::validate() const {
  if (input_dim == 0 || embed_dim == 0) throw ConfigError("embedder: dimensions must be positive");
  if (depth >= 2 && hidden_dim == 0) throw ConfigError("embedder: hidden_dim must be positive");
  if (depth == 0 && input_dim != embed_dim) {
    throw ConfigError("embedder: depth 0 (identity) requires input_dim == embed_dim");
  }
}

namespace {

std::vector<std::size_t> layer_widths(const EmbeddingConfig& config) {
  std::vector<std::size_t> widths{config.input_dim};
  for (std::size_t k = 1; k < config.depth; ++k) widths.push_back(config.hidden_dim);
  if (config.depth > 0) widths.push_back(config.embed_dim);
  return widths;
}

}  // namespace

EmbeddingNet::EmbeddingNet(const EmbeddingConfig& config, Rng& rng) : input_dim_(config.input_dim) {
  config.validate();
  const auto widths = layer_widths(config);
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    layers_.push_back(DenseLayer::glorot(widths[k + 1], widths[k], rng));
  }
}

EmbeddingNet EmbeddingNet::zeros(const EmbeddingConfig& config) {
  config.validate();
  EmbeddingNet net;
  net.input_dim_ = config.input_dim;
  const auto widths = layer_widths(config);
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    net.layers_.push_back(DenseLayer::zeros(widths[k + 1], widths[k]));
  }
  return net;
}

EmbeddingNet EmbeddingNet::from_layers(std::size_t input_dim, std::vector<DenseLayer> layers) {
  std::size_t width = input_dim;
  for (const auto& layer : layers) {
    if (layer.in_dim() != width || layer.bias.dim() != layer.out_dim()) {
      throw ShapeError("EmbeddingNet: layer shapes do not chain");
    }
    width = layer.out_dim();
  }
  EmbeddingNet net;
  net.input_dim_ = input_dim;
  net.layers_ = std::move(layers);
  return net;
}

std::size_t EmbeddingNet::embed_dim() const {
  return layers_.empty() ? input_dim_ : layers_.back().out_dim();
}

std::size_t EmbeddingNet::hidden_dim() const {
  return layers_.size() >= 2 ? layers_.front().out_dim() : 0;
}

std::size_t EmbeddingNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.parameter_count();
  return n;
}

Vec EmbeddingNet::embed(const Vec& input) const {
  if (input.dim() != input_dim_) {
    throw ShapeError("embed: input dim " + std::to_string(input.dim()) + " != " +
                     std::to_string(input_dim_));
  }
  Vec x = input;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    Vec z = matvec(layers_[k].weight, x);
    z += layers_[k].bias;
    if (k + 1 < layers_.size()) {
      for (double& h : z) h = h > 0.0 ? h : 0.0;
    }
    x = std::move(z);
  }
  return x;
}

EmbedResult EmbeddingNet::forward(const Vec& input) const {
  if (input.dim() != input_dim_) {
    throw ShapeError("embed: input dim " + std::to_string(input.dim()) + " != " +
                     std::to_string(input_dim_));
  }
  EmbedResult result;
  result.cache.inputs.reserve(layers_.size());
  result.cache.pre_activations.reserve(layers_.size());
  Vec x = input;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    Vec z = matvec(layers_[k].weight, x);
    z += layers_[k].bias;
    result.cache.inputs.push_back(std::move(x));
    result.cache.pre_activations.push_back(z);
    if (k + 1 < layers_.size()) {
      for (double& h : z) h = h > 0.0 ? h : 0.0;
    }
    x = std::move(z);
  }
  result.embedding = std::move(x);
  return result;
}

Vec EmbeddingNet::backward(const EmbedCache& cache, const Vec& grad_embedding,
                           std::vector<DenseLayer>& grads) const {
  if (cache.inputs.size() != layers_.size() || cache.pre_activations.size() != layers_.size()) {
    throw ShapeError("embed backward: cache does not match network depth");
  }
  if (grads.size() != layers_.size()) throw ShapeError("embed backward: gradient depth mismatch");
  if (grad_embedding.dim() != embed_dim()) throw ShapeError("embed backward: gradient dim mismatch");

  Vec delta = grad_embedding;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const DenseLayer& layer = layers_[k];
    if (cache.inputs[k].dim() != layer.in_dim() ||
        cache.pre_activations[k].dim() != layer.out_dim()) {
      throw ShapeError("embed backward: stale cache");
    }
    if (k + 1 < layers_.size()) {
      const Vec& z = cache.pre_activations[k];
      for (std::size_t i = 0; i < delta.dim(); ++i) {
        if (!(z[i] > 0.0)) delta[i] = 0.0;
      }
    }
    add_outer(grads[k].weight, delta, cache.inputs[k]);
    grads[k].bias += delta;
    delta = matvec_transposed(layer.weight, delta);
  }
  return delta;
}

std::vector<DenseLayer> EmbeddingNet::zero_grads() const {
  std::vector<DenseLayer> grads;
  grads.reserve(layers_.size());
  for (const auto& layer : layers_) grads.push_back(DenseLayer::zeros(layer.out_dim(), layer.in_dim()));
  return grads;
}

LinearClassifier::LinearClassifier(std::size_t num_outputs, std::size_t embed_dim, Rng& rng)
    : layer_(DenseLayer::glorot(num_outputs, embed_dim, rng)) {}

Vec LinearClassifier::logits(const Vec& embedding) const {
  if (embedding.dim() != embed_dim()) {
    throw ShapeError("classifier: embedding dim " + std::to_string(embedding.dim()) + " != " +
                     std::to_string(embed_dim()));
  }
  Vec out = matvec(layer_.weight, embedding);
  out += layer_.bias;
  return out;
}

Vec LinearClassifier::backward(const Vec& embedding, const Vec& grad_logits, DenseLayer& grads) const {
  if (grad_logits.dim() != num_outputs()) throw ShapeError("classifier backward: gradient dim mismatch");
  add_outer(grads.weight, grad_logits, embedding);
  grads.bias += grad_logits;
  return matvec_transposed(layer_.weight, grad_logits);
}

ParamGrads ParamGrads::zeros_like(const EmbeddingNet& net, const LinearClassifier& clf) {
  return {net.zero_grads(), DenseLayer::zeros(clf.num_outputs(), clf.embed_dim())};
}

double ParamGrads::squared_norm() const {
  double s = layer_squared_norm(classifier);
  for (const auto& layer : embed) s += layer_squared_norm(layer);
  return s;
}

void ParamGrads::scale(double factor) {
  for (auto& layer : embed) scale_layer(layer, factor);
  scale_layer(classifier, factor);
}

ParamGrads& ParamGrads::operator+=(const ParamGrads& other) {
  if (other.embed.size() != embed.size()) throw ShapeError("ParamGrads: depth mismatch");
  for (std::size_t k = 0; k < embed.size(); ++k) accumulate(embed[k], other.embed[k]);
  accumulate(classifier, other.classifier);
  return *this;
}

std::vector<ParamBlock> parameter_blocks(EmbeddingNet& net, LinearClassifier& clf) {
  std::vector<ParamBlock> blocks;
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    add_layer_blocks("embed." + std::to_string(k), net.layers()[k], blocks);
  }
  add_layer_blocks("classifier", clf.layer(), blocks);
  return blocks;
}

std::vector<ParamBlock> gradient_blocks(ParamGrads& grads) {
  std::vector<ParamBlock> blocks;
  for (std::size_t k = 0; k < grads.embed.size(); ++k) {
    add_layer_blocks("embed." + std::to_string(k), grads.embed[k], blocks);
  }
  add_layer_blocks("classifier", grads.classifier, blocks);
  return blocks;
}

std::vector<ConstParamBlock> gradient_blocks(const ParamGrads& grads) {
  auto mutable_blocks = gradient_blocks(const_cast<ParamGrads&>(grads));
  std::vector<ConstParamBlock> blocks;
  blocks.reserve(mutable_blocks.size());
  for (auto& b : mutable_blocks) blocks.push_back({std::move(b.name), b.values});
  return blocks;
}

}  // namespace protodetect
