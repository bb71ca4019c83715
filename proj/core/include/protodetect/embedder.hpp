#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "protodetect/numeric.hpp"

namespace protodetect {

struct DenseLayer {
  Mat weight;  // out x in
  Vec bias;    // out

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }
  std::size_t parameter_count() const { return weight.size() + bias.dim(); }

  static DenseLayer zeros(std::size_t out, std::size_t in) { return {Mat(out, in), Vec(out)}; }
  // Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero bias.
  static DenseLayer glorot(std::size_t out, std::size_t in, Rng& rng);

  bool operator==(const DenseLayer&) const = default;
};

struct EmbeddingConfig {
  std::size_t input_dim = 64;
  std::size_t hidden_dim = 512;
  std::size_t embed_dim = 128;
  // Number of dense layers. 0 is the identity map (input_dim must equal
  // embed_dim); 1 is a single affine map; n >= 2 inserts n-1 hidden ReLU
  // layers of width hidden_dim.
  std::size_t depth = 2;

  void validate() const;
};

// Activations retained by a forward pass for the matching backward pass.
struct EmbedCache {
  std::vector<Vec> inputs;           // input to each layer
  std::vector<Vec> pre_activations;  // affine output of each layer
};

struct EmbedResult {
  Vec embedding;
  EmbedCache cache;
};

// Trainable embedding MLP: affine layers with ReLU between them and a linear
// output layer.
class EmbeddingNet {
 public:
  EmbeddingNet() = default;
  EmbeddingNet(const EmbeddingConfig& config, Rng& rng);

  static EmbeddingNet zeros(const EmbeddingConfig& config);
  // Builds a net from explicit layers; shapes must chain.
  static EmbeddingNet from_layers(std::size_t input_dim, std::vector<DenseLayer> layers);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t embed_dim() const;
  std::size_t depth() const { return layers_.size(); }
  std::size_t hidden_dim() const;
  std::size_t parameter_count() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Vec embed(const Vec& input) const;
  EmbedResult forward(const Vec& input) const;

  // Accumulates dL/dtheta into `grads` (shaped like layers()) and returns
  // dL/dinput. ReLU has derivative 0 at exactly 0.
  Vec backward(const EmbedCache& cache, const Vec& grad_embedding,
               std::vector<DenseLayer>& grads) const;

  std::vector<DenseLayer> zero_grads() const;

  bool operator==(const EmbeddingNet&) const = default;

 private:
  std::size_t input_dim_ = 0;
  std::vector<DenseLayer> layers_;
};

// Shallow linear head over embeddings. Output index k corresponds to the k-th
// entry of the prototype bank it is paired with (background first).
class LinearClassifier {
 public:
  LinearClassifier() = default;
  LinearClassifier(std::size_t num_outputs, std::size_t embed_dim, Rng& rng);
  explicit LinearClassifier(DenseLayer layer) : layer_(std::move(layer)) {}

  std::size_t num_outputs() const { return layer_.out_dim(); }
  std::size_t embed_dim() const { return layer_.in_dim(); }

  DenseLayer& layer() { return layer_; }
  const DenseLayer& layer() const { return layer_; }

  Vec logits(const Vec& embedding) const;
  // Accumulates parameter gradients, returns dL/dembedding.
  Vec backward(const Vec& embedding, const Vec& grad_logits, DenseLayer& grads) const;

  bool operator==(const LinearClassifier&) const = default;

 private:
  DenseLayer layer_;
};

// Gradients for every trainable parameter, shaped like the model.
struct ParamGrads {
  std::vector<DenseLayer> embed;
  DenseLayer classifier;

  static ParamGrads zeros_like(const EmbeddingNet& net, const LinearClassifier& clf);
  double squared_norm() const;
  void scale(double factor);
  ParamGrads& operator+=(const ParamGrads& other);
};

// Named flat view over one parameter tensor.
struct ParamBlock {
  std::string name;
  std::span<double> values;
};

struct ConstParamBlock {
  std::string name;
  std::span<const double> values;
};

// Parameter blocks in a fixed order: embed.<k>.weight, embed.<k>.bias, ...,
// classifier.weight, classifier.bias.
std::vector<ParamBlock> parameter_blocks(EmbeddingNet& net, LinearClassifier& clf);
std::vector<ParamBlock> gradient_blocks(ParamGrads& grads);
std::vector<ConstParamBlock> gradient_blocks(const ParamGrads& grads);

}  // namespace protodetect
