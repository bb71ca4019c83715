#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "protodetect/embedder.hpp"
#include "protodetect/numeric.hpp"
#include "protodetect/proposal_sim.hpp"

namespace protodetect {

// Reserved id of the composed open-set prototype. Sorts after every real
// class so that lowest-id tie-breaking prefers concrete classes.
inline constexpr int kUnknownClass = 1000;

struct Prototype {
  int class_id = 0;
  Vec center;

  bool operator==(const Prototype&) const = default;
};

// Prototypes keyed by class id, kept in ascending id order. Position k in
// the bank is position k of every posterior vector computed against it.
class PrototypeBank {
 public:
  PrototypeBank() = default;

  // Inserts or replaces the prototype for class_id.
  void set(int class_id, Vec center);
  bool erase(int class_id);

  bool contains(int class_id) const { return index_of(class_id).has_value(); }
  std::optional<std::size_t> index_of(int class_id) const;
  const Vec& at(int class_id) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t embed_dim() const { return entries_.empty() ? 0 : entries_.front().center.dim(); }

  const std::vector<Prototype>& entries() const { return entries_; }
  std::vector<int> class_ids() const;
  // Ids excluding background and the unknown prototype.
  std::vector<int> known_class_ids() const;

  bool operator==(const PrototypeBank&) const = default;

 private:
  std::vector<Prototype> entries_;
};

// p_j = mean of phi(v) over the support of class j, for every class in the set.
PrototypeBank build_prototypes(const EmbeddingNet& net, const SupportSet& support);

// Raw features of proposals whose max IoU to every GT box is below 0.3.
std::vector<Vec> background_pool(std::span<const Proposal> proposals, const std::vector<GroundTruth>& gt);

// Mean embedding of the background pool. Throws ConfigError("no background
// pool") when no proposal qualifies.
Vec build_background_prototype(const EmbeddingNet& net, std::span<const Proposal> proposals,
                               const std::vector<GroundTruth>& gt);
Vec build_background_prototype(const EmbeddingNet& net, std::span<const Vec> pool_features);

// Mean of the class prototypes, plus p_0 when include_background is set.
Vec compose_unknown_prototype(const PrototypeBank& bank, bool include_background);
// Mean over an explicit subset of bank ids.
Vec compose_prototype(const PrototypeBank& bank, std::span<const int> class_ids);

// -|q - p_j|^2 for every bank entry, in bank order.
Vec negative_energies(const Vec& query, const PrototypeBank& bank);
// P(y = j | q) = softmax_j(-|q - p_j|^2), in bank order.
Vec posteriors(const Vec& query, const PrototypeBank& bank);
// Bank position of the nearest prototype; ties go to the lowest class id.
std::size_t nearest_prototype(const Vec& query, const PrototypeBank& bank);

}  // namespace protodetect
