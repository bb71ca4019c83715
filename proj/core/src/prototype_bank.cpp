#include "protodetect/prototype_bank.hpp"

#include <algorithm>
#include <string>

#include "protodetect/error.hpp"

namespace protodetect {

void PrototypeBank::set(int class_id, Vec center) {
  if (!entries_.empty() && center.dim() != embed_dim()) {
    throw ShapeError("prototype bank: dimension mismatch for class " + std::to_string(class_id));
  }
  auto it = std::lower_bound(entries_.begin(), entries_.end(), class_id,
                             [](const Prototype& p, int id) { return p.class_id < id; });
  if (it != entries_.end() && it->class_id == class_id) {
    it->center = std::move(center);
  } else {
    entries_.insert(it, Prototype{class_id, std::move(center)});
  }
}

bool PrototypeBank::erase(int class_id) {
  auto idx = index_of(class_id);
  if (!idx) return false;
  entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(*idx));
  return true;
}

std::optional<std::size_t> PrototypeBank::index_of(int class_id) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), class_id,
                             [](const Prototype& p, int id) { return p.class_id < id; });
  if (it == entries_.end() || it->class_id != class_id) return std::nullopt;
  return static_cast<std::size_t>(it - entries_.begin());
}

const Vec& PrototypeBank::at(int class_id) const {
  auto idx = index_of(class_id);
  if (!idx) throw ConfigError("prototype bank has no class " + std::to_string(class_id));
  return entries_[*idx].center;
}

std::vector<int> PrototypeBank::class_ids() const {
  std::vector<int> ids;
  ids.reserve(entries_.size());
  for (const auto& p : entries_) ids.push_back(p.class_id);
  return ids;
}

std::vector<int> PrototypeBank::known_class_ids() const {
  std::vector<int> ids;
  for (const auto& p : entries_) {
    if (p.class_id != kBackgroundClass && p.class_id != kUnknownClass) ids.push_back(p.class_id);
  }
  return ids;
}

PrototypeBank build_prototypes(const EmbeddingNet& net, const SupportSet& support) {
  if (support.empty()) throw ConfigError("support set is empty");
  PrototypeBank bank;
  for (const auto& [class_id, features] : support) {
    if (features.empty()) throw ConfigError("class " + std::to_string(class_id) + " has no support");
    Vec acc(net.embed_dim());
    for (const Vec& v : features) acc += net.embed(v);
    acc *= 1.0 / static_cast<double>(features.size());
    bank.set(class_id, std::move(acc));
  }
  return bank;
}

std::vector<Vec> background_pool(std::span<const Proposal> proposals, const std::vector<GroundTruth>& gt) {
  std::vector<Vec> pool;
  for (const auto& p : proposals) {
    if (max_iou(p.box, gt) < kBackgroundIou) pool.push_back(p.feature);
  }
  return pool;
}

Vec build_background_prototype(const EmbeddingNet& net, std::span<const Vec> pool_features) {
  if (pool_features.empty()) throw ConfigError("no background pool");
  Vec acc(net.embed_dim());
  for (const Vec& v : pool_features) acc += net.embed(v);
  acc *= 1.0 / static_cast<double>(pool_features.size());
  return acc;
}

Vec build_background_prototype(const EmbeddingNet& net, std::span<const Proposal> proposals,
                               const std::vector<GroundTruth>& gt) {
  const auto pool = background_pool(proposals, gt);
  return build_background_prototype(net, pool);
}

Vec compose_prototype(const PrototypeBank& bank, std::span<const int> class_ids) {
  if (class_ids.empty()) throw ConfigError("compose_prototype: empty selection");
  Vec acc(bank.embed_dim());
  for (int id : class_ids) acc += bank.at(id);
  acc *= 1.0 / static_cast<double>(class_ids.size());
  return acc;
}

Vec compose_unknown_prototype(const PrototypeBank& bank, bool include_background) {
  std::vector<int> selection = bank.known_class_ids();
  if (selection.empty()) throw ConfigError("compose_unknown_prototype: bank has no class prototypes");
  if (include_background) {
    if (!bank.contains(kBackgroundClass)) {
      throw ConfigError("compose_unknown_prototype: bank has no background prototype");
    }
    selection.insert(selection.begin(), kBackgroundClass);
  }
  return compose_prototype(bank, selection);
}

Vec negative_energies(const Vec& query, const PrototypeBank& bank) {
  if (bank.empty()) throw ConfigError("prototype bank is empty");
  Vec logits(bank.size());
  for (std::size_t j = 0; j < bank.size(); ++j) {
    logits[j] = -sq_euclidean(query, bank.entries()[j].center);
  }
  return logits;
}

Vec posteriors(const Vec& query, const PrototypeBank& bank) {
  return softmax(negative_energies(query, bank));
}

std::size_t nearest_prototype(const Vec& query, const PrototypeBank& bank) {
  if (bank.empty()) throw ConfigError("prototype bank is empty");
  std::size_t best = 0;
  double best_d = sq_euclidean(query, bank.entries()[0].center);
  for (std::size_t j = 1; j < bank.size(); ++j) {
    const double d = sq_euclidean(query, bank.entries()[j].center);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

}  // namespace protodetect
