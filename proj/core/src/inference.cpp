#include "protodetect/inference.hpp"

#include <algorithm>
#include <thread>

#include "protodetect/error.hpp"

namespace protodetect {

Classification classify_proposal(const Vec& query, const PrototypeBank& bank) {
  if (!bank.contains(kBackgroundClass)) throw ConfigError("prototype bank has no background prototype");
  const Vec p = posteriors(query, bank);
  const std::size_t nearest = nearest_prototype(query, bank);
  const int id = bank.entries()[nearest].class_id;
  Classification out;
  out.score = p[nearest];
  if (id != kBackgroundClass) out.class_id = id;
  return out;
}

std::vector<Detection> detect_scene(const Scene& scene, const EmbeddingNet& net, const PrototypeBank& bank) {
  std::vector<Detection> detections;
  for (std::size_t k = 0; k < scene.proposals.size(); ++k) {
    const Proposal& proposal = scene.proposals[k];
    const Classification c = classify_proposal(net.embed(proposal.feature), bank);
    if (c.rejected()) continue;
    detections.push_back({proposal.box, *c.class_id, c.score, k});
  }
  return detections;
}

std::vector<SceneDetections> detect_scenes(const std::vector<Scene>& scenes, const EmbeddingNet& net,
                                           const PrototypeBank& bank, std::size_t threads) {
  std::vector<SceneDetections> out(scenes.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t s = begin; s < scenes.size(); s += stride) {
      out[s] = {scenes[s].id, detect_scene(scenes[s], net, bank)};
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(scenes.size(), 1));
  if (threads == 1) {
    work(0, 1);
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  for (auto& th : pool) th.join();
  return out;
}

std::string_view to_string(ProtocolMode mode) {
  switch (mode) {
    case ProtocolMode::kFewShot: return "fewshot";
    case ProtocolMode::kOpenSet: return "openset";
    case ProtocolMode::kZeroShotUnseenOnly: return "zs-uo";
    case ProtocolMode::kZeroShotMixedUnseenEval: return "zs-mpu";
    case ProtocolMode::kZeroShotMixedSeenEval: return "zs-mps";
  }
  return "unknown";
}

ProtocolMode parse_protocol_mode(std::string_view name) {
  for (auto mode : {ProtocolMode::kFewShot, ProtocolMode::kOpenSet, ProtocolMode::kZeroShotUnseenOnly,
                    ProtocolMode::kZeroShotMixedUnseenEval, ProtocolMode::kZeroShotMixedSeenEval}) {
    if (to_string(mode) == name) return mode;
  }
  throw ConfigError("unknown protocol mode '" + std::string(name) + "'");
}

namespace {

std::vector<int> keys_of(const SupportSet& support) {
  std::vector<int> ids;
  for (const auto& [id, features] : support) ids.push_back(id);
  return ids;
}

void add_class_prototypes(PrototypeBank& bank, const EmbeddingNet& net, const SupportSet& support,
                          const char* which) {
  if (support.empty()) throw ConfigError(std::string("protocol requires ") + which + " support");
  const PrototypeBank built = build_prototypes(net, support);
  for (const auto& [id, p] : built.entries()) bank.set(id, p);
}

}  // namespace

AssembledProtocol assemble_protocol(const ProtocolSpec& spec, const ProtocolInputs& inputs,
                                    const EmbeddingNet& net) {
  if (inputs.background_prototype.dim() != net.embed_dim()) {
    throw ShapeError("background prototype dim does not match embedder");
  }
  AssembledProtocol out;
  out.target.protocol = std::string(to_string(spec.mode));
  const std::vector<int> seen = keys_of(inputs.seen_support);
  const std::vector<int> unseen = keys_of(inputs.unseen_support);

  switch (spec.mode) {
    case ProtocolMode::kFewShot:
      add_class_prototypes(out.bank, net, inputs.seen_support, "seen");
      out.target.classes = seen;
      out.target.groups = {{"all", seen}};
      break;
    case ProtocolMode::kOpenSet: {
      add_class_prototypes(out.bank, net, inputs.seen_support, "seen");
      out.bank.set(kBackgroundClass, inputs.background_prototype);
      out.bank.set(kUnknownClass, compose_unknown_prototype(out.bank, spec.unknown_includes_background));
      out.target.classes = seen;
      out.target.classes.push_back(kUnknownClass);
      for (int id : inputs.unseen_classes) out.target.gt_label_map[id] = kUnknownClass;
      out.target.groups = {{"Known", seen}, {"Unknown", {kUnknownClass}}};
      break;
    }
    case ProtocolMode::kZeroShotUnseenOnly:
      add_class_prototypes(out.bank, net, inputs.unseen_support, "unseen");
      out.target.classes = unseen;
      out.target.groups = {{"all", unseen}};
      break;
    case ProtocolMode::kZeroShotMixedUnseenEval:
    case ProtocolMode::kZeroShotMixedSeenEval:
      add_class_prototypes(out.bank, net, inputs.seen_support, "seen");
      add_class_prototypes(out.bank, net, inputs.unseen_support, "unseen");
      out.target.classes = spec.mode == ProtocolMode::kZeroShotMixedSeenEval ? seen : unseen;
      out.target.groups = {{"all", out.target.classes}};
      break;
  }
  out.bank.set(kBackgroundClass, inputs.background_prototype);
  return out;
}

}  // namespace protodetect
