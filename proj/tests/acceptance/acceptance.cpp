// Acceptance checks A1..A8. Prints one "[An] PASS|FAIL <detail>" line per
// criterion; exits non-zero if any fails. Pass criterion ids (e.g. "A3 A5")
// to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "protodetect/error.hpp"
#include "protodetect/evaluator.hpp"
#include "protodetect/gradcheck.hpp"
#include "protodetect/inference.hpp"
#include "protodetect/losses.hpp"
#include "protodetect/serialization.hpp"
#include "protodetect/trainer.hpp"
#include "protodetect_cli/commands.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace protodetect;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Separable world used by A3 and A4.
WorldConfig separable_world(std::size_t num_unseen) {
  WorldConfig w;
  w.num_seen = 5;
  w.num_unseen = num_unseen;
  w.separation = 10.0;
  w.feature_noise = 1.0;
  w.shots = 5;
  w.box_jitter = 0.0;
  return w;
}

TrainConfig separable_training(const WorldConfig& world) {
  TrainConfig t;
  t.optimizer.lr = 1e-4;
  t.optimizer.weight_decay = 1e-4;
  t.episode.queries_per_support = 4;
  t.episode.noise_std = world.feature_noise;
  t.stage1_steps = 500;
  t.stage2_steps = 200;
  return t;
}

struct TrainedWorld {
  Dataset data;
  TrainResult result;
  double seconds = 0.0;
};

TrainedWorld train_separable(std::size_t num_unseen) {
  TrainedWorld tw;
  tw.data = generate_world(separable_world(num_unseen));
  EmbeddingConfig model;
  model.input_dim = tw.data.config.feature_dim;
  const auto start = std::chrono::steady_clock::now();
  tw.result = train(tw.data, model, LossConfig{}, separable_training(tw.data.config));
  tw.seconds = seconds_since(start);
  return tw;
}

Outcome a1_gradients() {
  GradcheckConfig config;
  const auto start = std::chrono::steady_clock::now();
  const GradcheckReport r = run_gradcheck(config);
  const double secs = seconds_since(start);
  double worst = 0.0;
  for (const auto& s : r.losses) worst = std::max(worst, s.max_rel_error);
  const bool ok = r.passed && r.losses.size() == 4 && config.instances >= 20 && worst <= 1e-4 && secs < 30.0;
  return {ok, fmt("max rel error %.3g over %.0f blocks (tol 1e-4), %.1f s (limit 30 s)", worst,
                  static_cast<double>(r.blocks_checked), secs)};
}

Outcome a2_distributions() {
  Rng rng(20240);
  double worst_sum = 0.0;
  double min_kl = INFINITY;
  double worst_translation = 0.0;
  double worst_scaling = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t classes = 1 + rng.uniform_index(6);
    const std::size_t dim = 2 + rng.uniform_index(8);
    const double scale = trial % 2 == 0 ? 1.0 : 10.0;
    const PrototypeBank bank = gen::bank(rng, classes, dim, scale);
    const QueryBatch batch = gen::batch(rng, 1 + rng.uniform_index(12), classes, dim, scale);
    const LinearClassifier clf = gen::classifier(rng, classes + 1, dim);

    for (const auto& q : batch) {
      double total = 0.0;
      for (double p : posteriors(q.embedding, bank)) total += p;
      worst_sum = std::max(worst_sum, std::abs(total - 1.0));
    }
    min_kl = std::min(min_kl, kl_loss(batch, bank, clf).value);

    const Vec shift = gen::vec(rng, dim, 20.0);
    QueryBatch moved = batch;
    for (auto& q : moved) q.embedding += shift;
    PrototypeBank moved_bank;
    for (const auto& e : bank.entries()) moved_bank.set(e.class_id, e.center + shift);
    worst_translation =
        std::max(worst_translation, std::abs(matching_loss(moved, moved_bank).value - matching_loss(batch, bank).value));

    // Scaling queries by a and prototypes by b leaves the alignment logits
    // unchanged when tau is scaled by a * b.
    const double a = rng.uniform(0.25, 4.0);
    const double b = rng.uniform(0.25, 4.0);
    const double tau = rng.uniform(0.5, 20.0);
    QueryBatch scaled = batch;
    for (auto& q : scaled) q.embedding *= a;
    PrototypeBank scaled_bank;
    for (const auto& e : bank.entries()) scaled_bank.set(e.class_id, b * e.center);
    worst_scaling = std::max(worst_scaling, std::abs(alignment_loss(scaled, scaled_bank, tau * a * b).value -
                                                     alignment_loss(batch, bank, tau).value));
  }
  const bool ok = worst_sum <= 1e-12 && min_kl >= 0.0 && worst_translation <= 1e-9 && worst_scaling <= 1e-9;
  return {ok, fmt("|sum p - 1| %.2g (tol 1e-12), min KL %.3g, translation drift %.2g, tau-scaling drift %.2g "
                  "(tol 1e-9) over 1000 instances",
                  worst_sum, min_kl, worst_translation, worst_scaling)};
}

struct A3Result {
  Outcome outcome;
  double accuracy = 0.0;
};

A3Result a3_convergence() {
  const TrainedWorld tw = train_separable(0);
  const std::vector<int> seen = tw.data.seen_classes();
  ProtocolInputs inputs;
  inputs.seen_support = tw.data.support_for(seen);
  inputs.background_prototype = tw.result.bank.at(kBackgroundClass);
  const auto protocol = assemble_protocol({ProtocolMode::kFewShot}, inputs, tw.result.net);
  const auto start = std::chrono::steady_clock::now();
  const auto dets = detect_scenes(tw.data.test_scenes, tw.result.net, protocol.bank, 1);
  const EvalReport report = evaluate(dets, tw.data.test_scenes, protocol.target);
  const double secs = tw.seconds + seconds_since(start);
  const double acc = tw.result.heldout_accuracy;
  const double ap50 = report.aggregate("all").ap50.value_or(0.0);
  const bool ok = acc >= 0.95 && ap50 >= 0.90 && secs < 120.0 && tw.result.heldout_count > 0;
  return {{ok, fmt("held-out accuracy %.4f (min 0.95), few-shot mAP@0.50 %.4f (min 0.90), %.1f s (limit 120 s)", acc,
                   ap50, secs)},
          acc};
}

Outcome a4_open_set(double reference_accuracy) {
  const TrainedWorld tw = train_separable(2);
  const std::vector<int> seen = tw.data.seen_classes();
  ProtocolInputs inputs;
  inputs.seen_support = tw.data.support_for(seen);
  inputs.unseen_classes = tw.data.unseen_classes();
  inputs.background_prototype = tw.result.bank.at(kBackgroundClass);
  const auto protocol = assemble_protocol({ProtocolMode::kOpenSet, true}, inputs, tw.result.net);

  std::size_t background = 0;
  std::size_t rejected = 0;
  for (const auto& scene : tw.data.test_scenes) {
    for (const auto& entry : label_proposals(scene)) {
      if (!entry.label || *entry.label != kBackgroundClass) continue;
      ++background;
      const Vec q = tw.result.net.embed(scene.proposals[entry.proposal_index].feature);
      if (classify_proposal(q, protocol.bank).rejected()) ++rejected;
    }
  }
  const double rejection = background == 0 ? 0.0 : static_cast<double>(rejected) / static_cast<double>(background);

  const auto dets = detect_scenes(tw.data.test_scenes, tw.result.net, protocol.bank, 1);
  const EvalReport report = evaluate(dets, tw.data.test_scenes, protocol.target);
  const double unknown_recall = report.cell(kUnknownClass, 0).ar.value_or(0.0);

  const double seen_accuracy = nearest_prototype_accuracy(tw.result.net, protocol.bank, tw.data.test_scenes, seen);
  const double drop = reference_accuracy - seen_accuracy;
  const bool ok = background > 0 && rejection >= 0.90 && unknown_recall >= 0.60 && drop <= 0.05;
  return {ok, fmt("background rejected %.4f (min 0.90), unknown recall@0.50 %.4f (min 0.60), seen accuracy %.4f "
                  "vs %.4f (max drop 0.05)",
                  rejection, unknown_recall, seen_accuracy, reference_accuracy)};
}

Outcome a5_evaluator() {
  const std::vector<Box> gt_slots{Box::make(0, 0, 10, 10), Box::make(100, 0, 110, 10), Box::make(200, 0, 210, 10)};
  // Per GT slot: exact box and a box shrunk to IoU 0.6; plus a miss.
  std::vector<Box> det_options;
  for (const Box& g : gt_slots) {
    det_options.push_back(g);
    det_options.push_back(Box::make(g.x1, g.y1, g.x2, g.y1 + 0.6 * (g.y2 - g.y1)));
  }
  det_options.push_back(Box::make(500, 500, 510, 510));
  const std::vector<double> score_options{0.9, 0.5};

  std::size_t instances = 0;
  std::size_t mismatches = 0;
  EvaluationTarget target;
  target.protocol = "fewshot";
  target.classes = {1};
  target.groups = {{"all", {1}}};

  for (std::size_t n_gt = 0; n_gt <= 3; ++n_gt) {
    Scene scene;
    scene.id = 0;
    for (std::size_t g = 0; g < n_gt; ++g) scene.gt.push_back({gt_slots[g], 1});
    std::vector<Box> gt_boxes(gt_slots.begin(), gt_slots.begin() + static_cast<std::ptrdiff_t>(n_gt));
    for (std::size_t n_det = 0; n_det <= 3; ++n_det) {
      std::size_t combos = 1;
      for (std::size_t k = 0; k < n_det; ++k) combos *= det_options.size() * score_options.size();
      for (std::size_t code = 0; code < combos; ++code) {
        SceneDetections sd{0, {}};
        std::size_t c = code;
        for (std::size_t k = 0; k < n_det; ++k) {
          const Box box = det_options[c % det_options.size()];
          c /= det_options.size();
          const double score = score_options[c % score_options.size()];
          c /= score_options.size();
          sd.detections.push_back({box, 1, score, k});
        }
        ++instances;
        const EvalReport report = evaluate({sd}, {scene}, target);

        std::vector<std::size_t> order(n_det);
        for (std::size_t k = 0; k < n_det; ++k) order[k] = k;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return sd.detections[a].score > sd.detections[b].score;
        });
        std::vector<Box> ranked;
        for (std::size_t k : order) ranked.push_back(sd.detections[k].box);
        for (std::size_t t = 0; t < kIouThresholdCount; ++t) {
          const auto& cell = report.cell(1, t);
          if (n_gt == 0) {
            if (cell.ap.has_value()) ++mismatches;
            continue;
          }
          const auto flags = oracle::greedy_flags(ranked, gt_boxes, iou_threshold(t));
          const double expected = oracle::average_precision(flags, n_gt);
          if (!cell.ap || *cell.ap != expected) ++mismatches;
        }
      }
    }
  }

  const double overlap = iou(Box::make(0, 0, 2, 2), Box::make(1, 1, 3, 3));
  const auto tp_fp = average_precision({true, false}, 2);
  const auto fp_tp = average_precision({false, true}, 1);
  const bool hand_ok = overlap == 1.0 / 7.0 && tp_fp && *tp_fp == oracle::average_precision({true, false}, 2) &&
                       *tp_fp == 51.0 / 101.0 && fp_tp && *fp_tp == 0.5;
  const bool ok = mismatches == 0 && hand_ok;
  return {ok, fmt("%.0f enumerated instances, %.0f mismatches vs oracle; IoU case %.17g; TP,FP AP %.17g", instances,
                  static_cast<double>(mismatches), overlap, tp_fp.value_or(-1.0))};
}

Outcome a6_schedule() {
  WorldConfig w;
  w.num_seen = 4;
  w.num_unseen = 0;
  w.feature_dim = 16;
  w.train_scenes = 10;
  w.test_scenes = 4;
  const Dataset data = generate_world(w);
  EmbeddingConfig model;
  model.input_dim = w.feature_dim;
  model.hidden_dim = 32;
  model.embed_dim = 16;
  TrainConfig stage1_only;
  stage1_only.optimizer.lr = 1e-3;
  stage1_only.episode.noise_std = w.feature_noise;
  stage1_only.stage1_steps = 60;
  stage1_only.stage2_steps = 0;
  const TrainResult s1 = train(data, model, LossConfig{}, stage1_only);

  std::size_t violations = 0;
  for (const auto& r : s1.log) {
    if (r.stage != 1 || r.l_total != r.l_match) ++violations;
  }

  // Same run switched to stage 2 after 59 steps: step 59 sees identical
  // parameters and episode, only the weights change.
  TrainConfig switched = stage1_only;
  switched.stage1_steps = 59;
  switched.stage2_steps = 1;
  const TrainResult s2 = train(data, model, LossConfig{}, switched);
  const StepRecord& before = s1.log.back();
  const StepRecord& after = s2.log.back();
  const bool switch_ok = after.stage == 2 && after.l_match == before.l_match &&
                         after.l_total == (before.l_total + after.l_kl) + after.l_align &&
                         after.l_total != before.l_total;
  const bool ok = violations == 0 && s1.log.size() == 60 && switch_ok;
  return {ok, fmt("%.0f stage-1 steps, %.0f with l_total != l_match; switch step delta %.17g vs l_kl + l_align %.17g",
                  static_cast<double>(s1.log.size()), static_cast<double>(violations), after.l_total - before.l_total,
                  after.l_kl + after.l_align)};
}

constexpr const char* kPipelineConfig = R"({
  "world": {"num_seen": 4, "num_unseen": 2, "feature_dim": 16, "train_scenes": 12, "test_scenes": 8},
  "model": {"hidden_dim": 32, "embed_dim": 16},
  "train": {"stage1_steps": 40, "stage2_steps": 40, "lr": 0.001},
  "eval": {"mode": "openset"}
})";

cli::RunConfig pipeline_config(const fs::path& dir, const std::vector<std::string>& overrides = {}) {
  cli::RunConfig c = cli::parse_run_config(kPipelineConfig, overrides);
  c.paths.dataset = (dir / "dataset.json").string();
  c.paths.checkpoint = (dir / "checkpoint.json").string();
  c.paths.log = (dir / "train_log.jsonl").string();
  c.paths.report = (dir / "report").string();
  return c;
}

int run_pipeline(const cli::RunConfig& c, std::string& errors) {
  std::ostringstream out;
  std::ostringstream err;
  int code = cli::cmd_gen_data(c, {out, err});
  if (code == 0) code = cli::cmd_train(c, {out, err});
  if (code == 0) code = cli::cmd_eval(c, {out, err});
  errors = err.str();
  return code;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("protodetect_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Outcome a7_determinism() {
  const fs::path a = scratch_dir("a7_first");
  const fs::path b = scratch_dir("a7_second");
  std::string errors;
  if (run_pipeline(pipeline_config(a), errors) != 0 || run_pipeline(pipeline_config(b), errors) != 0) {
    return {false, "pipeline failed: " + errors};
  }
  std::size_t identical = 0;
  std::vector<std::string> differing;
  for (const char* name : {"dataset.json", "checkpoint.json", "train_log.jsonl", "report.csv", "report.json",
                           "report.detections.json"}) {
    if (read_text_file((a / name).string()) == read_text_file((b / name).string())) {
      ++identical;
    } else {
      differing.push_back(name);
    }
  }
  fs::remove_all(a);
  fs::remove_all(b);
  std::string detail = std::to_string(identical) + "/6 output files byte-identical across re-runs";
  for (const auto& d : differing) detail += "; differs: " + d;
  return {differing.empty(), detail};
}

Outcome a8_ablations() {
  const fs::path dir = scratch_dir("a8");
  const std::vector<std::pair<std::string, std::vector<std::string>>> losses{
      {"match", {"loss.lambda_kl=0", "loss.lambda_align=0"}},
      {"match+kl", {"loss.lambda_kl=1", "loss.lambda_align=0"}},
      {"match+align", {"loss.lambda_kl=0", "loss.lambda_align=1"}},
      {"match+kl+align", {"loss.lambda_kl=1", "loss.lambda_align=1"}},
  };
  std::size_t complete = 0;
  std::size_t runs = 0;
  std::string failures;
  for (const auto& [name, loss_overrides] : losses) {
    for (int depth : {2, 3, 4}) {
      ++runs;
      std::vector<std::string> overrides = loss_overrides;
      overrides.push_back("model.depth=" + std::to_string(depth));
      const cli::RunConfig c = pipeline_config(dir, overrides);
      std::string errors;
      if (run_pipeline(c, errors) != 0) {
        failures += " " + name + "/d" + std::to_string(depth) + ": " + errors;
        continue;
      }
      // Complete: a row for every class and threshold plus both aggregate rows.
      const Checkpoint ck = parse_checkpoint(read_text_file(c.paths.checkpoint));
      const std::string csv = read_text_file(c.paths.report + ".csv");
      const std::size_t rows = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
      const std::size_t expected = 2 + (ck.seen_classes.size() + 1) * kIouThresholdCount + 2 * 2;
      if (ck.net.depth() == static_cast<std::size_t>(depth) && rows == expected &&
          csv.find(",Known,0.50:0.95,") != std::string::npos && csv.find(",Unknown,0.50,") != std::string::npos) {
        ++complete;
      } else {
        failures += " " + name + "/d" + std::to_string(depth) + ": incomplete report";
      }
    }
  }
  fs::remove_all(dir);
  return {complete == runs, std::to_string(complete) + "/" + std::to_string(runs) +
                                " loss x depth configurations produced complete reports" + failures};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> selected(argv + 1, argv + argc);
  auto wanted = [&](const std::string& id) { return selected.empty() || selected.count(id) > 0; };

  bool all_pass = true;
  auto report = [&](const std::string& id, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all_pass = all_pass && o.pass;
    std::cout << "[" << id << "] " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  };

  if (wanted("A1")) report("A1", a1_gradients);
  if (wanted("A2")) report("A2", a2_distributions);
  double reference_accuracy = NAN;
  if (wanted("A3") || wanted("A4")) {
    A3Result a3;
    try {
      a3 = a3_convergence();
    } catch (const std::exception& e) {
      a3.outcome = {false, std::string("exception: ") + e.what()};
    }
    reference_accuracy = a3.accuracy;
    if (wanted("A3")) report("A3", [&] { return a3.outcome; });
  }
  if (wanted("A4")) report("A4", [&] { return a4_open_set(reference_accuracy); });
  if (wanted("A5")) report("A5", a5_evaluator);
  if (wanted("A6")) report("A6", a6_schedule);
  if (wanted("A7")) report("A7", a7_determinism);
  if (wanted("A8")) report("A8", a8_ablations);
  return all_pass ? 0 : 1;
}
