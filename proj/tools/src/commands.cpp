#include "protodetect_cli/commands.hpp"

#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"
#include "protodetect/error.hpp"
#include "protodetect/evaluator.hpp"
#include "protodetect/serialization.hpp"

namespace protodetect::cli {

using nlohmann::json;

namespace {

template <typename Body>
int guarded(CommandIo io, Body&& body) {
  try {
    return body();
  } catch (const NumericError& e) {
    io.err << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const Error& e) {
    io.err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

struct LoadedDataset {
  Dataset data;
  std::string digest;
};

LoadedDataset load_dataset(const RunConfig& config) {
  LoadedDataset loaded{parse_dataset(read_text_file(config.paths.dataset)), {}};
  loaded.digest = dataset_digest(loaded.data);
  if (!config.paths.dataset_digest.empty() && config.paths.dataset_digest != loaded.digest) {
    throw ConfigError("dataset digest " + loaded.digest + " does not match expected " + config.paths.dataset_digest);
  }
  return loaded;
}

std::string format_metric(const std::optional<double>& v) {
  if (!v) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << *v;
  return os.str();
}

}  // namespace

int cmd_gen_data(const RunConfig& config, CommandIo io) {
  return guarded(io, [&] {
    const Dataset data = generate_world(config.world);
    const std::string digest = dataset_digest(data);
    write_text_file(config.paths.dataset, dump_dataset(data, {config_hash(config), digest}));
    io.out << "dataset " << config.paths.dataset << "\n";
    io.out << "digest " << digest << "\n";
    return kExitOk;
  });
}

int cmd_train(const RunConfig& config, CommandIo io) {
  return guarded(io, [&] {
    const LoadedDataset loaded = load_dataset(config);
    const Provenance provenance{config_hash(config), loaded.digest};

    EmbeddingConfig model = config.model;
    model.input_dim = loaded.data.config.feature_dim;
    TrainConfig train_config = config.train;
    train_config.episode.noise_std = loaded.data.config.feature_noise;

    // Opened up front so an unwritable log fails before any training.
    write_text_file(config.paths.log, "");
    std::ostringstream log;
    log << json{{"format", "protodetect-log"},
                {"header", {{"config_hash", provenance.config_hash}, {"dataset_digest", provenance.dataset_digest}}}}
               .dump()
        << "\n";

    TrainResult result;
    try {
      result = train(loaded.data, model, config.loss, train_config,
                     [&](const StepRecord& r) { log << dump_step_record(r) << "\n"; });
    } catch (const NumericError&) {
      write_text_file(config.paths.log, log.str());
      throw;
    }
    log << json{{"summary",
                 {{"steps", result.log.size()},
                  {"heldout_accuracy", result.heldout_accuracy},
                  {"heldout_count", result.heldout_count}}}}
               .dump()
        << "\n";
    write_text_file(config.paths.log, log.str());

    Checkpoint ckpt{result.net,      result.classifier,      result.bank, loaded.data.seen_classes(),
                    result.heldout_accuracy, result.heldout_count, provenance};
    write_text_file(config.paths.checkpoint, dump_checkpoint(ckpt));

    io.out << "steps " << result.log.size() << "\n";
    if (!result.log.empty()) io.out << "final_l_total " << result.log.back().l_total << "\n";
    io.out << "heldout_accuracy " << result.heldout_accuracy << " (" << result.heldout_count << " queries)\n";
    io.out << "checkpoint " << config.paths.checkpoint << "\n";
    return kExitOk;
  });
}

int cmd_eval(const RunConfig& config, CommandIo io, std::size_t threads) {
  return guarded(io, [&] {
    const LoadedDataset loaded = load_dataset(config);
    const Dataset& data = loaded.data;
    const Checkpoint ckpt = parse_checkpoint(read_text_file(config.paths.checkpoint));
    if (!ckpt.provenance.dataset_digest.empty() && ckpt.provenance.dataset_digest != loaded.digest) {
      throw ConfigError("checkpoint was trained on dataset " + ckpt.provenance.dataset_digest + ", not " +
                        loaded.digest);
    }
    if (ckpt.net.input_dim() != data.config.feature_dim) {
      throw ConfigError("checkpoint input dim does not match dataset feature dim");
    }
    if (!ckpt.bank.contains(kBackgroundClass)) throw ConfigError("checkpoint bank has no background prototype");

    const ProtocolMode mode = config.eval.mode;
    const std::vector<int> unseen = data.unseen_classes();
    const bool needs_unseen = mode != ProtocolMode::kFewShot;
    if (needs_unseen && unseen.empty()) {
      throw ConfigError("mode '" + std::string(to_string(mode)) + "' needs unseen classes but the dataset has none");
    }
    if (ckpt.seen_classes.empty() && mode != ProtocolMode::kZeroShotUnseenOnly) {
      throw ConfigError("checkpoint lists no seen classes");
    }

    ProtocolInputs inputs;
    if (mode != ProtocolMode::kZeroShotUnseenOnly) inputs.seen_support = data.support_for(ckpt.seen_classes);
    if (needs_unseen && mode != ProtocolMode::kOpenSet) inputs.unseen_support = data.support_for(unseen);
    inputs.unseen_classes = unseen;
    inputs.background_prototype = ckpt.bank.at(kBackgroundClass);

    const AssembledProtocol protocol = assemble_protocol(config.eval, inputs, ckpt.net);
    const auto detections = detect_scenes(data.test_scenes, ckpt.net, protocol.bank, threads);
    const EvalReport report = evaluate(detections, data.test_scenes, protocol.target);

    const Provenance provenance{config_hash(config), loaded.digest};
    write_text_file(config.paths.report + ".csv", report_to_csv(report, provenance));
    write_text_file(config.paths.report + ".json", report_to_json(report, provenance));
    write_text_file(config.paths.report + ".detections.json", dump_detections(detections, provenance));

    io.out << "protocol " << report.protocol << "\n";
    for (const auto& row : report.aggregates) {
      io.out << row.name << " mAP " << format_metric(row.map) << " mAR " << format_metric(row.mar) << " AP50 "
             << format_metric(row.ap50) << " AR50 " << format_metric(row.ar50) << "\n";
    }
    io.out << "report " << config.paths.report << ".csv\n";
    return kExitOk;
  });
}

int cmd_gradcheck(const RunConfig& config, CommandIo io) {
  return guarded(io, [&] {
    const GradcheckReport report = run_gradcheck(config.gradcheck);
    io.out << std::left << std::setw(8) << "loss" << std::setw(16) << "max_rel_error" << "status\n";
    for (const auto& s : report.losses) {
      std::ostringstream err;
      err << std::scientific << std::setprecision(3) << s.max_rel_error;
      io.out << std::left << std::setw(8) << s.loss << std::setw(16) << err.str() << (s.passed ? "PASS" : "FAIL")
             << "\n";
    }
    io.out << "blocks checked " << report.blocks_checked << "\n";
    if (report.passed) return kExitOk;

    std::set<std::pair<std::string, std::string>> offending;
    for (const auto& f : report.failures) offending.insert({f.loss, f.block});
    io.err << "gradient check failed for:\n";
    for (const auto& [loss, block] : offending) io.err << "  " << loss << " " << block << "\n";
    return kExitGradcheck;
  });
}

}  // namespace protodetect::cli
