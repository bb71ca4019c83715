#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "protodetect/error.hpp"
#include "protodetect_cli/commands.hpp"

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::size_t threads = 1;
};

void add_common(CLI::App* sub, Options& options) {
  sub->add_option("--config", options.config_path, "JSON run config")->required();
  sub->add_option("--set", options.overrides, "Override a config value, e.g. train.lr=1e-3");
  sub->add_option("--threads", options.threads, "Worker threads for inference")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace protodetect::cli;

  CLI::App app{"Prototype detection head over a synthetic proposal world"};
  app.require_subcommand(1);
  Options options;
  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset");
  auto* train = app.add_subcommand("train", "Train the embedder and write a checkpoint");
  auto* eval = app.add_subcommand("eval", "Run inference and write the evaluation report");
  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  for (auto* sub : {gen, train, eval, gradcheck}) add_common(sub, options);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  RunConfig config;
  try {
    config = load_run_config(options.config_path, options.overrides);
  } catch (const protodetect::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  CommandIo io{std::cout, std::cerr};
  if (gen->parsed()) return cmd_gen_data(config, io);
  if (train->parsed()) return cmd_train(config, io);
  if (eval->parsed()) return cmd_eval(config, io, options.threads);
  return cmd_gradcheck(config, io);
}
