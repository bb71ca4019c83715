#pragma once

#include <cstddef>
#include <ostream>

#include "protodetect_cli/run_config.hpp"

namespace protodetect::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitDiverged = 3,
  kExitGradcheck = 4,
};

struct CommandIo {
  std::ostream& out;
  std::ostream& err;
};

// Each command returns an exit code and reports errors on io.err instead of
// throwing.
int cmd_gen_data(const RunConfig& config, CommandIo io);
int cmd_train(const RunConfig& config, CommandIo io);
int cmd_eval(const RunConfig& config, CommandIo io, std::size_t threads = 1);
int cmd_gradcheck(const RunConfig& config, CommandIo io);

}  // namespace protodetect::cli
