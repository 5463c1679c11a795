#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gres2net {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitVerify = 3 };

/// Runs one `gres2net <subcommand> ...` invocation. `args` excludes the
/// program name. Diagnostics go to `err`, reports to `out`.
///
///   train      --config <path> [--seed N] [--out DIR] [--model M] [--repeats N] [--resume]
///   eval       --checkpoint <path> (--config <path> | --data <csv> --schema <path>) [--repeats N] [--out DIR]
///   predict    --checkpoint <path> --data <csv> --schema <path> --out <csv>
///   gradcheck  [--scope tensor|nn|res2net|train|all] [--seed N] [--seeds N]
///   synth      --task classification|forecasting [--seed N] --out DIR [--size N] [--noise X]
///
/// Training writes to the output directory:
///   config.txt           resolved run configuration
///   history.csv          epoch,lr,train_loss,train_metric,val_loss,val_metric
///   best.ckpt            early-stopping parameters
///   last.ckpt            last-epoch parameters plus optimiser/RNG state (for --resume)
///   metrics_repeats.csv  one row per validation repeat
///   metrics.csv          mean over repeats
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gres2net
