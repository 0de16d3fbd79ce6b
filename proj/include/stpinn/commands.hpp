#pragma once

// Experiment commands behind the command-line tool. Each returns its
// results and also writes its artifacts below config.out_dir.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "stpinn/config.hpp"
#include "stpinn/grid.hpp"
#include "stpinn/training.hpp"

namespace stpinn {

// Solves the configured problem and writes the reference grid file.
std::filesystem::path cmd_gen_ref(const RunConfig& config, std::ostream& log);

struct EvalMetrics {
    double relative_l2 = 0.0;
    double mse = 0.0;
};

// Network prediction on every node of the grid's dimensions.
GridSolution predict_grid(const Checkpoint& checkpoint, const GridDims& dims);

// Relative L2 and MSE of the checkpoint against the grid; writes |pred - ref|
// at every node to error_out when it is non-empty.
EvalMetrics cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& grid,
                     const std::filesystem::path& error_out, std::ostream& log);

struct TrainArtifacts {
    std::filesystem::path checkpoint;
    std::filesystem::path history;
    std::filesystem::path pseudo_dump;  // empty unless dump_events
    std::filesystem::path event_dir;    // per-event checkpoints, empty unless dump_events
    TrainResult result;
    EvalMetrics metrics;  // against the reference grid
    double runtime_s = 0.0;
};

// Trains one arm ("baseline" or "selftrain") into out_dir.
TrainArtifacts cmd_train(const RunConfig& config, bool baseline, std::ostream& log);

struct CompareRow {
    std::uint64_t seed = 0;
    std::string arm;
    double relative_l2 = 0.0;
    double mse = 0.0;
    double runtime_s = 0.0;
};

struct ComparisonReport {
    std::vector<CompareRow> rows;  // baseline then selftrain, per seed
    std::vector<double> improvement;  // baseline / selftrain error, per seed
    double geomean_improvement = 0.0;
    int selftrain_not_worse = 0;  // seeds with selftrain error <= baseline
};

// Seeds config.seed .. config.seed + n_seeds - 1, both arms per seed, each in
// out_dir/seed_<seed>/. Generates the reference grid first if it is missing.
// Writes out_dir/report.csv.
ComparisonReport cmd_compare(const RunConfig& config, int n_seeds, std::ostream& log);

void write_report_csv(const std::filesystem::path& path, const ComparisonReport& report);

}  // namespace stpinn
