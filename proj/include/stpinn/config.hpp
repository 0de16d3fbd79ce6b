#pragma once

// Run configuration: a flat "key = value" text file with [section] headers.
// '#' starts a comment. Unknown sections or keys are errors.
//
//   [problem]   name, t_hi, ic_seed, periodic_derivative, plus coefficients
//               (burgers: nu; diff_react: nu, rho; diff_sorb: D, porosity,
//               bulk_density, freundlich_k, freundlich_n)
//   [grid]      nx, nt, refine, cfl
//   [network]   hidden_layers, hidden_width
//   [points]    n_boundary, n_initial, n_data, batch_size, pool_size
//   [optim]     adam_iters, lr | lr_stages, lbfgs_iters, lbfgs_memory
//   [loss]      w_f, w_d, w_p
//   [selftrain] enabled, p, q, r, warmup, exclude_pseudo_from_residual
//   [run]       seed, out_dir, reference, record_wall_time, dump_events

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stpinn/grid.hpp"
#include "stpinn/network.hpp"
#include "stpinn/optim.hpp"
#include "stpinn/pde.hpp"
#include "stpinn/refsolve.hpp"
#include "stpinn/selftrain.hpp"
#include "stpinn/training.hpp"

namespace stpinn {

struct RunConfig {
    ProblemKind problem = ProblemKind::burgers;
    double t_hi = 2.0;
    std::uint64_t ic_seed = 0;
    bool periodic_derivative = false;
    std::map<std::string, double> coefficients;

    int nx = 1024;
    int nt = 256;
    int refine = 2;
    double cfl = 0.8;

    int hidden_layers = 4;
    int hidden_width = 32;

    std::size_t n_boundary = 512;
    std::size_t n_initial = 1024;
    std::size_t n_data = 1000;
    std::size_t batch_size = 20000;
    std::size_t pool_size = 0;  // 0: every interior grid node

    std::int64_t adam_iters = 20000;
    std::vector<LrStage> lr_stages{{0, 1e-3}};
    int lbfgs_iters = 0;
    int lbfgs_memory = 10;

    LossWeights weights;
    SelfTrainConfig self_train;
    bool exclude_pseudo_from_residual = false;

    std::uint64_t seed = 0;
    std::filesystem::path out_dir = "out";
    std::filesystem::path reference = "reference.grid";  // relative to out_dir
    bool record_wall_time = false;
    bool dump_events = false;

    bool operator==(const RunConfig&) const = default;
};

// Defaults of the standard protocol for each problem.
RunConfig default_config(ProblemKind problem);

// Throws std::invalid_argument naming the offending key.
void validate(const RunConfig& config);

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
std::string format_config(const RunConfig& config);
void save_config(const std::filesystem::path& path, const RunConfig& config);

PdeProblem make_problem(const RunConfig& config);
GridDims grid_dims(const RunConfig& config);
MlpSpec network_spec(const RunConfig& config);
SolverOptions solver_options(const RunConfig& config);
TrainOptions train_options(const RunConfig& config, bool baseline);
std::filesystem::path reference_path(const RunConfig& config);

// Derived seeds so that initialization, point sampling and batch sampling
// draw from unrelated streams.
enum class SeedPurpose : std::uint32_t { init = 1, setup = 2, batches = 3 };
std::uint64_t derive_seed(std::uint64_t seed, SeedPurpose purpose);

// Candidate pool, boundary samples and labelled points drawn from the
// reference solution. Deterministic in config.seed.
TrainingSetup build_setup(const RunConfig& config, const GridSolution& reference);

}  // namespace stpinn
