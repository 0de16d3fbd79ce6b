#pragma once

// Loss assembly and the training loop shared by the plain and the
// self-training runs. With self-training disabled the loop is the plain
// baseline: the same code path, the same random stream.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stpinn/network.hpp"
#include "stpinn/optim.hpp"
#include "stpinn/pde.hpp"
#include "stpinn/selftrain.hpp"
#include "stpinn/tape.hpp"

namespace stpinn {

struct LossWeights {
    double residual = 1.0;
    double data = 1.0;
    double pseudo = 1.0;

    bool operator==(const LossWeights&) const = default;
};

void validate(const LossWeights& weights);

// Points with supervised values, point-major (t, x).
struct LabeledPoints {
    std::vector<double> coords;
    std::vector<double> labels;

    std::size_t size() const { return labels.size(); }
    bool empty() const { return labels.empty(); }
};

// Mean squared residual over the points.
Var loss_f(Tape& tape, std::span<const double> params, const MlpSpec& spec,
           const ResidualEvaluator& residual, std::span<const double> points);

// Mean over all boundary terms and labelled points of the squared misfit.
Var loss_d(Tape& tape, std::span<const double> params, const MlpSpec& spec,
           const BoundarySpec& boundary, std::span<const BoundaryPoint> boundary_points,
           const LabeledPoints& data);

// Mean squared misfit to the pseudo labels; the constant 0 when empty.
Var loss_p(Tape& tape, std::span<const double> params, const MlpSpec& spec,
           const LabeledPoints& pseudo);

Var total_loss(const LossWeights& weights, Var lf, Var ld, Var lp);

// n indices drawn uniformly without replacement from [0, pool_size), in
// ascending order. n == pool_size yields the whole pool without drawing.
std::vector<std::uint32_t> sample_batch(std::size_t pool_size, std::size_t n,
                                        std::mt19937_64& rng);

// Everything a run trains against; fixed for the whole run.
struct TrainingSetup {
    PdeProblem problem;
    MlpSpec spec;
    CandidatePool pool;
    std::vector<BoundaryPoint> boundary;
    LabeledPoints data;  // initial and intra-domain labels
};

struct TrainOptions {
    std::int64_t adam_iters = 5000;
    LrSchedule lr{1e-3};
    int lbfgs_iters = 0;
    LbfgsOptions lbfgs;  // max_iters is taken from lbfgs_iters
    std::size_t batch_size = 2048;
    LossWeights weights;
    SelfTrainConfig self_train;
    // Drops current pseudo points from the residual batch (ablation).
    bool exclude_pseudo_from_residual = false;
    std::uint64_t seed = 0;
    bool record_wall_time = false;
};

struct HistoryRow {
    std::int64_t iter = 0;
    double loss_total = 0.0;
    double loss_f = 0.0;
    double loss_d = 0.0;
    double loss_p = 0.0;
    std::size_t n_pseudo = 0;
    std::string phase;  // "adam" or "lbfgs"
    double wall_ms = 0.0;

    bool operator==(const HistoryRow&) const = default;
};

struct TrainResult {
    ParamVector params;
    std::vector<HistoryRow> history;
    CandidatePool pool;  // flags after the last event
    PseudoSet pseudo;
    int generation_events = 0;
    int lbfgs_steps = 0;
    LbfgsStop lbfgs_stop = LbfgsStop::max_iters;
};

// Called right after each generation event with the parameters that
// produced the labels.
using EventObserver = std::function<void(std::int64_t iter, std::span<const double> params,
                                         const CandidatePool& pool, const PseudoSet& pseudo)>;

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Adam phase with optional generation events, then an optional L-BFGS phase
// on a frozen batch and pseudo set. Throws TrainingDiverged on a NaN loss.
TrainResult train(const TrainingSetup& setup, ParamVector init, const TrainOptions& options,
                  const EventObserver& on_event = {});

void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> history);
std::vector<HistoryRow> read_history_csv(const std::filesystem::path& path);

}  // namespace stpinn
