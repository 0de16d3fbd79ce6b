#pragma once

// Pseudo-label generation: candidates are scored by their squared equation
// residual, the best fraction q is selected at each generation event, and
// points that stay selected for more than r consecutive events are labelled
// with the network's current prediction.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include "stpinn/network.hpp"
#include "stpinn/pde.hpp"

namespace stpinn {

// Fixed collocation points. Index identity is the key of the flag array, so
// coords must not change once the pool is built.
struct CandidatePool {
    std::vector<double> coords;        // point-major (t, x)
    std::vector<std::uint32_t> flags;  // consecutive selections per point

    CandidatePool() = default;
    explicit CandidatePool(std::vector<double> points);

    std::size_t size() const { return flags.size(); }
    double t(std::size_t i) const { return coords[2 * i]; }
    double x(std::size_t i) const { return coords[2 * i + 1]; }
};

struct PseudoSet {
    std::vector<std::uint32_t> indices;  // ascending pool indices
    std::vector<double> labels;

    std::size_t size() const { return indices.size(); }
    bool empty() const { return indices.empty(); }
};

struct SelfTrainConfig {
    bool enabled = true;
    int period = 100;  // p
    double max_fraction = 0.2;  // q
    int stable_events = 10;  // r
    int warmup = 500;

    bool operator==(const SelfTrainConfig&) const = default;
};

void validate(const SelfTrainConfig& config);

// Squared residual at every pool point, values only.
std::vector<double> score_candidates(std::span<const double> params, const MlpSpec& spec,
                                     const PdeProblem& problem, const CandidatePool& pool);

// The floor(N q) indices with the smallest scores, ties broken by lower
// index, returned in ascending index order.
std::vector<std::uint32_t> select_top_q(std::span<const double> scores, double q);

// Increments selected flags and resets every other flag to 0.
void update_flags(CandidatePool& pool, std::span<const std::uint32_t> selected);

// Rebuilds the pseudo set from every index whose flag exceeds r, labelled
// with the network's prediction there.
PseudoSet harvest_pseudo(std::span<const double> params, const MlpSpec& spec,
                         const CandidatePool& pool, int stable_events);

bool is_generation_event(std::int64_t iter, const SelfTrainConfig& config);

// Score, select, update flags and harvest in one step.
PseudoSet run_generation_event(std::span<const double> params, const MlpSpec& spec,
                               const PdeProblem& problem, CandidatePool& pool,
                               const SelfTrainConfig& config);

// Appends one event to a CSV with columns event_iter,index,t,x,label,flag.
class PseudoDumpWriter {
public:
    explicit PseudoDumpWriter(const std::filesystem::path& path);

    void write(std::int64_t event_iter, const CandidatePool& pool, const PseudoSet& pseudo);

private:
    std::ofstream out_;
};

struct PseudoDumpRow {
    std::int64_t event_iter = 0;
    std::uint32_t index = 0;
    double t = 0.0;
    double x = 0.0;
    double label = 0.0;
    std::uint32_t flag = 0;
};

std::vector<PseudoDumpRow> read_pseudo_dump(const std::filesystem::path& path);

}  // namespace stpinn
