#pragma once

// First- and second-order optimizers over a flat parameter vector.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace stpinn {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    explicit AdamState(std::size_t n, AdamConfig cfg = {})
        : config(cfg), m(n, 0.0), v(n, 0.0) {}
};

// One bias-corrected Adam update of params in place.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad,
               double lr);

// Piecewise-constant learning rate. Each stage lasts `iterations` steps; the
// last stage's rate holds for every later iteration.
struct LrStage {
    std::uint64_t iterations = 0;
    double lr = 1e-3;

    bool operator==(const LrStage&) const = default;
};

class LrSchedule {
public:
    LrSchedule() = default;
    explicit LrSchedule(double constant) : stages_{{0, constant}} {}
    explicit LrSchedule(std::vector<LrStage> stages);

    double at(std::uint64_t iteration) const;
    const std::vector<LrStage>& stages() const { return stages_; }

private:
    std::vector<LrStage> stages_{{0, 1e-3}};
};

// f(x) with its gradient written into grad.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct LbfgsOptions {
    int max_iters = 1000;
    int memory = 10;
    double grad_tol = 1e-9;
    double c1 = 1e-4;
    double c2 = 0.9;
    int max_line_search = 25;
};

enum class LbfgsStop { max_iters, converged, line_search_failed };

std::string to_string(LbfgsStop stop);

struct LbfgsResult {
    std::vector<double> x;
    double f = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;  // accepted steps
    int evaluations = 0;
    LbfgsStop stop = LbfgsStop::max_iters;
    std::vector<double> accepted_f;  // objective after each accepted step
};

// Called after every accepted step with (iteration, f, x).
using LbfgsCallback = std::function<void(int, double, std::span<const double>)>;

// Limited-memory BFGS (two-loop recursion) with a strong-Wolfe line search.
// A failed line search ends the run and returns the best point found.
LbfgsResult lbfgs_minimize(const Objective& objective, std::vector<double> x0,
                           const LbfgsOptions& options, const LbfgsCallback& on_step = {});

}  // namespace stpinn
