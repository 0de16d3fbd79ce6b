#include "stpinn/pde.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace stpinn {

std::string to_string(ProblemKind kind) {
    switch (kind) {
        case ProblemKind::burgers: return "burgers";
        case ProblemKind::diff_react: return "diff_react";
        case ProblemKind::diff_sorb: return "diff_sorb";
    }
    return "unknown";
}

ProblemKind parse_problem_kind(const std::string& name) {
    if (name == "burgers") return ProblemKind::burgers;
    if (name == "diff_react") return ProblemKind::diff_react;
    if (name == "diff_sorb") return ProblemKind::diff_sorb;
    throw std::invalid_argument("unknown problem '" + name +
                                "' (expected burgers, diff_react or diff_sorb)");
}

double PdeProblem::coefficient(const std::string& name) const {
    auto it = coefficients.find(name);
    if (it == coefficients.end()) {
        throw std::invalid_argument("problem " + to_string(kind) + " has no coefficient '" +
                                    name + "'");
    }
    return it->second;
}

SorptionParams PdeProblem::sorption() const {
    SorptionParams p;
    auto get = [&](const char* key, double& dst) {
        if (auto it = coefficients.find(key); it != coefficients.end()) dst = it->second;
    };
    get("porosity", p.porosity);
    get("bulk_density", p.bulk_density);
    get("freundlich_k", p.freundlich_k);
    get("freundlich_n", p.freundlich_n);
    return p;
}

void validate(const PdeProblem& problem) {
    if (!(problem.x_lo < problem.x_hi)) {
        throw std::invalid_argument("problem domain requires x_lo < x_hi");
    }
    if (!(problem.t_hi > 0.0)) throw std::invalid_argument("problem domain requires T > 0");
    if (!problem.ic) throw std::invalid_argument("problem has no initial condition");
    switch (problem.kind) {
        case ProblemKind::burgers:
            if (!(problem.coefficient("nu") > 0.0)) throw std::invalid_argument("burgers nu must be > 0");
            break;
        case ProblemKind::diff_react:
            if (!(problem.coefficient("nu") > 0.0)) throw std::invalid_argument("diff_react nu must be > 0");
            (void)problem.coefficient("rho");
            break;
        case ProblemKind::diff_sorb: {
            if (!(problem.coefficient("D") > 0.0)) throw std::invalid_argument("diff_sorb D must be > 0");
            const SorptionParams p = problem.sorption();
            if (!(p.porosity > 0.0 && p.porosity < 1.0)) {
                throw std::invalid_argument("diff_sorb porosity must be in (0, 1)");
            }
            break;
        }
    }
}

PdeProblem make_burgers(std::function<double(double)> ic, double nu, double t_hi) {
    PdeProblem p;
    p.kind = ProblemKind::burgers;
    p.x_lo = 0.0;
    p.x_hi = 1.0;
    p.t_hi = t_hi;
    p.coefficients = {{"nu", nu}};
    p.bc = BoundaryKind::periodic;
    p.ic = std::move(ic);
    return p;
}

PdeProblem make_diff_react(std::function<double(double)> ic, double nu, double rho, double t_hi) {
    PdeProblem p;
    p.kind = ProblemKind::diff_react;
    p.x_lo = 0.0;
    p.x_hi = 1.0;
    p.t_hi = t_hi;
    p.coefficients = {{"nu", nu}, {"rho", rho}};
    p.bc = BoundaryKind::periodic;
    p.ic = std::move(ic);
    return p;
}

PdeProblem make_diff_sorb(std::function<double(double)> ic, double D, double t_hi) {
    const SorptionParams s;
    PdeProblem p;
    p.kind = ProblemKind::diff_sorb;
    p.x_lo = 0.0;
    p.x_hi = 1.0;
    p.t_hi = t_hi;
    p.coefficients = {{"D", D},
                      {"porosity", s.porosity},
                      {"bulk_density", s.bulk_density},
                      {"freundlich_k", s.freundlich_k},
                      {"freundlich_n", s.freundlich_n}};
    p.bc = BoundaryKind::dirichlet_robin;
    p.ic = std::move(ic);
    return p;
}

ResidualEvaluator::ResidualEvaluator(const PdeProblem& problem) : kind_(problem.kind) {
    switch (kind_) {
        case ProblemKind::burgers: nu_ = problem.coefficient("nu"); break;
        case ProblemKind::diff_react:
            nu_ = problem.coefficient("nu");
            rho_ = problem.coefficient("rho");
            break;
        case ProblemKind::diff_sorb:
            D_ = problem.coefficient("D");
            sorption_ = problem.sorption();
            break;
    }
}

double SinusoidIC::operator()(double x) const {
    double u = 0.0;
    for (std::size_t i = 0; i < amplitude.size(); ++i) {
        u += amplitude[i] * std::sin(2.0 * std::numbers::pi * mode[i] / length * x + phase[i]);
    }
    return u;
}

SinusoidIC sample_sinusoid_ic(std::uint64_t seed, double length) {
    if (!(length > 0.0)) throw std::invalid_argument("sinusoid IC requires L_x > 0");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> amp(0.0, 1.0);
    std::uniform_int_distribution<int> mode(1, kMaxSinusoidMode);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    SinusoidIC ic;
    ic.length = length;
    for (int i = 0; i < kSinusoidTerms; ++i) {
        ic.amplitude.push_back(amp(rng));
        ic.mode.push_back(mode(rng));
        double ph = 0.0;
        do {
            ph = phase(rng);
        } while (ph <= 0.0);
        ic.phase.push_back(ph);
    }
    return ic;
}

double NodeNoiseIC::operator()(double x) const {
    const auto n = static_cast<double>(values.size());
    const double pos = (x - x_lo) / (x_hi - x_lo) * (n - 1.0);
    const auto j = static_cast<long long>(std::llround(std::clamp(pos, 0.0, n - 1.0)));
    return values[static_cast<std::size_t>(j)];
}

NodeNoiseIC sample_noise_ic(std::uint64_t seed, int nx, double x_lo, double x_hi) {
    if (nx < 2) throw std::invalid_argument("noise IC requires at least 2 nodes");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    NodeNoiseIC ic;
    ic.x_lo = x_lo;
    ic.x_hi = x_hi;
    ic.values.resize(static_cast<std::size_t>(nx));
    for (auto& v : ic.values) v = u01(rng);
    return ic;
}

BoundarySpec::BoundarySpec(const PdeProblem& problem)
    : kind_(problem.bc),
      x_lo_(problem.x_lo),
      x_hi_(problem.x_hi),
      t_hi_(problem.t_hi),
      periodic_derivative_(problem.periodic_derivative) {
    if (kind_ == BoundaryKind::dirichlet_robin) D_ = problem.coefficient("D");
}

std::vector<BoundaryPoint> BoundarySpec::sample(std::size_t n_points, std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> t_dist(0.0, t_hi_);
    std::vector<BoundaryPoint> pts;
    const std::size_t half = n_points / 2;
    if (kind_ == BoundaryKind::periodic) {
        for (std::size_t i = 0; i < half; ++i) {
            BoundaryPoint bp;
            bp.kind = BoundaryTermKind::periodic_pair;
            bp.t = t_dist(rng);
            bp.x = x_lo_;
            bp.x_pair = x_hi_;
            pts.push_back(bp);
        }
        return pts;
    }
    for (std::size_t i = 0; i < half; ++i) {
        BoundaryPoint bp;
        bp.kind = BoundaryTermKind::dirichlet;
        bp.t = t_dist(rng);
        bp.x = x_lo_;
        bp.label = left_value_;
        pts.push_back(bp);
    }
    for (std::size_t i = 0; i < half; ++i) {
        BoundaryPoint bp;
        bp.kind = BoundaryTermKind::robin;
        bp.t = t_dist(rng);
        bp.x = x_hi_;
        pts.push_back(bp);
    }
    return pts;
}

BoundarySpec boundary_spec(const PdeProblem& problem) { return BoundarySpec(problem); }

}  // namespace stpinn
