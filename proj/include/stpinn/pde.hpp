#pragma once

// The three 1D benchmark problems: residual operators over solution jets,
// coefficient sets, initial conditions and boundary conditions.
//
// A problem is a forward problem N[u; lambda] + u_t = 0 on
// [x_lo, x_hi] x [0, T]; lambda is the fixed coefficient map.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "stpinn/jet.hpp"
#include "stpinn/tape.hpp"

namespace stpinn {

enum class ProblemKind { burgers, diff_react, diff_sorb };
enum class BoundaryKind { periodic, dirichlet_robin };

std::string to_string(ProblemKind kind);
ProblemKind parse_problem_kind(const std::string& name);

// Freundlich sorption isotherm parameters of the retardation factor.
struct SorptionParams {
    double porosity = 0.29;
    double bulk_density = 2888.0;
    double freundlich_k = 3.5e-4;
    double freundlich_n = 0.875;
    // u^(n_f - 1) is singular at 0; the base is clamped from below.
    double u_floor = 1e-6;

    double prefactor() const {
        return (1.0 - porosity) / porosity * bulk_density * freundlich_k * freundlich_n;
    }
};

namespace defaults {
inline constexpr double burgers_nu = 0.01;
inline constexpr double diff_react_nu = 0.5;
inline constexpr double diff_react_rho = 1.0;
inline constexpr double diff_sorb_D = 5e-4;
inline constexpr double diff_sorb_left_value = 1.0;
}  // namespace defaults

struct PdeProblem {
    ProblemKind kind = ProblemKind::burgers;
    double x_lo = 0.0;
    double x_hi = 1.0;
    double t_hi = 1.0;
    // Burgers: nu. Diffusion-reaction: nu, rho. Diffusion-sorption: D,
    // porosity, bulk_density, freundlich_k, freundlich_n.
    std::map<std::string, double> coefficients;
    BoundaryKind bc = BoundaryKind::periodic;
    std::function<double(double)> ic;
    // Adds |u_x(t, x_lo) - u_x(t, x_hi)|^2 to every periodic boundary term.
    bool periodic_derivative = false;

    double coefficient(const std::string& name) const;
    SorptionParams sorption() const;
};

// Throws std::invalid_argument on inconsistent domains or missing coefficients.
void validate(const PdeProblem& problem);

PdeProblem make_burgers(std::function<double(double)> ic, double nu = defaults::burgers_nu,
                        double t_hi = 2.0);
PdeProblem make_diff_react(std::function<double(double)> ic,
                           double nu = defaults::diff_react_nu,
                           double rho = defaults::diff_react_rho, double t_hi = 1.0);
PdeProblem make_diff_sorb(std::function<double(double)> ic, double D = defaults::diff_sorb_D,
                          double t_hi = 500.0);

namespace detail {

inline double clamp_below(double u, double floor) { return std::max(u, floor); }
inline Var clamp_below(Var u, double floor) {
    return u.value() < floor ? u.tape->constant(floor) : u;
}

}  // namespace detail

// R(u) = 1 + (1 - phi)/phi * rho_s * k * n_f * max(u, floor)^(n_f - 1)
template <class S>
S retardation(const S& u, const SorptionParams& p = {}) {
    using std::pow;
    return 1.0 + p.prefactor() * pow(detail::clamp_below(u, p.u_floor), p.freundlich_n - 1.0);
}

// u_t + u u_x - (nu / pi) u_xx
template <class S>
S burgers_residual(const JetOf<S>& u, double nu) {
    return u.grad[kT] + u.val * u.grad[kX] - (nu / std::numbers::pi) * u.h(kX, kX);
}

// u_t - nu u_xx - rho u (1 - u)
template <class S>
S diff_react_residual(const JetOf<S>& u, double nu, double rho) {
    return u.grad[kT] - nu * u.h(kX, kX) - rho * (u.val * (1.0 - u.val));
}

// u_t - D / R(u) u_xx
template <class S>
S diff_sorb_residual(const JetOf<S>& u, double D, const SorptionParams& p = {}) {
    return u.grad[kT] - (D / retardation(u.val, p)) * u.h(kX, kX);
}

// Problem residual with coefficients resolved once.
class ResidualEvaluator {
public:
    explicit ResidualEvaluator(const PdeProblem& problem);

    template <class S>
    S operator()(const JetOf<S>& u) const {
        switch (kind_) {
            case ProblemKind::burgers: return burgers_residual(u, nu_);
            case ProblemKind::diff_react: return diff_react_residual(u, nu_, rho_);
            case ProblemKind::diff_sorb: return diff_sorb_residual(u, D_, sorption_);
        }
        return u.val;
    }

private:
    ProblemKind kind_;
    double nu_ = 0.0;
    double rho_ = 0.0;
    double D_ = 0.0;
    SorptionParams sorption_;
};

// u0(x) = sum_i A_i sin(2 pi n_i x / L_x + phi_i)
struct SinusoidIC {
    std::vector<double> amplitude;
    std::vector<int> mode;
    std::vector<double> phase;
    double length = 1.0;

    double operator()(double x) const;
};

inline constexpr int kSinusoidTerms = 2;
inline constexpr int kMaxSinusoidMode = 8;

// A_i ~ U[0, 1], n_i ~ U{1..8}, phi_i ~ U(0, 2 pi). Deterministic in seed.
SinusoidIC sample_sinusoid_ic(std::uint64_t seed, double length);

// Piecewise-constant field of i.i.d. U(0, 1) values, one per node of an
// nx-node grid over [x_lo, x_hi]; evaluates to the nearest node value.
struct NodeNoiseIC {
    double x_lo = 0.0;
    double x_hi = 1.0;
    std::vector<double> values;

    double operator()(double x) const;
};

NodeNoiseIC sample_noise_ic(std::uint64_t seed, int nx, double x_lo, double x_hi);

enum class BoundaryTermKind { periodic_pair, dirichlet, robin };

struct BoundaryPoint {
    BoundaryTermKind kind = BoundaryTermKind::dirichlet;
    double t = 0.0;
    double x = 0.0;
    double x_pair = 0.0;  // periodic partner location
    double label = 0.0;   // dirichlet value
};

// Boundary sample generator and the residuals each sample contributes.
class BoundarySpec {
public:
    explicit BoundarySpec(const PdeProblem& problem);

    // Periodic problems yield n/2 endpoint pairs; Dirichlet/Robin problems
    // yield n/2 Dirichlet samples at x_lo and n/2 Robin samples at x_hi.
    std::vector<BoundaryPoint> sample(std::size_t n_points, std::mt19937_64& rng) const;

    // Squared residual of one sample. `pair` is used by periodic terms only.
    template <class S>
    S loss(const BoundaryPoint& bp, const JetOf<S>& at, const JetOf<S>& pair) const {
        switch (bp.kind) {
            case BoundaryTermKind::periodic_pair: {
                const S diff = at.val - pair.val;
                S sum = diff * diff;
                if (periodic_derivative_) {
                    const S dd = at.grad[kX] - pair.grad[kX];
                    sum = sum + dd * dd;
                }
                return sum;
            }
            case BoundaryTermKind::dirichlet: {
                const S diff = at.val - bp.label;
                return diff * diff;
            }
            case BoundaryTermKind::robin: {
                const S diff = at.val - D_ * at.grad[kX];
                return diff * diff;
            }
        }
        return at.val;
    }

    BoundaryKind kind() const { return kind_; }
    bool periodic_derivative() const { return periodic_derivative_; }

private:
    BoundaryKind kind_;
    double x_lo_;
    double x_hi_;
    double t_hi_;
    double D_ = 0.0;
    double left_value_ = defaults::diff_sorb_left_value;
    bool periodic_derivative_ = false;
};

BoundarySpec boundary_spec(const PdeProblem& problem);

}  // namespace stpinn
