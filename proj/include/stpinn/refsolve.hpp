#pragma once

// Finite-difference / finite-volume reference solvers. Each solver runs on
// an internal grid `refine` times finer than the requested output grid and
// injects its values onto the output nodes.

#include <cstdint>
#include <functional>

#include "stpinn/grid.hpp"
#include "stpinn/pde.hpp"

namespace stpinn {

struct SolverOptions {
    int refine = 1;
    // Fraction of the explicit stability limit used for the time step.
    double cfl = 0.8;
    // Total internal time steps allowed before the run is declared unstable.
    std::uint64_t max_substeps = 200'000'000;
};

using InitialCondition = std::function<double(double)>;

// u_t + (u^2/2)_x = (nu/pi) u_xx, periodic. Conservative finite volumes with
// minmod-limited reconstruction, local Lax-Friedrichs flux, Heun (RK2) time
// stepping.
GridSolution solve_burgers(const InitialCondition& ic, double nu, const GridDims& grid,
                           const SolverOptions& options = {});

// u_t = nu u_xx + rho u (1 - u), periodic. Central differences, Heun.
GridSolution solve_diff_react(const InitialCondition& ic, double nu, double rho,
                              const GridDims& grid, const SolverOptions& options = {});

// u_t = D / R(u) u_xx with u(t, x_lo) = 1 and u(t, x_hi) = D u_x(t, x_hi).
// The right node is eliminated through the one-sided relation
// u_N = D (u_N - u_{N-1}) / dx, which requires dx > D.
GridSolution solve_diff_sorb(const InitialCondition& ic, double D, const GridDims& grid,
                             const SolverOptions& options = {},
                             const SorptionParams& sorption = {});

// Dispatches on problem.kind using the problem's coefficients and IC.
GridSolution solve_reference(const PdeProblem& problem, const GridDims& grid,
                             const SolverOptions& options = {});

}  // namespace stpinn
