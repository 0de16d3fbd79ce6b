#include "stpinn/refsolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace stpinn {

namespace {

void check_request(const GridDims& grid, const SolverOptions& options) {
    if (grid.nx < 16 || grid.nt < 2) {
        throw std::invalid_argument("reference grid needs nx >= 16 and nt >= 2, got nx=" +
                                    std::to_string(grid.nx) + " nt=" + std::to_string(grid.nt));
    }
    if (options.refine < 1) throw std::invalid_argument("solver refine must be >= 1");
    if (!(options.cfl > 0.0 && options.cfl <= 1.0)) {
        throw std::invalid_argument("solver cfl must be in (0, 1]");
    }
}

double minmod(double a, double b) {
    if (a * b <= 0.0) return 0.0;
    return std::abs(a) < std::abs(b) ? a : b;
}

// Heun (explicit trapezoidal / SSP-RK2) integration from one output time
// level to the next, with the step count chosen from the current state.
template <class Rhs, class MaxDt, class Constrain, class Sample>
GridSolution integrate(std::vector<double> u, const GridDims& grid, const SolverOptions& options,
                       Rhs&& rhs, MaxDt&& max_dt, Constrain&& constrain, Sample&& sample) {
    GridSolution out(grid);
    constrain(u);
    sample(u, out, 0);
    const double interval = grid.t_hi / (grid.nt - 1);
    std::vector<double> k1(u.size());
    std::vector<double> stage(u.size());
    std::uint64_t total_steps = 0;
    for (int level = 1; level < grid.nt; ++level) {
        const double dt_max = max_dt(u);
        if (!(dt_max > 0.0)) throw std::runtime_error("reference solver: non-positive time step");
        const double ratio = interval / dt_max;
        if (!(ratio < static_cast<double>(options.max_substeps))) {
            throw std::runtime_error("reference solver: CFL substep count exceeds safety cap (" +
                                     std::to_string(options.max_substeps) +
                                     "); configuration is unstable or too stiff");
        }
        const auto steps = static_cast<std::uint64_t>(std::max(1.0, std::ceil(ratio)));
        total_steps += steps;
        if (total_steps > options.max_substeps) {
            throw std::runtime_error("reference solver: CFL substep count exceeds safety cap (" +
                                     std::to_string(options.max_substeps) +
                                     "); configuration is unstable or too stiff");
        }
        const double dt = interval / static_cast<double>(steps);
        for (std::uint64_t s = 0; s < steps; ++s) {
            rhs(u, k1);
            for (std::size_t i = 0; i < u.size(); ++i) stage[i] = u[i] + dt * k1[i];
            constrain(stage);
            rhs(stage, k1);
            for (std::size_t i = 0; i < u.size(); ++i) {
                u[i] = 0.5 * (u[i] + (stage[i] + dt * k1[i]));
            }
            constrain(u);
        }
        for (double v : u) {
            if (!std::isfinite(v)) {
                throw std::runtime_error("reference solver diverged before t=" +
                                         std::to_string(out.t(level)));
            }
        }
        sample(u, out, level);
    }
    return out;
}

// Periodic cell-centred grid whose cell centres include every output node.
struct PeriodicMesh {
    std::size_t cells;
    double h;
    std::vector<double> centers;
};

PeriodicMesh periodic_mesh(const GridDims& grid, int refine) {
    PeriodicMesh m;
    m.cells = static_cast<std::size_t>(refine) * static_cast<std::size_t>(grid.nx - 1);
    m.h = (grid.x_hi - grid.x_lo) / static_cast<double>(m.cells);
    m.centers.resize(m.cells);
    for (std::size_t i = 0; i < m.cells; ++i) m.centers[i] = grid.x_lo + static_cast<double>(i) * m.h;
    return m;
}

auto periodic_sampler(int refine) {
    return [refine](const std::vector<double>& u, GridSolution& out, int level) {
        const std::size_t cells = u.size();
        for (int j = 0; j < out.nx; ++j) {
            out.at(level, j) = u[(static_cast<std::size_t>(j) * refine) % cells];
        }
    };
}

}  // namespace

GridSolution solve_burgers(const InitialCondition& ic, double nu, const GridDims& grid,
                           const SolverOptions& options) {
    check_request(grid, options);
    if (!(nu > 0.0)) throw std::invalid_argument("solve_burgers requires nu > 0");
    const PeriodicMesh mesh = periodic_mesh(grid, options.refine);
    const std::size_t n = mesh.cells;
    const double h = mesh.h;
    const double kappa = nu / std::numbers::pi;

    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = ic(mesh.centers[i]);

    std::vector<double> slope(n);
    std::vector<double> flux(n);  // flux[i] at face i + 1/2
    auto rhs = [&](const std::vector<double>& v, std::vector<double>& dv) {
        slope[0] = minmod(v[0] - v[n - 1], v[1] - v[0]);
        for (std::size_t i = 1; i + 1 < n; ++i) slope[i] = minmod(v[i] - v[i - 1], v[i + 1] - v[i]);
        slope[n - 1] = minmod(v[n - 1] - v[n - 2], v[0] - v[n - 1]);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t ip = i + 1 < n ? i + 1 : 0;
            const double ul = v[i] + 0.5 * slope[i];
            const double ur = v[ip] - 0.5 * slope[ip];
            const double alpha = std::max(std::abs(ul), std::abs(ur));
            const double convective = 0.25 * (ul * ul + ur * ur) - 0.5 * alpha * (ur - ul);
            const double diffusive = -kappa * (v[ip] - v[i]) / h;
            flux[i] = convective + diffusive;
        }
        dv[0] = -(flux[0] - flux[n - 1]) / h;
        for (std::size_t i = 1; i < n; ++i) dv[i] = -(flux[i] - flux[i - 1]) / h;
    };
    auto max_dt = [&](const std::vector<double>& v) {
        double a = 0.0;
        for (double x : v) a = std::max(a, std::abs(x));
        return options.cfl / (a / h + 2.0 * kappa / (h * h));
    };
    auto constrain = [](std::vector<double>&) {};
    return integrate(std::move(u), grid, options, rhs, max_dt, constrain,
                     periodic_sampler(options.refine));
}

GridSolution solve_diff_react(const InitialCondition& ic, double nu, double rho,
                              const GridDims& grid, const SolverOptions& options) {
    check_request(grid, options);
    if (!(nu > 0.0)) throw std::invalid_argument("solve_diff_react requires nu > 0");
    const PeriodicMesh mesh = periodic_mesh(grid, options.refine);
    const std::size_t n = mesh.cells;
    const double inv_h2 = 1.0 / (mesh.h * mesh.h);

    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = ic(mesh.centers[i]);

    auto rhs = [&](const std::vector<double>& v, std::vector<double>& dv) {
        auto update = [&](std::size_t i, double left, double right) {
            const double lap = (left - 2.0 * v[i] + right) * inv_h2;
            dv[i] = nu * lap + rho * v[i] * (1.0 - v[i]);
        };
        update(0, v[n - 1], v[1]);
        for (std::size_t i = 1; i + 1 < n; ++i) update(i, v[i - 1], v[i + 1]);
        update(n - 1, v[n - 2], v[0]);
    };
    auto max_dt = [&](const std::vector<double>&) {
        return options.cfl / (2.0 * nu * inv_h2 + std::abs(rho));
    };
    auto constrain = [](std::vector<double>&) {};
    return integrate(std::move(u), grid, options, rhs, max_dt, constrain,
                     periodic_sampler(options.refine));
}

GridSolution solve_diff_sorb(const InitialCondition& ic, double D, const GridDims& grid,
                             const SolverOptions& options, const SorptionParams& sorption) {
    check_request(grid, options);
    if (!(D > 0.0)) throw std::invalid_argument("solve_diff_sorb requires D > 0");
    const std::size_t intervals =
        static_cast<std::size_t>(options.refine) * static_cast<std::size_t>(grid.nx - 1);
    const double h = (grid.x_hi - grid.x_lo) / static_cast<double>(intervals);
    if (!(h > D)) {
        throw std::invalid_argument(
            "solve_diff_sorb: internal spacing dx=" + std::to_string(h) +
            " must exceed D=" + std::to_string(D) +
            " for the eliminated Cauchy boundary node to be stable; lower nx or refine");
    }
    const double inv_h2 = 1.0 / (h * h);
    // u_N = D (u_N - u_{N-1}) / h  =>  u_N = robin * u_{N-1}
    const double robin = D / (D - h);
    const std::size_t last = intervals;

    std::vector<double> u(intervals + 1);
    for (std::size_t i = 0; i <= last; ++i) u[i] = ic(grid.x_lo + static_cast<double>(i) * h);

    auto constrain = [&](std::vector<double>& v) {
        v[0] = defaults::diff_sorb_left_value;
        v[last] = robin * v[last - 1];
    };
    auto rhs = [&](const std::vector<double>& v, std::vector<double>& dv) {
        dv[0] = 0.0;
        dv[last] = 0.0;
        for (std::size_t i = 1; i < last; ++i) {
            const double lap = (v[i - 1] - 2.0 * v[i] + v[i + 1]) * inv_h2;
            dv[i] = D / retardation(v[i], sorption) * lap;
        }
    };
    auto max_dt = [&](const std::vector<double>& v) {
        double kmax = 0.0;
        for (std::size_t i = 1; i < last; ++i) kmax = std::max(kmax, D / retardation(v[i], sorption));
        // The node next to the Robin boundary sees a stencil weight of 2 + |robin|.
        return options.cfl / (kmax * (2.0 + std::abs(robin)) * inv_h2);
    };
    auto sample = [&](const std::vector<double>& v, GridSolution& out, int level) {
        for (int j = 0; j < out.nx; ++j) {
            out.at(level, j) = v[static_cast<std::size_t>(j) * options.refine];
        }
    };
    return integrate(std::move(u), grid, options, rhs, max_dt, constrain, sample);
}

GridSolution solve_reference(const PdeProblem& problem, const GridDims& grid,
                             const SolverOptions& options) {
    validate(problem);
    GridDims g = grid;
    g.x_lo = problem.x_lo;
    g.x_hi = problem.x_hi;
    g.t_hi = problem.t_hi;
    switch (problem.kind) {
        case ProblemKind::burgers:
            return solve_burgers(problem.ic, problem.coefficient("nu"), g, options);
        case ProblemKind::diff_react:
            return solve_diff_react(problem.ic, problem.coefficient("nu"),
                                    problem.coefficient("rho"), g, options);
        case ProblemKind::diff_sorb:
            return solve_diff_sorb(problem.ic, problem.coefficient("D"), g, options,
                                   problem.sorption());
    }
    throw std::invalid_argument("unknown problem kind");
}

}  // namespace stpinn
