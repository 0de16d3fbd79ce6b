#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "stpinn/refsolve.hpp"

using namespace stpinn;

namespace {

constexpr double kPi = std::numbers::pi;

double max_abs_diff(const GridSolution& a, const GridSolution& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

double row_mass(const GridSolution& g, int k) {
    // Periodic node grid: the last node duplicates the first.
    double s = 0.0;
    for (int j = 0; j + 1 < g.nx; ++j) s += g.at(k, j);
    return s;
}

}  // namespace

TEST_CASE("initial row reproduces the initial condition") {
    auto ic = [](double x) { return std::sin(2 * kPi * x); };
    const GridSolution g = solve_diff_react(ic, 0.5, 1.0, GridDims{64, 5, 0.0, 1.0, 0.1});
    for (int j = 0; j < g.nx; ++j) CHECK(std::abs(g.at(0, j) - ic(g.x(j))) < 1e-12);
    CHECK(g.at(4, 0) == g.at(4, g.nx - 1));
}

TEST_CASE("pure diffusion follows the analytic decay of one mode") {
    const double nu = 0.5;
    const GridDims dims{128, 11, 0.0, 1.0, 0.05};
    const GridSolution g = solve_diff_react([](double x) { return std::sin(2 * kPi * x); }, nu, 0.0, dims);
    double err = 0.0;
    for (int k = 0; k < dims.nt; ++k) {
        for (int j = 0; j < dims.nx; ++j) {
            const double exact = std::exp(-nu * 4 * kPi * kPi * g.t(k)) * std::sin(2 * kPi * g.x(j));
            err = std::max(err, std::abs(g.at(k, j) - exact));
        }
    }
    // Second-order central differences: about (2 pi dx)^2 / 12 relative to the amplitude decay.
    CHECK(err < 5e-4);
}

TEST_CASE("constant state follows the logistic curve") {
    const double u0 = 0.1;
    const GridSolution g = solve_diff_react([=](double) { return u0; }, 0.5, 1.0, GridDims{32, 6, 0.0, 1.0, 1.0});
    for (int k = 0; k < g.nt; ++k) {
        const double exact = 1.0 / (1.0 + (1.0 / u0 - 1.0) * std::exp(-g.t(k)));
        CHECK(g.at(k, 7) == doctest::Approx(exact).epsilon(1e-5));
    }
}

TEST_CASE("Burgers conserves mass and stays bounded") {
    auto ic = [](double x) { return 0.5 + 0.4 * std::sin(2 * kPi * x) + 0.2 * std::cos(6 * kPi * x); };
    const GridSolution g = solve_burgers(ic, 0.01, GridDims{129, 9, 0.0, 1.0, 1.0});
    const double m0 = row_mass(g, 0);
    double lo = 1e9;
    double hi = -1e9;
    for (double v : g.row(0)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    for (int k = 1; k < g.nt; ++k) {
        CHECK(std::abs(row_mass(g, k) - m0) < 1e-12 * std::abs(m0));
        for (double v : g.row(k)) {
            CHECK(v >= lo - 1e-12);
            CHECK(v <= hi + 1e-12);
        }
    }
}

TEST_CASE("Burgers refinement converges") {
    auto ic = [](double x) { return std::sin(2 * kPi * x); };
    const GridDims dims{65, 5, 0.0, 1.0, 0.3};
    const GridSolution fine = solve_burgers(ic, 0.01, dims, {.refine = 8});
    const double e1 = max_abs_diff(solve_burgers(ic, 0.01, dims, {.refine = 1}), fine);
    const double e2 = max_abs_diff(solve_burgers(ic, 0.01, dims, {.refine = 2}), fine);
    CHECK(e2 < e1);
}

TEST_CASE("diffusion-sorption respects its boundary conditions") {
    const double D = 5e-4;
    const GridDims dims{65, 11, 0.0, 1.0, 100.0};
    const GridSolution g = solve_diff_sorb([](double x) { return 0.25 + 0.5 * x; }, D, dims);
    const double dx = 1.0 / 64;
    for (int k = 1; k < g.nt; ++k) {
        CHECK(g.at(k, 0) == 1.0);
        const double un = g.at(k, g.nx - 1);
        const double um = g.at(k, g.nx - 2);
        CHECK(un == doctest::Approx(D * (un - um) / dx).epsilon(1e-12).scale(1e-15));
        for (int j = 0; j + 1 < g.nx; ++j) {
            CHECK(g.at(k, j) >= 0.0);
            CHECK(g.at(k, j) <= 1.0);
        }
    }
}

TEST_CASE("diffusion-sorption rejects a spacing below D") {
    CHECK_THROWS_AS(solve_diff_sorb([](double) { return 0.5; }, 0.1, GridDims{64, 3, 0.0, 1.0, 1.0}),
                    std::invalid_argument);
}

TEST_CASE("solver options and grids are validated") {
    auto ic = [](double x) { return x; };
    CHECK_THROWS_AS(solve_burgers(ic, 0.01, GridDims{8, 3, 0.0, 1.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(solve_burgers(ic, 0.01, GridDims{32, 3, 0.0, 1.0, 1.0}, {.refine = 0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(solve_burgers(ic, 0.01, GridDims{32, 3, 0.0, 1.0, 1.0}, {.cfl = 1.5}),
                    std::invalid_argument);
    CHECK_THROWS_AS(solve_burgers(ic, 0.0, GridDims{32, 3, 0.0, 1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("dispatch uses the problem's coefficients") {
    auto ic = [](double x) { return std::cos(2 * kPi * x); };
    const GridDims dims{32, 4, 0.0, 1.0, 0.2};
    const PdeProblem p = make_diff_react(ic, 0.3, 2.0, 0.2);
    CHECK(solve_reference(p, dims) == solve_diff_react(ic, 0.3, 2.0, dims));
}
