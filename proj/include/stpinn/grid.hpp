#pragma once

// Discretized space-time fields on a uniform node grid.
//
// Node j sits at x_lo + j (x_hi - x_lo) / (nx - 1) and time level k at
// k t_hi / (nt - 1), so both domain ends are grid nodes. Values are stored
// row-major with time as the slow index.

#include <filesystem>
#include <span>
#include <vector>

namespace stpinn {

struct GridDims {
    int nx = 0;
    int nt = 0;
    double x_lo = 0.0;
    double x_hi = 1.0;
    double t_hi = 1.0;

    bool operator==(const GridDims&) const = default;
};

struct GridSolution {
    int nx = 0;
    int nt = 0;
    double x_lo = 0.0;
    double x_hi = 1.0;
    double t_hi = 1.0;
    std::vector<double> values;

    GridSolution() = default;
    explicit GridSolution(const GridDims& dims, double fill = 0.0);

    GridDims dims() const { return {nx, nt, x_lo, x_hi, t_hi}; }
    double x(int j) const { return x_lo + j * (x_hi - x_lo) / (nx - 1); }
    double t(int k) const { return k * t_hi / (nt - 1); }
    double& at(int k, int j) { return values[static_cast<std::size_t>(k) * nx + j]; }
    double at(int k, int j) const { return values[static_cast<std::size_t>(k) * nx + j]; }
    std::span<const double> row(int k) const {
        return std::span<const double>(values).subspan(static_cast<std::size_t>(k) * nx,
                                                       static_cast<std::size_t>(nx));
    }

    bool operator==(const GridSolution&) const = default;
};

// Throws if dimensions are inconsistent or any value is not finite.
void validate(const GridSolution& grid);

// Grid file: "stpinn-grid v1", "nx=.. nt=.. x_lo=.. x_hi=.. t_hi=..", "---",
// then nt*nx little-endian float64 values, t-major.
void write_grid(const std::filesystem::path& path, const GridSolution& grid);
GridSolution read_grid(const std::filesystem::path& path);

// ||pred - ref||_2 / ||ref||_2 over all grid values.
double relative_l2(const GridSolution& pred, const GridSolution& ref);
double mean_squared_error(const GridSolution& pred, const GridSolution& ref);

// All (t, x) node coordinates, point-major, t first.
std::vector<double> grid_points(const GridDims& dims);

}  // namespace stpinn
