#include "stpinn/grid.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "io_util.hpp"

namespace stpinn {

namespace {

constexpr const char* kGridMagic = "stpinn-grid v1";

void check_dims(const GridDims& d) {
    if (d.nx < 2 || d.nt < 2) {
        throw std::invalid_argument("grid needs nx >= 2 and nt >= 2, got nx=" +
                                    std::to_string(d.nx) + " nt=" + std::to_string(d.nt));
    }
    if (!(d.x_lo < d.x_hi)) throw std::invalid_argument("grid requires x_lo < x_hi");
    if (!(d.t_hi > 0.0)) throw std::invalid_argument("grid requires t_hi > 0");
}

void check_same_dims(const GridSolution& a, const GridSolution& b) {
    if (a.nx != b.nx || a.nt != b.nt || a.values.size() != b.values.size()) {
        throw std::invalid_argument("grid dimension mismatch: " + std::to_string(a.nx) + "x" +
                                    std::to_string(a.nt) + " vs " + std::to_string(b.nx) + "x" +
                                    std::to_string(b.nt));
    }
}

}  // namespace

GridSolution::GridSolution(const GridDims& dims, double fill)
    : nx(dims.nx), nt(dims.nt), x_lo(dims.x_lo), x_hi(dims.x_hi), t_hi(dims.t_hi) {
    check_dims(dims);
    values.assign(static_cast<std::size_t>(nx) * nt, fill);
}

void validate(const GridSolution& grid) {
    check_dims(grid.dims());
    if (grid.values.size() != static_cast<std::size_t>(grid.nx) * grid.nt) {
        throw std::invalid_argument("grid holds " + std::to_string(grid.values.size()) +
                                    " values, expected nx*nt");
    }
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        if (!std::isfinite(grid.values[i])) {
            throw std::invalid_argument("grid value " + std::to_string(i) + " is not finite");
        }
    }
}

void write_grid(const std::filesystem::path& path, const GridSolution& grid) {
    validate(grid);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open grid file for writing: " + path.string());
    out << kGridMagic << '\n';
    out << "nx=" << grid.nx << " nt=" << grid.nt << " x_lo=" << io::format_double(grid.x_lo)
        << " x_hi=" << io::format_double(grid.x_hi) << " t_hi=" << io::format_double(grid.t_hi)
        << '\n';
    out << "---\n";
    io::write_f64_le(out, grid.values);
    if (!out) throw std::runtime_error("failed writing grid file: " + path.string());
}

GridSolution read_grid(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open grid file: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kGridMagic) {
        throw std::runtime_error("not a '" + std::string(kGridMagic) +
                                 "' file (bad header): " + path.string());
    }
    if (!std::getline(in, line)) throw std::runtime_error("grid file truncated: " + path.string());
    std::map<std::string, std::string> kv;
    std::istringstream fields(line);
    std::string field;
    while (fields >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("malformed grid header field '" + field + "'");
        }
        kv[field.substr(0, eq)] = field.substr(eq + 1);
    }
    auto need = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw std::runtime_error("grid header missing '" + key + "'");
        return it->second;
    };
    GridDims dims;
    dims.nx = static_cast<int>(io::parse_int(need("nx"), "nx"));
    dims.nt = static_cast<int>(io::parse_int(need("nt"), "nt"));
    dims.x_lo = io::parse_double(need("x_lo"), "x_lo");
    dims.x_hi = io::parse_double(need("x_hi"), "x_hi");
    dims.t_hi = io::parse_double(need("t_hi"), "t_hi");
    check_dims(dims);
    if (!std::getline(in, line) || line != "---") {
        throw std::runtime_error("grid header missing '---': " + path.string());
    }
    GridSolution grid(dims);
    grid.values = io::read_f64_le(in, grid.values.size());
    if (in.peek() != std::char_traits<char>::eof()) {
        throw std::runtime_error("trailing bytes after grid payload: " + path.string());
    }
    return grid;
}

double relative_l2(const GridSolution& pred, const GridSolution& ref) {
    check_same_dims(pred, ref);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < ref.values.size(); ++i) {
        const double e = pred.values[i] - ref.values[i];
        num += e * e;
        den += ref.values[i] * ref.values[i];
    }
    if (den == 0.0) throw std::invalid_argument("relative_l2: reference has zero norm");
    return std::sqrt(num) / std::sqrt(den);
}

double mean_squared_error(const GridSolution& pred, const GridSolution& ref) {
    check_same_dims(pred, ref);
    double sum = 0.0;
    for (std::size_t i = 0; i < ref.values.size(); ++i) {
        const double e = pred.values[i] - ref.values[i];
        sum += e * e;
    }
    return sum / static_cast<double>(ref.values.size());
}

std::vector<double> grid_points(const GridDims& dims) {
    check_dims(dims);
    std::vector<double> pts;
    pts.reserve(static_cast<std::size_t>(dims.nx) * dims.nt * 2);
    for (int k = 0; k < dims.nt; ++k) {
        for (int j = 0; j < dims.nx; ++j) {
            pts.push_back(k * dims.t_hi / (dims.nt - 1));
            pts.push_back(dims.x_lo + j * (dims.x_hi - dims.x_lo) / (dims.nx - 1));
        }
    }
    return pts;
}

}  // namespace stpinn
