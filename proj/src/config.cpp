#include "stpinn/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "io_util.hpp"

namespace stpinn {

namespace {

std::set<std::string> coefficient_keys(ProblemKind kind) {
    switch (kind) {
        case ProblemKind::burgers: return {"nu"};
        case ProblemKind::diff_react: return {"nu", "rho"};
        case ProblemKind::diff_sorb:
            return {"D", "porosity", "bulk_density", "freundlich_k", "freundlich_n"};
    }
    return {};
}

std::map<std::string, double> default_coefficients(ProblemKind kind) {
    switch (kind) {
        case ProblemKind::burgers: return {{"nu", defaults::burgers_nu}};
        case ProblemKind::diff_react:
            return {{"nu", defaults::diff_react_nu}, {"rho", defaults::diff_react_rho}};
        case ProblemKind::diff_sorb: {
            const SorptionParams s;
            return {{"D", defaults::diff_sorb_D},
                    {"porosity", s.porosity},
                    {"bulk_density", s.bulk_density},
                    {"freundlich_k", s.freundlich_k},
                    {"freundlich_n", s.freundlich_n}};
        }
    }
    return {};
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("invalid boolean for " + key + ": '" + v + "'");
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    if (v.empty() || v[0] == '-') throw std::invalid_argument("invalid unsigned integer for " + key + ": '" + v + "'");
    std::size_t used = 0;
    std::uint64_t out = 0;
    try {
        out = std::stoull(v, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("invalid unsigned integer for " + key + ": '" + v + "'");
    }
    if (used != v.size()) throw std::invalid_argument("invalid unsigned integer for " + key + ": '" + v + "'");
    return out;
}

std::vector<LrStage> parse_stages(const std::string& v) {
    std::vector<LrStage> stages;
    std::stringstream ss(v);
    for (std::string item; std::getline(ss, item, ',');) {
        item = io::trim(item);
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            throw std::invalid_argument("lr_stages entries must be iterations:lr, got '" + item + "'");
        }
        LrStage s;
        s.iterations = parse_u64(io::trim(item.substr(0, colon)), "optim.lr_stages");
        s.lr = io::parse_double(io::trim(item.substr(colon + 1)), "optim.lr_stages");
        stages.push_back(s);
    }
    if (stages.empty()) throw std::invalid_argument("optim.lr_stages is empty");
    return stages;
}

}  // namespace

RunConfig default_config(ProblemKind problem) {
    RunConfig c;
    c.problem = problem;
    c.coefficients = default_coefficients(problem);
    switch (problem) {
        case ProblemKind::burgers:
            c.t_hi = 2.0;
            c.nt = 256;
            c.refine = 2;
            break;
        case ProblemKind::diff_react:
            c.t_hi = 1.0;
            c.nt = 256;
            c.refine = 1;
            c.lbfgs_iters = 5000;
            break;
        case ProblemKind::diff_sorb:
            c.t_hi = 500.0;
            c.nt = 101;
            c.refine = 1;
            break;
    }
    return c;
}

void validate(const RunConfig& c) {
    const auto allowed = coefficient_keys(c.problem);
    for (const auto& key : allowed) {
        if (!c.coefficients.contains(key)) {
            throw std::invalid_argument("problem." + key + " is required for " + to_string(c.problem));
        }
    }
    for (const auto& [key, value] : c.coefficients) {
        if (!allowed.contains(key)) {
            throw std::invalid_argument("problem." + key + " is not a coefficient of " + to_string(c.problem));
        }
        if (!std::isfinite(value)) throw std::invalid_argument("problem." + key + " must be finite");
    }
    if (!(c.t_hi > 0.0) || !std::isfinite(c.t_hi)) throw std::invalid_argument("problem.t_hi must be > 0");
    if (c.nx < 16) throw std::invalid_argument("grid.nx must be >= 16");
    if (c.nt < 2) throw std::invalid_argument("grid.nt must be >= 2");
    if (c.refine < 1) throw std::invalid_argument("grid.refine must be >= 1");
    if (!(c.cfl > 0.0 && c.cfl <= 1.0)) throw std::invalid_argument("grid.cfl must be in (0, 1]");
    if (c.hidden_layers < 1) throw std::invalid_argument("network.hidden_layers must be >= 1");
    if (c.hidden_width < 1) throw std::invalid_argument("network.hidden_width must be >= 1");
    if (c.batch_size < 1) throw std::invalid_argument("points.batch_size must be >= 1");
    const std::size_t interior = static_cast<std::size_t>(c.nx - 2) * static_cast<std::size_t>(c.nt - 1);
    const std::size_t pool = c.pool_size == 0 ? interior : c.pool_size;
    if (c.batch_size > pool) {
        throw std::invalid_argument("points.batch_size (" + std::to_string(c.batch_size) +
                                    ") exceeds the candidate pool size (" + std::to_string(pool) + ")");
    }
    if (c.n_data > interior) {
        throw std::invalid_argument("points.n_data exceeds the number of interior grid nodes");
    }
    if (c.adam_iters < 0) throw std::invalid_argument("optim.adam_iters must be >= 0");
    if (c.lbfgs_iters < 0) throw std::invalid_argument("optim.lbfgs_iters must be >= 0");
    if (c.lbfgs_memory < 1) throw std::invalid_argument("optim.lbfgs_memory must be >= 1");
    (void)LrSchedule(c.lr_stages);
    validate(c.weights);
    validate(c.self_train);
    if (c.out_dir.empty()) throw std::invalid_argument("run.out_dir must not be empty");
    if (c.reference.empty()) throw std::invalid_argument("run.reference must not be empty");
}

RunConfig parse_config(const std::string& text) {
    // The problem name decides the coefficient defaults, so it is read first.
    ProblemKind kind = ProblemKind::burgers;
    {
        std::stringstream scan(text);
        std::string section;
        for (std::string line; std::getline(scan, line);) {
            line = io::trim(line.substr(0, line.find('#')));
            if (line.starts_with('[')) section = line;
            const auto eq = line.find('=');
            if (section == "[problem]" && eq != std::string::npos &&
                io::trim(line.substr(0, eq)) == "name") {
                kind = parse_problem_kind(io::trim(line.substr(eq + 1)));
            }
        }
    }
    RunConfig c = default_config(kind);
    const auto coef_keys = coefficient_keys(kind);

    std::stringstream in(text);
    std::string section;
    int line_no = 0;
    std::set<std::string> seen;
    for (std::string raw; std::getline(in, raw);) {
        ++line_no;
        const std::string line = io::trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw std::invalid_argument("line " + std::to_string(line_no) + ": bad section header");
            }
            section = line.substr(1, line.size() - 2);
            static const std::set<std::string> sections{"problem", "grid",  "network",   "points",
                                                        "optim",   "loss",  "selftrain", "run"};
            if (!sections.contains(section)) {
                throw std::invalid_argument("line " + std::to_string(line_no) + ": unknown section [" +
                                            section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": expected key = value");
        }
        if (section.empty()) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": key outside any section");
        }
        const std::string key = io::trim(line.substr(0, eq));
        const std::string v = io::trim(line.substr(eq + 1));
        const std::string full = section + "." + key;
        if (!seen.insert(full).second) throw std::invalid_argument(full + " is set twice");

        auto num = [&] { return io::parse_double(v, full); };
        auto integer = [&] { return io::parse_int(v, full); };
        auto count = [&] { return static_cast<std::size_t>(parse_u64(v, full)); };

        if (section == "problem") {
            if (key == "name") continue;
            if (key == "t_hi") c.t_hi = num();
            else if (key == "ic_seed") c.ic_seed = parse_u64(v, full);
            else if (key == "periodic_derivative") c.periodic_derivative = parse_bool(v, full);
            else if (coef_keys.contains(key)) c.coefficients[key] = num();
            else throw std::invalid_argument("unknown key " + full + " for problem " + to_string(kind));
        } else if (section == "grid") {
            if (key == "nx") c.nx = static_cast<int>(integer());
            else if (key == "nt") c.nt = static_cast<int>(integer());
            else if (key == "refine") c.refine = static_cast<int>(integer());
            else if (key == "cfl") c.cfl = num();
            else throw std::invalid_argument("unknown key " + full);
        } else if (section == "network") {
            if (key == "hidden_layers") c.hidden_layers = static_cast<int>(integer());
            else if (key == "hidden_width") c.hidden_width = static_cast<int>(integer());
            else throw std::invalid_argument("unknown key " + full);
        } else if (section == "points") {
            if (key == "n_boundary") c.n_boundary = count();
            else if (key == "n_initial") c.n_initial = count();
            else if (key == "n_data") c.n_data = count();
            else if (key == "batch_size") c.batch_size = count();
            else if (key == "pool_size") c.pool_size = count();
            else throw std::invalid_argument("unknown key " + full);
        } else if (section == "optim") {
            if (key == "adam_iters") c.adam_iters = integer();
            else if (key == "lr") c.lr_stages = {{0, num()}};
            else if (key == "lr_stages") c.lr_stages = parse_stages(v);
            else if (key == "lbfgs_iters") c.lbfgs_iters = static_cast<int>(integer());
            else if (key == "lbfgs_memory") c.lbfgs_memory = static_cast<int>(integer());
            else throw std::invalid_argument("unknown key " + full);
            if ((key == "lr" && seen.contains("optim.lr_stages")) ||
                (key == "lr_stages" && seen.contains("optim.lr"))) {
                throw std::invalid_argument("set either optim.lr or optim.lr_stages, not both");
            }
        } else if (section == "loss") {
            if (key == "w_f") c.weights.residual = num();
            else if (key == "w_d") c.weights.data = num();
            else if (key == "w_p") c.weights.pseudo = num();
            else throw std::invalid_argument("unknown key " + full);
        } else if (section == "selftrain") {
            if (key == "enabled") c.self_train.enabled = parse_bool(v, full);
            else if (key == "p") c.self_train.period = static_cast<int>(integer());
            else if (key == "q") c.self_train.max_fraction = num();
            else if (key == "r") c.self_train.stable_events = static_cast<int>(integer());
            else if (key == "warmup") c.self_train.warmup = static_cast<int>(integer());
            else if (key == "exclude_pseudo_from_residual") c.exclude_pseudo_from_residual = parse_bool(v, full);
            else throw std::invalid_argument("unknown key " + full);
        } else if (section == "run") {
            if (key == "seed") c.seed = parse_u64(v, full);
            else if (key == "out_dir") c.out_dir = v;
            else if (key == "reference") c.reference = v;
            else if (key == "record_wall_time") c.record_wall_time = parse_bool(v, full);
            else if (key == "dump_events") c.dump_events = parse_bool(v, full);
            else throw std::invalid_argument("unknown key " + full);
        }
    }
    validate(c);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

std::string format_config(const RunConfig& c) {
    auto d = [](double v) { return io::format_double(v); };
    std::ostringstream out;
    out << "[problem]\n"
        << "name = " << to_string(c.problem) << '\n'
        << "t_hi = " << d(c.t_hi) << '\n'
        << "ic_seed = " << c.ic_seed << '\n'
        << "periodic_derivative = " << bool_text(c.periodic_derivative) << '\n';
    for (const auto& [key, value] : c.coefficients) out << key << " = " << d(value) << '\n';
    out << "\n[grid]\n"
        << "nx = " << c.nx << '\n'
        << "nt = " << c.nt << '\n'
        << "refine = " << c.refine << '\n'
        << "cfl = " << d(c.cfl) << '\n';
    out << "\n[network]\n"
        << "hidden_layers = " << c.hidden_layers << '\n'
        << "hidden_width = " << c.hidden_width << '\n';
    out << "\n[points]\n"
        << "n_boundary = " << c.n_boundary << '\n'
        << "n_initial = " << c.n_initial << '\n'
        << "n_data = " << c.n_data << '\n'
        << "batch_size = " << c.batch_size << '\n'
        << "pool_size = " << c.pool_size << '\n';
    out << "\n[optim]\n" << "adam_iters = " << c.adam_iters << '\n';
    if (c.lr_stages.size() == 1 && c.lr_stages[0].iterations == 0) {
        out << "lr = " << d(c.lr_stages[0].lr) << '\n';
    } else {
        out << "lr_stages = ";
        for (std::size_t i = 0; i < c.lr_stages.size(); ++i) {
            if (i) out << ", ";
            out << c.lr_stages[i].iterations << ':' << d(c.lr_stages[i].lr);
        }
        out << '\n';
    }
    out << "lbfgs_iters = " << c.lbfgs_iters << '\n'
        << "lbfgs_memory = " << c.lbfgs_memory << '\n';
    out << "\n[loss]\n"
        << "w_f = " << d(c.weights.residual) << '\n'
        << "w_d = " << d(c.weights.data) << '\n'
        << "w_p = " << d(c.weights.pseudo) << '\n';
    out << "\n[selftrain]\n"
        << "enabled = " << bool_text(c.self_train.enabled) << '\n'
        << "p = " << c.self_train.period << '\n'
        << "q = " << d(c.self_train.max_fraction) << '\n'
        << "r = " << c.self_train.stable_events << '\n'
        << "warmup = " << c.self_train.warmup << '\n'
        << "exclude_pseudo_from_residual = " << bool_text(c.exclude_pseudo_from_residual) << '\n';
    out << "\n[run]\n"
        << "seed = " << c.seed << '\n'
        << "out_dir = " << c.out_dir.string() << '\n'
        << "reference = " << c.reference.string() << '\n'
        << "record_wall_time = " << bool_text(c.record_wall_time) << '\n'
        << "dump_events = " << bool_text(c.dump_events) << '\n';
    return out.str();
}

void save_config(const std::filesystem::path& path, const RunConfig& config) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config " + path.string());
    out << format_config(config);
    if (!out) throw std::runtime_error("failed writing config " + path.string());
}

PdeProblem make_problem(const RunConfig& c) {
    validate(c);
    PdeProblem p;
    switch (c.problem) {
        case ProblemKind::burgers:
            p = make_burgers(sample_sinusoid_ic(c.ic_seed, 1.0), c.coefficients.at("nu"), c.t_hi);
            break;
        case ProblemKind::diff_react:
            p = make_diff_react(sample_sinusoid_ic(c.ic_seed, 1.0), c.coefficients.at("nu"),
                                c.coefficients.at("rho"), c.t_hi);
            break;
        case ProblemKind::diff_sorb:
            p = make_diff_sorb(sample_noise_ic(c.ic_seed, c.nx, 0.0, 1.0), c.coefficients.at("D"),
                               c.t_hi);
            break;
    }
    p.coefficients = c.coefficients;
    p.periodic_derivative = c.periodic_derivative;
    validate(p);
    return p;
}

GridDims grid_dims(const RunConfig& c) {
    const PdeProblem p = make_problem(c);
    return {c.nx, c.nt, p.x_lo, p.x_hi, p.t_hi};
}

MlpSpec network_spec(const RunConfig& c) {
    MlpSpec s;
    s.input_dim = 2;
    s.hidden_layers = c.hidden_layers;
    s.hidden_width = c.hidden_width;
    s.output_dim = 1;
    const GridDims g = grid_dims(c);
    s.input_lo = {0.0, g.x_lo};
    s.input_hi = {g.t_hi, g.x_hi};
    validate(s);
    return s;
}

SolverOptions solver_options(const RunConfig& c) {
    SolverOptions o;
    o.refine = c.refine;
    o.cfl = c.cfl;
    return o;
}

TrainOptions train_options(const RunConfig& c, bool baseline) {
    TrainOptions o;
    o.adam_iters = c.adam_iters;
    o.lr = LrSchedule(c.lr_stages);
    o.lbfgs_iters = c.lbfgs_iters;
    o.lbfgs.memory = c.lbfgs_memory;
    o.batch_size = c.batch_size;
    o.weights = c.weights;
    o.self_train = c.self_train;
    if (baseline) o.self_train.enabled = false;
    o.exclude_pseudo_from_residual = c.exclude_pseudo_from_residual;
    o.seed = derive_seed(c.seed, SeedPurpose::batches);
    o.record_wall_time = c.record_wall_time;
    return o;
}

std::filesystem::path reference_path(const RunConfig& c) {
    return c.reference.is_absolute() ? c.reference : c.out_dir / c.reference;
}

std::uint64_t derive_seed(std::uint64_t seed, SeedPurpose purpose) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(purpose)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (std::uint64_t{words[0]} << 32) | words[1];
}

TrainingSetup build_setup(const RunConfig& c, const GridSolution& reference) {
    TrainingSetup s;
    s.problem = make_problem(c);
    s.spec = network_spec(c);
    const GridDims dims = grid_dims(c);
    if (reference.dims() != dims) {
        throw std::invalid_argument("reference grid dimensions do not match the configuration (nx=" +
                                    std::to_string(reference.nx) + " nt=" + std::to_string(reference.nt) +
                                    ", expected nx=" + std::to_string(dims.nx) +
                                    " nt=" + std::to_string(dims.nt) + ")");
    }
    std::mt19937_64 rng(derive_seed(c.seed, SeedPurpose::setup));

    // Candidate pool.
    std::vector<double> pool;
    if (c.pool_size == 0) {
        for (int k = 1; k < dims.nt; ++k) {
            for (int j = 1; j + 1 < dims.nx; ++j) {
                pool.push_back(reference.t(k));
                pool.push_back(reference.x(j));
            }
        }
    } else {
        std::uniform_real_distribution<double> tdist(0.0, dims.t_hi);
        std::uniform_real_distribution<double> xdist(dims.x_lo, dims.x_hi);
        pool.reserve(2 * c.pool_size);
        for (std::size_t i = 0; i < c.pool_size; ++i) {
            pool.push_back(tdist(rng));
            pool.push_back(xdist(rng));
        }
    }
    s.pool = CandidatePool(std::move(pool));

    s.boundary = BoundarySpec(s.problem).sample(c.n_boundary, rng);

    // Initial points from the t = 0 row.
    const auto nx = static_cast<std::size_t>(dims.nx);
    std::vector<std::uint32_t> initial = sample_batch(nx, std::min(c.n_initial, nx), rng);
    for (auto j : initial) {
        s.data.coords.push_back(0.0);
        s.data.coords.push_back(reference.x(static_cast<int>(j)));
        s.data.labels.push_back(reference.at(0, static_cast<int>(j)));
    }
    // Intra-domain labels from interior nodes.
    const std::size_t inner = nx - 2;
    const std::size_t interior = inner * static_cast<std::size_t>(dims.nt - 1);
    for (auto flat : sample_batch(interior, c.n_data, rng)) {
        const int k = 1 + static_cast<int>(flat / inner);
        const int j = 1 + static_cast<int>(flat % inner);
        s.data.coords.push_back(reference.t(k));
        s.data.coords.push_back(reference.x(j));
        s.data.labels.push_back(reference.at(k, j));
    }
    return s;
}

}  // namespace stpinn
