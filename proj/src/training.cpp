#include "stpinn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "io_util.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace stpinn {

void validate(const LossWeights& w) {
    for (double v : {w.residual, w.data, w.pseudo}) {
        if (!std::isfinite(v) || v < 0.0) {
            throw std::invalid_argument("loss weights must be finite and nonnegative");
        }
    }
    if (w.residual == 0.0 && w.data == 0.0 && w.pseudo == 0.0) {
        throw std::invalid_argument("loss weights must not all be zero");
    }
}

namespace {

Var mean_of(Tape& tape, std::span<const Var> terms) {
    Var sum = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) sum = tape.add(sum, terms[i]);
    return tape.scale(sum, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

Var loss_f(Tape& tape, std::span<const double> params, const MlpSpec& spec,
           const ResidualEvaluator& residual, std::span<const double> points) {
    if (points.empty()) throw std::invalid_argument("loss_f: empty residual batch");
    const auto jets = forward_jet_batch(params, spec, points, tape);
    std::vector<Var> terms(jets.size());
    for (std::size_t i = 0; i < jets.size(); ++i) terms[i] = square(residual(jets[i]));
    return mean_of(tape, terms);
}

Var loss_d(Tape& tape, std::span<const double> params, const MlpSpec& spec,
           const BoundarySpec& boundary, std::span<const BoundaryPoint> boundary_points,
           const LabeledPoints& data) {
    std::vector<Var> terms;
    terms.reserve(boundary_points.size() + data.size());
    if (!boundary_points.empty()) {
        // Jets only where a term reads derivatives.
        const bool need_jets = std::any_of(
            boundary_points.begin(), boundary_points.end(), [&](const BoundaryPoint& bp) {
                return bp.kind == BoundaryTermKind::robin ||
                       (bp.kind == BoundaryTermKind::periodic_pair && boundary.periodic_derivative());
            });
        std::vector<double> pts;
        for (const auto& bp : boundary_points) {
            pts.push_back(bp.t);
            pts.push_back(bp.x);
            if (bp.kind == BoundaryTermKind::periodic_pair) {
                pts.push_back(bp.t);
                pts.push_back(bp.x_pair);
            }
        }
        std::vector<TapeJet> jets;
        if (need_jets) {
            jets = forward_jet_batch(params, spec, pts, tape);
        } else {
            const auto vals = forward_batch_on_tape(params, spec, pts, tape);
            jets.resize(vals.size());
            for (std::size_t i = 0; i < vals.size(); ++i) {
                jets[i].dim = spec.input_dim;
                jets[i].val = vals[i];
            }
        }
        std::size_t k = 0;
        for (const auto& bp : boundary_points) {
            const TapeJet& at = jets[k++];
            const TapeJet& pair = bp.kind == BoundaryTermKind::periodic_pair ? jets[k++] : at;
            terms.push_back(boundary.loss(bp, at, pair));
        }
    }
    if (!data.empty()) {
        const auto pred = forward_batch_on_tape(params, spec, data.coords, tape);
        for (std::size_t i = 0; i < pred.size(); ++i) terms.push_back(square(pred[i] - data.labels[i]));
    }
    if (terms.empty()) return tape.constant(0.0);
    return mean_of(tape, terms);
}

Var loss_p(Tape& tape, std::span<const double> params, const MlpSpec& spec,
           const LabeledPoints& pseudo) {
    if (pseudo.empty()) return tape.constant(0.0);
    const auto pred = forward_batch_on_tape(params, spec, pseudo.coords, tape);
    std::vector<Var> terms(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) terms[i] = square(pred[i] - pseudo.labels[i]);
    return mean_of(tape, terms);
}

Var total_loss(const LossWeights& w, Var lf, Var ld, Var lp) {
    return w.residual * lf + w.data * ld + w.pseudo * lp;
}

std::vector<std::uint32_t> sample_batch(std::size_t pool_size, std::size_t n,
                                        std::mt19937_64& rng) {
    if (n > pool_size) {
        throw std::invalid_argument("batch size " + std::to_string(n) + " exceeds pool size " +
                                    std::to_string(pool_size));
    }
    std::vector<std::uint32_t> all(pool_size);
    std::iota(all.begin(), all.end(), 0u);
    if (n == pool_size) return all;
    std::vector<std::uint32_t> out;
    out.reserve(n);
    // Selection sampling over a forward range keeps pool order.
    std::sample(all.begin(), all.end(), std::back_inserter(out), n, rng);
    return out;
}

namespace {

struct LossParts {
    double total = 0.0;
    double f = 0.0;
    double d = 0.0;
    double p = 0.0;
};

struct Evaluation {
    LossParts parts;
    std::vector<double> grad;
};

class LossAssembler {
public:
    LossAssembler(const TrainingSetup& setup, const LossWeights& weights)
        : setup_(setup),
          weights_(weights),
          residual_(setup.problem),
          boundary_(setup.problem),
          n_params_(param_count(setup.spec)) {}

    Evaluation evaluate(std::span<const double> params, std::span<const double> batch_points,
                        const LabeledPoints& pseudo) const {
        Tape tape(n_params_);
        const Var lf = loss_f(tape, params, setup_.spec, residual_, batch_points);
        const Var ld = loss_d(tape, params, setup_.spec, boundary_, setup_.boundary, setup_.data);
        const Var lp = loss_p(tape, params, setup_.spec, pseudo);
        const Var total = total_loss(weights_, lf, ld, lp);
        Evaluation e;
        e.parts = {total.value(), lf.value(), ld.value(), lp.value()};
        if (std::isfinite(e.parts.total)) e.grad = param_grad(tape, total);
        return e;
    }

private:
    const TrainingSetup& setup_;
    LossWeights weights_;
    ResidualEvaluator residual_;
    BoundarySpec boundary_;
    std::size_t n_params_;
};

LabeledPoints pseudo_points(const CandidatePool& pool, const PseudoSet& pseudo) {
    LabeledPoints out;
    out.coords.reserve(2 * pseudo.size());
    for (auto i : pseudo.indices) {
        out.coords.push_back(pool.t(i));
        out.coords.push_back(pool.x(i));
    }
    out.labels = pseudo.labels;
    return out;
}

std::vector<double> gather(const CandidatePool& pool, std::span<const std::uint32_t> indices,
                           const std::vector<char>& skip) {
    std::vector<double> pts;
    pts.reserve(2 * indices.size());
    for (auto i : indices) {
        if (!skip.empty() && skip[i]) continue;
        pts.push_back(pool.t(i));
        pts.push_back(pool.x(i));
    }
    return pts;
}

void check_finite(const LossParts& parts, std::int64_t iter, const char* phase) {
    if (std::isfinite(parts.total)) return;
    throw TrainingDiverged("non-finite loss at iteration " + std::to_string(iter) + " (" + phase +
                           "): total=" + io::format_double(parts.total) +
                           " loss_f=" + io::format_double(parts.f) +
                           " loss_d=" + io::format_double(parts.d) +
                           " loss_p=" + io::format_double(parts.p));
}

}  // namespace

TrainResult train(const TrainingSetup& setup, ParamVector init, const TrainOptions& options,
                  const EventObserver& on_event) {
    validate(setup.spec);
    validate(options.weights);
    if (setup.spec.input_dim != 2 || setup.spec.output_dim != 1) {
        throw std::invalid_argument("training expects a network with inputs (t, x) and one output");
    }
    if (init.size() != param_count(setup.spec)) {
        throw std::invalid_argument("initial parameter vector has the wrong length");
    }
    if (options.adam_iters < 0 || options.lbfgs_iters < 0) {
        throw std::invalid_argument("iteration counts must be nonnegative");
    }
    if (options.batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
    if (options.batch_size > setup.pool.size()) {
        throw std::invalid_argument("batch size " + std::to_string(options.batch_size) +
                                    " exceeds candidate pool size " +
                                    std::to_string(setup.pool.size()));
    }
    if (options.self_train.enabled) validate(options.self_train);

#if defined(__GLIBC__)
    // Every iteration allocates and frees tens of MB of activations; stop
    // glibc from handing them back to the kernel in between.
    mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
    mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
#endif
    const auto start = std::chrono::steady_clock::now();
    auto wall_ms = [&] {
        if (!options.record_wall_time) return 0.0;
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    };

    TrainResult result;
    result.params = std::move(init);
    result.pool = setup.pool;
    std::fill(result.pool.flags.begin(), result.pool.flags.end(), 0u);

    const LossAssembler assembler(setup, options.weights);
    std::mt19937_64 rng(options.seed);
    AdamState adam(result.params.size());
    LabeledPoints pseudo;
    std::vector<char> is_pseudo;

    auto refresh_pseudo = [&] {
        pseudo = pseudo_points(result.pool, result.pseudo);
        if (options.exclude_pseudo_from_residual) {
            is_pseudo.assign(result.pool.size(), 0);
            for (auto i : result.pseudo.indices) is_pseudo[i] = 1;
        }
    };

    for (std::int64_t iter = 0; iter < options.adam_iters; ++iter) {
        if (options.self_train.enabled && is_generation_event(iter, options.self_train)) {
            result.pseudo = run_generation_event(result.params, setup.spec, setup.problem,
                                                 result.pool, options.self_train);
            ++result.generation_events;
            refresh_pseudo();
            if (on_event) on_event(iter, result.params, result.pool, result.pseudo);
        }
        const auto indices = sample_batch(result.pool.size(), options.batch_size, rng);
        auto points = gather(result.pool, indices, is_pseudo);
        if (points.empty()) points = gather(result.pool, indices, {});

        const Evaluation e = assembler.evaluate(result.params, points, pseudo);
        check_finite(e.parts, iter, "adam");
        result.history.push_back({iter, e.parts.total, e.parts.f, e.parts.d, e.parts.p,
                                  result.pseudo.size(), "adam", wall_ms()});
        adam_step(adam, result.params, e.grad, options.lr.at(static_cast<std::uint64_t>(iter)));
    }

    if (options.lbfgs_iters > 0) {
        const auto indices = sample_batch(result.pool.size(), options.batch_size, rng);
        auto points = gather(result.pool, indices, is_pseudo);
        if (points.empty()) points = gather(result.pool, indices, {});

        // Components of recent evaluations, matched against accepted points.
        struct Seen {
            std::vector<double> x;
            LossParts parts;
        };
        std::vector<Seen> seen;
        const Objective objective = [&](std::span<const double> x, std::span<double> grad) {
            Evaluation e = assembler.evaluate(x, points, pseudo);
            if (!std::isfinite(e.parts.total)) {
                std::fill(grad.begin(), grad.end(), 0.0);
                return e.parts.total;
            }
            std::copy(e.grad.begin(), e.grad.end(), grad.begin());
            seen.push_back({std::vector<double>(x.begin(), x.end()), e.parts});
            return e.parts.total;
        };
        const std::int64_t base = options.adam_iters;
        const LbfgsCallback on_step = [&](int step, double f, std::span<const double> x) {
            LossParts parts{f, f, 0.0, 0.0};
            for (auto it = seen.rbegin(); it != seen.rend(); ++it) {
                if (std::equal(x.begin(), x.end(), it->x.begin(), it->x.end())) {
                    parts = it->parts;
                    break;
                }
            }
            seen.clear();
            result.history.push_back({base + step - 1, parts.total, parts.f, parts.d, parts.p,
                                      result.pseudo.size(), "lbfgs", wall_ms()});
        };
        LbfgsOptions lb = options.lbfgs;
        lb.max_iters = options.lbfgs_iters;
        check_finite(assembler.evaluate(result.params, points, pseudo).parts, base, "lbfgs");
        LbfgsResult lr = lbfgs_minimize(objective, result.params, lb, on_step);
        result.params = std::move(lr.x);
        result.lbfgs_steps = lr.iterations;
        result.lbfgs_stop = lr.stop;
    }
    return result;
}

void write_history_csv(const std::filesystem::path& path, std::span<const HistoryRow> history) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write history " + path.string());
    out << "iter,loss_total,loss_f,loss_d,loss_p,n_pseudo,phase,wall_ms\n";
    for (const auto& r : history) {
        out << r.iter << ',' << io::format_double(r.loss_total) << ','
            << io::format_double(r.loss_f) << ',' << io::format_double(r.loss_d) << ','
            << io::format_double(r.loss_p) << ',' << r.n_pseudo << ',' << r.phase << ','
            << io::format_double(r.wall_ms) << '\n';
    }
    if (!out) throw std::runtime_error("failed writing history " + path.string());
}

std::vector<HistoryRow> read_history_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open history " + path.string());
    std::string line;
    if (!std::getline(in, line) ||
        io::trim(line) != "iter,loss_total,loss_f,loss_d,loss_p,n_pseudo,phase,wall_ms") {
        throw std::runtime_error("history " + path.string() + " has an unexpected header");
    }
    std::vector<HistoryRow> rows;
    while (std::getline(in, line)) {
        if (io::trim(line).empty()) continue;
        std::vector<std::string> c;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) c.push_back(io::trim(cell));
        if (c.size() != 8) throw std::runtime_error("malformed history row: " + line);
        HistoryRow r;
        r.iter = io::parse_int(c[0], "iter");
        r.loss_total = io::parse_double(c[1], "loss_total");
        r.loss_f = io::parse_double(c[2], "loss_f");
        r.loss_d = io::parse_double(c[3], "loss_d");
        r.loss_p = io::parse_double(c[4], "loss_p");
        r.n_pseudo = static_cast<std::size_t>(io::parse_int(c[5], "n_pseudo"));
        r.phase = c[6];
        r.wall_ms = io::parse_double(c[7], "wall_ms");
        rows.push_back(r);
    }
    return rows;
}

}  // namespace stpinn
