#include "stpinn/commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <ostream>
#include <stdexcept>

#include "io_util.hpp"

namespace stpinn {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

EvalMetrics metrics_of(const GridSolution& pred, const GridSolution& ref) {
    return {relative_l2(pred, ref), mean_squared_error(pred, ref)};
}

}  // namespace

fs::path cmd_gen_ref(const RunConfig& config, std::ostream& log) {
    validate(config);
    const PdeProblem problem = make_problem(config);
    const GridDims dims = grid_dims(config);
    const auto start = std::chrono::steady_clock::now();
    const GridSolution solution = solve_reference(problem, dims, solver_options(config));
    const fs::path path = reference_path(config);
    if (path.has_parent_path()) ensure_dir(path.parent_path());
    write_grid(path, solution);
    log << "reference " << to_string(config.problem) << " nx=" << dims.nx << " nt=" << dims.nt
        << " -> " << path.string() << " (" << io::format_double(seconds_since(start)) << " s)\n";
    return path;
}

GridSolution predict_grid(const Checkpoint& checkpoint, const GridDims& dims) {
    if (checkpoint.spec.input_dim != 2 || checkpoint.spec.output_dim != 1) {
        throw std::invalid_argument("checkpoint network does not map (t, x) to one output");
    }
    GridSolution pred(dims);
    const auto values = forward_batch(checkpoint.params, checkpoint.spec, grid_points(dims));
    pred.values = values;
    return pred;
}

EvalMetrics cmd_eval(const fs::path& checkpoint, const fs::path& grid, const fs::path& error_out,
                     std::ostream& log) {
    const Checkpoint ckpt = read_checkpoint(checkpoint);
    const GridSolution ref = read_grid(grid);
    const GridSolution pred = predict_grid(ckpt, ref.dims());
    const EvalMetrics m = metrics_of(pred, ref);
    if (!error_out.empty()) {
        GridSolution err(ref.dims());
        for (std::size_t i = 0; i < err.values.size(); ++i) {
            err.values[i] = std::abs(pred.values[i] - ref.values[i]);
        }
        if (error_out.has_parent_path()) ensure_dir(error_out.parent_path());
        write_grid(error_out, err);
    }
    log << "relative_l2 " << io::format_double(m.relative_l2) << "\nmse "
        << io::format_double(m.mse) << '\n';
    return m;
}

TrainArtifacts cmd_train(const RunConfig& config, bool baseline, std::ostream& log) {
    validate(config);
    const fs::path ref_path = reference_path(config);
    if (!fs::exists(ref_path)) {
        throw std::runtime_error("reference grid " + ref_path.string() +
                                 " not found; run gen-ref with the same config first");
    }
    const GridSolution reference = read_grid(ref_path);
    const TrainingSetup setup = build_setup(config, reference);
    const TrainOptions options = train_options(config, baseline);
    ParamVector init = init_params(setup.spec, derive_seed(config.seed, SeedPurpose::init));

    const std::string tag = baseline ? "baseline" : "selftrain";
    ensure_dir(config.out_dir);
    TrainArtifacts art;
    art.checkpoint = config.out_dir / (tag + ".ckpt");
    art.history = config.out_dir / (tag + "_history.csv");

    std::unique_ptr<PseudoDumpWriter> dump;
    EventObserver observer;
    if (config.dump_events && options.self_train.enabled) {
        art.pseudo_dump = config.out_dir / (tag + "_pseudo.csv");
        art.event_dir = config.out_dir / (tag + "_events");
        ensure_dir(art.event_dir);
        dump = std::make_unique<PseudoDumpWriter>(art.pseudo_dump);
        observer = [&](std::int64_t iter, std::span<const double> params, const CandidatePool& pool,
                       const PseudoSet& pseudo) {
            dump->write(iter, pool, pseudo);
            write_checkpoint(art.event_dir / ("event_" + std::to_string(iter) + ".ckpt"), setup.spec,
                             params);
        };
    }

    const auto start = std::chrono::steady_clock::now();
    art.result = train(setup, std::move(init), options, observer);
    art.runtime_s = seconds_since(start);

    write_checkpoint(art.checkpoint, setup.spec, art.result.params);
    write_history_csv(art.history, art.result.history);
    art.metrics = metrics_of(predict_grid({setup.spec, art.result.params}, reference.dims()), reference);

    log << tag << " seed=" << config.seed << " iters=" << art.result.history.size();
    if (!art.result.history.empty()) {
        const HistoryRow& last = art.result.history.back();
        log << " loss=" << io::format_double(last.loss_total)
            << " loss_f=" << io::format_double(last.loss_f)
            << " loss_d=" << io::format_double(last.loss_d)
            << " loss_p=" << io::format_double(last.loss_p) << " n_pseudo=" << last.n_pseudo;
    }
    log << " relative_l2=" << io::format_double(art.metrics.relative_l2)
        << " time=" << io::format_double(art.runtime_s) << "s\n";
    return art;
}

ComparisonReport cmd_compare(const RunConfig& config, int n_seeds, std::ostream& log) {
    if (n_seeds < 1) throw std::invalid_argument("compare needs --seeds >= 1");
    validate(config);
    const fs::path ref = fs::absolute(reference_path(config));
    if (!fs::exists(ref)) {
        RunConfig gen = config;
        gen.reference = ref;
        cmd_gen_ref(gen, log);
    }

    ComparisonReport report;
    double log_sum = 0.0;
    for (int s = 0; s < n_seeds; ++s) {
        RunConfig run = config;
        run.seed = config.seed + static_cast<std::uint64_t>(s);
        run.reference = ref;
        run.out_dir = config.out_dir / ("seed_" + std::to_string(run.seed));
        const TrainArtifacts base = cmd_train(run, true, log);
        const TrainArtifacts st = cmd_train(run, false, log);
        report.rows.push_back({run.seed, "baseline", base.metrics.relative_l2, base.metrics.mse,
                               base.runtime_s});
        report.rows.push_back({run.seed, "selftrain", st.metrics.relative_l2, st.metrics.mse,
                               st.runtime_s});
        const double factor = base.metrics.relative_l2 / st.metrics.relative_l2;
        report.improvement.push_back(factor);
        log_sum += std::log(factor);
        if (st.metrics.relative_l2 <= base.metrics.relative_l2) ++report.selftrain_not_worse;
    }
    report.geomean_improvement = std::exp(log_sum / n_seeds);

    log << "seed,baseline_l2,selftrain_l2,improvement\n";
    for (int s = 0; s < n_seeds; ++s) {
        log << report.rows[2 * s].seed << ',' << io::format_double(report.rows[2 * s].relative_l2)
            << ',' << io::format_double(report.rows[2 * s + 1].relative_l2) << ','
            << io::format_double(report.improvement[s]) << '\n';
    }
    log << "geomean_improvement " << io::format_double(report.geomean_improvement) << " ("
        << report.selftrain_not_worse << "/" << n_seeds << " seeds not worse)\n";
    ensure_dir(config.out_dir);
    write_report_csv(config.out_dir / "report.csv", report);
    return report;
}

void write_report_csv(const fs::path& path, const ComparisonReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report " + path.string());
    out << "seed,arm,relative_l2,mse,runtime_s\n";
    for (const auto& r : report.rows) {
        out << r.seed << ',' << r.arm << ',' << io::format_double(r.relative_l2) << ','
            << io::format_double(r.mse) << ',' << io::format_double(r.runtime_s) << '\n';
    }
    out << "summary,geomean_improvement," << io::format_double(report.geomean_improvement) << ','
        << report.selftrain_not_worse << ',' << report.improvement.size() << '\n';
    if (!out) throw std::runtime_error("failed writing report " + path.string());
}

}  // namespace stpinn
