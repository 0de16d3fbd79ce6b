#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "stpinn/commands.hpp"

using namespace stpinn;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config(const fs::path& dir) {
    RunConfig c = default_config(ProblemKind::burgers);
    c.t_hi = 0.5;
    c.nx = 64;
    c.nt = 16;
    c.refine = 1;
    c.hidden_layers = 2;
    c.hidden_width = 8;
    c.n_boundary = 16;
    c.n_initial = 32;
    c.n_data = 32;
    c.batch_size = 64;
    c.pool_size = 300;
    c.adam_iters = 40;
    c.self_train.period = 10;
    c.self_train.warmup = 10;
    c.self_train.stable_events = 1;
    c.out_dir = dir;
    return c;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::size_t count_lines(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

}  // namespace

TEST_CASE("train without a reference grid fails with a clear message") {
    TempDir dir("stpinn_unit_cmd_noref");
    std::ostringstream log;
    CHECK_THROWS_WITH_AS(cmd_train(tiny_config(dir.path), false, log),
                         doctest::Contains("gen-ref"), std::runtime_error);
}

TEST_CASE("train and eval on a tiny problem") {
    TempDir dir("stpinn_unit_cmd_train");
    const RunConfig c = tiny_config(dir.path);
    std::ostringstream log;
    const fs::path ref_path = cmd_gen_ref(c, log);
    CHECK(fs::exists(ref_path));

    const TrainArtifacts base = cmd_train(c, true, log);
    CHECK(fs::exists(base.checkpoint));
    const auto history = read_history_csv(base.history);
    CHECK(history.size() == 40);
    for (const auto& row : history) CHECK(row.n_pseudo == 0);

    // The reported metric is a plain norm ratio over all nodes.
    const GridSolution ref = read_grid(ref_path);
    const Checkpoint ck = read_checkpoint(base.checkpoint);
    const auto pred = forward_batch(ck.params, ck.spec, grid_points(ref.dims()));
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        num += (pred[i] - ref.values[i]) * (pred[i] - ref.values[i]);
        den += ref.values[i] * ref.values[i];
    }
    const EvalMetrics m = cmd_eval(base.checkpoint, ref_path, dir.path / "err.grid", log);
    CHECK(m.relative_l2 == doctest::Approx(std::sqrt(num / den)).epsilon(1e-12));
    CHECK(m.relative_l2 == base.metrics.relative_l2);
    const GridSolution err = read_grid(dir.path / "err.grid");
    CHECK(err.values[5] == std::abs(pred[5] - ref.values[5]));

    // Against its own predictions the error vanishes.
    GridSolution own(ref.dims());
    own.values = pred;
    write_grid(dir.path / "own.grid", own);
    CHECK(cmd_eval(base.checkpoint, dir.path / "own.grid", {}, log).relative_l2 == 0.0);

    // The zero network misses by exactly the reference norm.
    write_checkpoint(dir.path / "zero.ckpt", ck.spec, ParamVector(ck.params.size(), 0.0));
    CHECK(cmd_eval(dir.path / "zero.ckpt", ref_path, {}, log).relative_l2 == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("zero iterations write the initialization") {
    TempDir dir("stpinn_unit_cmd_zero");
    RunConfig c = tiny_config(dir.path);
    c.adam_iters = 0;
    std::ostringstream log;
    cmd_gen_ref(c, log);
    const TrainArtifacts a = cmd_train(c, false, log);
    CHECK(read_checkpoint(a.checkpoint).params ==
          init_params(network_spec(c), derive_seed(c.seed, SeedPurpose::init)));
}

TEST_CASE("event dumps hold the labels of each event") {
    TempDir dir("stpinn_unit_cmd_dump");
    RunConfig c = tiny_config(dir.path);
    c.dump_events = true;
    std::ostringstream log;
    cmd_gen_ref(c, log);
    const TrainArtifacts a = cmd_train(c, false, log);
    REQUIRE(fs::exists(a.pseudo_dump));
    const auto rows = read_pseudo_dump(a.pseudo_dump);
    CHECK(!rows.empty());
    for (const auto& r : rows) {
        const Checkpoint ck = read_checkpoint(a.event_dir / ("event_" + std::to_string(r.event_iter) + ".ckpt"));
        const std::vector<double> in{r.t, r.x};
        CHECK(forward(ck.params, ck.spec, in)[0] == r.label);
        CHECK(r.flag > 1u);
    }
    for (int it : {10, 20, 30}) CHECK(fs::exists(a.event_dir / ("event_" + std::to_string(it) + ".ckpt")));
}

TEST_CASE("compare with self-training off in both arms reports no change") {
    TempDir dir("stpinn_unit_cmd_compare");
    RunConfig c = tiny_config(dir.path);
    c.self_train.enabled = false;
    c.adam_iters = 15;
    std::ostringstream log;
    const ComparisonReport r = cmd_compare(c, 2, log);
    REQUIRE(r.rows.size() == 4);
    CHECK(r.improvement[0] == 1.0);
    CHECK(r.improvement[1] == 1.0);
    CHECK(r.geomean_improvement == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.selftrain_not_worse == 2);
    CHECK(r.rows[2].seed == c.seed + 1);
    // Header, 2 n rows, summary.
    CHECK(count_lines(dir.path / "report.csv") == 1 + 4 + 1);
    CHECK(fs::exists(dir.path / "seed_0" / "baseline_history.csv"));
    CHECK(fs::exists(dir.path / "seed_1" / "selftrain_history.csv"));
    CHECK_THROWS_AS(cmd_compare(c, 0, log), std::invalid_argument);
}
