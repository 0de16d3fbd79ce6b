#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "stpinn/training.hpp"

using namespace stpinn;

namespace {

constexpr double kPi = std::numbers::pi;

MlpSpec tiny_spec() {
    MlpSpec s;
    s.hidden_layers = 2;
    s.hidden_width = 8;
    s.input_lo = {0.0, 0.0};
    s.input_hi = {1.0, 1.0};
    return s;
}

TrainingSetup tiny_setup(std::uint64_t seed = 5) {
    TrainingSetup st;
    st.problem = make_burgers([](double x) { return std::sin(2 * kPi * x); }, 0.01, 1.0);
    st.spec = tiny_spec();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> pts;
    for (int i = 0; i < 400; ++i) {
        pts.push_back(u(rng));
        pts.push_back(u(rng));
    }
    st.pool = CandidatePool(pts);
    st.boundary = BoundarySpec(st.problem).sample(32, rng);
    for (int i = 0; i < 32; ++i) {
        const double x = i / 31.0;
        st.data.coords.push_back(0.0);
        st.data.coords.push_back(x);
        st.data.labels.push_back(std::sin(2 * kPi * x));
    }
    return st;
}

TrainOptions tiny_options() {
    TrainOptions o;
    o.adam_iters = 60;
    o.batch_size = 64;
    o.seed = 17;
    o.self_train.period = 10;
    o.self_train.warmup = 20;
    o.self_train.stable_events = 1;
    o.self_train.max_fraction = 0.25;
    return o;
}

}  // namespace

TEST_CASE("residual loss is the mean of the candidate scores") {
    const TrainingSetup st = tiny_setup();
    const auto params = init_params(st.spec, 2);
    Tape tape(params.size());
    const ResidualEvaluator res(st.problem);
    const Var lf = loss_f(tape, params, st.spec, res, st.pool.coords);
    const auto scores = score_candidates(params, st.spec, st.problem, st.pool);
    double sum = 0.0;
    for (double s : scores) sum += s;
    CHECK(lf.value() == doctest::Approx(sum / static_cast<double>(scores.size())).epsilon(1e-13));
}

TEST_CASE("data loss is one mean over boundary terms and labelled points") {
    const TrainingSetup st = tiny_setup();
    const auto params = init_params(st.spec, 2);
    Tape tape(params.size());
    const BoundarySpec bs(st.problem);
    const Var ld = loss_d(tape, params, st.spec, bs, st.boundary, st.data);
    double sum = 0.0;
    for (const auto& bp : st.boundary) {
        const std::vector<double> a{bp.t, bp.x};
        const std::vector<double> b{bp.t, bp.x_pair};
        const double d = forward(params, st.spec, a)[0] - forward(params, st.spec, b)[0];
        sum += d * d;
    }
    const auto pred = forward_batch(params, st.spec, st.data.coords);
    for (std::size_t i = 0; i < pred.size(); ++i) sum += (pred[i] - st.data.labels[i]) * (pred[i] - st.data.labels[i]);
    CHECK(ld.value() == doctest::Approx(sum / (st.boundary.size() + st.data.size())).epsilon(1e-13));
}

TEST_CASE("empty pseudo set contributes the constant zero") {
    const TrainingSetup st = tiny_setup();
    const auto params = init_params(st.spec, 2);
    Tape tape(params.size());
    const Var lp = loss_p(tape, params, st.spec, LabeledPoints{});
    CHECK(lp.value() == 0.0);
    const auto g = param_grad(tape, lp);
    CHECK(std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("total loss weights its parts") {
    Tape tape(0);
    const Var v = total_loss({2.0, 0.5, 3.0}, tape.constant(1.0), tape.constant(4.0), tape.constant(0.25));
    CHECK(v.value() == doctest::Approx(2.0 + 2.0 + 0.75));
    CHECK_THROWS(validate(LossWeights{-1.0, 1.0, 1.0}));
    CHECK_THROWS(validate(LossWeights{0.0, 0.0, 0.0}));
}

TEST_CASE("batch sampling is uniform without replacement") {
    std::mt19937_64 rng(9);
    const std::size_t n_pool = 20;
    const std::size_t n = 5;
    const int draws = 20000;
    std::vector<int> hits(n_pool, 0);
    for (int d = 0; d < draws; ++d) {
        const auto b = sample_batch(n_pool, n, rng);
        REQUIRE(b.size() == n);
        REQUIRE(std::is_sorted(b.begin(), b.end()));
        REQUIRE(std::adjacent_find(b.begin(), b.end()) == b.end());
        for (auto i : b) ++hits[i];
    }
    // Each index is included with probability n / N: binomial, 5 standard deviations.
    const double p = static_cast<double>(n) / n_pool;
    const double sd = std::sqrt(draws * p * (1 - p));
    for (int h : hits) CHECK(std::abs(h - draws * p) < 5 * sd);
    const auto all = sample_batch(7, 7, rng);
    CHECK(all == std::vector<std::uint32_t>{0, 1, 2, 3, 4, 5, 6});
    CHECK_THROWS_AS(sample_batch(3, 4, rng), std::invalid_argument);
}

TEST_CASE("zero iterations return the initialization") {
    const TrainingSetup st = tiny_setup();
    TrainOptions o = tiny_options();
    o.adam_iters = 0;
    const auto init = init_params(st.spec, 1);
    const TrainResult r = train(st, init, o);
    CHECK(r.params == init);
    CHECK(r.history.empty());
}

TEST_CASE("training is deterministic and lowers the loss") {
    const TrainingSetup st = tiny_setup();
    TrainOptions o = tiny_options();
    o.self_train.enabled = false;
    o.lr = LrSchedule(1e-2);
    const TrainResult a = train(st, init_params(st.spec, 1), o);
    const TrainResult b = train(st, init_params(st.spec, 1), o);
    CHECK(a.history == b.history);
    CHECK(a.params == b.params);
    CHECK(a.history.back().loss_total < a.history.front().loss_total);
    for (const auto& row : a.history) CHECK(row.n_pseudo == 0);
}

TEST_CASE("pseudo set stays empty before the first event and bounded after it") {
    const TrainingSetup st = tiny_setup();
    const TrainOptions o = tiny_options();
    int events = 0;
    const TrainResult r = train(st, init_params(st.spec, 1), o,
                                [&](std::int64_t iter, std::span<const double> params,
                                    const CandidatePool& pool, const PseudoSet& ps) {
                                    ++events;
                                    CHECK(is_generation_event(iter, o.self_train));
                                    CHECK(ps.size() <= 100);
                                    // Labels equal the network output at event time.
                                    for (std::size_t k = 0; k < ps.size(); ++k) {
                                        const std::vector<double> in{pool.t(ps.indices[k]),
                                                                     pool.x(ps.indices[k])};
                                        CHECK(ps.labels[k] == forward(params, st.spec, in)[0]);
                                    }
                                });
    CHECK(events == 4);
    CHECK(r.generation_events == 4);
    for (const auto& row : r.history) {
        if (row.iter < o.self_train.warmup) CHECK(row.n_pseudo == 0);
        CHECK(row.n_pseudo <= 100);
    }
    CHECK(r.history.back().n_pseudo > 0);
}

TEST_CASE("with a zero pseudo weight events change nothing") {
    const TrainingSetup st = tiny_setup();
    TrainOptions o = tiny_options();
    o.weights.pseudo = 0.0;
    const TrainResult with_events = train(st, init_params(st.spec, 1), o);
    o.self_train.enabled = false;
    const TrainResult baseline = train(st, init_params(st.spec, 1), o);
    CHECK(with_events.params == baseline.params);
    REQUIRE(with_events.history.size() == baseline.history.size());
    for (std::size_t i = 0; i < baseline.history.size(); ++i) {
        CHECK(with_events.history[i].loss_total == baseline.history[i].loss_total);
    }
}

TEST_CASE("L-BFGS phase is monotone over accepted steps") {
    const TrainingSetup st = tiny_setup();
    TrainOptions o = tiny_options();
    o.adam_iters = 30;
    o.lbfgs_iters = 25;
    const TrainResult r = train(st, init_params(st.spec, 1), o);
    double prev = std::numeric_limits<double>::infinity();
    int steps = 0;
    for (const auto& row : r.history) {
        if (row.phase != "lbfgs") continue;
        ++steps;
        CHECK(row.iter == 30 + steps - 1);
        CHECK(row.loss_total <= prev);
        CHECK(row.loss_total == doctest::Approx(row.loss_f + row.loss_d + row.loss_p).epsilon(1e-12));
        prev = row.loss_total;
    }
    CHECK(steps == r.lbfgs_steps);
    CHECK(steps > 0);
}

TEST_CASE("a non-finite loss stops the run") {
    TrainingSetup st = tiny_setup();
    st.data.labels[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(train(st, init_params(st.spec, 1), tiny_options()), TrainingDiverged);
}

TEST_CASE("invalid options are rejected") {
    const TrainingSetup st = tiny_setup();
    TrainOptions o = tiny_options();
    o.batch_size = 401;
    CHECK_THROWS_AS(train(st, init_params(st.spec, 1), o), std::invalid_argument);
    o = tiny_options();
    CHECK_THROWS_AS(train(st, ParamVector(3, 0.0), o), std::invalid_argument);
}

TEST_CASE("history CSV round trip") {
    const auto path = std::filesystem::temp_directory_path() / "stpinn_unit_history.csv";
    const std::vector<HistoryRow> rows{{0, 1.5, 1.0, 0.5, 0.0, 0, "adam", 0.0},
                                       {1, 0.1 + 0.2, 1.0 / 3.0, 2e-300, 1e-17, 42, "lbfgs", 3.25}};
    write_history_csv(path, rows);
    CHECK(read_history_csv(path) == rows);
    std::filesystem::remove(path);
}
