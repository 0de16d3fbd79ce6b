#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "stpinn/pde.hpp"

using namespace stpinn;

namespace {

constexpr double kPi = std::numbers::pi;

Jet2 jet_of(double u, double ut, double ux, double uxx) {
    Jet2 j = jet_constant(2, u);
    j.grad[kT] = ut;
    j.grad[kX] = ux;
    j.set_h(kX, kX, uxx);
    return j;
}

}  // namespace

TEST_CASE("problem names round trip") {
    for (auto k : {ProblemKind::burgers, ProblemKind::diff_react, ProblemKind::diff_sorb}) {
        CHECK(parse_problem_kind(to_string(k)) == k);
    }
    CHECK_THROWS_AS(parse_problem_kind("heat"), std::invalid_argument);
}

TEST_CASE("viscous Burgers travelling front has zero residual") {
    // u = c - a tanh(a (x - c t) / (2 k)) solves u_t + u u_x = k u_xx.
    const double nu = 0.01;
    const double k = nu / kPi;
    const double a = 0.4;
    const double c = 0.3;
    const double t = 0.7;
    const double x = 0.45;
    const double z = a * (x - c * t) / (2 * k);
    const double th = std::tanh(z);
    const double sech2 = 1 - th * th;
    const double u = c - a * th;
    const double ux = -a * sech2 * a / (2 * k);
    const double ut = -c * ux;
    const double uxx = 2 * a * th * sech2 * (a / (2 * k)) * (a / (2 * k));
    CHECK(std::abs(burgers_residual(jet_of(u, ut, ux, uxx), nu)) < 1e-9 * std::abs(ux));
}

TEST_CASE("diffusion decay and logistic growth have zero residual") {
    const double nu = 0.5;
    const double t = 0.03;
    const double x = 0.2;
    const double amp = std::exp(-nu * 4 * kPi * kPi * t);
    const double u = amp * std::sin(2 * kPi * x);
    const Jet2 decay = jet_of(u, -nu * 4 * kPi * kPi * u, 2 * kPi * amp * std::cos(2 * kPi * x),
                              -4 * kPi * kPi * u);
    CHECK(diff_react_residual(decay, nu, 0.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

    const double rho = 1.0;
    const double u0 = 0.2;
    const double ul = 1.0 / (1.0 + (1.0 / u0 - 1.0) * std::exp(-rho * t));
    const Jet2 logistic = jet_of(ul, rho * ul * (1 - ul), 0.0, 0.0);
    CHECK(std::abs(diff_react_residual(logistic, nu, rho)) < 1e-15);
}

TEST_CASE("retardation factor follows the Freundlich isotherm") {
    const SorptionParams p;
    const double expected = 1.0 + (1.0 - 0.29) / 0.29 * 2888.0 * 3.5e-4 * 0.875 * std::pow(0.5, -0.125);
    CHECK(retardation(0.5, p) == doctest::Approx(expected).epsilon(1e-14));
    // The singular base is clamped.
    CHECK(retardation(0.0, p) == retardation(p.u_floor, p));
    CHECK(std::isfinite(retardation(-1.0, p)));

    const Jet2 u = jet_of(0.5, 0.01, 0.3, 2.0);
    CHECK(diff_sorb_residual(u, 5e-4, p) == doctest::Approx(0.01 - 5e-4 / expected * 2.0));
}

TEST_CASE("residuals agree on doubles and tape variables") {
    Tape tape(4);
    JetOf<Var> j;
    j.dim = 2;
    j.val = tape.parameter(0, 0.4);
    j.grad[kT] = tape.parameter(1, -0.2);
    j.grad[kX] = tape.parameter(2, 1.1);
    const Var zero = tape.constant(0.0);
    j.set_h(kT, kT, zero);
    j.set_h(kT, kX, zero);
    j.set_h(kX, kX, tape.parameter(3, 3.0));
    const Jet2 d = jet_of(0.4, -0.2, 1.1, 3.0);
    const PdeProblem probs[] = {make_burgers([](double) { return 0.0; }),
                                make_diff_react([](double) { return 0.0; }),
                                make_diff_sorb([](double) { return 0.0; })};
    for (const auto& p : probs) {
        const ResidualEvaluator r(p);
        CHECK(r(j).value() == doctest::Approx(r(d)).epsilon(1e-15));
    }
    // d/du_xx of the Burgers residual is -nu / pi.
    const auto g = param_grad(tape, ResidualEvaluator(probs[0])(j));
    CHECK(g[3] == doctest::Approx(-0.01 / kPi));
    CHECK(g[0] == doctest::Approx(1.1));
}

TEST_CASE("problem validation") {
    PdeProblem p = make_burgers([](double x) { return x; });
    CHECK_NOTHROW(validate(p));
    p.coefficients["nu"] = -1.0;
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    p = make_diff_react([](double x) { return x; });
    p.coefficients.erase("rho");
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
    p = make_diff_sorb({});
    CHECK_THROWS_AS(validate(p), std::invalid_argument);
}

TEST_CASE("initial condition samplers") {
    const SinusoidIC ic = sample_sinusoid_ic(5, 1.0);
    REQUIRE(ic.amplitude.size() == 2);
    for (int i = 0; i < 2; ++i) {
        CHECK(ic.amplitude[i] >= 0.0);
        CHECK(ic.amplitude[i] < 1.0);
        CHECK(ic.mode[i] >= 1);
        CHECK(ic.mode[i] <= 8);
        CHECK(ic.phase[i] > 0.0);
        CHECK(ic.phase[i] < 2 * kPi);
    }
    // Periodic on the unit interval.
    CHECK(ic(0.0) == doctest::Approx(ic(1.0)).epsilon(1e-12));
    CHECK(sample_sinusoid_ic(5, 1.0)(0.3) == ic(0.3));

    const NodeNoiseIC noise = sample_noise_ic(2, 11, 0.0, 1.0);
    REQUIRE(noise.values.size() == 11);
    CHECK(noise(0.0) == noise.values[0]);
    CHECK(noise(0.31) == noise.values[3]);
    CHECK(noise(1.0) == noise.values[10]);
}

TEST_CASE("boundary samples and their residuals") {
    std::mt19937_64 rng(1);
    const PdeProblem burgers = make_burgers([](double) { return 0.0; }, 0.01, 2.0);
    const BoundarySpec pb(burgers);
    const auto pairs = pb.sample(10, rng);
    REQUIRE(pairs.size() == 5);
    for (const auto& bp : pairs) {
        CHECK(bp.kind == BoundaryTermKind::periodic_pair);
        CHECK(bp.x == 0.0);
        CHECK(bp.x_pair == 1.0);
        CHECK(bp.t >= 0.0);
        CHECK(bp.t < 2.0);
    }
    CHECK(pb.loss(pairs[0], jet_of(0.5, 0, 1, 0), jet_of(0.2, 0, 7, 0)) == doctest::Approx(0.09));

    PdeProblem with_dx = burgers;
    with_dx.periodic_derivative = true;
    CHECK(BoundarySpec(with_dx).loss(pairs[0], jet_of(0.5, 0, 1, 0), jet_of(0.2, 0, 7, 0)) ==
          doctest::Approx(0.09 + 36.0));

    const PdeProblem sorb = make_diff_sorb([](double) { return 0.0; });
    const BoundarySpec sb(sorb);
    const auto dr = sb.sample(8, rng);
    REQUIRE(dr.size() == 8);
    CHECK(dr[0].kind == BoundaryTermKind::dirichlet);
    CHECK(dr[0].label == 1.0);
    CHECK(dr[7].kind == BoundaryTermKind::robin);
    CHECK(dr[7].x == 1.0);
    const Jet2 at = jet_of(0.3, 0, 2.0, 0);
    CHECK(sb.loss(dr[7], at, at) == doctest::Approx((0.3 - 5e-4 * 2.0) * (0.3 - 5e-4 * 2.0)));
    CHECK(sb.loss(dr[0], at, at) == doctest::Approx(0.49));
}
