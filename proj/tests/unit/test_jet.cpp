#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "stpinn/jet.hpp"

using namespace stpinn;

namespace {

using Scalar2 = std::function<double(double, double)>;

// Fourth-order central differences of a scalar function of (t, x).
double fd_first(const Scalar2& f, double t, double x, int axis) {
    const double h = 1e-3;
    auto at = [&](double s) { return axis == kT ? f(t + s, x) : f(t, x + s); };
    return (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
}

double fd_second(const Scalar2& f, double t, double x, int i, int j) {
    const double h = 1e-3;
    if (i == j) {
        auto at = [&](double s) { return i == kT ? f(t + s, x) : f(t, x + s); };
        return (-at(2 * h) + 16 * at(h) - 30 * at(0) + 16 * at(-h) - at(-2 * h)) / (12 * h * h);
    }
    auto g = [&](double tt, double xx) { return fd_first(f, tt, xx, kX); };
    return fd_first(g, t, x, kT);
}

void check_against_fd(const Jet2& j, const Scalar2& f, double t, double x) {
    CHECK(j.val == doctest::Approx(f(t, x)).epsilon(1e-14));
    CHECK(j.grad[kT] == doctest::Approx(fd_first(f, t, x, kT)).epsilon(1e-8));
    CHECK(j.grad[kX] == doctest::Approx(fd_first(f, t, x, kX)).epsilon(1e-8));
    CHECK(j.h(kT, kT) == doctest::Approx(fd_second(f, t, x, kT, kT)).epsilon(1e-6));
    CHECK(j.h(kX, kX) == doctest::Approx(fd_second(f, t, x, kX, kX)).epsilon(1e-6));
    CHECK(j.h(kT, kX) == doctest::Approx(fd_second(f, t, x, kT, kX)).epsilon(1e-6));
    CHECK(j.h(kT, kX) == j.h(kX, kT));
}

}  // namespace

TEST_CASE("seeded jets are the coordinate functions") {
    const std::vector<double> in{0.3, -0.7};
    const auto s = jet_seed(in);
    REQUIRE(s.size() == 2);
    CHECK(s[0].val == 0.3);
    CHECK(s[0].grad[kT] == 1.0);
    CHECK(s[0].grad[kX] == 0.0);
    CHECK(s[1].grad[kX] == 1.0);
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) CHECK(s[0].h(i, j) == 0.0);
    }
}

TEST_CASE("jet_seed rejects unsupported dimensions") {
    const std::vector<double> one{1.0};
    const std::vector<double> four{1.0, 2.0, 3.0, 4.0};
    CHECK_THROWS_AS(jet_seed(one), std::invalid_argument);
    CHECK_THROWS_AS(jet_seed(four), std::invalid_argument);
    CHECK_THROWS_AS(jet_constant(0, 1.0), std::invalid_argument);
}

TEST_CASE("products and tanh match finite differences") {
    const double t = 0.4;
    const double x = -0.25;
    const std::vector<double> in{t, x};
    const auto s = jet_seed(in);
    const Jet2 inner = jet_add(jet_mul(s[0], s[1]), jet_mul(s[1], s[1]));
    const Jet2 out = jet_tanh(jet_scale(1.5, inner));
    check_against_fd(out, [](double a, double b) { return std::tanh(1.5 * (a * b + b * b)); }, t, x);
}

TEST_CASE("power and reciprocal match finite differences") {
    const double t = 0.6;
    const double x = 1.3;
    const std::vector<double> in{t, x};
    const auto s = jet_seed(in);
    const Jet2 base = jet_add(jet_mul(s[0], s[0]), jet_scale(2.0, s[1]));
    check_against_fd(jet_pow(base, 0.875),
                     [](double a, double b) { return std::pow(a * a + 2 * b, 0.875); }, t, x);
    check_against_fd(jet_reciprocal(jet_sub(base, s[0])),
                     [](double a, double b) { return 1.0 / (a * a + 2 * b - a); }, t, x);
}

TEST_CASE("constant jets carry no derivatives") {
    const Jet2 c = jet_constant(2, 4.5);
    const std::vector<double> in{0.1, 0.2};
    const Jet2 p = jet_mul(c, jet_seed(in)[1]);
    CHECK(p.val == doctest::Approx(0.9));
    CHECK(p.grad[kX] == 4.5);
    CHECK(p.grad[kT] == 0.0);
    CHECK(p.h(kX, kX) == 0.0);
}
