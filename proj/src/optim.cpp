#include "stpinn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace stpinn {

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad,
               double lr) {
    if (params.size() != state.m.size() || grad.size() != state.m.size()) {
        throw std::invalid_argument("adam_step: parameter, gradient and state sizes differ");
    }
    ++state.step;
    const auto& c = state.config;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(c.beta1, t);
    const double correction2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * (g * g);
        const double m_hat = state.m[i] / correction1;
        const double v_hat = state.v[i] / correction2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
}

LrSchedule::LrSchedule(std::vector<LrStage> stages) : stages_(std::move(stages)) {
    if (stages_.empty()) throw std::invalid_argument("learning-rate schedule has no stages");
    for (const auto& s : stages_) {
        if (!(s.lr > 0.0) || !std::isfinite(s.lr)) {
            throw std::invalid_argument("learning rates must be positive and finite");
        }
    }
}

double LrSchedule::at(std::uint64_t iteration) const {
    std::uint64_t start = 0;
    for (std::size_t i = 0; i + 1 < stages_.size(); ++i) {
        start += stages_[i].iterations;
        if (iteration < start) return stages_[i].lr;
    }
    return stages_.back().lr;
}

std::string to_string(LbfgsStop stop) {
    switch (stop) {
        case LbfgsStop::max_iters: return "max_iters";
        case LbfgsStop::converged: return "converged";
        case LbfgsStop::line_search_failed: return "line_search_failed";
    }
    return "unknown";
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Minimizer of the cubic matching (a0, f0, g0) and (a1, f1, g1), kept inside
// the bracket away from its ends; falls back to bisection.
double cubic_step(double a0, double f0, double g0, double a1, double f1, double g1) {
    const double lo = std::min(a0, a1);
    const double hi = std::max(a0, a1);
    const double margin = 0.1 * (hi - lo);
    const double d1 = g0 + g1 - 3.0 * (f0 - f1) / (a0 - a1);
    const double disc = d1 * d1 - g0 * g1;
    double a = 0.5 * (a0 + a1);
    if (disc >= 0.0) {
        const double d2 = std::copysign(std::sqrt(disc), a1 - a0);
        const double denom = g1 - g0 + 2.0 * d2;
        if (denom != 0.0) {
            const double cand = a1 - (a1 - a0) * (g1 + d2 - d1) / denom;
            if (std::isfinite(cand)) a = cand;
        }
    }
    return std::clamp(a, lo + margin, hi - margin);
}

struct Probe {
    double alpha = 0.0;
    double f = 0.0;
    double slope = 0.0;
    std::vector<double> x;
    std::vector<double> g;
};

class LineSearch {
public:
    LineSearch(const Objective& objective, const LbfgsOptions& options, int& evaluations)
        : objective_(objective), options_(options), evaluations_(evaluations) {}

    // Returns true with `out` filled when a strong-Wolfe point is found.
    bool run(std::span<const double> x, double f0, double slope0, std::span<const double> d,
             double alpha0, Probe& out, Probe& best) {
        x_ = x;
        d_ = d;
        f0_ = f0;
        slope0_ = slope0;
        Probe prev;
        prev.alpha = 0.0;
        prev.f = f0;
        prev.slope = slope0;
        double alpha = alpha0;
        for (int i = 0; i < options_.max_line_search; ++i) {
            Probe cur = probe(alpha);
            track(cur, best);
            if (!std::isfinite(cur.f) || cur.f > f0 + options_.c1 * alpha * slope0 ||
                (i > 0 && cur.f >= prev.f)) {
                return zoom(prev, cur, out, best, options_.max_line_search - i - 1);
            }
            if (std::abs(cur.slope) <= -options_.c2 * slope0) {
                out = std::move(cur);
                return true;
            }
            if (cur.slope >= 0.0) return zoom(cur, prev, out, best, options_.max_line_search - i - 1);
            prev = std::move(cur);
            alpha *= 2.0;
        }
        return false;
    }

private:
    Probe probe(double alpha) {
        Probe p;
        p.alpha = alpha;
        p.x.resize(x_.size());
        p.g.resize(x_.size());
        for (std::size_t i = 0; i < x_.size(); ++i) p.x[i] = x_[i] + alpha * d_[i];
        p.f = objective_(p.x, p.g);
        ++evaluations_;
        p.slope = dot(p.g, d_);
        return p;
    }

    void track(const Probe& p, Probe& best) const {
        if (std::isfinite(p.f) && p.f < best.f && p.f <= f0_ + options_.c1 * p.alpha * slope0_) {
            best = p;
        }
    }

    bool zoom(Probe lo, Probe hi, Probe& out, Probe& best, int budget) {
        for (int i = 0; i < budget; ++i) {
            double alpha = 0.5 * (lo.alpha + hi.alpha);
            if (std::isfinite(hi.f)) {
                alpha = cubic_step(lo.alpha, lo.f, lo.slope, hi.alpha, hi.f, hi.slope);
            }
            if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, lo.alpha)) return false;
            Probe cur = probe(alpha);
            track(cur, best);
            if (!std::isfinite(cur.f) || cur.f > f0_ + options_.c1 * alpha * slope0_ ||
                cur.f >= lo.f) {
                hi = std::move(cur);
                continue;
            }
            if (std::abs(cur.slope) <= -options_.c2 * slope0_) {
                out = std::move(cur);
                return true;
            }
            if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
            lo = std::move(cur);
        }
        return false;
    }

    const Objective& objective_;
    const LbfgsOptions& options_;
    int& evaluations_;
    std::span<const double> x_;
    std::span<const double> d_;
    double f0_ = 0.0;
    double slope0_ = 0.0;
};

}  // namespace

LbfgsResult lbfgs_minimize(const Objective& objective, std::vector<double> x0,
                           const LbfgsOptions& options, const LbfgsCallback& on_step) {
    if (options.memory < 1) throw std::invalid_argument("L-BFGS memory must be >= 1");
    LbfgsResult result;
    result.x = std::move(x0);
    const std::size_t n = result.x.size();
    std::vector<double> g(n);
    result.f = objective(result.x, g);
    result.evaluations = 1;
    result.grad_norm = norm(g);
    if (!std::isfinite(result.f)) throw std::runtime_error("L-BFGS: objective is not finite at start");

    struct Pair {
        std::vector<double> s;
        std::vector<double> y;
        double rho;
    };
    std::deque<Pair> memory;
    std::vector<double> d(n);
    std::vector<double> alpha_hist;
    LineSearch search(objective, options, result.evaluations);

    for (int iter = 0; iter < options.max_iters; ++iter) {
        if (result.grad_norm < options.grad_tol) {
            result.stop = LbfgsStop::converged;
            return result;
        }
        // Two-loop recursion: d = -H g.
        std::vector<double> q = g;
        alpha_hist.assign(memory.size(), 0.0);
        for (std::size_t k = memory.size(); k-- > 0;) {
            alpha_hist[k] = memory[k].rho * dot(memory[k].s, q);
            for (std::size_t i = 0; i < n; ++i) q[i] -= alpha_hist[k] * memory[k].y[i];
        }
        if (!memory.empty()) {
            const Pair& last = memory.back();
            const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
            for (double& v : q) v *= gamma;
        }
        for (std::size_t k = 0; k < memory.size(); ++k) {
            const double beta = memory[k].rho * dot(memory[k].y, q);
            for (std::size_t i = 0; i < n; ++i) q[i] += memory[k].s[i] * (alpha_hist[k] - beta);
        }
        for (std::size_t i = 0; i < n; ++i) d[i] = -q[i];
        double slope = dot(g, d);
        if (!(slope < 0.0)) {
            memory.clear();
            for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
            slope = -result.grad_norm * result.grad_norm;
        }
        const double alpha0 = memory.empty() ? std::min(1.0, 1.0 / result.grad_norm) : 1.0;

        Probe accepted;
        Probe best;
        best.f = result.f;
        if (!search.run(result.x, result.f, slope, d, alpha0, accepted, best)) {
            if (best.f < result.f) {
                // Keep the best sufficient-decrease point seen before giving up.
                result.x = std::move(best.x);
                result.f = best.f;
                result.grad_norm = norm(best.g);
                ++result.iterations;
                result.accepted_f.push_back(result.f);
                if (on_step) on_step(result.iterations, result.f, result.x);
            }
            result.stop = LbfgsStop::line_search_failed;
            return result;
        }

        Pair p;
        p.s.resize(n);
        p.y.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            p.s[i] = accepted.x[i] - result.x[i];
            p.y[i] = accepted.g[i] - g[i];
        }
        const double sy = dot(p.s, p.y);
        if (sy > 1e-12 * norm(p.s) * norm(p.y) && sy > 0.0) {
            p.rho = 1.0 / sy;
            memory.push_back(std::move(p));
            if (memory.size() > static_cast<std::size_t>(options.memory)) memory.pop_front();
        }
        result.x = std::move(accepted.x);
        g = std::move(accepted.g);
        result.f = accepted.f;
        result.grad_norm = norm(g);
        ++result.iterations;
        result.accepted_f.push_back(result.f);
        if (on_step) on_step(result.iterations, result.f, result.x);
    }
    result.stop = result.grad_norm < options.grad_tol ? LbfgsStop::converged : LbfgsStop::max_iters;
    return result;
}

}  // namespace stpinn
