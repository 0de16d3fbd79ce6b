#pragma once

// Second-order jets: a value together with its exact gradient and Hessian
// with respect to a small set of distinguished inputs, (t, x) or (t, x, y).
//
// JetOf<S> is generic over the scalar so the same arithmetic runs on plain
// doubles (residual scoring, oracles) and on tape variables (training).

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stpinn {

inline constexpr int kMaxJetDim = 3;

template <class S>
struct JetOf {
    int dim = 0;
    S val{};
    std::array<S, kMaxJetDim> grad{};
    std::array<S, kMaxJetDim * kMaxJetDim> hess{};

    S& h(int i, int j) { return hess[i * kMaxJetDim + j]; }
    const S& h(int i, int j) const { return hess[i * kMaxJetDim + j]; }

    // Writes both triangle entries so the Hessian is symmetric by construction.
    void set_h(int i, int j, const S& v) {
        h(i, j) = v;
        h(j, i) = v;
    }
};

using Jet2 = JetOf<double>;

// Input slots used by every PDE in this library.
inline constexpr int kT = 0;
inline constexpr int kX = 1;

inline void check_jet_dim(int d) {
    if (d < 1 || d > kMaxJetDim) {
        throw std::invalid_argument("jet dimension must be in [1, 3], got " +
                                    std::to_string(d));
    }
}

template <class S>
JetOf<S> jet_constant(int d, const S& v, const S& zero) {
    check_jet_dim(d);
    JetOf<S> out;
    out.dim = d;
    out.val = v;
    for (int i = 0; i < d; ++i) {
        out.grad[i] = zero;
        for (int j = 0; j < d; ++j) out.h(i, j) = zero;
    }
    return out;
}

inline Jet2 jet_constant(int d, double v) { return jet_constant<double>(d, v, 0.0); }

// Seeds one jet per input: jet i has grad e_i and zero Hessian.
// Network inputs are (t, x) or (t, x, y), so only d in {2, 3} is accepted.
inline std::vector<Jet2> jet_seed(std::span<const double> values) {
    const int d = static_cast<int>(values.size());
    if (d != 2 && d != 3) {
        throw std::invalid_argument("jet_seed expects 2 or 3 inputs, got " +
                                    std::to_string(d));
    }
    std::vector<Jet2> jets;
    jets.reserve(values.size());
    for (int i = 0; i < d; ++i) {
        Jet2 j = jet_constant(d, values[i]);
        j.grad[i] = 1.0;
        jets.push_back(j);
    }
    return jets;
}

template <class S>
JetOf<S> jet_add(const JetOf<S>& a, const JetOf<S>& b) {
    JetOf<S> out;
    out.dim = a.dim;
    out.val = a.val + b.val;
    for (int i = 0; i < a.dim; ++i) {
        out.grad[i] = a.grad[i] + b.grad[i];
        for (int j = i; j < a.dim; ++j) out.set_h(i, j, a.h(i, j) + b.h(i, j));
    }
    return out;
}

template <class S>
JetOf<S> jet_sub(const JetOf<S>& a, const JetOf<S>& b) {
    JetOf<S> out;
    out.dim = a.dim;
    out.val = a.val - b.val;
    for (int i = 0; i < a.dim; ++i) {
        out.grad[i] = a.grad[i] - b.grad[i];
        for (int j = i; j < a.dim; ++j) out.set_h(i, j, a.h(i, j) - b.h(i, j));
    }
    return out;
}

template <class S>
JetOf<S> jet_scale(double c, const JetOf<S>& a) {
    JetOf<S> out;
    out.dim = a.dim;
    out.val = c * a.val;
    for (int i = 0; i < a.dim; ++i) {
        out.grad[i] = c * a.grad[i];
        for (int j = i; j < a.dim; ++j) out.set_h(i, j, c * a.h(i, j));
    }
    return out;
}

// Leibniz rule to second order:
//   (ab)_ij = a_ij b + a_i b_j + a_j b_i + a b_ij
template <class S>
JetOf<S> jet_mul(const JetOf<S>& a, const JetOf<S>& b) {
    JetOf<S> out;
    out.dim = a.dim;
    out.val = a.val * b.val;
    for (int i = 0; i < a.dim; ++i) {
        out.grad[i] = a.grad[i] * b.val + a.val * b.grad[i];
    }
    for (int i = 0; i < a.dim; ++i) {
        for (int j = i; j < a.dim; ++j) {
            out.set_h(i, j,
                      a.h(i, j) * b.val + a.grad[i] * b.grad[j] +
                          b.grad[i] * a.grad[j] + b.h(i, j) * a.val);
        }
    }
    return out;
}

// Chain rule for a scalar function g applied to a jet, given g(a), g'(a), g''(a):
//   grad = g' a_i,  hess = g' a_ij + g'' a_i a_j
template <class S, class D1, class D2>
JetOf<S> jet_compose(const JetOf<S>& a, const S& g0, const D1& g1, const D2& g2) {
    JetOf<S> out;
    out.dim = a.dim;
    out.val = g0;
    for (int i = 0; i < a.dim; ++i) out.grad[i] = g1 * a.grad[i];
    for (int i = 0; i < a.dim; ++i) {
        for (int j = i; j < a.dim; ++j) {
            out.set_h(i, j, g1 * a.h(i, j) + g2 * (a.grad[i] * a.grad[j]));
        }
    }
    return out;
}

template <class S>
JetOf<S> jet_tanh(const JetOf<S>& a) {
    using std::tanh;
    const S s = tanh(a.val);
    const S s1 = 1.0 - s * s;
    const S s2 = -2.0 * (s * s1);
    return jet_compose(a, s, s1, s2);
}

// a^p for a > 0.
template <class S>
JetOf<S> jet_pow(const JetOf<S>& a, double p) {
    using std::pow;
    const S g0 = pow(a.val, p);
    const S g1 = p * pow(a.val, p - 1.0);
    const S g2 = (p * (p - 1.0)) * pow(a.val, p - 2.0);
    return jet_compose(a, g0, g1, g2);
}

template <class S>
JetOf<S> jet_reciprocal(const JetOf<S>& a) {
    const S r = 1.0 / a.val;
    const S r2 = r * r;
    return jet_compose(a, r, -1.0 * r2, 2.0 * (r2 * r));
}

}  // namespace stpinn
