#include "stpinn/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

#include "io_util.hpp"

namespace stpinn {

void validate(const MlpSpec& spec) {
    if (spec.input_dim != 2 && spec.input_dim != 3) {
        throw std::invalid_argument("network input_dim must be 2 or 3, got " +
                                    std::to_string(spec.input_dim));
    }
    if (spec.hidden_layers < 1) throw std::invalid_argument("network hidden_layers must be >= 1");
    if (spec.hidden_width < 1) throw std::invalid_argument("network hidden_width must be >= 1");
    if (spec.output_dim < 1) throw std::invalid_argument("network output_dim must be >= 1");
    const auto d = static_cast<std::size_t>(spec.input_dim);
    if (!spec.input_lo.empty() && spec.input_lo.size() != d) {
        throw std::invalid_argument("network input_lo must have input_dim entries");
    }
    if (!spec.input_hi.empty() && spec.input_hi.size() != d) {
        throw std::invalid_argument("network input_hi must have input_dim entries");
    }
    for (std::size_t i = 0; i < d; ++i) {
        const double lo = spec.input_lo.empty() ? 0.0 : spec.input_lo[i];
        const double hi = spec.input_hi.empty() ? 1.0 : spec.input_hi[i];
        if (!(hi > lo)) {
            throw std::invalid_argument("network input range " + std::to_string(i) +
                                        " must satisfy input_lo < input_hi");
        }
    }
}

ParamLayout::ParamLayout(const MlpSpec& spec) {
    validate(spec);
    int prev = spec.input_dim;
    for (int l = 0; l <= spec.hidden_layers; ++l) {
        const int out = l < spec.hidden_layers ? spec.hidden_width : spec.output_dim;
        fan_in_.push_back(prev);
        fan_out_.push_back(out);
        weight_offset_.push_back(size_);
        size_ += static_cast<std::size_t>(prev) * out + out;
        prev = out;
    }
}

std::size_t param_count(const MlpSpec& spec) { return ParamLayout(spec).size(); }

std::vector<LayerParams> unflatten(const MlpSpec& spec, std::span<const double> params) {
    const ParamLayout layout(spec);
    if (params.size() != layout.size()) {
        throw std::invalid_argument("parameter vector has " + std::to_string(params.size()) +
                                    " entries, layout expects " + std::to_string(layout.size()));
    }
    std::vector<LayerParams> layers;
    for (std::size_t l = 0; l < layout.layer_count(); ++l) {
        LayerParams lp;
        lp.fan_in = layout.fan_in(l);
        lp.fan_out = layout.fan_out(l);
        const auto w = params.subspan(layout.weight_offset(l),
                                      static_cast<std::size_t>(lp.fan_in) * lp.fan_out);
        const auto b = params.subspan(layout.bias_offset(l), static_cast<std::size_t>(lp.fan_out));
        lp.weights.assign(w.begin(), w.end());
        lp.bias.assign(b.begin(), b.end());
        layers.push_back(std::move(lp));
    }
    return layers;
}

ParamVector flatten(const std::vector<LayerParams>& layers) {
    ParamVector out;
    for (const auto& lp : layers) {
        out.insert(out.end(), lp.weights.begin(), lp.weights.end());
        out.insert(out.end(), lp.bias.begin(), lp.bias.end());
    }
    return out;
}

ParamVector init_params(const MlpSpec& spec, std::uint64_t seed) {
    const ParamLayout layout(spec);
    ParamVector params(layout.size(), 0.0);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < layout.layer_count(); ++l) {
        const double bound = std::sqrt(6.0 / (layout.fan_in(l) + layout.fan_out(l)));
        std::uniform_real_distribution<double> dist(-bound, bound);
        const std::size_t n = static_cast<std::size_t>(layout.fan_in(l)) * layout.fan_out(l);
        for (std::size_t k = 0; k < n; ++k) params[layout.weight_offset(l) + k] = dist(rng);
    }
    return params;
}

namespace {

// Batched evaluation engine.
//
// Activations of a layer are stored component-major: rows [c*N, (c+1)*N)
// hold jet component c of every point, one column per unit. Component 0 is
// the value, 1..d the input gradient, then the upper-triangular Hessian.
struct JetComponents {
    int d = 0;
    int count = 1;
    int grad(int i) const { return 1 + i; }
    int hess(int i, int j) const {
        if (i > j) std::swap(i, j);
        // Row-wise packing of the upper triangle.
        return 1 + d + i * d - i * (i - 1) / 2 + (j - i);
    }
};

JetComponents components(int d, bool second_order) {
    JetComponents jc;
    jc.d = d;
    jc.count = second_order ? 1 + d + d * (d + 1) / 2 : 1;
    return jc;
}

struct ForwardCache {
    int n = 0;
    JetComponents jc;
    // acts[l]: input of layer l, (count*n) x fan_in(l).
    // pre[l]: affine output of layer l, (count*n) x fan_out(l).
    std::vector<std::vector<double>> acts;
    std::vector<std::vector<double>> pre;
};

// Eight doubles handled as one value; lowered to whatever vector width the
// target has. Arithmetic stays elementwise mul then add.
typedef double Vec8 __attribute__((vector_size(64)));

inline Vec8 load8(const double* p) {
    Vec8 v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

inline void store8(double* p, Vec8 v) { std::memcpy(p, &v, sizeof v); }

// C[i, j] += sum_k A[i, k] B[k, j] on an RB x (8 NV) tile held in registers.
// Every entry sums k in increasing order whatever the tile shape, so results
// do not depend on how rows and columns are blocked.
template <int RB, int NV>
void tile(const double* a, std::ptrdiff_t a_rs, std::ptrdiff_t a_ks, int inner, const double* b,
          std::ptrdiff_t b_ks, double* c, std::ptrdiff_t c_rs) {
    Vec8 acc[RB][NV];
    for (int i = 0; i < RB; ++i) {
        for (int j = 0; j < NV; ++j) acc[i][j] = load8(c + i * c_rs + 8 * j);
    }
    for (int k = 0; k < inner; ++k) {
        const double* bk = b + k * b_ks;
        Vec8 bv[NV];
        for (int j = 0; j < NV; ++j) bv[j] = load8(bk + 8 * j);
        for (int i = 0; i < RB; ++i) {
            const double av = a[i * a_rs + k * a_ks];
            for (int j = 0; j < NV; ++j) acc[i][j] += av * bv[j];
        }
    }
    for (int i = 0; i < RB; ++i) {
        for (int j = 0; j < NV; ++j) store8(c + i * c_rs + 8 * j, acc[i][j]);
    }
}

// Scalar column for widths that are not a multiple of 8.
template <int RB>
void tile_column(const double* a, std::ptrdiff_t a_rs, std::ptrdiff_t a_ks, int inner,
                 const double* b, std::ptrdiff_t b_ks, double* c, std::ptrdiff_t c_rs) {
    double acc[RB];
    for (int i = 0; i < RB; ++i) acc[i] = c[i * c_rs];
    for (int k = 0; k < inner; ++k) {
        for (int i = 0; i < RB; ++i) acc[i] += a[i * a_rs + k * a_ks] * b[k * b_ks];
    }
    for (int i = 0; i < RB; ++i) c[i * c_rs] = acc[i];
}

template <int RB>
void row_panel(const double* a, std::ptrdiff_t a_rs, std::ptrdiff_t a_ks, int inner,
               const double* b, std::ptrdiff_t b_ks, int cols, double* c, std::ptrdiff_t c_rs) {
    int j = 0;
    for (; j + 32 <= cols; j += 32) tile<RB, 4>(a, a_rs, a_ks, inner, b + j, b_ks, c + j, c_rs);
    for (; j + 16 <= cols; j += 16) tile<RB, 2>(a, a_rs, a_ks, inner, b + j, b_ks, c + j, c_rs);
    for (; j + 8 <= cols; j += 8) tile<RB, 1>(a, a_rs, a_ks, inner, b + j, b_ks, c + j, c_rs);
    for (; j < cols; ++j) tile_column<RB>(a, a_rs, a_ks, inner, b + j, b_ks, c + j, c_rs);
}

// C (rows x cols, row stride c_rs) += A B with A addressed through explicit
// row and inner strides, so A may also be read transposed. The inner
// dimension is walked in slices so long reductions stay in cache.
void gemm_acc(const double* a, std::ptrdiff_t a_rs, std::ptrdiff_t a_ks, std::size_t rows,
              std::size_t inner, const double* b, std::ptrdiff_t b_ks, int cols, double* c,
              std::ptrdiff_t c_rs) {
    constexpr std::size_t kSlice = 64;
    for (std::size_t k0 = 0; k0 < inner; k0 += kSlice) {
        const int m = static_cast<int>(std::min(kSlice, inner - k0));
        const double* as = a + static_cast<std::ptrdiff_t>(k0) * a_ks;
        const double* bs = b + static_cast<std::ptrdiff_t>(k0) * b_ks;
        std::size_t r = 0;
        for (; r + 4 <= rows; r += 4) {
            row_panel<4>(as + static_cast<std::ptrdiff_t>(r) * a_rs, a_rs, a_ks, m, bs, b_ks, cols,
                         c + static_cast<std::ptrdiff_t>(r) * c_rs, c_rs);
        }
        for (; r < rows; ++r) {
            row_panel<1>(as + static_cast<std::ptrdiff_t>(r) * a_rs, a_rs, a_ks, m, bs, b_ks, cols,
                         c + static_cast<std::ptrdiff_t>(r) * c_rs, c_rs);
        }
    }
}

// Z[r, o] = (r < bias_rows ? b[o] : 0) + sum_k A[r, k] W[o, k]
// Summation runs over k in order for every entry, independent of the row
// count, so value rows agree bitwise between value-only and jet passes.
void affine(const double* a, std::size_t rows, int fan_in, const double* wt, const double* b,
            std::size_t bias_rows, int fan_out, double* z) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* zr = z + r * fan_out;
        if (r < bias_rows) {
            for (int o = 0; o < fan_out; ++o) zr[o] = b[o];
        } else {
            for (int o = 0; o < fan_out; ++o) zr[o] = 0.0;
        }
    }
    gemm_acc(a, fan_in, 1, rows, fan_in, wt, fan_out, fan_out, z, fan_out);
}

// Offset of Hessian component (i, j), i <= j, for input dimension D.
template <int D>
constexpr int hess_index(int i, int j) {
    return 1 + D + i * D - i * (i - 1) / 2 + (j - i);
}

template <int D>
void tanh_forward_jets(const double* z, std::size_t n, std::size_t w, double* a) {
    const std::size_t stride = n * w;
    for (std::size_t base = 0; base < stride; ++base) {
        const double s = std::tanh(z[base]);
        a[base] = s;
        const double s1 = 1.0 - s * s;
        const double s2 = -2.0 * (s * s1);
        double zg[D];
        for (int i = 0; i < D; ++i) {
            zg[i] = z[(1 + i) * stride + base];
            a[(1 + i) * stride + base] = s1 * zg[i];
        }
        for (int i = 0; i < D; ++i) {
            for (int j = i; j < D; ++j) {
                const std::size_t hij = hess_index<D>(i, j) * stride + base;
                a[hij] = s1 * z[hij] + s2 * (zg[i] * zg[j]);
            }
        }
    }
}

void tanh_forward(const std::vector<double>& z, int width, int n, const JetComponents& jc,
                  std::vector<double>& a) {
    a.resize(z.size());
    const std::size_t w = static_cast<std::size_t>(width);
    const std::size_t np = static_cast<std::size_t>(n);
    if (jc.count == 1) {
        for (std::size_t i = 0; i < np * w; ++i) a[i] = std::tanh(z[i]);
        return;
    }
    switch (jc.d) {
        case 1: tanh_forward_jets<1>(z.data(), np, w, a.data()); break;
        case 2: tanh_forward_jets<2>(z.data(), np, w, a.data()); break;
        case 3: tanh_forward_jets<3>(z.data(), np, w, a.data()); break;
        default: throw std::logic_error("unsupported jet dimension");
    }
}

// Adjoint of tanh_forward_jets: abar holds d(result)/d(activation jets),
// zbar receives d(result)/d(pre-activation jets).
template <int D>
void tanh_backward_jets(const double* a, const double* zprev, const double* abar, std::size_t n,
                        std::size_t w, double* zbar) {
    const std::size_t stride = n * w;
    for (std::size_t base = 0; base < stride; ++base) {
        const double s = a[base];
        const double s1 = 1.0 - s * s;
        const double s2 = -2.0 * (s * s1);
        double sbar1 = 0.0;
        double sbar2 = 0.0;
        double zg[D];
        double zgbar[D];
        for (int i = 0; i < D; ++i) {
            const std::size_t gi = (1 + i) * stride + base;
            zg[i] = zprev[gi];
            zgbar[i] = s1 * abar[gi];
            sbar1 += abar[gi] * zg[i];
        }
        for (int i = 0; i < D; ++i) {
            for (int j = i; j < D; ++j) {
                const std::size_t hij = hess_index<D>(i, j) * stride + base;
                const double ah = abar[hij];
                zbar[hij] = s1 * ah;
                sbar1 += ah * zprev[hij];
                sbar2 += ah * (zg[i] * zg[j]);
                zgbar[i] += s2 * ah * zg[j];
                zgbar[j] += s2 * ah * zg[i];
            }
        }
        for (int i = 0; i < D; ++i) zbar[(1 + i) * stride + base] = zgbar[i];
        zbar[base] = s1 * (abar[base] + sbar1 * (-2.0 * s) + sbar2 * (-2.0 + 6.0 * s * s));
    }
}

void tanh_backward(const std::vector<double>& a, const std::vector<double>& zprev,
                   const std::vector<double>& abar, std::size_t n, std::size_t w,
                   const JetComponents& jc, std::vector<double>& zbar) {
    zbar.resize(abar.size());
    if (jc.count == 1) {
        for (std::size_t i = 0; i < n * w; ++i) zbar[i] = (1.0 - a[i] * a[i]) * abar[i];
        return;
    }
    switch (jc.d) {
        case 1: tanh_backward_jets<1>(a.data(), zprev.data(), abar.data(), n, w, zbar.data()); break;
        case 2: tanh_backward_jets<2>(a.data(), zprev.data(), abar.data(), n, w, zbar.data()); break;
        case 3: tanh_backward_jets<3>(a.data(), zprev.data(), abar.data(), n, w, zbar.data()); break;
        default: throw std::logic_error("unsupported jet dimension");
    }
}

void input_activation(const MlpSpec& spec, std::span<const double> points, int n,
                      const JetComponents& jc, std::vector<double>& a) {
    const int d = spec.input_dim;
    const std::size_t nn = static_cast<std::size_t>(n);
    a.assign(static_cast<std::size_t>(jc.count) * nn * d, 0.0);
    for (int i = 0; i < d; ++i) {
        const double lo = spec.input_lo.empty() ? 0.0 : spec.input_lo[i];
        const double hi = spec.input_hi.empty() ? 1.0 : spec.input_hi[i];
        const double scale = 2.0 / (hi - lo);
        for (std::size_t p = 0; p < nn; ++p) {
            a[p * d + i] = (points[p * d + i] - lo) * scale - 1.0;
            if (jc.count > 1) a[(jc.grad(i) * nn + p) * d + i] = scale;
        }
    }
}

std::vector<double> transposed(std::span<const double> w, int rows, int cols) {
    std::vector<double> t(w.size());
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) t[static_cast<std::size_t>(c) * rows + r] = w[static_cast<std::size_t>(r) * cols + c];
    }
    return t;
}

void check_points(const MlpSpec& spec, std::span<const double> points) {
    if (points.size() % static_cast<std::size_t>(spec.input_dim) != 0) {
        throw std::invalid_argument("point buffer length " + std::to_string(points.size()) +
                                    " is not a multiple of input_dim " +
                                    std::to_string(spec.input_dim));
    }
}

void check_params(const ParamLayout& layout, std::span<const double> params) {
    if (params.size() != layout.size()) {
        throw std::invalid_argument("parameter vector has " + std::to_string(params.size()) +
                                    " entries, network expects " + std::to_string(layout.size()));
    }
}

ForwardCache run_forward(std::span<const double> params, const MlpSpec& spec,
                         const ParamLayout& layout, std::span<const double> points,
                         bool second_order) {
    ForwardCache cache;
    cache.n = static_cast<int>(points.size() / static_cast<std::size_t>(spec.input_dim));
    cache.jc = components(spec.input_dim, second_order);
    const std::size_t rows = static_cast<std::size_t>(cache.jc.count) * cache.n;
    const std::size_t layers = layout.layer_count();
    cache.acts.resize(layers);
    cache.pre.resize(layers);
    input_activation(spec, points, cache.n, cache.jc, cache.acts[0]);
    for (std::size_t l = 0; l < layers; ++l) {
        const int fi = layout.fan_in(l);
        const int fo = layout.fan_out(l);
        const auto wt = transposed(params.subspan(layout.weight_offset(l),
                                                  static_cast<std::size_t>(fi) * fo),
                                   fo, fi);
        cache.pre[l].resize(rows * fo);
        affine(cache.acts[l].data(), rows, fi, wt.data(), params.data() + layout.bias_offset(l),
               static_cast<std::size_t>(cache.n), fo, cache.pre[l].data());
        if (l + 1 < layers) tanh_forward(cache.pre[l], fo, cache.n, cache.jc, cache.acts[l + 1]);
    }
    return cache;
}

// Reverse pass: given d(result)/d(output pre-activation), accumulate the
// parameter gradient.
void run_backward(std::span<const double> params, const ParamLayout& layout,
                  const ForwardCache& cache, std::vector<double> zbar,
                  std::span<double> param_adj) {
    const JetComponents& jc = cache.jc;
    const std::size_t n = static_cast<std::size_t>(cache.n);
    const std::size_t rows = static_cast<std::size_t>(jc.count) * n;
    std::vector<double> abar;
    std::vector<double> gwt;
    for (std::size_t l = layout.layer_count(); l-- > 0;) {
        const int fi = layout.fan_in(l);
        const int fo = layout.fan_out(l);
        const std::vector<double>& a = cache.acts[l];

        // Jet components whose adjoint is identically zero (derivatives the
        // loss never reads) contribute nothing and are skipped.
        std::vector<char> live(static_cast<std::size_t>(jc.count), 0);
        for (int comp = 0; comp < jc.count; ++comp) {
            const auto first = zbar.begin() + static_cast<std::ptrdiff_t>(comp * n * fo);
            live[comp] = std::any_of(first, first + static_cast<std::ptrdiff_t>(n * fo),
                                     [](double v) { return v != 0.0; });
        }

        gwt.assign(static_cast<std::size_t>(fi) * fo, 0.0);
        for (int comp = 0; comp < jc.count; ++comp) {
            if (!live[comp]) continue;
            const std::size_t r0 = static_cast<std::size_t>(comp) * n;
            // gwt[k, o] += sum_r a[r, k] zbar[r, o]
            gemm_acc(a.data() + r0 * fi, 1, fi, static_cast<std::size_t>(fi), static_cast<int>(n),
                     zbar.data() + r0 * fo, fo, fo, gwt.data(), fo);
        }
        const std::size_t woff = layout.weight_offset(l);
        for (int o = 0; o < fo; ++o) {
            for (int k = 0; k < fi; ++k) {
                param_adj[woff + static_cast<std::size_t>(o) * fi + k] +=
                    gwt[static_cast<std::size_t>(k) * fo + o];
            }
        }
        const std::size_t boff = layout.bias_offset(l);
        for (std::size_t r = 0; r < n; ++r) {
            const double* zr = zbar.data() + r * fo;
            for (int o = 0; o < fo; ++o) param_adj[boff + o] += zr[o];
        }
        if (l == 0) break;

        const double* w = params.data() + woff;
        abar.assign(rows * fi, 0.0);
        for (int comp = 0; comp < jc.count; ++comp) {
            if (!live[comp]) continue;
            const std::size_t r0 = static_cast<std::size_t>(comp) * n;
            // abar[r, k] += sum_o zbar[r, o] W[o, k]
            gemm_acc(zbar.data() + r0 * fo, fo, 1, n, fo, w, fi, fi, abar.data() + r0 * fi, fi);
        }

        // Through the tanh of the previous layer.
        tanh_backward(a, cache.pre[l - 1], abar, n, static_cast<std::size_t>(fi), jc, zbar);
    }
}

constexpr std::size_t kChunkPoints = 4096;

class NetworkBlock final : public TapeBlock {
public:
    NetworkBlock(std::span<const double> params, const MlpSpec& spec,
                 std::span<const double> points, bool second_order)
        : spec_(spec),
          layout_(spec),
          params_(params.begin(), params.end()),
          points_(points.begin(), points.end()),
          second_order_(second_order) {
        check_params(layout_, params_);
        check_points(spec_, points_);
        n_ = points_.size() / static_cast<std::size_t>(spec_.input_dim);
        jc_ = components(spec_.input_dim, second_order_);
    }

    std::size_t output_count() const override {
        return n_ * static_cast<std::size_t>(spec_.output_dim) * jc_.count;
    }

    void evaluate(std::span<double> out) override {
        cache_ = run_forward(params_, spec_, layout_, points_, second_order_);
        const auto& z = cache_.pre.back();
        const std::size_t od = static_cast<std::size_t>(spec_.output_dim);
        for (std::size_t p = 0; p < n_; ++p) {
            for (std::size_t o = 0; o < od; ++o) {
                for (int c = 0; c < jc_.count; ++c) {
                    out[(p * od + o) * jc_.count + c] = z[(c * n_ + p) * od + o];
                }
            }
        }
    }

    void backward(std::span<const double> adj, std::span<double> param_adj) const override {
        const std::size_t od = static_cast<std::size_t>(spec_.output_dim);
        std::vector<double> zbar(static_cast<std::size_t>(jc_.count) * n_ * od);
        for (std::size_t p = 0; p < n_; ++p) {
            for (std::size_t o = 0; o < od; ++o) {
                for (int c = 0; c < jc_.count; ++c) {
                    zbar[(c * n_ + p) * od + o] = adj[(p * od + o) * jc_.count + c];
                }
            }
        }
        run_backward(params_, layout_, cache_, std::move(zbar), param_adj);
    }

    const JetComponents& components_layout() const { return jc_; }

private:
    MlpSpec spec_;
    ParamLayout layout_;
    std::vector<double> params_;
    std::vector<double> points_;
    bool second_order_;
    std::size_t n_ = 0;
    JetComponents jc_;
    ForwardCache cache_;
};

void check_tape(const ParamLayout& layout, const Tape& tape) {
    if (tape.param_count() != layout.size()) {
        throw std::invalid_argument("tape parameter count " + std::to_string(tape.param_count()) +
                                    " does not match network parameter count " +
                                    std::to_string(layout.size()));
    }
}

}  // namespace

std::vector<double> forward_batch(std::span<const double> params, const MlpSpec& spec,
                                  std::span<const double> points) {
    const ParamLayout layout(spec);
    check_params(layout, params);
    check_points(spec, points);
    const std::size_t d = static_cast<std::size_t>(spec.input_dim);
    const std::size_t od = static_cast<std::size_t>(spec.output_dim);
    const std::size_t n = points.size() / d;
    std::vector<double> out(n * od);
    for (std::size_t start = 0; start < n; start += kChunkPoints) {
        const std::size_t m = std::min(kChunkPoints, n - start);
        const auto cache = run_forward(params, spec, layout, points.subspan(start * d, m * d), false);
        std::copy(cache.pre.back().begin(), cache.pre.back().end(), out.begin() + start * od);
    }
    return out;
}

std::vector<double> forward(std::span<const double> params, const MlpSpec& spec,
                            std::span<const double> input) {
    if (input.size() != static_cast<std::size_t>(spec.input_dim)) {
        throw std::invalid_argument("forward: input has " + std::to_string(input.size()) +
                                    " components, network expects " +
                                    std::to_string(spec.input_dim));
    }
    return forward_batch(params, spec, input);
}

std::vector<Jet2> evaluate_jets(std::span<const double> params, const MlpSpec& spec,
                                std::span<const double> points) {
    const ParamLayout layout(spec);
    check_params(layout, params);
    check_points(spec, points);
    const int d = spec.input_dim;
    const std::size_t od = static_cast<std::size_t>(spec.output_dim);
    const std::size_t n = points.size() / static_cast<std::size_t>(d);
    std::vector<Jet2> out(n * od);
    for (std::size_t start = 0; start < n; start += kChunkPoints) {
        const std::size_t m = std::min(kChunkPoints, n - start);
        const auto cache = run_forward(params, spec, layout,
                                       points.subspan(start * d, m * d), true);
        const auto& z = cache.pre.back();
        const auto& jc = cache.jc;
        for (std::size_t p = 0; p < m; ++p) {
            for (std::size_t o = 0; o < od; ++o) {
                auto at = [&](int c) { return z[(c * m + p) * od + o]; };
                Jet2& j = out[(start + p) * od + o];
                j = jet_constant(d, at(0));
                for (int i = 0; i < d; ++i) {
                    j.grad[i] = at(jc.grad(i));
                    for (int k = i; k < d; ++k) j.set_h(i, k, at(jc.hess(i, k)));
                }
            }
        }
    }
    return out;
}

std::vector<TapeJet> forward_jet_batch(std::span<const double> params, const MlpSpec& spec,
                                       std::span<const double> points, Tape& tape) {
    const ParamLayout layout(spec);
    check_tape(layout, tape);
    auto block = std::make_unique<NetworkBlock>(params, spec, points, true);
    const JetComponents jc = block->components_layout();
    const std::size_t d = static_cast<std::size_t>(spec.input_dim);
    const std::size_t od = static_cast<std::size_t>(spec.output_dim);
    const std::size_t n = points.size() / d;
    const Var first = tape.push_block(std::move(block));
    std::vector<TapeJet> jets(n * od);
    for (std::size_t k = 0; k < n * od; ++k) {
        const std::uint32_t base = first.index + static_cast<std::uint32_t>(k * jc.count);
        TapeJet& j = jets[k];
        j.dim = spec.input_dim;
        j.val = Var{&tape, base};
        for (int i = 0; i < spec.input_dim; ++i) {
            j.grad[i] = Var{&tape, base + static_cast<std::uint32_t>(jc.grad(i))};
            for (int m = i; m < spec.input_dim; ++m) {
                j.set_h(i, m, Var{&tape, base + static_cast<std::uint32_t>(jc.hess(i, m))});
            }
        }
    }
    return jets;
}

std::vector<TapeJet> forward_jet(std::span<const double> params, const MlpSpec& spec,
                                 std::span<const double> input, Tape& tape) {
    if (input.size() != static_cast<std::size_t>(spec.input_dim)) {
        throw std::invalid_argument("forward_jet: input has " + std::to_string(input.size()) +
                                    " components, network expects " +
                                    std::to_string(spec.input_dim));
    }
    return forward_jet_batch(params, spec, input, tape);
}

std::vector<Var> forward_batch_on_tape(std::span<const double> params, const MlpSpec& spec,
                                       std::span<const double> points, Tape& tape) {
    const ParamLayout layout(spec);
    check_tape(layout, tape);
    auto block = std::make_unique<NetworkBlock>(params, spec, points, false);
    const std::size_t count = block->output_count();
    const Var first = tape.push_block(std::move(block));
    std::vector<Var> out(count);
    for (std::size_t k = 0; k < count; ++k) {
        out[k] = Var{&tape, first.index + static_cast<std::uint32_t>(k)};
    }
    return out;
}

namespace {

constexpr const char* kCheckpointMagic = "stpinn-ckpt v1";

std::string join_doubles(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += io::format_double(v[i]);
    }
    return s;
}

std::vector<double> split_doubles(const std::string& text, const std::string& what) {
    std::vector<double> v;
    if (text.empty()) return v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) v.push_back(io::parse_double(io::trim(item), what));
    return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const MlpSpec& spec,
                      std::span<const double> params) {
    const ParamLayout layout(spec);
    check_params(layout, params);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
    out << kCheckpointMagic << '\n';
    out << "input_dim=" << spec.input_dim << '\n';
    out << "hidden_layers=" << spec.hidden_layers << '\n';
    out << "hidden_width=" << spec.hidden_width << '\n';
    out << "output_dim=" << spec.output_dim << '\n';
    out << "activation=tanh\n";
    out << "input_lo=" << join_doubles(spec.input_lo) << '\n';
    out << "input_hi=" << join_doubles(spec.input_hi) << '\n';
    out << "---\n";
    io::write_f64_le(out, params);
    if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kCheckpointMagic) {
        throw std::runtime_error("not a '" + std::string(kCheckpointMagic) +
                                 "' checkpoint (bad header): " + path.string());
    }
    std::map<std::string, std::string> kv;
    bool separator = false;
    while (std::getline(in, line)) {
        if (line == "---") {
            separator = true;
            break;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("malformed checkpoint header line: '" + line + "'");
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (!separator) throw std::runtime_error("checkpoint header missing '---': " + path.string());
    auto need = [&](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw std::runtime_error("checkpoint missing key '" + key + "'");
        return it->second;
    };
    Checkpoint ck;
    ck.spec.input_dim = static_cast<int>(io::parse_int(need("input_dim"), "input_dim"));
    ck.spec.hidden_layers = static_cast<int>(io::parse_int(need("hidden_layers"), "hidden_layers"));
    ck.spec.hidden_width = static_cast<int>(io::parse_int(need("hidden_width"), "hidden_width"));
    ck.spec.output_dim = static_cast<int>(io::parse_int(need("output_dim"), "output_dim"));
    if (need("activation") != "tanh") {
        throw std::runtime_error("unsupported activation '" + need("activation") + "'");
    }
    ck.spec.input_lo = split_doubles(kv["input_lo"], "input_lo");
    ck.spec.input_hi = split_doubles(kv["input_hi"], "input_hi");
    validate(ck.spec);
    ck.params = io::read_f64_le(in, param_count(ck.spec));
    if (in.peek() != std::char_traits<char>::eof()) {
        throw std::runtime_error("trailing bytes after checkpoint payload: " + path.string());
    }
    return ck;
}

}  // namespace stpinn
