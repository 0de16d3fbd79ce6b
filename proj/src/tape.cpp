#include "stpinn/tape.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace stpinn {

namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

Tape& same_tape(Var a, Var b) {
    if (a.tape == nullptr || a.tape != b.tape) {
        throw std::logic_error("tape variables from different tapes combined");
    }
    return *a.tape;
}

Tape& tape_of(Var a) {
    if (a.tape == nullptr) throw std::logic_error("unbound tape variable");
    return *a.tape;
}

}  // namespace

double Var::value() const { return tape_of(*this).value(index); }

Var Tape::push(Op op, std::uint32_t a, std::uint32_t b, double aux, double value) {
    if (nodes_.size() >= kNone) throw std::length_error("tape is full");
    nodes_.push_back(Node{aux, a, b, op, value});
    return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::check(Var v) const {
    if (v.tape != this || v.index >= nodes_.size()) {
        throw std::invalid_argument("variable was not recorded on this tape");
    }
}

Var Tape::constant(double v) { return push(Op::constant, kNone, kNone, 0.0, v); }

Var Tape::parameter(std::size_t k, double v) {
    if (k >= param_count_) {
        throw std::out_of_range("parameter index " + std::to_string(k) +
                                " exceeds parameter count " +
                                std::to_string(param_count_));
    }
    return push(Op::parameter, static_cast<std::uint32_t>(k), kNone, 0.0, v);
}

Var Tape::add(Var a, Var b) {
    check(a);
    check(b);
    return push(Op::add, a.index, b.index, 0.0, value(a.index) + value(b.index));
}

Var Tape::sub(Var a, Var b) {
    check(a);
    check(b);
    return push(Op::sub, a.index, b.index, 0.0, value(a.index) - value(b.index));
}

Var Tape::mul(Var a, Var b) {
    check(a);
    check(b);
    return push(Op::mul, a.index, b.index, 0.0, value(a.index) * value(b.index));
}

Var Tape::scale(Var a, double c) {
    check(a);
    return push(Op::scale, a.index, kNone, c, value(a.index) * c);
}

Var Tape::offset(Var a, double c) {
    check(a);
    return push(Op::offset, a.index, kNone, c, value(a.index) + c);
}

Var Tape::tanh(Var a) {
    check(a);
    return push(Op::tanh, a.index, kNone, 0.0, std::tanh(value(a.index)));
}

Var Tape::power(Var a, double p) {
    check(a);
    return push(Op::power, a.index, kNone, p, std::pow(value(a.index), p));
}

Var Tape::reciprocal(Var a) {
    check(a);
    return push(Op::reciprocal, a.index, kNone, 0.0, 1.0 / value(a.index));
}

Var Tape::push_block(std::unique_ptr<TapeBlock> block) {
    const std::size_t count = block->output_count();
    if (nodes_.size() + count >= kNone) throw std::length_error("tape is full");
    const auto first = static_cast<std::uint32_t>(nodes_.size());
    std::vector<double> out(count);
    block->evaluate(out);
    for (std::size_t k = 0; k < count; ++k) {
        nodes_.push_back(Node{0.0, kNone, kNone, Op::block_output, out[k]});
    }
    blocks_.push_back(BlockRecord{first, static_cast<std::uint32_t>(count), std::move(block)});
    return Var{this, first};
}

std::vector<double> Tape::values() const {
    std::vector<double> v(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) v[i] = nodes_[i].value;
    return v;
}

std::vector<double> Tape::replay() {
    std::vector<double> v(nodes_.size());
    std::size_t next_block = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        switch (n.op) {
            case Op::constant:
            case Op::parameter: v[i] = n.value; break;
            case Op::add: v[i] = v[n.a] + v[n.b]; break;
            case Op::sub: v[i] = v[n.a] - v[n.b]; break;
            case Op::mul: v[i] = v[n.a] * v[n.b]; break;
            case Op::scale: v[i] = v[n.a] * n.aux; break;
            case Op::offset: v[i] = v[n.a] + n.aux; break;
            case Op::tanh: v[i] = std::tanh(v[n.a]); break;
            case Op::power: v[i] = std::pow(v[n.a], n.aux); break;
            case Op::reciprocal: v[i] = 1.0 / v[n.a]; break;
            case Op::block_output: {
                BlockRecord& rec = blocks_[next_block++];
                rec.block->evaluate(std::span<double>(v).subspan(rec.first, rec.count));
                i = rec.first + rec.count - 1;
                break;
            }
        }
    }
    return v;
}

Tape::Adjoints Tape::reverse_sweep(Var result) const {
    check(result);
    Adjoints adj{std::vector<double>(nodes_.size(), 0.0),
                 std::vector<double>(param_count_, 0.0)};
    auto& a = adj.nodes;
    a[result.index] = 1.0;

    // Blocks are ordered by position; walk them backwards alongside the nodes.
    std::size_t block_end = blocks_.size();
    while (block_end > 0 && blocks_[block_end - 1].first > result.index) --block_end;

    for (std::size_t ii = result.index + 1; ii-- > 0;) {
        const Node& n = nodes_[ii];
        const double g = a[ii];
        switch (n.op) {
            case Op::constant: break;
            case Op::parameter: adj.params[n.a] += g; break;
            case Op::add:
                a[n.a] += g;
                a[n.b] += g;
                break;
            case Op::sub:
                a[n.a] += g;
                a[n.b] -= g;
                break;
            case Op::mul:
                a[n.a] += g * nodes_[n.b].value;
                a[n.b] += g * nodes_[n.a].value;
                break;
            case Op::scale: a[n.a] += g * n.aux; break;
            case Op::offset: a[n.a] += g; break;
            case Op::tanh: a[n.a] += g * (1.0 - n.value * n.value); break;
            case Op::power:
                a[n.a] += g * n.aux * std::pow(nodes_[n.a].value, n.aux - 1.0);
                break;
            case Op::reciprocal: a[n.a] -= g * n.value * n.value; break;
            case Op::block_output: {
                const BlockRecord& rec = blocks_[block_end - 1];
                if (ii == rec.first) {
                    rec.block->backward(
                        std::span<const double>(a).subspan(rec.first, rec.count),
                        adj.params);
                    --block_end;
                }
                break;
            }
        }
    }
    return adj;
}

std::vector<double> param_grad(const Tape& tape, Var result) {
    if (result.tape != &tape) {
        throw std::invalid_argument("param_grad: result was not recorded on this tape");
    }
    return tape.reverse_sweep(result).params;
}

Var operator+(Var a, Var b) { return same_tape(a, b).add(a, b); }
Var operator-(Var a, Var b) { return same_tape(a, b).sub(a, b); }
Var operator*(Var a, Var b) { return same_tape(a, b).mul(a, b); }
Var operator/(Var a, Var b) {
    Tape& t = same_tape(a, b);
    return t.mul(a, t.reciprocal(b));
}
Var operator-(Var a) { return tape_of(a).scale(a, -1.0); }
Var operator+(Var a, double c) { return tape_of(a).offset(a, c); }
Var operator+(double c, Var a) { return tape_of(a).offset(a, c); }
Var operator-(Var a, double c) { return tape_of(a).offset(a, -c); }
Var operator-(double c, Var a) { return tape_of(a).offset(tape_of(a).scale(a, -1.0), c); }
Var operator*(Var a, double c) { return tape_of(a).scale(a, c); }
Var operator*(double c, Var a) { return tape_of(a).scale(a, c); }
Var operator/(Var a, double c) { return tape_of(a).scale(a, 1.0 / c); }
Var operator/(double c, Var a) { return tape_of(a).scale(tape_of(a).reciprocal(a), c); }
Var tanh(Var a) { return tape_of(a).tanh(a); }
Var pow(Var a, double p) { return tape_of(a).power(a, p); }
Var square(Var a) { return tape_of(a).mul(a, a); }

}  // namespace stpinn
