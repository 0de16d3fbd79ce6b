#pragma once

// Reverse-mode tape over scalar operations.
//
// Every value computed during one loss evaluation is appended to a Tape.
// A single reverse sweep then yields the adjoint of every recorded value and,
// in particular, the gradient of a scalar result with respect to all
// trainable parameters. Large structured computations (a network pass over a
// whole batch) are recorded as one TapeBlock with a hand-written adjoint.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace stpinn {

class Tape;

struct Var {
    Tape* tape = nullptr;
    std::uint32_t index = 0;

    double value() const;
};

// A batch computation whose outputs are recorded as contiguous tape values.
// Inputs are trainable parameters and constants only, never other tape values.
class TapeBlock {
public:
    virtual ~TapeBlock() = default;

    virtual std::size_t output_count() const = 0;

    // Computes all outputs. May cache intermediates needed by backward().
    virtual void evaluate(std::span<double> outputs) = 0;

    // Accumulates d(result)/d(param) given d(result)/d(output).
    virtual void backward(std::span<const double> output_adjoints,
                          std::span<double> param_adjoints) const = 0;
};

enum class Op : std::uint8_t {
    constant,
    parameter,
    add,
    sub,
    mul,
    scale,   // a * aux
    offset,  // a + aux
    tanh,
    power,   // a ^ aux
    reciprocal,
    block_output,
};

class Tape {
public:
    explicit Tape(std::size_t param_count) : param_count_(param_count) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::size_t param_count() const { return param_count_; }
    std::size_t size() const { return nodes_.size(); }

    Var constant(double v);
    Var parameter(std::size_t k, double v);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double c);
    Var offset(Var a, double c);
    Var tanh(Var a);
    Var power(Var a, double p);
    Var reciprocal(Var a);

    // Records the block and returns a handle to its first output.
    // Output k lives at index first.index + k.
    Var push_block(std::unique_ptr<TapeBlock> block);

    double value(std::uint32_t index) const { return nodes_[index].value; }
    std::vector<double> values() const;

    // Recomputes every recorded value from the operation log.
    std::vector<double> replay();

    // d(result)/d(node) for every node (one reverse sweep), plus the
    // parameter gradient. The tape itself is not modified.
    struct Adjoints {
        std::vector<double> nodes;
        std::vector<double> params;
    };
    Adjoints reverse_sweep(Var result) const;

private:
    struct Node {
        double aux;
        std::uint32_t a;
        std::uint32_t b;
        Op op;
        double value;
    };
    struct BlockRecord {
        std::uint32_t first;
        std::uint32_t count;
        std::unique_ptr<TapeBlock> block;
    };

    Var push(Op op, std::uint32_t a, std::uint32_t b, double aux, double value);
    void check(Var v) const;

    std::size_t param_count_;
    std::vector<Node> nodes_;
    std::vector<BlockRecord> blocks_;
};

// Gradient of result with respect to every trainable parameter.
// Throws std::invalid_argument if result was not recorded on tape.
std::vector<double> param_grad(const Tape& tape, Var result);

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double c);
Var operator+(double c, Var a);
Var operator-(Var a, double c);
Var operator-(double c, Var a);
Var operator*(Var a, double c);
Var operator*(double c, Var a);
Var operator/(Var a, double c);
Var operator/(double c, Var a);
Var tanh(Var a);
Var pow(Var a, double p);
Var square(Var a);

}  // namespace stpinn
