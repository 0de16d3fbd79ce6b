#pragma once

// Fully connected tanh network with jet-aware evaluation.
//
// Inputs are first mapped affinely from [input_lo, input_hi] onto [-1, 1]
// (a fixed, non-trainable normalization), then pass through hidden_layers
// tanh layers of hidden_width units and a final affine output layer.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "stpinn/jet.hpp"
#include "stpinn/tape.hpp"

namespace stpinn {

enum class Activation { tanh };

struct MlpSpec {
    int input_dim = 2;
    int hidden_layers = 4;
    int hidden_width = 32;
    int output_dim = 1;
    Activation activation = Activation::tanh;
    std::vector<double> input_lo;  // empty means 0 for every input
    std::vector<double> input_hi;  // empty means 1 for every input

    bool operator==(const MlpSpec&) const = default;
};

// Throws std::invalid_argument with a readable message on a bad spec.
void validate(const MlpSpec& spec);

// Flat parameter layout: for each layer in order, the weight matrix
// (fan_out x fan_in, row-major) followed by its bias vector.
class ParamLayout {
public:
    explicit ParamLayout(const MlpSpec& spec);

    std::size_t layer_count() const { return fan_in_.size(); }
    int fan_in(std::size_t layer) const { return fan_in_[layer]; }
    int fan_out(std::size_t layer) const { return fan_out_[layer]; }
    std::size_t weight_offset(std::size_t layer) const { return weight_offset_[layer]; }
    std::size_t bias_offset(std::size_t layer) const {
        return weight_offset_[layer] +
               static_cast<std::size_t>(fan_in_[layer]) * static_cast<std::size_t>(fan_out_[layer]);
    }
    std::size_t weight_index(std::size_t layer, int row, int col) const {
        return weight_offset_[layer] + static_cast<std::size_t>(row) * fan_in_[layer] + col;
    }
    std::size_t bias_index(std::size_t layer, int row) const { return bias_offset(layer) + row; }
    std::size_t size() const { return size_; }

private:
    std::vector<int> fan_in_;
    std::vector<int> fan_out_;
    std::vector<std::size_t> weight_offset_;
    std::size_t size_ = 0;
};

std::size_t param_count(const MlpSpec& spec);

using ParamVector = std::vector<double>;

struct LayerParams {
    int fan_in = 0;
    int fan_out = 0;
    std::vector<double> weights;  // fan_out x fan_in, row-major
    std::vector<double> bias;

    bool operator==(const LayerParams&) const = default;
};

std::vector<LayerParams> unflatten(const MlpSpec& spec, std::span<const double> params);
ParamVector flatten(const std::vector<LayerParams>& layers);

// Glorot-uniform weights, zero biases. Deterministic in seed.
ParamVector init_params(const MlpSpec& spec, std::uint64_t seed);

// Network output at one input point.
std::vector<double> forward(std::span<const double> params, const MlpSpec& spec,
                            std::span<const double> input);

// Values for a batch of points stored point-major (n x input_dim).
// Result is point-major (n x output_dim).
std::vector<double> forward_batch(std::span<const double> params, const MlpSpec& spec,
                                  std::span<const double> points);

// Output jets (value, input gradient, input Hessian) without a tape.
// Result holds n * output_dim jets, point-major.
std::vector<Jet2> evaluate_jets(std::span<const double> params, const MlpSpec& spec,
                                std::span<const double> points);

using TapeJet = JetOf<Var>;

// Output jets recorded on tape; every component is differentiable with
// respect to the parameters. tape.param_count() must equal param_count(spec).
std::vector<TapeJet> forward_jet(std::span<const double> params, const MlpSpec& spec,
                                 std::span<const double> input, Tape& tape);
std::vector<TapeJet> forward_jet_batch(std::span<const double> params, const MlpSpec& spec,
                                       std::span<const double> points, Tape& tape);

// Output values only, recorded on tape.
std::vector<Var> forward_batch_on_tape(std::span<const double> params, const MlpSpec& spec,
                                       std::span<const double> points, Tape& tape);

// Checkpoint file: "stpinn-ckpt v1", key=value spec lines, "---", then the
// parameters as little-endian float64.
struct Checkpoint {
    MlpSpec spec;
    ParamVector params;
};

void write_checkpoint(const std::filesystem::path& path, const MlpSpec& spec,
                      std::span<const double> params);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace stpinn
