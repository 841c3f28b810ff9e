#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dac/matrix.hpp"

namespace dac {

/// Fully connected network: ReLU hidden layers, identity (logit) output.
struct MlpModel {
    std::vector<std::size_t> layer_dims;      // input, hidden..., output
    std::vector<Matrix> weights;              // weights[l]: dims[l] x dims[l+1]
    std::vector<std::vector<double>> biases;  // biases[l]: dims[l+1]

    std::size_t input_dim() const { return layer_dims.front(); }
    std::size_t output_dim() const { return layer_dims.back(); }
    std::size_t n_layers() const { return weights.size(); }
    std::size_t param_count() const;

    bool operator==(const MlpModel&) const = default;
};

/// He-style initialization: W ~ N(0, sqrt(2 / fan_in)), biases zero. The RNG
/// stream consumption order (layer by layer, row-major) is part of the
/// deterministic contract.
MlpModel mlp_new(std::vector<std::size_t> layer_dims, std::uint64_t seed);

/// Batch forward pass; returns logits (batch rows x output_dim).
Matrix forward(const MlpModel& m, const Matrix& batch);

/// Intermediate values captured for the backward pass.
struct ForwardTrace {
    std::vector<Matrix> pre;  // pre-activation of each hidden layer
    std::vector<Matrix> act;  // act[0] = input, act[l] = activation after hidden layer l
};

Matrix forward_traced(const MlpModel& m, const Matrix& batch, ForwardTrace& trace);

struct Gradients {
    std::vector<Matrix> dw;
    std::vector<std::vector<double>> db;
};

/// Backpropagates d(loss)/d(logits) to parameter gradients.
Gradients backward(const MlpModel& m, const ForwardTrace& trace, const Matrix& logit_grad);

/// Convenience overload that recomputes the forward trace from the batch.
Gradients backward(const MlpModel& m, const Matrix& batch, const Matrix& logit_grad);

/// SGD with momentum, decoupled-style L2 added to the gradient, optional
/// Nesterov lookahead:
///     g' = g + weight_decay * w
///     v  = momentum * v + g'
///     w -= lr * (g' + momentum * v)        (Nesterov)
///     w -= lr * v                          (classic)
struct OptimizerState {
    double momentum = 0.9;
    double weight_decay = 5e-4;
    bool nesterov = true;
    std::vector<Matrix> vel_w;
    std::vector<std::vector<double>> vel_b;

    bool operator==(const OptimizerState&) const = default;
};

OptimizerState optimizer_new(const MlpModel& m, double momentum, double weight_decay,
                             bool nesterov);

/// One update step. Throws NumericError on non-finite gradients or if any
/// parameter leaves the finite range.
void sgd_step(MlpModel& m, OptimizerState& opt, const Gradients& g, double lr);

/// Step-decay learning rate: the initial rate is multiplied by anneal_factor
/// once for every anneal epoch <= the current epoch.
struct LrSchedule {
    double initial_lr = 0.1;
    std::vector<int> anneal_epochs{60, 120, 160};
    double anneal_factor = 0.5;
};

double lr_at(const LrSchedule& s, int epoch);

/// Model + optimizer state + epoch counter, round-tripping bit-exactly
/// through the versioned binary checkpoint format.
struct Checkpoint {
    MlpModel model;
    OptimizerState opt;
    std::int32_t epoch = 0;

    bool operator==(const Checkpoint&) const = default;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dac
