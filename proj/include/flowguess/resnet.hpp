#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "flowguess/types.hpp"

namespace flowguess {

enum class OutputKind { Scale, Translation };

inline constexpr double kDefaultScaleBound = 2.0;
inline constexpr double kUnboundedScale = std::numeric_limits<double>::infinity();

struct DenseLayer {
    Matrix weight;  // out x in
    Vector bias;    // out
};

struct ResidualBlock {
    DenseLayer first;
    DenseLayer second;
};

struct NetShape {
    int dim = 10;
    int hidden = 256;
    int blocks = 2;

    std::size_t parameter_count() const noexcept;
    bool operator==(const NetShape&) const = default;
};

// The parameter arrays of one residual network: dim -> hidden -> blocks -> dim.
// Gradients share the same layout, so this type doubles as the gradient bundle.
struct NetArrays {
    DenseLayer input;
    std::vector<ResidualBlock> blocks;
    DenseLayer output;

    static NetArrays zeros(const NetShape& shape);
    NetShape shape() const;
    std::size_t parameter_count() const { return shape().parameter_count(); }

    // Visits every array in serialization order: input weight (row-major), input
    // bias, then per block (W1, b1, W2, b2), then output weight and bias.
    template <class F>
    void for_each_array(F&& f) {
        auto visit = [&](DenseLayer& l) {
            f(std::span<double>(l.weight.data(), static_cast<std::size_t>(l.weight.size())));
            f(std::span<double>(l.bias.data(), static_cast<std::size_t>(l.bias.size())));
        };
        visit(input);
        for (auto& b : blocks) {
            visit(b.first);
            visit(b.second);
        }
        visit(output);
    }
    template <class F>
    void for_each_array(F&& f) const {
        auto visit = [&](const DenseLayer& l) {
            f(std::span<const double>(l.weight.data(), static_cast<std::size_t>(l.weight.size())));
            f(std::span<const double>(l.bias.data(), static_cast<std::size_t>(l.bias.size())));
        };
        visit(input);
        for (const auto& b : blocks) {
            visit(b.first);
            visit(b.second);
        }
        visit(output);
    }

    NetArrays& operator+=(const NetArrays& other);
    NetArrays& operator*=(double factor);
};

using GradientBundle = NetArrays;

struct ResidualNetParams {
    NetArrays arrays;
    OutputKind kind = OutputKind::Translation;
    // Scale nets emit bound * tanh(pre); a non-finite bound disables the squashing.
    double scale_bound = kDefaultScaleBound;

    NetShape shape() const { return arrays.shape(); }
    bool bounded() const noexcept;
};

// Intermediates of one batched forward pass, one row per example.
struct NetTape {
    NetShape shape;
    Matrix input;
    std::vector<Matrix> hidden;  // h0 (input projection), then each block output
    std::vector<Matrix> inner;   // relu(W1 h + b1) per block
    Matrix squashed;             // tanh(pre) for bounded scale nets, empty otherwise
};

struct NetForward {
    Matrix output;
    NetTape tape;
};

struct NetBackward {
    GradientBundle grad;
    Matrix dx;
};

// Rows of `x` are independent examples.
NetForward net_forward(const ResidualNetParams& params, const Matrix& x);
// Forward without recording a tape.
Matrix net_apply(const ResidualNetParams& params, const Matrix& x);
// Gradients of sum(upstream .* y) w.r.t. parameters and inputs, summed over the batch.
NetBackward net_backward(const ResidualNetParams& params, const NetTape& tape, const Matrix& upstream);

// He-style normal weights on hidden layers; the output projection starts at
// exactly zero so the network outputs 0 for every input.
ResidualNetParams init_params(std::uint64_t seed, const NetShape& shape, OutputKind kind,
                              double scale_bound = kDefaultScaleBound);

}  // namespace flowguess
