#include "flowguess/resnet.hpp"

#include <cmath>
#include <string>

#include "flowguess/errors.hpp"
#include "flowguess/rng.hpp"

namespace flowguess {

std::size_t NetShape::parameter_count() const noexcept {
    const auto d = static_cast<std::size_t>(dim);
    const auto h = static_cast<std::size_t>(hidden);
    return (d * h + h) + static_cast<std::size_t>(blocks) * 2 * (h * h + h) + (h * d + d);
}

namespace {

DenseLayer zero_layer(int out, int in) { return {Matrix::Zero(out, in), Vector::Zero(out)}; }

Matrix affine(const DenseLayer& layer, const Matrix& x) {
    Matrix y = x * layer.weight.transpose();
    y.rowwise() += layer.bias.transpose();
    return y;
}

void accumulate(DenseLayer& grad, const Matrix& g_out, const Matrix& layer_input) {
    grad.weight.noalias() += g_out.transpose() * layer_input;
    grad.bias.noalias() += g_out.colwise().sum().transpose();
}

void add_layer(DenseLayer& a, const DenseLayer& b) {
    a.weight += b.weight;
    a.bias += b.bias;
}

void check_finite(const Matrix& m, const char* where) {
    if (!m.allFinite()) {
        throw Error(ErrorCode::NonFiniteActivation, std::string("non-finite activation in ") + where);
    }
}

}  // namespace

NetArrays NetArrays::zeros(const NetShape& shape) {
    NetArrays a;
    a.input = zero_layer(shape.hidden, shape.dim);
    a.blocks.resize(static_cast<std::size_t>(shape.blocks));
    for (auto& b : a.blocks) {
        b.first = zero_layer(shape.hidden, shape.hidden);
        b.second = zero_layer(shape.hidden, shape.hidden);
    }
    a.output = zero_layer(shape.dim, shape.hidden);
    return a;
}

NetShape NetArrays::shape() const {
    return {static_cast<int>(input.weight.cols()), static_cast<int>(input.weight.rows()),
            static_cast<int>(blocks.size())};
}

NetArrays& NetArrays::operator+=(const NetArrays& other) {
    add_layer(input, other.input);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        add_layer(blocks[i].first, other.blocks[i].first);
        add_layer(blocks[i].second, other.blocks[i].second);
    }
    add_layer(output, other.output);
    return *this;
}

NetArrays& NetArrays::operator*=(double factor) {
    for_each_array([&](std::span<double> s) {
        for (double& v : s) v *= factor;
    });
    return *this;
}

bool ResidualNetParams::bounded() const noexcept {
    return kind == OutputKind::Scale && std::isfinite(scale_bound);
}

NetForward net_forward(const ResidualNetParams& params, const Matrix& x) {
    const NetArrays& p = params.arrays;
    NetForward fwd;
    NetTape& tape = fwd.tape;
    tape.shape = p.shape();
    tape.input = x;
    tape.hidden.reserve(p.blocks.size() + 1);
    tape.inner.reserve(p.blocks.size());

    tape.hidden.push_back(affine(p.input, x));
    for (const auto& block : p.blocks) {
        const Matrix& h = tape.hidden.back();
        tape.inner.push_back(affine(block.first, h).cwiseMax(0.0));
        Matrix r = h + affine(block.second, tape.inner.back());
        tape.hidden.push_back(r.cwiseMax(0.0));
    }
    Matrix pre = affine(p.output, tape.hidden.back());
    if (params.bounded()) {
        tape.squashed = pre.array().tanh().matrix();
        fwd.output = params.scale_bound * tape.squashed;
    } else {
        fwd.output = std::move(pre);
    }
    check_finite(fwd.output, "residual net");
    return fwd;
}

Matrix net_apply(const ResidualNetParams& params, const Matrix& x) {
    const NetArrays& p = params.arrays;
    Matrix h = affine(p.input, x);
    for (const auto& block : p.blocks) {
        Matrix inner = affine(block.first, h).cwiseMax(0.0);
        h = (h + affine(block.second, inner)).cwiseMax(0.0);
    }
    Matrix y = affine(p.output, h);
    if (params.bounded()) y = params.scale_bound * y.array().tanh().matrix();
    check_finite(y, "residual net");
    return y;
}

NetBackward net_backward(const ResidualNetParams& params, const NetTape& tape, const Matrix& upstream) {
    const NetArrays& p = params.arrays;
    const NetShape shape = p.shape();
    if (!(tape.shape == shape) || tape.hidden.size() != p.blocks.size() + 1 ||
        upstream.rows() != tape.input.rows() || upstream.cols() != shape.dim ||
        (params.bounded() && tape.squashed.rows() != upstream.rows())) {
        throw Error(ErrorCode::TapeMismatch, "tape does not belong to these parameters");
    }

    NetBackward out{NetArrays::zeros(shape), Matrix()};
    NetArrays& g = out.grad;

    Matrix g_pre;
    if (params.bounded()) {
        // d/dpre [c tanh(pre)] = c (1 - tanh^2)
        g_pre = (upstream.array() * params.scale_bound * (1.0 - tape.squashed.array().square())).matrix();
    } else {
        g_pre = upstream;
    }
    accumulate(g.output, g_pre, tape.hidden.back());
    Matrix g_h = g_pre * p.output.weight;

    for (std::size_t k = p.blocks.size(); k-- > 0;) {
        const ResidualBlock& block = p.blocks[k];
        const Matrix& h_in = tape.hidden[k];
        const Matrix& h_out = tape.hidden[k + 1];
        const Matrix& inner = tape.inner[k];

        Matrix g_r = (g_h.array() * (h_out.array() > 0.0).cast<double>()).matrix();
        accumulate(g.blocks[k].second, g_r, inner);
        Matrix g_inner = g_r * block.second.weight;
        g_inner.array() *= (inner.array() > 0.0).cast<double>();
        accumulate(g.blocks[k].first, g_inner, h_in);
        g_h = g_r + g_inner * block.first.weight;
    }
    accumulate(g.input, g_h, tape.input);
    out.dx = g_h * p.input.weight;
    return out;
}

ResidualNetParams init_params(std::uint64_t seed, const NetShape& shape, OutputKind kind, double scale_bound) {
    if (shape.dim < 1 || shape.hidden < 1 || shape.blocks < 0) {
        throw Error(ErrorCode::BadConfig, "network dimensions must be positive");
    }
    ResidualNetParams params{NetArrays::zeros(shape), kind, scale_bound};
    Rng rng = derive_stream(seed, {stream_tag::init});
    auto fill = [&](Matrix& w) {
        std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(w.cols())));
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
    };
    fill(params.arrays.input.weight);
    for (auto& b : params.arrays.blocks) {
        fill(b.first.weight);
        fill(b.second.weight);
    }
    return params;
}

}  // namespace flowguess
