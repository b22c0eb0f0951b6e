#include "flowguess/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "flowguess/errors.hpp"
#include "flowguess/rng.hpp"

namespace flowguess {

void TrainConfig::validate() const {
    if (epochs < 0) throw Error(ErrorCode::BadConfig, "epochs must be >= 0");
    if (batch_size < 1) throw Error(ErrorCode::BadConfig, "batch size must be positive");
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::BadConfig, "learning rate must be positive");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
        throw Error(ErrorCode::BadConfig, "Adam betas must lie in (0, 1)");
    }
    if (!(adam_epsilon > 0.0)) throw Error(ErrorCode::BadConfig, "Adam epsilon must be positive");
    if (grad_clip_norm && !(*grad_clip_norm > 0.0)) {
        throw Error(ErrorCode::BadConfig, "gradient clip norm must be positive");
    }
    if (dequant_jitter < 0.0) throw Error(ErrorCode::BadConfig, "jitter must be >= 0");
}

FlowGradients FlowGradients::zeros_like(const FlowModel& model) {
    FlowGradients g;
    const NetShape shape = model.config().net_shape();
    g.layers.assign(model.layers().size(), {NetArrays::zeros(shape), NetArrays::zeros(shape)});
    return g;
}

double FlowGradients::squared_norm() const {
    double total = 0.0;
    for_each_array([&](std::span<const double> s) {
        for (double v : s) total += v * v;
    });
    return total;
}

FlowGradients& FlowGradients::operator*=(double factor) {
    for (auto& l : layers) {
        l.s_net *= factor;
        l.t_net *= factor;
    }
    return *this;
}

namespace {

struct LayerTape {
    Matrix input;
    Matrix exp_scale;  // exp(s) on transformed coordinates, 1 elsewhere
    NetTape s_tape;
    NetTape t_tape;
};

}  // namespace

LossAndGrads nll_loss_and_grads(const FlowModel& model, const Matrix& batch) {
    if (batch.rows() == 0) throw Error(ErrorCode::BadConfig, "empty batch");
    const auto n = static_cast<double>(batch.rows());
    const auto& layers = model.layers();

    std::vector<LayerTape> tapes;
    tapes.reserve(layers.size());
    Matrix h = batch;
    Vector logdet = Vector::Zero(batch.rows());
    for (const auto& layer : layers) {
        const RowVector& b = layer.mask.bits;
        const RowVector keep = RowVector::Ones(b.size()) - b;
        const Matrix masked = (h.array().rowwise() * b.array()).matrix();
        NetForward s = net_forward(layer.s_net, masked);
        NetForward t = net_forward(layer.t_net, masked);
        const Matrix log_scale = (s.output.array().rowwise() * keep.array()).matrix();
        const Matrix shift = (t.output.array().rowwise() * keep.array()).matrix();
        Matrix exp_scale = log_scale.array().exp().matrix();
        Matrix next = masked + ((h.array() * exp_scale.array() + shift.array()).rowwise() * keep.array()).matrix();
        logdet += log_scale.rowwise().sum();
        tapes.push_back({std::move(h), std::move(exp_scale), std::move(s.tape), std::move(t.tape)});
        h = std::move(next);
    }

    const double log_norm = 0.5 * static_cast<double>(batch.cols()) * std::log(2.0 * std::numbers::pi);
    const Vector nll = (0.5 * h.rowwise().squaredNorm()).array() + log_norm - logdet.array();
    LossAndGrads out;
    out.loss = nll.mean();
    if (!std::isfinite(out.loss)) throw Error(ErrorCode::NonFiniteLoss, "loss is not finite");

    // dL/dz = z / N; dL/dlogdet = -1 / N for every layer.
    Matrix g_y = h / n;
    const double g_logdet = -1.0 / n;
    out.grads.layers.resize(layers.size());
    for (std::size_t li = layers.size(); li-- > 0;) {
        const CouplingLayer& layer = layers[li];
        const LayerTape& tape = tapes[li];
        const RowVector& b = layer.mask.bits;
        const RowVector keep = RowVector::Ones(b.size()) - b;

        const Matrix g_scale =
            ((g_y.array() * tape.input.array() * tape.exp_scale.array() + g_logdet).rowwise() * keep.array())
                .matrix();
        const Matrix g_shift = (g_y.array().rowwise() * keep.array()).matrix();
        Matrix g_x = (g_y.array() * ((tape.exp_scale.array().rowwise() * keep.array()).rowwise() + b.array()))
                         .matrix();

        NetBackward sb = net_backward(layer.s_net, tape.s_tape, g_scale);
        NetBackward tb = net_backward(layer.t_net, tape.t_tape, g_shift);
        g_x += ((sb.dx + tb.dx).array().rowwise() * b.array()).matrix();
        out.grads.layers[li] = {std::move(sb.grad), std::move(tb.grad)};
        g_y = std::move(g_x);
    }
    return out;
}

double nll_loss(const FlowModel& model, const Matrix& data, Eigen::Index chunk) {
    if (data.rows() == 0) throw Error(ErrorCode::BadConfig, "empty data");
    double total = 0.0;
    for (Eigen::Index start = 0; start < data.rows(); start += chunk) {
        const Eigen::Index rows = std::min(chunk, data.rows() - start);
        total -= log_prob(model, Matrix(data.middleRows(start, rows))).sum();
    }
    return total / static_cast<double>(data.rows());
}

AdamState AdamState::zeros(std::size_t parameter_count) {
    return {std::vector<double>(parameter_count, 0.0), std::vector<double>(parameter_count, 0.0), 0};
}

namespace {

void adam_apply(std::span<double> params, std::span<const double> grads, AdamState& state, std::size_t offset,
                const TrainConfig& config) {
    const double b1 = config.adam_beta1;
    const double b2 = config.adam_beta2;
    const auto t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        double& m = state.first_moment[offset + i];
        double& v = state.second_moment[offset + i];
        const double g = grads[i];
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        params[i] -= config.learning_rate * (m / c1) / (std::sqrt(v / c2) + config.adam_epsilon);
    }
}

}  // namespace

void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state,
                 const TrainConfig& config) {
    if (params.size() != grads.size() || state.first_moment.size() != params.size()) {
        throw Error(ErrorCode::BadConfig, "Adam state does not match parameter count");
    }
    ++state.step;
    adam_apply(params, grads, state, 0, config);
}

void adam_step(FlowModel& model, const FlowGradients& grads, AdamState& state, const TrainConfig& config) {
    std::vector<std::span<double>> params;
    std::vector<std::span<const double>> g;
    model.for_each_array([&](std::span<double> s) { params.push_back(s); });
    grads.for_each_array([&](std::span<const double> s) { g.push_back(s); });
    if (params.size() != g.size() || state.first_moment.size() != model.parameter_count()) {
        throw Error(ErrorCode::BadConfig, "gradients do not match model");
    }
    ++state.step;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].size() != g[i].size()) throw Error(ErrorCode::BadConfig, "gradient shape mismatch");
        adam_apply(params[i], g[i], state, offset, config);
        offset += params[i].size();
    }
}

TrainResult train(FlowModel& model, const Matrix& data, const TrainConfig& config, const ProgressSink& progress) {
    config.validate();
    if (data.rows() == 0) throw Error(ErrorCode::EmptyCorpus, "no training data");
    if (config.dequant_jitter >= 0.5 / model.charset().size()) {
        throw Error(ErrorCode::BadConfig, "jitter must stay below half a lattice step");
    }

    TrainResult result;
    result.initial_loss = nll_loss(model, data);
    result.best_loss = result.initial_loss;

    FlowModel best = model;
    AdamState adam = AdamState::zeros(model.parameter_count());
    Rng shuffle_rng = derive_stream(config.seed, {stream_tag::shuffle});
    Rng jitter_rng = derive_stream(config.seed, {stream_tag::jitter});
    std::uniform_real_distribution<double> jitter(-config.dequant_jitter, config.dequant_jitter);

    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    auto fail = [&](const std::string& why) {
        model = best;
        model.mutable_info().loss_history = result.history;
        throw Error(ErrorCode::NonFiniteLoss, why);
    };

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        if (config.shuffle) std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t rows = std::min(order.size() - start, static_cast<std::size_t>(config.batch_size));
            Matrix batch(static_cast<Eigen::Index>(rows), data.cols());
            for (std::size_t r = 0; r < rows; ++r) batch.row(static_cast<Eigen::Index>(r)) = data.row(order[start + r]);
            if (config.dequant_jitter > 0.0) {
                for (Eigen::Index i = 0; i < batch.size(); ++i) batch.data()[i] += jitter(jitter_rng);
            }
            LossAndGrads lg;
            try {
                lg = nll_loss_and_grads(model, batch);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::NonFiniteLoss || e.code() == ErrorCode::NonFiniteActivation) {
                    fail("training diverged in epoch " + std::to_string(epoch) + ": " + e.what());
                }
                throw;
            }
            if (config.grad_clip_norm) {
                const double norm = std::sqrt(lg.grads.squared_norm());
                if (norm > *config.grad_clip_norm) lg.grads *= *config.grad_clip_norm / norm;
            }
            adam_step(model, lg.grads, adam, config);
            epoch_total += lg.loss * static_cast<double>(rows);
        }
        const double mean = epoch_total / static_cast<double>(order.size());
        if (!std::isfinite(mean)) fail("non-finite epoch loss in epoch " + std::to_string(epoch));
        result.history.push_back(mean);
        const bool improved = result.best_epoch == 0 || mean < result.best_loss;
        if (improved) {
            result.best_epoch = epoch;
            result.best_loss = mean;
            best = model;
        }
        if (progress) progress({epoch, mean, improved}, model);
    }

    if (result.best_epoch > 0) model = std::move(best);
    model.mutable_info().loss_history = result.history;
    return result;
}

TrainResult train(FlowModel& model, const std::vector<std::string>& corpus, const TrainConfig& config,
                  const ProgressSink& progress) {
    if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "no training data");
    return train(model, encode_batch(corpus, model.charset(), model.dim()), config, progress);
}

}  // namespace flowguess
