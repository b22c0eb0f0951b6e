#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowguess/flow.hpp"
#include "flowguess/resnet.hpp"
#include "flowguess/types.hpp"

namespace flowguess {

struct TrainConfig {
    int epochs = 400;
    int batch_size = 512;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;
    bool shuffle = true;
    std::optional<double> grad_clip_norm;
    // Symmetric uniform noise added to training vectors; must stay below half a
    // lattice step so a jittered vector still decodes to its password.
    double dequant_jitter = 0.0;

    void validate() const;
};

struct LayerGradients {
    GradientBundle s_net;
    GradientBundle t_net;
};

struct FlowGradients {
    std::vector<LayerGradients> layers;

    static FlowGradients zeros_like(const FlowModel& model);

    template <class F>
    void for_each_array(F&& f) const {
        for (const auto& l : layers) {
            l.s_net.for_each_array(f);
            l.t_net.for_each_array(f);
        }
    }
    template <class F>
    void for_each_array(F&& f) {
        for (auto& l : layers) {
            l.s_net.for_each_array(f);
            l.t_net.for_each_array(f);
        }
    }

    double squared_norm() const;
    FlowGradients& operator*=(double factor);
};

struct LossAndGrads {
    double loss = 0.0;
    FlowGradients grads;
};

// Mean negative log-likelihood of the rows of `batch` and its exact gradient.
LossAndGrads nll_loss_and_grads(const FlowModel& model, const Matrix& batch);
// Mean negative log-likelihood only; evaluated in chunks of `chunk` rows.
double nll_loss(const FlowModel& model, const Matrix& data, Eigen::Index chunk = 4096);

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step = 0;

    static AdamState zeros(std::size_t parameter_count);
};

// Bias-corrected Adam on flat arrays. Advances state.step by one.
void adam_update(std::span<double> params, std::span<const double> grads, AdamState& state,
                 const TrainConfig& config);
void adam_step(FlowModel& model, const FlowGradients& grads, AdamState& state, const TrainConfig& config);

struct EpochStats {
    int epoch = 0;  // 1-based
    double mean_loss = 0.0;
    bool improved = false;
};

// Called after every epoch with the live (not best) model.
using ProgressSink = std::function<void(const EpochStats&, const FlowModel&)>;

struct TrainResult {
    double initial_loss = 0.0;
    std::vector<double> history;  // mean loss per epoch
    int best_epoch = 0;           // 0 when no epoch ran
    double best_loss = 0.0;
};

// Trains in place. On return the model holds the parameters of the epoch with
// the lowest mean training loss. On divergence the model is restored to that
// snapshot (or to its input state) and Error(NonFiniteLoss) is thrown.
TrainResult train(FlowModel& model, const Matrix& data, const TrainConfig& config,
                  const ProgressSink& progress = {});
TrainResult train(FlowModel& model, const std::vector<std::string>& corpus, const TrainConfig& config,
                  const ProgressSink& progress = {});

}  // namespace flowguess
