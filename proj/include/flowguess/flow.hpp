#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flowguess/encoding.hpp"
#include "flowguess/resnet.hpp"
#include "flowguess/types.hpp"

namespace flowguess {

enum class MaskKind { Horizontal, CharRun };

struct MaskSpec {
    MaskKind kind = MaskKind::CharRun;
    int run = 1;  // only meaningful for CharRun

    // "horizontal", "char-run:1", "char-run:2", ...
    static MaskSpec parse(std::string_view text);
    std::string to_string() const;
    bool operator==(const MaskSpec&) const = default;
};

struct BinaryMask {
    MaskSpec spec;
    RowVector bits;  // 0/1 entries; 1 marks pass-through coordinates

    int dim() const { return static_cast<int>(bits.size()); }
    BinaryMask complement() const;
    std::string to_string() const;  // e.g. "0101010101"
};

// Horizontal: floor(D/2) zeros then ones. CharRun(m): runs of m zeros and m
// ones starting with zeros; the final run is truncated when m does not divide D.
BinaryMask make_mask(const MaskSpec& spec, int dim);

struct CouplingLayer {
    BinaryMask mask;
    ResidualNetParams s_net;
    ResidualNetParams t_net;
};

struct CouplingResult {
    Matrix y;
    Vector logdet;  // one entry per row
};

CouplingResult coupling_forward(const CouplingLayer& layer, const Matrix& x);
Matrix coupling_inverse(const CouplingLayer& layer, const Matrix& y);

struct FlowConfig {
    int dim = kDefaultMaxLength;
    int layers = 18;
    MaskSpec mask{MaskKind::CharRun, 1};
    int hidden = 256;
    int blocks = 2;
    double scale_bound = kDefaultScaleBound;

    NetShape net_shape() const { return {dim, hidden, blocks}; }
    // Exact number of doubles in a model with this configuration.
    std::size_t parameter_count() const;
    void validate() const;
};

// Free-form provenance carried through checkpoints unchanged.
struct ModelInfo {
    std::map<std::string, std::string> metadata;
    std::vector<double> loss_history;
};

// f: data space -> latent space, a stack of affine couplings with alternating
// masks under a fixed N(0, I) prior.
class FlowModel {
public:
    // Layer i uses make_mask(config.mask) when i is even and its complement otherwise.
    // Every layer starts as the identity map.
    static FlowModel create(const FlowConfig& config, const Charset& charset, std::uint64_t seed);
    // Assembles a model from explicit layers (checkpoint loading, tests). Checks
    // shapes and mask alternation; allows a single layer.
    static FlowModel from_layers(const FlowConfig& config, const Charset& charset,
                                 std::vector<CouplingLayer> layers, ModelInfo info = {});

    const FlowConfig& config() const noexcept { return config_; }
    int dim() const noexcept { return config_.dim; }
    const Charset& charset() const noexcept { return charset_; }
    const std::string& charset_digest() const noexcept { return charset_.digest(); }

    const std::vector<CouplingLayer>& layers() const noexcept { return layers_; }
    std::vector<CouplingLayer>& mutable_layers() noexcept { return layers_; }

    const ModelInfo& info() const noexcept { return info_; }
    ModelInfo& mutable_info() noexcept { return info_; }

    std::size_t parameter_count() const;

    // Every parameter array in checkpoint order: layers in flow order, s-net
    // before t-net, each net in its own serialization order.
    template <class F>
    void for_each_array(F&& f) {
        for (auto& l : layers_) {
            l.s_net.arrays.for_each_array(f);
            l.t_net.arrays.for_each_array(f);
        }
    }
    template <class F>
    void for_each_array(F&& f) const {
        for (const auto& l : layers_) {
            l.s_net.arrays.for_each_array(f);
            l.t_net.arrays.for_each_array(f);
        }
    }

private:
    FlowConfig config_;
    Charset charset_ = Charset::canonical();
    std::vector<CouplingLayer> layers_;
    ModelInfo info_;
};

struct FlowResult {
    Matrix z;
    Vector logdet;
};

FlowResult flow_forward(const FlowModel& model, const Matrix& x);
Matrix flow_inverse(const FlowModel& model, const Matrix& z);

// log N(z; 0, I) for each row.
Vector standard_normal_log_density(const Matrix& z);
Vector log_prob(const FlowModel& model, const Matrix& x);
double log_prob(const FlowModel& model, const DataVector& x);

LatentPoint encode_latent(const FlowModel& model, const DataVector& x);
DataVector decode_latent(const FlowModel& model, const LatentPoint& z);

}  // namespace flowguess
