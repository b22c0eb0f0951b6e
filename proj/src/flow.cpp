#include "flowguess/flow.hpp"

#include <charconv>
#include <cmath>
#include <numbers>

#include "flowguess/errors.hpp"
#include "flowguess/rng.hpp"

namespace flowguess {

MaskSpec MaskSpec::parse(std::string_view text) {
    if (text == "horizontal") return {MaskKind::Horizontal, 0};
    constexpr std::string_view prefix = "char-run:";
    if (text.starts_with(prefix)) {
        const std::string_view digits = text.substr(prefix.size());
        int run = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), run);
        if (ec == std::errc() && ptr == digits.data() + digits.size() && run >= 1) {
            return {MaskKind::CharRun, run};
        }
    }
    throw Error(ErrorCode::BadMaskSpec, "unknown mask '" + std::string(text) + "'");
}

std::string MaskSpec::to_string() const {
    return kind == MaskKind::Horizontal ? std::string("horizontal") : "char-run:" + std::to_string(run);
}

BinaryMask BinaryMask::complement() const {
    return {spec, (RowVector::Ones(bits.size()) - bits).eval()};
}

std::string BinaryMask::to_string() const {
    std::string s;
    for (Eigen::Index i = 0; i < bits.size(); ++i) s.push_back(bits[i] > 0.5 ? '1' : '0');
    return s;
}

BinaryMask make_mask(const MaskSpec& spec, int dim) {
    if (dim < 2) throw Error(ErrorCode::BadMaskSpec, "mask dimension must be at least 2");
    BinaryMask mask{spec, RowVector::Zero(dim)};
    if (spec.kind == MaskKind::Horizontal) {
        for (int i = dim / 2; i < dim; ++i) mask.bits[i] = 1.0;
    } else {
        if (spec.run < 1 || spec.run >= dim) {
            throw Error(ErrorCode::BadMaskSpec, "char-run length must satisfy 1 <= m < D");
        }
        for (int i = 0; i < dim; ++i) mask.bits[i] = (i / spec.run) % 2 == 1 ? 1.0 : 0.0;
    }
    return mask;
}

namespace {

struct CouplingTerms {
    Matrix masked;    // b * x
    Matrix log_scale; // s(b * x) restricted to the transformed coordinates
    Matrix shift;     // t(b * x) restricted to the transformed coordinates
};

CouplingTerms coupling_terms(const CouplingLayer& layer, const Matrix& input) {
    const RowVector& b = layer.mask.bits;
    const RowVector keep = RowVector::Ones(b.size()) - b;
    CouplingTerms terms;
    terms.masked = (input.array().rowwise() * b.array()).matrix();
    terms.log_scale = (net_apply(layer.s_net, terms.masked).array().rowwise() * keep.array()).matrix();
    terms.shift = (net_apply(layer.t_net, terms.masked).array().rowwise() * keep.array()).matrix();
    return terms;
}

void check_finite(const Matrix& m, const char* where) {
    if (!m.allFinite()) {
        throw Error(ErrorCode::NonFiniteActivation, std::string("non-finite values in ") + where);
    }
}

}  // namespace

CouplingResult coupling_forward(const CouplingLayer& layer, const Matrix& x) {
    const CouplingTerms terms = coupling_terms(layer, x);
    const RowVector keep = RowVector::Ones(layer.mask.bits.size()) - layer.mask.bits;
    CouplingResult r;
    // log_scale is 0 on pass-through coordinates, so exp() leaves them at 1.
    r.y = terms.masked + ((x.array() * terms.log_scale.array().exp() + terms.shift.array()).rowwise() *
                          keep.array()).matrix();
    r.logdet = terms.log_scale.rowwise().sum();
    check_finite(r.y, "coupling forward");
    return r;
}

Matrix coupling_inverse(const CouplingLayer& layer, const Matrix& y) {
    const CouplingTerms terms = coupling_terms(layer, y);
    const RowVector keep = RowVector::Ones(layer.mask.bits.size()) - layer.mask.bits;
    Matrix x = terms.masked + (((y - terms.shift).array() * (-terms.log_scale.array()).exp()).rowwise() *
                               keep.array()).matrix();
    check_finite(x, "coupling inverse");
    return x;
}

std::size_t FlowConfig::parameter_count() const {
    return static_cast<std::size_t>(layers) * 2 * net_shape().parameter_count();
}

void FlowConfig::validate() const {
    if (dim < 2) throw Error(ErrorCode::BadConfig, "dimension must be at least 2");
    if (layers < 2) throw Error(ErrorCode::BadConfig, "a flow needs at least 2 coupling layers");
    if (hidden < 1 || blocks < 0) throw Error(ErrorCode::BadConfig, "hidden width must be positive");
    if (!(scale_bound > 0.0)) throw Error(ErrorCode::BadConfig, "scale bound must be positive or inf");
    (void)make_mask(mask, dim);
}

FlowModel FlowModel::create(const FlowConfig& config, const Charset& charset, std::uint64_t seed) {
    config.validate();
    const BinaryMask base = make_mask(config.mask, config.dim);
    std::vector<CouplingLayer> layers;
    layers.reserve(static_cast<std::size_t>(config.layers));
    for (int i = 0; i < config.layers; ++i) {
        Rng seeder = derive_stream(seed, {stream_tag::init, static_cast<std::uint64_t>(i)});
        const std::uint64_t s_seed = seeder();
        const std::uint64_t t_seed = seeder();
        layers.push_back({i % 2 == 0 ? base : base.complement(),
                          init_params(s_seed, config.net_shape(), OutputKind::Scale, config.scale_bound),
                          init_params(t_seed, config.net_shape(), OutputKind::Translation, config.scale_bound)});
    }
    return from_layers(config, charset, std::move(layers));
}

FlowModel FlowModel::from_layers(const FlowConfig& config, const Charset& charset,
                                 std::vector<CouplingLayer> layers, ModelInfo info) {
    if (layers.empty()) throw Error(ErrorCode::BadConfig, "a flow needs at least one coupling layer");
    const NetShape shape = config.net_shape();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const CouplingLayer& l = layers[i];
        if (l.mask.dim() != config.dim || !(l.s_net.shape() == shape) || !(l.t_net.shape() == shape) ||
            l.s_net.kind != OutputKind::Scale || l.t_net.kind != OutputKind::Translation) {
            throw Error(ErrorCode::BadConfig, "coupling layer " + std::to_string(i) + " does not match config");
        }
        if (i > 0 && !l.mask.bits.isApprox(layers[i - 1].mask.complement().bits)) {
            throw Error(ErrorCode::BadMaskSpec, "consecutive layers must use complementary masks");
        }
    }
    FlowModel m;
    m.config_ = config;
    m.config_.layers = static_cast<int>(layers.size());
    m.charset_ = charset;
    m.layers_ = std::move(layers);
    m.info_ = std::move(info);
    return m;
}

std::size_t FlowModel::parameter_count() const { return config_.parameter_count(); }

FlowResult flow_forward(const FlowModel& model, const Matrix& x) {
    FlowResult r{x, Vector::Zero(x.rows())};
    for (const auto& layer : model.layers()) {
        CouplingResult c = coupling_forward(layer, r.z);
        r.z = std::move(c.y);
        r.logdet += c.logdet;
    }
    return r;
}

Matrix flow_inverse(const FlowModel& model, const Matrix& z) {
    Matrix x = z;
    const auto& layers = model.layers();
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) x = coupling_inverse(*it, x);
    return x;
}

Vector standard_normal_log_density(const Matrix& z) {
    const double norm = 0.5 * static_cast<double>(z.cols()) * std::log(2.0 * std::numbers::pi);
    return (-0.5 * z.rowwise().squaredNorm()).array() - norm;
}

Vector log_prob(const FlowModel& model, const Matrix& x) {
    const FlowResult r = flow_forward(model, x);
    return standard_normal_log_density(r.z) + r.logdet;
}

double log_prob(const FlowModel& model, const DataVector& x) {
    return log_prob(model, Matrix(x.transpose()))[0];
}

LatentPoint encode_latent(const FlowModel& model, const DataVector& x) {
    return flow_forward(model, Matrix(x.transpose())).z.row(0).transpose();
}

DataVector decode_latent(const FlowModel& model, const LatentPoint& z) {
    return flow_inverse(model, Matrix(z.transpose())).row(0).transpose();
}

}  // namespace flowguess
