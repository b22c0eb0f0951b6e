#include "flowguess/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "flowguess/digest.hpp"
#include "flowguess/errors.hpp"
#include "flowguess/utf8.hpp"

namespace flowguess {

namespace {

constexpr std::string_view kMagic = "FLOWGCKP";
constexpr std::size_t kDigestSize = 32;

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(std::string_view in) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(in[static_cast<std::size_t>(i)]);
    return v;
}

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

double parse_double(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::CorruptPayload, "bad number '" + s + "' in checkpoint header");
    }
    return v;
}

long long parse_int(const std::string& s) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::CorruptPayload, "bad integer '" + s + "' in checkpoint header");
    }
    return v;
}

// Metadata values may not contain line breaks; they are escaped on write.
std::string escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '\\') out += "\\\\";
        else if (c == '\n') out += "\\n";
        else if (c == '\r') out += "\\r";
        else out.push_back(c);
    }
    return out;
}

std::string unescape(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            const char n = s[++i];
            out.push_back(n == 'n' ? '\n' : n == 'r' ? '\r' : n);
        } else {
            out.push_back(s[i]);
        }
    }
    return out;
}

std::string build_header(const FlowModel& model) {
    const FlowConfig& c = model.config();
    std::ostringstream h;
    h << "format_version=" << kCheckpointVersion << '\n';
    h << "dim=" << c.dim << '\n';
    h << "charset_digest=" << model.charset_digest() << '\n';
    h << "charset_hex=" << utf8::to_hex(model.charset().printable_utf8()) << '\n';
    h << "layers=" << model.layers().size() << '\n';
    h << "mask=" << c.mask.to_string() << '\n';
    h << "first_mask_bits=" << model.layers().front().mask.to_string() << '\n';
    h << "hidden=" << c.hidden << '\n';
    h << "blocks=" << c.blocks << '\n';
    h << "scale_bound=" << format_double(c.scale_bound) << '\n';
    h << "parameter_count=" << model.parameter_count() << '\n';
    std::string history;
    for (std::size_t i = 0; i < model.info().loss_history.size(); ++i) {
        if (i) history.push_back(',');
        history += format_double(model.info().loss_history[i]);
    }
    h << "loss_history=" << history << '\n';
    for (const auto& [k, v] : model.info().metadata) h << "meta." << escape(k) << '=' << escape(v) << '\n';
    return h.str();
}

std::map<std::string, std::string> parse_header(std::string_view text) {
    std::map<std::string, std::string> kv;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) throw Error(ErrorCode::CorruptPayload, "malformed checkpoint header");
        kv[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
    }
    return kv;
}

const std::string& require(const std::map<std::string, std::string>& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorCode::CorruptPayload, "checkpoint header lacks '" + key + "'");
    return it->second;
}

}  // namespace

std::string serialize_checkpoint(const FlowModel& model) {
    const std::string header = build_header(model);
    std::string out;
    out.reserve(kMagic.size() + 8 + header.size() + 8 * model.parameter_count() + kDigestSize);
    out.append(kMagic);
    put_u64(out, header.size());
    out += header;
    model.for_each_array([&](std::span<const double> s) {
        for (double v : s) put_u64(out, std::bit_cast<std::uint64_t>(v));
    });
    const Sha256 digest = sha256(out);
    out.append(reinterpret_cast<const char*>(digest.data()), digest.size());
    return out;
}

FlowModel deserialize_checkpoint(const std::string& bytes) {
    const std::string_view all(bytes);
    if (all.size() < kMagic.size() + 8 || all.substr(0, kMagic.size()) != kMagic) {
        throw Error(ErrorCode::CorruptPayload, "not a flowguess checkpoint");
    }
    const std::uint64_t header_len = get_u64(all.substr(kMagic.size(), 8));
    const std::size_t header_start = kMagic.size() + 8;
    if (header_len > all.size() - header_start) throw Error(ErrorCode::CorruptPayload, "truncated header");
    const auto kv = parse_header(all.substr(header_start, header_len));

    const long long version = parse_int(require(kv, "format_version"));
    if (version != kCheckpointVersion) {
        throw Error(ErrorCode::VersionMismatch, "unsupported checkpoint version " + std::to_string(version));
    }

    FlowConfig config;
    config.dim = static_cast<int>(parse_int(require(kv, "dim")));
    config.layers = static_cast<int>(parse_int(require(kv, "layers")));
    config.hidden = static_cast<int>(parse_int(require(kv, "hidden")));
    config.blocks = static_cast<int>(parse_int(require(kv, "blocks")));
    config.scale_bound = parse_double(require(kv, "scale_bound"));
    if (config.dim < 2 || config.layers < 1 || config.hidden < 1 || config.blocks < 0 || config.dim > 4096 ||
        config.hidden > (1 << 16) || config.layers > 4096 || config.blocks > 4096) {
        throw Error(ErrorCode::CorruptPayload, "implausible model dimensions in header");
    }
    try {
        config.mask = MaskSpec::parse(require(kv, "mask"));
    } catch (const Error&) {
        throw Error(ErrorCode::CorruptPayload, "bad mask in checkpoint header");
    }

    const std::size_t count = config.parameter_count();
    const std::size_t payload_start = header_start + header_len;
    if (all.size() != payload_start + 8 * count + kDigestSize) {
        throw Error(ErrorCode::CorruptPayload, "payload length does not match header");
    }
    const std::string_view covered = all.substr(0, payload_start + 8 * count);
    const Sha256 digest = sha256(covered);
    if (std::memcmp(digest.data(), all.data() + covered.size(), kDigestSize) != 0) {
        throw Error(ErrorCode::CorruptPayload, "checkpoint digest mismatch");
    }
    if (parse_int(require(kv, "parameter_count")) != static_cast<long long>(count)) {
        throw Error(ErrorCode::CorruptPayload, "parameter count does not match dimensions");
    }

    const auto charset_bytes = utf8::from_hex(require(kv, "charset_hex"));
    if (!charset_bytes) throw Error(ErrorCode::CorruptPayload, "bad charset encoding");
    const Charset charset = Charset::from_utf8(*charset_bytes);
    if (charset.digest() != require(kv, "charset_digest")) {
        throw Error(ErrorCode::CorruptPayload, "charset digest does not match charset");
    }

    ModelInfo info;
    const std::string& history = require(kv, "loss_history");
    std::size_t pos = 0;
    while (pos < history.size()) {
        std::size_t end = history.find(',', pos);
        if (end == std::string::npos) end = history.size();
        info.loss_history.push_back(parse_double(history.substr(pos, end - pos)));
        pos = end + 1;
    }
    for (const auto& [k, v] : kv) {
        if (k.starts_with("meta.")) info.metadata[unescape(k.substr(5))] = unescape(v);
    }

    BinaryMask first = make_mask(config.mask, config.dim);
    if (first.to_string() != require(kv, "first_mask_bits")) {
        throw Error(ErrorCode::CorruptPayload, "mask schedule does not match mask kind");
    }
    std::vector<CouplingLayer> layers;
    const NetShape shape = config.net_shape();
    for (int i = 0; i < config.layers; ++i) {
        layers.push_back({i % 2 == 0 ? first : first.complement(),
                          {NetArrays::zeros(shape), OutputKind::Scale, config.scale_bound},
                          {NetArrays::zeros(shape), OutputKind::Translation, config.scale_bound}});
    }
    FlowModel model = FlowModel::from_layers(config, charset, std::move(layers), std::move(info));
    std::size_t offset = payload_start;
    model.for_each_array([&](std::span<double> s) {
        for (double& v : s) {
            v = std::bit_cast<double>(get_u64(all.substr(offset, 8)));
            offset += 8;
        }
    });
    return model;
}

void save_checkpoint(const FlowModel& model, const std::filesystem::path& path) {
    const std::string bytes = serialize_checkpoint(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed on " + path.string());
}

FlowModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open checkpoint " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw Error(ErrorCode::IoError, "read failed on " + path.string());
    return deserialize_checkpoint(buf.str());
}

void require_charset(const FlowModel& model, const Charset& charset) {
    if (model.charset_digest() != charset.digest()) {
        throw Error(ErrorCode::CharsetMismatch, "model charset " + model.charset_digest().substr(0, 12) +
                                                    " differs from " + charset.digest().substr(0, 12));
    }
}

}  // namespace flowguess
