#include "flowguess/latent_ops.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "flowguess/errors.hpp"
#include "flowguess/rng.hpp"
#include "flowguess/utf8.hpp"

namespace flowguess {

std::vector<std::string> interpolate(const FlowModel& model, std::string_view start, std::string_view target,
                                     int steps) {
    if (steps < 1) throw Error(ErrorCode::BadConfig, "interpolation needs at least one step");
    Matrix endpoints(2, model.dim());
    endpoints.row(0) = encode_password(start, model.charset(), model.dim()).transpose();
    endpoints.row(1) = encode_password(target, model.charset(), model.dim()).transpose();
    const Matrix z = flow_forward(model, endpoints).z;
    const RowVector delta = (z.row(1) - z.row(0)) / static_cast<double>(steps);

    Matrix path(steps + 1, model.dim());
    for (int j = 0; j <= steps; ++j) path.row(j) = z.row(0) + delta * static_cast<double>(j);
    const Matrix x = flow_inverse(model, path);

    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(steps) + 1);
    for (int j = 0; j <= steps; ++j) {
        out.push_back(decode_vector(std::span<const double>(x.row(j).data(), static_cast<std::size_t>(model.dim())),
                                    model.charset()));
    }
    return out;
}

std::vector<std::string> neighborhood(const FlowModel& model, std::string_view pivot, double sigma, std::size_t n,
                                      std::uint64_t seed, bool unique) {
    if (!(sigma > 0.0)) throw Error(ErrorCode::BadConfig, "sigma must be positive");
    const DataVector x = encode_password(pivot, model.charset(), model.dim());
    const LatentPoint center = encode_latent(model, x);

    std::vector<std::string> out;
    if (n == 0) return out;
    std::unordered_set<std::string> seen;
    if (unique) seen.emplace(pivot);

    const std::size_t cap = unique ? 20 * n : n;
    constexpr std::size_t kRound = 256;
    Rng rng = derive_stream(seed, {stream_tag::latent});
    std::normal_distribution<double> normal(0.0, 1.0);
    std::size_t drawn = 0;
    while (out.size() < n && drawn < cap) {
        const std::size_t rows = std::min(kRound, cap - drawn);
        Matrix z(static_cast<Eigen::Index>(rows), model.dim());
        for (Eigen::Index r = 0; r < z.rows(); ++r) {
            for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = center[c] + sigma * normal(rng);
        }
        const Matrix decoded = flow_inverse(model, z);
        for (Eigen::Index r = 0; r < decoded.rows() && out.size() < n; ++r) {
            ++drawn;
            std::string s = decode_vector(
                std::span<const double>(decoded.row(r).data(), static_cast<std::size_t>(model.dim())),
                model.charset());
            if (unique && !seen.insert(s).second) continue;
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    const std::u32string s = utf8::decode(a).value_or(std::u32string(a.begin(), a.end()));
    const std::u32string t = utf8::decode(b).value_or(std::u32string(b.begin(), b.end()));
    std::vector<std::size_t> prev(t.size() + 1), cur(t.size() + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= s.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= t.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (s[i - 1] == t[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[t.size()];
}

}  // namespace flowguess
