#include "flowguess/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "flowguess/digest.hpp"
#include "flowguess/errors.hpp"

namespace flowguess {

MembershipOracle MembershipOracle::plaintext(const std::vector<std::string>& passwords) {
    MembershipOracle o;
    o.kind_ = Kind::Plaintext;
    o.entries_.insert(passwords.begin(), passwords.end());
    return o;
}

MembershipOracle MembershipOracle::sha256_digests(const std::vector<std::string>& hex_digests) {
    MembershipOracle o;
    o.kind_ = Kind::Sha256;
    for (const auto& h : hex_digests) {
        const bool ok = h.size() == 64 && std::all_of(h.begin(), h.end(), [](char c) {
            return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
        });
        if (!ok) throw Error(ErrorCode::UnsupportedDigest, "expected lowercase hex SHA-256, got '" + h + "'");
        o.entries_.insert(h);
    }
    return o;
}

MembershipOracle MembershipOracle::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::OracleUnavailable, "cannot open target file " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(std::move(line));
    }
    if (in.bad()) throw Error(ErrorCode::OracleUnavailable, "read failed on " + path.string());

    constexpr std::string_view digest_prefix = "digest:";
    if (!lines.empty() && lines.front().starts_with(digest_prefix)) {
        std::string alg = lines.front().substr(digest_prefix.size());
        alg.erase(0, alg.find_first_not_of(" \t"));
        alg.erase(alg.find_last_not_of(" \t") + 1);
        if (alg != "sha256") throw Error(ErrorCode::UnsupportedDigest, "unsupported digest '" + alg + "'");
        lines.erase(lines.begin());
        return sha256_digests(lines);
    }
    return plaintext(lines);
}

bool MembershipOracle::contains(std::string_view candidate) const {
    switch (kind_) {
    case Kind::Empty: return false;
    case Kind::Plaintext: return entries_.contains(std::string(candidate));
    case Kind::Sha256: return entries_.contains(sha256_hex(candidate));
    }
    return false;
}

SeenSet::SeenSet(std::size_t exact_capacity, std::size_t expected_overflow)
    : exact_capacity_(exact_capacity), expected_overflow_(std::max<std::size_t>(expected_overflow, 1024)) {}

namespace {

std::uint64_t mix(std::uint64_t x) {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return x;
}

}  // namespace

std::uint64_t SeenSet::probe(std::uint64_t h1, std::uint64_t h2, unsigned k) const {
    return (h1 + k * h2) % (bits_.size() * 64);
}

void SeenSet::bloom_add(std::string_view s) {
    const std::uint64_t h = std::hash<std::string_view>{}(s);
    const std::uint64_t h1 = mix(h);
    const std::uint64_t h2 = mix(h ^ 0x9e3779b97f4a7c15ULL) | 1;
    for (unsigned k = 0; k < hashes_; ++k) {
        const std::uint64_t bit = probe(h1, h2, k);
        bits_[bit / 64] |= std::uint64_t{1} << (bit % 64);
    }
}

bool SeenSet::bloom_test(std::string_view s) const {
    const std::uint64_t h = std::hash<std::string_view>{}(s);
    const std::uint64_t h1 = mix(h);
    const std::uint64_t h2 = mix(h ^ 0x9e3779b97f4a7c15ULL) | 1;
    for (unsigned k = 0; k < hashes_; ++k) {
        const std::uint64_t bit = probe(h1, h2, k);
        if (!(bits_[bit / 64] & (std::uint64_t{1} << (bit % 64)))) return false;
    }
    return true;
}

bool SeenSet::contains(std::string_view s) const {
    if (exact_.contains(std::string(s))) return true;
    return !bits_.empty() && bloom_test(s);
}

bool SeenSet::insert(std::string_view s) {
    if (contains(s)) return false;
    if (exact_.size() < exact_capacity_) {
        exact_.emplace(s);
    } else {
        if (bits_.empty()) {
            // ~14.4 bits per element and 10 hashes give a 1e-3 false-positive rate.
            const auto nbits = static_cast<std::size_t>(std::ceil(14.4 * static_cast<double>(expected_overflow_)));
            bits_.assign((nbits + 63) / 64, 0);
        }
        bloom_add(s);
    }
    ++count_;
    return true;
}

}  // namespace flowguess
