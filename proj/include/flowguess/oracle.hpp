#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace flowguess {

// Answers "is this guess one of the targets". Targets are either plaintext
// passwords or SHA-256 digests of their UTF-8 bytes.
class MembershipOracle {
public:
    enum class Kind { Empty, Plaintext, Sha256 };

    MembershipOracle() = default;
    static MembershipOracle plaintext(const std::vector<std::string>& passwords);
    static MembershipOracle sha256_digests(const std::vector<std::string>& hex_digests);
    // Plaintext file, or a digest file whose first line is "digest: sha256".
    static MembershipOracle from_file(const std::filesystem::path& path);

    Kind kind() const noexcept { return kind_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool contains(std::string_view candidate) const;

private:
    Kind kind_ = Kind::Empty;
    std::unordered_set<std::string> entries_;
};

// Set of strings already emitted. Exact up to `exact_capacity` entries, then an
// approximate Bloom filter whose false-positive rate stays near 1e-3.
class SeenSet {
public:
    explicit SeenSet(std::size_t exact_capacity = std::size_t{1} << 27,
                     std::size_t expected_overflow = std::size_t{1} << 24);

    bool contains(std::string_view s) const;
    // Returns true when `s` was not present before.
    bool insert(std::string_view s);
    std::size_t size() const noexcept { return count_; }
    bool approximate() const noexcept { return !bits_.empty(); }

private:
    std::uint64_t probe(std::uint64_t h1, std::uint64_t h2, unsigned k) const;
    void bloom_add(std::string_view s);
    bool bloom_test(std::string_view s) const;

    std::size_t exact_capacity_;
    std::size_t expected_overflow_;
    std::unordered_set<std::string> exact_;
    std::vector<std::uint64_t> bits_;
    unsigned hashes_ = 10;
    std::size_t count_ = 0;
};

}  // namespace flowguess
