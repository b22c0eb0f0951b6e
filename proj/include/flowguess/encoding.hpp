#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "flowguess/types.hpp"

namespace flowguess {

inline constexpr int kDefaultMaxLength = 10;

// Ordered symbol table. Index 0 is the padding symbol and never appears in a
// password; indices 1.. are the printable alphabet in the given order.
class Charset {
public:
    // Printable ASCII 0x20..0x7E in code-point order after the pad (96 symbols).
    static Charset canonical();
    static Charset from_symbols(std::u32string_view printable);
    static Charset from_utf8(std::string_view printable);

    int size() const noexcept { return static_cast<int>(symbols_.size()); }
    static constexpr int pad_index() noexcept { return 0; }

    // -1 when the character is not part of the alphabet.
    int index_of(char32_t c) const noexcept;
    char32_t symbol(int index) const { return symbols_.at(static_cast<std::size_t>(index)); }

    // Printable symbols (pad excluded), UTF-8 encoded.
    std::string printable_utf8() const;
    // Hex SHA-256 of printable_utf8(); identifies the alphabet in checkpoints.
    const std::string& digest() const noexcept { return digest_; }

    bool operator==(const Charset& other) const { return symbols_ == other.symbols_; }

private:
    Charset() = default;

    std::u32string symbols_;
    std::array<int, 128> ascii_{};
    std::unordered_map<char32_t, int> other_;
    std::string digest_;
};

DataVector encode_password(std::string_view password, const Charset& cs, int dim = kDefaultMaxLength);
// One encoded password per row.
Matrix encode_batch(const std::vector<std::string>& passwords, const Charset& cs, int dim = kDefaultMaxLength);

// Nearest-lattice-point decoding; total over all real inputs.
std::string decode_vector(std::span<const double> values, const Charset& cs);
std::string decode_vector(const DataVector& values, const Charset& cs);

struct SkipReport {
    std::size_t too_long = 0;
    std::size_t bad_char = 0;
    std::size_t empty = 0;
    std::size_t duplicate = 0;

    std::size_t total() const noexcept { return too_long + bad_char + empty + duplicate; }
    std::string summary() const;
};

struct Corpus {
    std::vector<std::string> passwords;
    SkipReport skipped;
};

Corpus load_corpus(const std::filesystem::path& path, const Charset& cs, int dim = kDefaultMaxLength,
                   bool dedupe = false);

// Same filtering rules as load_corpus applied to in-memory lines.
Corpus filter_corpus(const std::vector<std::string>& lines, const Charset& cs, int dim = kDefaultMaxLength,
                     bool dedupe = false);

}  // namespace flowguess
