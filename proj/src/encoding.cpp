#include "flowguess/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "flowguess/digest.hpp"
#include "flowguess/errors.hpp"
#include "flowguess/utf8.hpp"

namespace flowguess {

Charset Charset::canonical() {
    std::u32string printable;
    for (char32_t c = 0x20; c <= 0x7E; ++c) printable.push_back(c);
    return from_symbols(printable);
}

Charset Charset::from_symbols(std::u32string_view printable) {
    if (printable.empty()) {
        throw Error(ErrorCode::BadConfig, "charset needs at least one printable symbol");
    }
    Charset cs;
    cs.ascii_.fill(-1);
    cs.symbols_.push_back(U'\0');
    for (char32_t c : printable) {
        if (c == U'\0' || c == U'\n' || c == U'\r') {
            throw Error(ErrorCode::BadConfig, "charset may not contain NUL, CR or LF");
        }
        if (cs.index_of(c) >= 0) {
            throw Error(ErrorCode::BadConfig, "charset symbols must be distinct");
        }
        const int idx = static_cast<int>(cs.symbols_.size());
        cs.symbols_.push_back(c);
        if (c < 128) {
            cs.ascii_[c] = idx;
        } else {
            cs.other_.emplace(c, idx);
        }
    }
    cs.digest_ = sha256_hex(cs.printable_utf8());
    return cs;
}

Charset Charset::from_utf8(std::string_view printable) {
    auto decoded = utf8::decode(printable);
    if (!decoded) throw Error(ErrorCode::BadConfig, "charset is not valid UTF-8");
    return from_symbols(*decoded);
}

int Charset::index_of(char32_t c) const noexcept {
    if (c < 128) return c == U'\0' ? -1 : ascii_[c];
    auto it = other_.find(c);
    return it == other_.end() ? -1 : it->second;
}

std::string Charset::printable_utf8() const {
    return utf8::encode(std::u32string_view(symbols_).substr(1));
}

namespace {

// Writes the encoding of `password` into `out` (length dim).
void encode_into(std::string_view password, const Charset& cs, std::span<double> out) {
    const auto decoded = utf8::decode(password);
    if (!decoded) {
        throw Error(ErrorCode::CharOutOfAlphabet, "password is not valid UTF-8");
    }
    if (decoded->size() > out.size()) {
        throw Error(ErrorCode::TooLong, "password longer than " + std::to_string(out.size()) + " characters");
    }
    const double n = cs.size();
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < decoded->size(); ++i) {
        const int idx = cs.index_of((*decoded)[i]);
        if (idx < 0) {
            throw Error(ErrorCode::CharOutOfAlphabet,
                        "character at position " + std::to_string(i) + " is not in the alphabet");
        }
        out[i] = idx / n;
    }
}

}  // namespace

DataVector encode_password(std::string_view password, const Charset& cs, int dim) {
    DataVector v(dim);
    encode_into(password, cs, std::span<double>(v.data(), static_cast<std::size_t>(dim)));
    return v;
}

Matrix encode_batch(const std::vector<std::string>& passwords, const Charset& cs, int dim) {
    Matrix m(static_cast<Eigen::Index>(passwords.size()), dim);
    for (std::size_t i = 0; i < passwords.size(); ++i) {
        encode_into(passwords[i], cs,
                    std::span<double>(m.row(static_cast<Eigen::Index>(i)).data(), static_cast<std::size_t>(dim)));
    }
    return m;
}

std::string decode_vector(std::span<const double> values, const Charset& cs) {
    const int n = cs.size();
    const double upper = 1.0 - 0.5 / n;
    std::string out;
    for (double v : values) {
        if (std::isnan(v)) break;
        const double clamped = std::clamp(v, 0.0, upper);
        const int idx = std::clamp(static_cast<int>(std::lround(clamped * n)), 0, n - 1);
        if (idx == Charset::pad_index()) break;
        utf8::append(out, cs.symbol(idx));
    }
    return out;
}

std::string decode_vector(const DataVector& values, const Charset& cs) {
    return decode_vector(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())), cs);
}

std::string SkipReport::summary() const {
    std::ostringstream os;
    os << "too_long=" << too_long << " bad_char=" << bad_char << " empty=" << empty
       << " duplicate=" << duplicate;
    return os.str();
}

Corpus filter_corpus(const std::vector<std::string>& lines, const Charset& cs, int dim, bool dedupe) {
    Corpus corpus;
    std::unordered_set<std::string> seen;
    for (std::string line : lines) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            ++corpus.skipped.empty;
            continue;
        }
        const auto decoded = utf8::decode(line);
        if (!decoded) {
            ++corpus.skipped.bad_char;
            continue;
        }
        if (decoded->size() > static_cast<std::size_t>(dim)) {
            ++corpus.skipped.too_long;
            continue;
        }
        if (std::any_of(decoded->begin(), decoded->end(), [&](char32_t c) { return cs.index_of(c) < 0; })) {
            ++corpus.skipped.bad_char;
            continue;
        }
        if (dedupe && !seen.insert(line).second) {
            ++corpus.skipped.duplicate;
            continue;
        }
        corpus.passwords.push_back(std::move(line));
    }
    if (corpus.passwords.empty()) {
        throw Error(ErrorCode::EmptyCorpus, "corpus has no usable lines (" + corpus.skipped.summary() + ")");
    }
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, const Charset& cs, int dim, bool dedupe) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open corpus " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(std::move(line));
    if (in.bad()) throw Error(ErrorCode::IoError, "read failed on " + path.string());
    return filter_corpus(lines, cs, dim, dedupe);
}

}  // namespace flowguess
