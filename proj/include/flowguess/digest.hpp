#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace flowguess {

using Sha256 = std::array<std::uint8_t, 32>;

Sha256 sha256(std::string_view bytes);
std::string sha256_hex(std::string_view bytes);

// Incremental hashing for checkpoint payloads.
class Sha256Stream {
public:
    Sha256Stream();
    ~Sha256Stream();
    Sha256Stream(const Sha256Stream&) = delete;
    Sha256Stream& operator=(const Sha256Stream&) = delete;

    void update(std::string_view bytes);
    Sha256 finish();

private:
    void* ctx_;
};

}  // namespace flowguess
